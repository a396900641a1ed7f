"""Fourth-order exponential time differencing with an exact diagonal linear part.

The scheme is the standard ETD Runge-Kutta of Cox-Matthews with the
coefficient functions evaluated by complex contour averaging
(Kassam-Trefethen), which stays accurate through the removable
singularity at z = 0.  Because the averaging is done on the full complex
circle, purely dispersive (imaginary) symbols are handled without the
real-part truncation used for dissipative problems.  Channels with a
zero symbol reduce exactly to classical RK4, which lets modulation ODEs
ride along in the same state vector.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

NonlinearRHS = Callable[[np.ndarray, float], np.ndarray]


@dataclass
class ETDRK4Stepper:
    symbol: np.ndarray  # diagonal linear symbol L, one entry per channel
    h: float            # signed step
    rhs: NonlinearRHS   # nonstiff part N(state, t), same layout as state
    contour_points: int = 32

    def __post_init__(self) -> None:
        z = self.h * np.asarray(self.symbol, dtype=np.complex128)
        self.exp_full = np.exp(z)
        self.exp_half = np.exp(0.5 * z)
        theta = np.exp(2j * np.pi * (np.arange(self.contour_points) + 0.5) / self.contour_points)
        zr = z[:, None] + theta[None, :]
        ezr = np.exp(zr)
        self.stage_coeff = self.h * np.mean((np.exp(0.5 * zr) - 1.0) / zr, axis=1)
        self.w1 = self.h * np.mean((-4.0 - zr + ezr * (4.0 - 3.0 * zr + zr**2)) / zr**3, axis=1)
        self.w2 = self.h * np.mean((2.0 + zr + ezr * (zr - 2.0)) / zr**3, axis=1)
        self.w3 = self.h * np.mean((-4.0 - 3.0 * zr - zr**2 + ezr * (4.0 - zr)) / zr**3, axis=1)

    def step(self, state: np.ndarray, t: float) -> np.ndarray:
        h = self.h
        n0 = self.rhs(state, t)
        a = self.exp_half * state + self.stage_coeff * n0
        n1 = self.rhs(a, t + 0.5 * h)
        b = self.exp_half * state + self.stage_coeff * n1
        n2 = self.rhs(b, t + 0.5 * h)
        c = self.exp_half * a + self.stage_coeff * (2.0 * n2 - n0)
        n3 = self.rhs(c, t + h)
        return self.exp_full * state + self.w1 * n0 + 2.0 * self.w2 * (n1 + n2) + self.w3 * n3


def pad_spectrum(hat: np.ndarray, m: int) -> np.ndarray:
    """Zero-pad FFT-layout coefficients from n to m >= n modes."""
    n = hat.shape[0]
    out = np.zeros(m, dtype=np.complex128)
    half = n // 2
    out[:half] = hat[:half]
    out[m - half:] = hat[half:]
    # split the Nyquist coefficient symmetrically so padded samples stay real
    nyq = hat[half]
    out[half] = 0.5 * nyq
    out[m - half] = 0.5 * np.conj(nyq)
    return out


def truncate_spectrum(hat: np.ndarray, n: int) -> np.ndarray:
    """Drop coefficients above the target band, inverse of pad_spectrum."""
    m = hat.shape[0]
    out = np.zeros(n, dtype=np.complex128)
    half = n // 2
    out[:half] = hat[:half]
    out[half + 1:] = hat[m - half + 1:]
    out[half] = hat[half] + hat[m - half]
    return out


def dealiased_product_hat(hats: list[np.ndarray], n: int, pad_factor: int) -> np.ndarray:
    """FFT coefficients of the pointwise product, alias-free via zero padding.

    A product of k band-limited factors is alias-free once the working
    band is at least (k+1)/2 times the original; the callers pass 2 for
    quadratic and 4 for quartic products.
    """
    m = pad_factor * n
    scale = m / n
    phys = [np.fft.ifft(pad_spectrum(h, m)) * scale for h in hats]
    prod = phys[0]
    for p in phys[1:]:
        prod = prod * p
    return truncate_spectrum(np.fft.fft(prod), n) / scale


def dealiased_power_hat(hat: np.ndarray, power: int, pad_factor: int) -> np.ndarray:
    m = pad_factor * hat.shape[0]
    scale = m / hat.shape[0]
    phys = np.fft.ifft(pad_spectrum(hat, m)).real * scale
    return truncate_spectrum(np.fft.fft(phys**power), hat.shape[0]) / scale

"""The quartic traveling-wave family and its exact scalar identities.

The profile, its space derivative and its scale derivatives are all
evaluated from closed forms so that identity tests are not polluted by
interpolation or finite-difference error.  The nonlinearity power is
fixed at 4; the few formulas stated generically keep that power as a
local variable for readability only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import Field, GridSpec, derivative, inner_product, l2_norm

P_POWER = 4


@dataclass(frozen=True)
class SolitonParams:
    """Scale c > 0 and center y of one traveling wave; power fixed at 4."""

    c: float = 1.0
    y: float = 0.0
    p: int = P_POWER

    def __post_init__(self) -> None:
        if self.p != P_POWER:
            raise ValueError(f"only the quartic nonlinearity is supported, got p={self.p}")
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ValueError(f"scale c must be positive, got {self.c}")

    @property
    def speed(self) -> float:
        return self.c**2


_AMP = 2.5 ** (1.0 / 3.0)  # peak height at c=1


def _sech(z: np.ndarray) -> np.ndarray:
    # overflow-safe: sech(z) = 2 e^{-|z|} / (1 + e^{-2|z|})
    a = np.exp(-np.abs(z))
    return 2.0 * a / (1.0 + a * a)


def profile(params: SolitonParams, grid: GridSpec) -> Field:
    """Q_{c,y}(x) = c^(2/3) (5/2)^(1/3) sech^(2/3)((3/2) c (x-y))."""
    z = 1.5 * params.c * (grid.x - params.y)
    return Field(grid, params.c ** (2.0 / 3.0) * _AMP * _sech(z) ** (2.0 / 3.0))


def profile_derivative(params: SolitonParams, grid: GridSpec) -> Field:
    """Closed-form d/dx of the profile."""
    z = 1.5 * params.c * (grid.x - params.y)
    s = _sech(z)
    vals = -params.c ** (5.0 / 3.0) * _AMP * s ** (2.0 / 3.0) * np.tanh(z)
    return Field(grid, vals)


def profile_second_derivative(params: SolitonParams, grid: GridSpec) -> Field:
    """d^2/dx^2 of the profile, via the profile equation Q'' = c^2 Q - Q^4."""
    q = profile(params, grid).values
    return Field(grid, params.c**2 * q - q**4)


def profile_third_derivative(params: SolitonParams, grid: GridSpec) -> Field:
    """d^3/dx^3 via differentiating the profile equation: Q''' = c^2 Q' - 4 Q^3 Q'."""
    q = profile(params, grid).values
    qp = profile_derivative(params, grid).values
    return Field(grid, (params.c**2 - 4.0 * q**3) * qp)


def tilde_profile(params: SolitonParams, grid: GridSpec) -> Field:
    """Scale derivative c d/dc of the family: (2/3) Q + (x-y) Q'."""
    rel = grid.x - params.y
    q = profile(params, grid).values
    qp = profile_derivative(params, grid).values
    return Field(grid, (2.0 / 3.0) * q + rel * qp)


def tilde_profile_derivative(params: SolitonParams, grid: GridSpec) -> Field:
    """d/dx of the scale derivative: (5/3) Q' + (x-y) Q''."""
    rel = grid.x - params.y
    qp = profile_derivative(params, grid).values
    qpp = profile_second_derivative(params, grid).values
    return Field(grid, (5.0 / 3.0) * qp + rel * qpp)


def tilde_profile_second_derivative(params: SolitonParams, grid: GridSpec) -> Field:
    """d^2/dx^2 of the scale derivative: (8/3) Q'' + (x-y) Q'''."""
    rel = grid.x - params.y
    qpp = profile_second_derivative(params, grid).values
    qppp = profile_third_derivative(params, grid).values
    return Field(grid, (8.0 / 3.0) * qpp + rel * qppp)


def tilde_tilde_profile(params: SolitonParams, grid: GridSpec) -> Field:
    """Second scale derivative (c d/dc)^2: (2/3) Qt + (x-y) Qt'."""
    rel = grid.x - params.y
    qt = tilde_profile(params, grid).values
    qtp = tilde_profile_derivative(params, grid).values
    return Field(grid, (2.0 / 3.0) * qt + rel * qtp)


def mass_formula(c: float = 1.0) -> float:
    """Closed form of the squared L^2 norm of the profile at scale c.

    (5/2)^(2/3) * Gamma(5/3) * sqrt(pi) / Gamma(7/6), scaled by c^(1/3).
    """
    base = 2.5 ** (2.0 / 3.0) * math.gamma(5.0 / 3.0) * math.sqrt(math.pi) / math.gamma(7.0 / 6.0)
    return c ** (1.0 / 3.0) * base


def mass_numeric(grid: GridSpec, params: SolitonParams | None = None) -> float:
    """Squared L^2 norm of the sampled profile by quadrature."""
    params = params or SolitonParams()
    q = profile(params, grid)
    return inner_product(q, q)


def euler_lagrange_residual(params: SolitonParams, grid: GridSpec) -> float:
    """L^2 norm of Q'' - c^2 Q + Q^4 with Q'' taken spectrally."""
    q = profile(params, grid)
    qxx = derivative(q, 2)
    return l2_norm(Field(grid, qxx.values - params.c**2 * q.values + q.values**4))

"""Virial weight diagnostics for the adjoint linearized flow.

The weight eta = (5/3) tanh(3(x-y)/2) has derivative exactly Q^3, which
turns the time derivative of I_eta(v) = -int eta v^2 into a sum of
squares after substituting w = v sqrt(eta').  The closed-form weight
identities below are exercised pointwise by the acceptance suite; the
assembled potential of the sum-of-squares form is 75/4 - 12 Q^3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import soliton
from .grid import Field, GridSpec, derivative, inner_product
from .schrodinger import LinearizedOperator, apply as apply_operator
from .soliton import SolitonParams


def eta_weight(grid: GridSpec, y: float = 0.0) -> Field:
    """(5/3) tanh(3(x-y)/2), the bounded odd multiplier of the virial functional."""
    return Field(grid, (5.0 / 3.0) * np.tanh(1.5 * (grid.x - y)))


def eta_identity_defects(grid: GridSpec, y: float = 0.0) -> dict[str, float]:
    """Max pointwise defect of the closed-form weight identities.

    eta' = Q^3
    (eta''/eta')^2 = 9 (1 - (2/5) Q^3)
    eta'''/eta'    = 9 (1 - (3/5) Q^3)
    eta^2          = (25/9) (1 - (2/5) Q^3)
    (Q^3 eta)'     = -5 Q^3 + 3 Q^6

    All derivatives on the left sides are evaluated in closed form from
    tanh/sech calculus; the spectral route is cross-checked in tests.
    """
    params = SolitonParams(c=1.0, y=y)
    q = soliton.profile(params, grid).values
    q3 = q**3
    z = 1.5 * (grid.x - y)
    th = np.tanh(z)
    sech2 = 1.0 / np.cosh(z) ** 2

    eta = (5.0 / 3.0) * th
    eta_p = 2.5 * sech2
    eta_pp = -7.5 * sech2 * th
    eta_ppp = 11.25 * sech2 * (2.0 - 3.0 * sech2)

    # (Q^3 eta)' = eta (Q^3)' + Q^3 eta' collapses to (25/4) sech^2 (3 sech^2 - 2)
    flux_lhs = -12.5 * sech2 * th**2 + 6.25 * sech2**2
    return {
        "eta_prime_q3": float(np.max(np.abs(eta_p - q3))),
        "ratio_second_sq": float(np.max(np.abs((eta_pp / eta_p) ** 2 - 9.0 * (1.0 - 0.4 * q3)))),
        "ratio_third": float(np.max(np.abs(eta_ppp / eta_p - 9.0 * (1.0 - 0.6 * q3)))),
        "eta_squared": float(np.max(np.abs(eta**2 - (25.0 / 9.0) * (1.0 - 0.4 * q3)))),
        "flux_product": float(np.max(np.abs(flux_lhs - (-5.0 * q3 + 3.0 * q3**2)))),
    }


def assembled_potential(grid: GridSpec, y: float = 0.0) -> tuple[Field, float]:
    """A = 1 + eta'''/(2 eta') - (3/4)(eta''/eta')^2 - 4 (Q^3 eta)'/eta'.

    Returns the assembled field and its max defect against 75/4 - 12 Q^3.
    """
    params = SolitonParams(c=1.0, y=y)
    q3 = soliton.profile(params, grid).values ** 3
    z = 1.5 * (grid.x - y)
    th = np.tanh(z)
    sech2 = 1.0 / np.cosh(z) ** 2
    eta = (5.0 / 3.0) * th
    eta_p = 2.5 * sech2
    eta_pp = -7.5 * sech2 * th
    eta_ppp = 11.25 * sech2 * (2.0 - 3.0 * sech2)
    flux = -5.0 * q3 + 3.0 * q3**2  # (Q^3 eta)' in closed form
    a_vals = 1.0 + 0.5 * eta_ppp / eta_p - 0.75 * (eta_pp / eta_p) ** 2 - 4.0 * flux / eta_p
    defect = float(np.max(np.abs(a_vals - (75.0 / 4.0 - 12.0 * q3))))
    return Field(grid, a_vals), defect


def virial_functional(v: Field, y: float = 0.0) -> float:
    """I_eta(v) = -int eta v^2 dx."""
    eta = eta_weight(v.grid, y)
    return -float(v.grid.dx * np.sum(eta.values * v.values**2))


def virial_rate(v: Field, op: LinearizedOperator | None = None, time_reversed: bool = False) -> float:
    """Instantaneous d/dt I_eta(v) along the v-flow.

    With the default convention v_t = -L(v_x) the rate is +2 int eta v L(v_x),
    which equals minus the dissipation functional below; the time-reversed
    flow flips the sign.
    """
    op = op or LinearizedOperator(SolitonParams(), v.grid)
    eta = eta_weight(v.grid, op.params.y)
    lvx = apply_operator(op, derivative(v, 1))
    rate = 2.0 * float(v.grid.dx * np.sum(eta.values * v.values * lvx.values))
    return -rate if time_reversed else rate


def virial_dissipation(v: Field, y: float = 0.0) -> float:
    """The sum-of-squares form 3 int (d/dx w)^2 + int A w^2, w = v sqrt(eta').

    Equals -d/dt I_eta(v) for the default v-flow; nonnegative because it
    coincides with 3 [<L w, w> + (21/4) ||w||^2] and -21/4 is the bottom
    of the operator's spectrum.
    """
    grid = v.grid
    params = SolitonParams(c=1.0, y=y)
    q = soliton.profile(params, grid).values
    w = Field(grid, v.values * q**1.5)
    wx = derivative(w, 1)
    a_field, _ = assembled_potential(grid, y)
    return float(grid.dx * np.sum(3.0 * wx.values**2 + a_field.values * w.values**2))


def dissipation_via_spectrum(v: Field, op: LinearizedOperator) -> float:
    """Spectral-form evaluation 3 [<L w, w> + (21/4)||w||^2]; oracle route."""
    q = soliton.profile(op.params, v.grid).values
    w = Field(v.grid, v.values * q**1.5)
    lw = apply_operator(op, w)
    return 3.0 * (inner_product(lw, w) + 5.25 * inner_product(w, w))

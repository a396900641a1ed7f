"""Numerical laboratory for the quartic generalized KdV equation.

Periodic pseudospectral discretization of the traveling-wave family, the
linearized operator and its adjoint pair of flows, the moving-frame
modulation decomposition, and the space-time diagnostics (virial,
weighted smoothing, band-wise and variation norms) used to probe soliton
stability and scattering at desk scale.
"""

__version__ = "0.1.0"

from .grid import Field, GridSpec, SpectralField, WeightProfile  # noqa: F401
from .soliton import SolitonParams  # noqa: F401

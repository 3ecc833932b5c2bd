"""
Discrete Helmholtz equation on the lattice Z^d.

Forward solver (limiting-absorption resolvent and far-field amplitudes),
phased and phaseless inverse source reconstruction, non-uniqueness
constructions, and Born-approximation inverse scattering. Run experiments
with ``python -m lattice_helmholtz <subcommand> <config.json>``.
"""

__version__ = "0.1.0"

from ._dispersion import SpectralParam, kappa, validate_lambda  # noqa: E402
from ._errors import ConfigurationError, LatticeHelmholtzError, NumericalError  # noqa: E402
from ._forward import ResolventConfig, far_field, far_field_batch, resolvent_apply  # noqa: E402
from ._lattice import LatticeField, SupportDomain, TorusSpectrum, dft, idft  # noqa: E402
from ._window import SpectralWindow  # noqa: E402

__all__ = [
    "ConfigurationError",
    "LatticeField",
    "LatticeHelmholtzError",
    "NumericalError",
    "ResolventConfig",
    "SpectralParam",
    "SpectralWindow",
    "SupportDomain",
    "TorusSpectrum",
    "dft",
    "far_field",
    "far_field_batch",
    "idft",
    "kappa",
    "resolvent_apply",
    "validate_lambda",
]

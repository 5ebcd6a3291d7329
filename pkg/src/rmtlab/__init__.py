"""Numerical laboratory for heavy-tailed (Levy) random matrices."""

__version__ = "0.1.0"

from rmtlab.stable_laws import StableParams, DeformationSpec, sample_stable, sample_entry  # noqa: E402,F401
from rmtlab.ensembles import EnsembleConfig, sample_pair, sample_goe, interpolate_gamma  # noqa: E402,F401
from rmtlab.limit_law import solve_y, m_alpha, density_rho_alpha, m_semicircle  # noqa: E402,F401
from rmtlab.small_alpha import solve_omega, m_alpha_small  # noqa: E402,F401
from rmtlab.resolvent import resolvent  # noqa: E402,F401

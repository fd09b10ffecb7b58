"""Large deviations for spectra of random symmetric matrices, at desk scale."""

__version__ = "0.1.0"

from .entrylaw import (  # noqa: E402
    EntryLaw,
    Gaussian,
    PointMass,
    RateProfile,
    TiltedUniform,
    TwoPoint,
    Uniform,
    cramer_rate,
    parse_law,
    tilt_for_mean,
    truncated_rate,
)
from .errors import *  # noqa: E402,F401,F403
from .kernel import StepKernel, coarse_grain, embed_matrix, truncate  # noqa: E402
from .cutnorm import cut_distance, cut_distance_exact, cut_distance_heuristic  # noqa: E402
from .rate import rate_dual, rate_primal, rate_truncated  # noqa: E402
from .spectral import Spectrum, spectrum_distance, spectrum_of_kernel  # noqa: E402
from .sampler import TiltPlan, build_plan, estimate_kernel_event  # noqa: E402
from .jsolve import JProblem, solve_j  # noqa: E402
from .regularity import weak_regularize  # noqa: E402

"""Semi-parametric Bayesian change-point segmentation.

A time series is broken into contiguous regimes, each with its own
observation parameters; the number of change points is random and
estimated during the fit.  The package provides the marginalized sampler
with single-site, split and merge moves, a finite-K constrained-HMM
baseline selected by BIC, a replica of a collapsing competitor sampler,
posterior diagnostics and a batch CLI.

Hot kernels run in a compiled extension when built (``dpseg._kernels``)
and fall back to pure Python otherwise; both backends consume the random
stream identically, so results are reproducible across them.
"""

from .backend import HAVE_COMPILED, backend_name, get_backend
from .diagnostics import RunSummary, rand_index, summarize
from .draws import PosteriorDraw, read_draws, rle_decode, rle_encode, write_draws
from .emissions import (
    EmissionFamily,
    LinearTrendPrior,
    NormalMeanVarPrior,
    PoissonRatePrior,
    RegimeData,
    SufficientStats,
    draw_prior,
    log_obs_density,
    posterior_draw,
    sufficient_stats,
)
from .errors import (
    ConfigError,
    DpsegError,
    DrawFormatError,
    InfeasiblePathError,
    InvalidInputError,
    InvalidStateError,
)
from .finite import (
    FiniteModelConfig,
    FiniteResult,
    FiniteTransition,
    ffbs_states,
    fit_finite,
    update_beta_finite,
    update_pi,
)
from .ko import KoConfig, ko_joint_log_density, ko_run_chain, ko_transition_logprob
from .sampler import (
    BetaState,
    ChainConfig,
    ChainState,
    MoveConfig,
    gibbs_sweep,
    initial_state,
    merge_update,
    run_chain,
    single_site_update,
    split_update,
    update_beta,
    update_thetas,
)
from .sequence import (
    StateSequence,
    canonicalize,
    change_points,
    gamma_log,
    seq_log_prior,
    staircase_from_change_points,
    transition_logprob,
)
from .series import TimeSeries, load_csv
from .simulate import SchemeSpec, simulate, standard_scheme
from .study import StudyReport, replicate_study

__version__ = "0.1.0"

"""The marginalized change-point sampler: moves, sweeps and chain driver.

The regime allocation evolves through three move types chosen at random
each iteration: a single-site update touching boundary-adjacent times, a
split update proposing a new change point at every eligible time, and a
merge update reassigning whole regimes.  Every iteration then redraws the
regime parameters from their full conditionals and takes one
Metropolis-Hastings step on the concentration parameter beta (random walk
on log beta, step size adapted during burn-in only).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _pykernels as _py
from .backend import get_backend
from .draws import PosteriorDraw
from .emissions import EmissionFamily
from .errors import ConfigError, InvalidInputError
from .sequence import StateSequence
from .series import TimeSeries

__all__ = [
    "BetaState",
    "MoveConfig",
    "ChainConfig",
    "ChainState",
    "initial_state",
    "single_site_update",
    "split_update",
    "merge_update",
    "update_thetas",
    "update_beta",
    "gibbs_sweep",
    "run_chain",
]


@dataclass(frozen=True)
class BetaState:
    """Concentration parameter with its half-normal prior scale and RW step."""

    beta: float
    sigma2: float = 1000.0
    step: float = 0.3

    def __post_init__(self):
        if not (self.beta > 0 and self.sigma2 > 0 and self.step > 0):
            raise ConfigError("beta, sigma2 and step must all be > 0")


@dataclass(frozen=True)
class MoveConfig:
    p_single: float = 0.5
    p_split: float = 0.25
    p_merge: float = 0.25
    p_forward: float = 0.5

    def __post_init__(self):
        probs = (self.p_single, self.p_split, self.p_merge, self.p_forward)
        if any(p < 0 or p > 1 for p in probs):
            raise ConfigError("move probabilities must lie in [0, 1]")
        if abs(self.p_single + self.p_split + self.p_merge - 1.0) > 1e-12:
            raise ConfigError("p_single + p_split + p_merge must equal 1")


@dataclass(frozen=True)
class ChainConfig:
    iterations: int
    burn_in: int
    thin: int = 1
    seed: int = 0
    init_segments: int = 10

    def __post_init__(self):
        if self.iterations < 1 or self.burn_in < 0:
            raise ConfigError("need iterations >= 1 and burn_in >= 0")
        if self.burn_in >= self.iterations:
            raise ConfigError("burn_in must be smaller than iterations")
        if self.thin < 1:
            raise ConfigError("thin must be >= 1")
        if self.init_segments < 1:
            raise ConfigError("init_segments must be >= 1")

    @property
    def n_draws(self) -> int:
        return (self.iterations - self.burn_in) // self.thin


@dataclass
class ChainState:
    """One Markov-chain configuration point."""

    seq: StateSequence
    thetas: list
    beta: BetaState
    family: EmissionFamily
    data: TimeSeries

    def __post_init__(self):
        if len(self.thetas) != self.seq.K:
            raise InvalidInputError("need exactly one theta per regime")
        if self.seq.T != self.data.T:
            raise InvalidInputError("sequence and data lengths differ")


def _as_series(data) -> TimeSeries:
    return data if isinstance(data, TimeSeries) else TimeSeries(np.asarray(data, float))


def _make_core(state: ChainState, backend="python"):
    kern = get_backend(backend)
    ts = state.data
    core = kern.ChainCore(
        ts.values,
        np.arange(1.0, ts.T + 1),
        state.family.code,
        state.family.packed_prior(),
        state.beta.sigma2,
        state.beta.step,
        None,
    )
    starts = [b - length for b, length in zip(state.seq.boundaries, state.seq.block_lengths())]
    ends = [b - 1 for b in state.seq.boundaries]
    core.set_state(starts, ends, state.thetas, state.beta.beta)
    return core


def _from_core(core, state: ChainState, beta_step=None) -> ChainState:
    return ChainState(
        seq=StateSequence(core.labels().astype(np.int64)),
        thetas=[np.array(th) for th in core.thetas],
        beta=BetaState(
            core.beta,
            state.beta.sigma2,
            state.beta.step if beta_step is None else beta_step,
        ),
        family=state.family,
        data=state.data,
    )


def initial_state(
    data,
    family: EmissionFamily,
    rng: np.random.Generator,
    init_segments: int = 10,
    sigma_beta2: float = 1000.0,
    beta_step: float = 0.3,
) -> ChainState:
    """Equal-length initial segmentation with prior-drawn parameters."""
    ts = _as_series(data)
    kern = _py
    core = kern.ChainCore(
        ts.values,
        np.arange(1.0, ts.T + 1),
        family.code,
        family.packed_prior(),
        sigma_beta2,
        beta_step,
        rng,
    )
    core.init_state(init_segments)
    return ChainState(
        seq=StateSequence(core.labels().astype(np.int64)),
        thetas=[np.array(th) for th in core.thetas],
        beta=BetaState(core.beta, sigma_beta2, beta_step),
        family=family,
        data=ts,
    )


def _check_t(state, t):
    if not 1 <= t <= state.seq.T:
        raise InvalidInputError(f"time index {t} outside 1..{state.seq.T}")


def single_site_update(state: ChainState, t: int, rng) -> ChainState:
    """Resample the regime membership of time t (1-based).

    Interior times (both neighbours in the same regime) are left unchanged;
    boundary-adjacent times are redrawn among joining the left regime, the
    right regime, or sitting in their own regime.
    """
    _check_t(state, t)
    core = _make_core(state)
    core.rng = rng
    t0 = t - 1
    if core.single_eligible(t0):
        k = core.block_of(t0)
        singleton = core.starts[k] == core.ends[k]
        theta_star = None if singleton else core._draw_prior()
        tags, lws = core.single_options(t0, theta_star)
        u = rng.random()
        core.apply_single(t0, tags[_py._categorical(lws, u)], theta_star)
    return _from_core(core, state)


def split_update(state: ChainState, t: int, rng) -> ChainState:
    """Propose a new change point at time t (no-op when t starts its regime)."""
    _check_t(state, t)
    core = _make_core(state)
    core.rng = rng
    t0 = t - 1
    if t0 != core.starts[core.block_of(t0)]:
        theta_star = core._draw_prior()
        tags, lws = core.split_options(t0, theta_star)
        u = rng.random()
        core.apply_split(t0, tags[_py._categorical(lws, u)], theta_star)
    return _from_core(core, state)


def merge_update(state: ChainState, k: int, rng) -> ChainState:
    """Reassign the whole regime k (1-based): fresh theta, merge down/up, keep."""
    if not 1 <= k <= state.seq.K:
        raise InvalidInputError(f"regime label {k} outside 1..{state.seq.K}")
    core = _make_core(state)
    core.rng = rng
    theta_star = core._draw_prior()
    tags, lws = core.merge_options(k - 1, theta_star)
    u = rng.random()
    core.apply_merge(k - 1, tags[_py._categorical(lws, u)], theta_star)
    return _from_core(core, state)


def update_thetas(state: ChainState, rng) -> ChainState:
    """Redraw every regime's parameters from their full conditionals."""
    core = _make_core(state)
    core.rng = rng
    core.update_thetas()
    return _from_core(core, state)


def update_beta(state: ChainState, rng) -> ChainState:
    """One random-walk Metropolis step on log beta; beta unchanged on rejection."""
    core = _make_core(state)
    core.rng = rng
    core.update_beta(False)
    return _from_core(core, state)


def gibbs_sweep(state: ChainState, moves: MoveConfig, rng) -> ChainState:
    """One full iteration: one move sweep, then theta and beta updates."""
    core = _make_core(state)
    core.rng = rng
    core.iteration(moves.p_single, moves.p_split, moves.p_forward, False)
    return _from_core(core, state)


def run_chain(
    data,
    family: EmissionFamily,
    cfg: ChainConfig,
    moves: MoveConfig | None = None,
    sigma_beta2: float = 1000.0,
    beta_step: float = 0.3,
    backend: str = "auto",
) -> list:
    """Run the sampler and return the thinned post-burn-in draws.

    Deterministic given ``cfg.seed``; the step size of the beta proposal is
    adapted during burn-in only.  Returns ``(iterations - burn_in) // thin``
    draws, each with the label sequence, per-regime parameters, beta and
    the joint log posterior.
    """
    ts = _as_series(data)
    moves = moves or MoveConfig()
    kern = get_backend(backend)
    rng = np.random.default_rng(cfg.seed)
    core = kern.ChainCore(
        ts.values,
        np.arange(1.0, ts.T + 1),
        family.code,
        family.packed_prior(),
        sigma_beta2,
        beta_step,
        rng,
    )
    core.init_state(cfg.init_segments)
    out = []
    for it in range(1, cfg.iterations + 1):
        core.iteration(moves.p_single, moves.p_split, moves.p_forward, it <= cfg.burn_in)
        if it > cfg.burn_in and (it - cfg.burn_in) % cfg.thin == 0:
            out.append(
                PosteriorDraw(
                    iteration=it,
                    s=core.labels().astype(np.int64),
                    thetas=core.theta_matrix(),
                    beta=core.beta,
                    log_post=core.log_posterior(),
                )
            )
    return out

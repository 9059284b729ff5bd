"""Replica of the competitor sampler whose regime count can only shrink.

The allocation dynamics add a self-transition mass ``alpha`` to the stay
counts and the documented single-site conditionals reallocate boundary
sites between adjacent existing regimes with prior-shaped probabilities
(they carry no data term); no move can create a regime.  Running it
demonstrates the monotone-nonincreasing-K pathology: the chain collapses
toward a single regime and stays there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .backend import get_backend
from .draws import PosteriorDraw
from .emissions import EmissionFamily
from .errors import InvalidInputError
from .sampler import ChainConfig, _as_series
from .sequence import StateSequence

__all__ = ["KoConfig", "ko_transition_logprob", "ko_joint_log_density", "ko_run_chain"]


@dataclass(frozen=True)
class KoConfig:
    alpha: float = 1.0
    sigma_beta2: float = 1000.0
    beta_step: float = 0.3

    def __post_init__(self):
        if not (self.alpha > 0 and self.sigma_beta2 > 0 and self.beta_step > 0):
            raise InvalidInputError("alpha, sigma_beta2 and beta_step must be > 0")


def ko_transition_logprob(i: int, k: int, n_k_prefix: int, alpha: float, beta: float) -> float:
    """log[(n+alpha)/(n+alpha+beta)] for a stay, log[beta/(n+alpha+beta)] for a jump.

    Reduces to the marginalized dynamics of the main sampler when alpha=1.
    """
    if i != k and i != k + 1:
        raise InvalidInputError(f"next label must be {k} or {k + 1}, got {i}")
    if n_k_prefix < 0 or not (alpha > 0 and beta > 0):
        raise InvalidInputError("need n >= 0, alpha > 0, beta > 0")
    n = float(n_k_prefix)
    if i == k:
        return math.log(n + alpha) - math.log(n + alpha + beta)
    return math.log(beta) - math.log(n + alpha + beta)


def ko_joint_log_density(seq: StateSequence, alpha: float, beta: float) -> float:
    """log of beta^K prod_i [G(a+b)/G(a)] [G(n_i+a)/G(n_i+1+a+b)], as printed.

    This density implicitly assumes a further observation opening regime
    K+1 at time T+1; at alpha=1 it equals the main sequence prior plus
    log[beta/(n_K + 1 + beta)].
    """
    if not (alpha > 0 and beta > 0):
        raise InvalidInputError("alpha and beta must be > 0")
    counts = seq.self_transition_counts()
    lp = seq.K * math.log(beta)
    for n in counts:
        n = float(n)
        lp += (
            math.lgamma(alpha + beta)
            - math.lgamma(alpha)
            + math.lgamma(n + alpha)
            - math.lgamma(n + 1.0 + alpha + beta)
        )
    return lp


def ko_run_chain(
    data,
    family: EmissionFamily,
    cfg: ChainConfig,
    ko: KoConfig | None = None,
    backend: str = "auto",
):
    """Run the replica; returns (draws, per-iteration K trajectory)."""
    ts = _as_series(data)
    ko = ko or KoConfig()
    kern = get_backend(backend)
    rng = np.random.default_rng(cfg.seed)
    core = kern.KoCore(
        ts.values,
        np.arange(1.0, ts.T + 1),
        family.code,
        family.packed_prior(),
        ko.alpha,
        ko.sigma_beta2,
        ko.beta_step,
        rng,
    )
    core.init_state(cfg.init_segments)
    draws = []
    k_traj = np.empty(cfg.iterations, dtype=np.int64)
    for it in range(1, cfg.iterations + 1):
        core.iteration(it <= cfg.burn_in)
        k_traj[it - 1] = core.K
        if it > cfg.burn_in and (it - cfg.burn_in) % cfg.thin == 0:
            draws.append(
                PosteriorDraw(
                    iteration=it,
                    s=core.labels().astype(np.int64),
                    thetas=core.theta_matrix(),
                    beta=core.beta,
                    log_post=core.log_posterior(),
                )
            )
    return draws, k_traj

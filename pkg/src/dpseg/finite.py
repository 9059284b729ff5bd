"""Finite-K* constrained-HMM baseline with BIC model selection.

Each number of regimes K* from a user grid is fitted by Gibbs sampling
(forward-filter backward-sample allocation draw conditioned on the final
state being K*, conjugate beta updates of the stay probabilities, regime
parameter updates, Metropolis step on beta), then scored with
BIC = -2 log L + p log T at the posterior-mean parameters, where log L is
the filtered data likelihood conditioned on reaching the final regime.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _pykernels as _py
from .backend import get_backend
from .draws import PosteriorDraw
from .emissions import EmissionFamily
from .errors import ConfigError, InvalidInputError
from .sampler import ChainConfig, _as_series
from .sequence import StateSequence

__all__ = [
    "FiniteTransition",
    "FiniteModelConfig",
    "FiniteFit",
    "FiniteResult",
    "ffbs_states",
    "update_pi",
    "update_beta_finite",
    "fit_finite",
]


@dataclass(frozen=True)
class FiniteTransition:
    """Stay probabilities of the one-step-ahead constrained transition matrix.

    Row k has mass pi_k on itself and 1 - pi_k on k+1; the last row is
    absorbing, so only K* - 1 free probabilities exist.
    """

    kstar: int
    pis: np.ndarray

    def __post_init__(self):
        if self.kstar < 1:
            raise ConfigError("K* must be >= 1")
        pis = np.asarray(self.pis, dtype=float)
        if pis.shape != (self.kstar - 1,):
            raise ConfigError("need exactly K*-1 stay probabilities")
        if pis.size and (pis.min() <= 0.0 or pis.max() >= 1.0):
            raise ConfigError("stay probabilities must lie in (0, 1)")
        object.__setattr__(self, "pis", pis)

    def full_stay_vector(self) -> np.ndarray:
        return np.concatenate((self.pis, [1.0]))


@dataclass(frozen=True)
class FiniteModelConfig:
    kstar_grid: tuple
    chain: ChainConfig
    sigma_beta2: float = 1000.0
    beta_step: float = 0.3

    def __post_init__(self):
        grid = tuple(int(k) for k in self.kstar_grid)
        if not grid or any(k < 1 for k in grid) or len(set(grid)) != len(grid):
            raise ConfigError("K* grid values must be distinct integers >= 1")
        object.__setattr__(self, "kstar_grid", grid)


def _initial_blocks(values, kstar):
    """Greedy binary segmentation on squared error: starting boundaries only.

    Splits the segment offering the largest within-segment SSE reduction
    until ``kstar`` blocks exist.  Deterministic, so both backends start
    every grid chain from the same allocation.
    """
    y = np.asarray(values, dtype=float)
    cy = np.concatenate(([0.0], np.cumsum(y)))
    cy2 = np.concatenate(([0.0], np.cumsum(y * y)))

    def sse(a, b):
        n = b - a + 1
        s = cy[b + 1] - cy[a]
        return (cy2[b + 1] - cy2[a]) - s * s / n

    def best_split(a, b):
        if b <= a:
            return None
        t = np.arange(a + 1, b + 1)
        n1 = t - a
        n2 = b - t + 1
        s1 = cy[t] - cy[a]
        s2 = cy[b + 1] - cy[t]
        q1 = (cy2[t] - cy2[a]) - s1 * s1 / n1
        q2 = (cy2[b + 1] - cy2[t]) - s2 * s2 / n2
        j = int(np.argmin(q1 + q2))
        return sse(a, b) - (q1[j] + q2[j]), int(t[j])

    segs = [(0, y.size - 1)]
    while len(segs) < kstar:
        gains = [best_split(a, b) for a, b in segs]
        cands = [(g[0], i, g[1]) for i, g in enumerate(gains) if g is not None]
        if not cands:
            break
        _, i, t = max(cands)
        a, b = segs[i]
        segs[i : i + 1] = [(a, t - 1), (t, b)]
    segs.sort()
    # pad with singleton splits if the series was too short on distinct values
    while len(segs) < kstar:
        for i, (a, b) in enumerate(segs):
            if b > a:
                segs[i : i + 1] = [(a, a), (a + 1, b)]
                break
    return [a for a, _ in segs], [b for _, b in segs]


def _core_for(data, family, kstar, sigma_beta2, beta_step, rng, backend="python"):
    ts = _as_series(data)
    kern = get_backend(backend)
    return kern.FiniteCore(
        ts.values,
        np.arange(1.0, ts.T + 1),
        family.code,
        family.packed_prior(),
        kstar,
        sigma_beta2,
        beta_step,
        rng,
    )


def ffbs_states(data, family: EmissionFamily, thetas, trans: FiniteTransition, rng) -> StateSequence:
    """Exact joint allocation draw under fixed parameters (s_1=1, s_T=K*)."""
    core = _core_for(data, family, trans.kstar, 1.0, 0.3, rng)
    core.thetas = [np.asarray(th, dtype=float) for th in thetas]
    if len(core.thetas) != trans.kstar:
        raise InvalidInputError("need one theta per regime")
    core.pis = trans.full_stay_vector()
    core.ffbs()
    return StateSequence(core.labels().astype(np.int64))


def update_pi(seq: StateSequence, beta: float, rng) -> FiniteTransition:
    """Conjugate Beta(1 + n_k, beta + 1) draw of each non-final stay probability."""
    if not beta > 0:
        raise InvalidInputError("beta must be > 0")
    counts = seq.self_transition_counts()
    pis = np.empty(seq.K - 1)
    for k in range(seq.K - 1):
        g1 = rng.standard_gamma(1.0 + float(counts[k]))
        g2 = rng.standard_gamma(beta + 1.0)
        pis[k] = g1 / (g1 + g2)
    return FiniteTransition(kstar=seq.K, pis=pis)


def update_beta_finite(
    trans: FiniteTransition, sigma_beta2: float, rng, beta: float, step: float = 0.3
) -> float:
    """Metropolis step on log beta against prod_k Beta(pi_k; 1, beta) x half-normal."""
    z = rng.standard_normal()
    u = rng.random()
    lb = math.log(beta)
    lb_new = lb + step * z
    beta_new = math.exp(lb_new)
    sl1p = float(np.log1p(-trans.pis).sum())
    m = trans.kstar - 1

    def kern(b, logb):
        return m * logb + (b - 1.0) * sl1p - b * b / (2.0 * sigma_beta2)

    if math.log(u) < kern(beta_new, lb_new) - kern(beta, lb) + lb_new - lb:
        return beta_new
    return beta


@dataclass
class FiniteFit:
    """One grid point: draws, BIC ingredients, posterior-mean parameters."""

    kstar: int
    draws: list
    pis_draws: np.ndarray
    bic: float
    log_lik: float
    n_params: int
    theta_mean: np.ndarray
    pi_mean: np.ndarray


@dataclass
class FiniteResult:
    fits: list
    skipped: list

    @property
    def best(self) -> FiniteFit:
        return min(self.fits, key=lambda f: f.bic)

    @property
    def selected_kstar(self) -> int:
        return self.best.kstar

    def bic_table(self) -> list:
        return [(f.kstar, f.bic, f.log_lik, f.n_params) for f in self.fits]


def fit_finite(
    data,
    family: EmissionFamily,
    cfg: FiniteModelConfig,
    backend: str = "auto",
) -> FiniteResult:
    """Fit every K* in the grid and select the BIC argmin.

    Infeasible grid points (K* > T) are skipped with a warning.  Each grid
    point runs on its own random stream derived from (seed, K*).
    """
    ts = _as_series(data)
    fits, skipped = [], []
    for kstar in cfg.kstar_grid:
        if kstar > ts.T:
            warnings.warn(f"skipping K*={kstar}: larger than T={ts.T}")
            skipped.append(kstar)
            continue
        rng = np.random.default_rng((cfg.chain.seed, kstar))
        core = _core_for(
            ts, family, kstar, cfg.sigma_beta2, cfg.beta_step, rng, backend
        )
        starts, ends = _initial_blocks(ts.values, kstar)
        core.init_state(starts, ends)
        ch = cfg.chain
        draws, pis_draws = [], []
        for it in range(1, ch.iterations + 1):
            core.iteration(it <= ch.burn_in)
            if it > ch.burn_in and (it - ch.burn_in) % ch.thin == 0:
                draws.append(
                    PosteriorDraw(
                        iteration=it,
                        s=core.labels().astype(np.int64),
                        thetas=core.theta_matrix(),
                        beta=core.beta,
                        log_post=core.log_posterior(),
                    )
                )
                pis_draws.append(np.array(core.pis[: kstar - 1]))
        pis_draws = np.array(pis_draws) if pis_draws else np.empty((0, kstar - 1))
        theta_mean = np.mean([d.thetas for d in draws], axis=0)
        pi_mean = pis_draws.mean(axis=0) if kstar > 1 else np.empty(0)
        log_joint, log_prior = core.loglik_terms(
            theta_mean, np.concatenate((pi_mean, [1.0]))
        )
        log_lik = log_joint - log_prior
        p = family.n_params * kstar + (kstar - 1)
        bic = -2.0 * log_lik + p * math.log(ts.T)
        fits.append(
            FiniteFit(
                kstar=kstar,
                draws=draws,
                pis_draws=pis_draws,
                bic=bic,
                log_lik=log_lik,
                n_params=p,
                theta_mean=theta_mean,
                pi_mean=pi_mean,
            )
        )
    if not fits:
        raise ConfigError("no feasible K* in the grid")
    return FiniteResult(fits=fits, skipped=skipped)

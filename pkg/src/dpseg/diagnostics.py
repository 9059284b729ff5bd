"""Posterior summarization and partition-comparison metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .sequence import StateSequence, change_points

__all__ = ["rand_index", "RunSummary", "summarize", "format_summary", "summary_table"]


def rand_index(a, b) -> float:
    """Fraction of unordered pairs on which two partitions agree.

    Label values are irrelevant (pair-based definition); 1 means identical
    partitions, 0 no agreement on any pair.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1 or a.size == 0:
        raise InvalidInputError("partitions must be 1-D arrays of equal length")
    n = a.size
    if n == 1:
        return 1.0
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)

    def pairs(x):
        return float((x * (x - 1) // 2).sum())

    total = n * (n - 1) / 2.0
    agree = total - pairs(table.sum(axis=1)) - pairs(table.sum(axis=0)) + 2.0 * pairs(table)
    return agree / total


def _equal_tailed(x, level):
    lo = (1.0 - level) / 2.0
    return (float(np.quantile(x, lo)), float(np.quantile(x, 1.0 - lo)))


@dataclass
class RunSummary:
    """Everything reported about one chain's saved draws.

    Parameter and change-point summaries are computed on the subset of
    draws with K equal to the posterior mode; beta is summarized over all
    draws.
    """

    posterior_K: dict
    map_K: int
    map_segmentation: StateSequence
    param_means: np.ndarray
    param_cis: np.ndarray
    param_names: tuple
    cp_maps: tuple
    cp_cis: tuple
    beta_mean: float
    beta_ci: tuple
    level: float
    n_draws: int


def summarize(draws, level: float = 0.95, param_names=None) -> RunSummary:
    """Posterior-of-K table, modal-K conditional summaries, MAP segmentation.

    ``draws`` is a non-empty list of :class:`PosteriorDraw`.  Equal-tailed
    credible intervals at ``level``; the MAP segmentation is the saved draw
    with the highest joint log posterior among those with modal K.
    """
    draws = list(draws)
    if not draws:
        raise InvalidInputError("need at least one draw to summarize")
    if not 0.0 < level <= 1.0:
        raise InvalidInputError("level must lie in (0, 1]")
    ks = np.array([d.K for d in draws])
    counts = np.bincount(ks)
    posterior_K = {int(k): c / len(draws) for k, c in enumerate(counts) if c > 0}
    map_K = int(counts.argmax())
    subset = [d for d in draws if d.K == map_K]
    best = max(subset, key=lambda d: d.log_post)
    npar = subset[0].thetas.shape[1]
    if param_names is None:
        param_names = tuple(f"p{j + 1}" for j in range(npar))
    thetas = np.array([d.thetas for d in subset])  # (n, K, npar)
    param_means = thetas.mean(axis=0)
    param_cis = np.empty((map_K, npar, 2))
    for k in range(map_K):
        for j in range(npar):
            param_cis[k, j] = _equal_tailed(thetas[:, k, j], level)
    bounds = np.array([change_points(StateSequence(d.s)) for d in subset])
    cp_maps, cp_cis = [], []
    for k in range(map_K):
        vals = bounds[:, k]
        cp_maps.append(int(np.bincount(vals).argmax()))
        lo, hi = _equal_tailed(vals, level)
        cp_cis.append((int(np.floor(lo)), int(np.ceil(hi))))
    betas = np.array([d.beta for d in draws])
    return RunSummary(
        posterior_K=posterior_K,
        map_K=map_K,
        map_segmentation=StateSequence(best.s),
        param_means=param_means,
        param_cis=param_cis,
        param_names=tuple(param_names),
        cp_maps=tuple(cp_maps),
        cp_cis=tuple(cp_cis),
        beta_mean=float(betas.mean()),
        beta_ci=_equal_tailed(betas, level),
        level=level,
        n_draws=len(draws),
    )


def _fmt_time(idx, time_labels):
    if time_labels is None:
        return f"{idx}"
    return f"{time_labels[idx - 1]:g} (t={idx})"


def format_summary(rs: RunSummary, time_labels=None) -> str:
    """Human-readable report."""
    lines = [
        f"draws: {rs.n_draws}   credible level: {rs.level:.2f}",
        "posterior of K:",
    ]
    for k in sorted(rs.posterior_K):
        bar = "#" * int(round(50 * rs.posterior_K[k]))
        lines.append(f"  K={k:<3d} {rs.posterior_K[k]:6.3f} {bar}")
    lines.append(f"MAP K: {rs.map_K}")
    lines.append("per-regime parameters (conditional on MAP K):")
    for k in range(rs.map_K):
        cells = []
        for j, name in enumerate(rs.param_names):
            lo, hi = rs.param_cis[k, j]
            cells.append(f"{name}={rs.param_means[k, j]:.3f} [{lo:.3f}, {hi:.3f}]")
        lines.append(f"  regime {k + 1}: " + "  ".join(cells))
    lines.append("change points (conditional on MAP K):")
    for k in range(rs.map_K):
        lo, hi = rs.cp_cis[k]
        lines.append(
            f"  xi_{k + 1}: {_fmt_time(rs.cp_maps[k], time_labels)}"
            f" [{_fmt_time(lo, time_labels)}, {_fmt_time(hi, time_labels)}]"
        )
    lines.append(
        f"beta: {rs.beta_mean:.3f} [{rs.beta_ci[0]:.3f}, {rs.beta_ci[1]:.3f}]"
    )
    return "\n".join(lines)


def summary_table(rs: RunSummary) -> list:
    """Machine-readable rows: (section, regime, name, value, lo, hi)."""
    rows = []
    for k in sorted(rs.posterior_K):
        rows.append(("posterior_K", k, "prob", rs.posterior_K[k], "", ""))
    rows.append(("map", "", "K", rs.map_K, "", ""))
    for k in range(rs.map_K):
        for j, name in enumerate(rs.param_names):
            rows.append(
                (
                    "param",
                    k + 1,
                    name,
                    rs.param_means[k, j],
                    rs.param_cis[k, j, 0],
                    rs.param_cis[k, j, 1],
                )
            )
    for k in range(rs.map_K):
        rows.append(
            ("change_point", k + 1, "xi", rs.cp_maps[k], rs.cp_cis[k][0], rs.cp_cis[k][1])
        )
    rows.append(("beta", "", "beta", rs.beta_mean, rs.beta_ci[0], rs.beta_ci[1]))
    return rows

"""Staircase label sequences and the marginalized regime-sequence prior.

A staircase sequence is an allocation ``s_1..s_T`` with ``s_1 = 1`` and
``s_{t+1} - s_t`` in ``{0, 1}``; regime ``k`` occupies one contiguous block
of time indices, so the sequence is fully described by its change points.
All prior computations are done in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError, InvalidStateError

__all__ = [
    "StateSequence",
    "canonicalize",
    "change_points",
    "staircase_from_change_points",
    "transition_logprob",
    "seq_log_prior",
    "gamma_log",
]


@dataclass(frozen=True)
class StateSequence:
    """Canonical staircase allocation with derived block bookkeeping.

    Attributes
    ----------
    s : np.ndarray
        Length-T integer labels, ``s[0] == 1``, unit non-decreasing steps.
    K : int
        Number of regimes, equal to ``s[-1]``.
    boundaries : tuple of int
        Change points ``xi_1..xi_K``: the last (1-based) time index of each
        regime, strictly increasing with ``boundaries[-1] == T``.
    """

    s: np.ndarray
    K: int = field(init=False)
    boundaries: tuple = field(init=False)

    def __post_init__(self):
        s = np.asarray(self.s, dtype=np.int64)
        if s.ndim != 1 or s.size == 0:
            raise InvalidStateError("label sequence must be a non-empty 1-D array")
        if s[0] != 1:
            raise InvalidStateError("staircase sequence must start at label 1")
        steps = np.diff(s)
        if steps.size and (steps.min() < 0 or steps.max() > 1):
            raise InvalidStateError("labels must be non-decreasing with unit steps")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "K", int(s[-1]))
        last = np.flatnonzero(np.diff(s)) + 1  # 1-based end of each regime but last
        object.__setattr__(self, "boundaries", tuple(int(b) for b in last) + (s.size,))

    @property
    def T(self) -> int:
        return self.s.size

    def block_lengths(self) -> np.ndarray:
        """Length of each regime's block, in label order."""
        return np.diff(np.concatenate(([0], self.boundaries)))

    def self_transition_counts(self) -> np.ndarray:
        """n_i over the whole series: block length minus one, per regime."""
        return self.block_lengths() - 1


def canonicalize(s) -> StateSequence:
    """Renumber contiguous label blocks to 1..K in order of first appearance.

    The input may use arbitrary integer labels as long as equal labels form
    contiguous runs; idempotent on already-canonical sequences.
    """
    arr = np.asarray(s, dtype=np.int64)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidInputError("label sequence must be a non-empty 1-D array")
    change = np.concatenate(([True], arr[1:] != arr[:-1]))
    block_labels = arr[change]
    if np.unique(block_labels).size != block_labels.size:
        raise InvalidStateError("equal labels must form a single contiguous block")
    return StateSequence(np.cumsum(change))


def change_points(seq: StateSequence) -> tuple:
    """Change points xi_1..xi_K (last time index of each regime, xi_K = T)."""
    return seq.boundaries


def staircase_from_change_points(xi) -> StateSequence:
    """Inverse of :func:`change_points`: rebuild the staircase from xi."""
    xi = [int(b) for b in xi]
    if not xi or any(b <= a for a, b in zip(xi, xi[1:])) or xi[0] < 1:
        raise InvalidInputError("change points must be strictly increasing and >= 1")
    s = np.empty(xi[-1], dtype=np.int64)
    start = 0
    for k, end in enumerate(xi, start=1):
        s[start:end] = k
        start = end
    return StateSequence(s)


def transition_logprob(i: int, k: int, n_k_prefix: int, beta: float) -> float:
    """Log probability of the next label under the marginalized dynamics.

    From regime ``k`` with ``n = n_k^{1:(t-1)}`` self-transitions so far, the
    next label stays at ``k`` with probability ``(n+1)/(n+1+beta)`` and moves
    to ``k+1`` with probability ``beta/(n+1+beta)``.
    """
    if i != k and i != k + 1:
        raise InvalidInputError(f"next label must be {k} or {k + 1}, got {i}")
    if n_k_prefix < 0 or not beta > 0:
        raise InvalidInputError("need n_k_prefix >= 0 and beta > 0")
    n = float(n_k_prefix)
    if i == k:
        return math.log(n + 1.0) - math.log(n + 1.0 + beta)
    return math.log(beta) - math.log(n + 1.0 + beta)


def gamma_log(c: int, n: int, beta: float) -> float:
    """log gamma_c(n) = log [Gamma(beta+1) Gamma(n+1) / Gamma(n+1+beta+1-c)].

    The gamma-ratio weight entering the split and merge move probabilities;
    ``c`` is 1 for a block with no exit transition (the final block) and 0
    otherwise.
    """
    if c not in (0, 1):
        raise InvalidInputError("c must be 0 or 1")
    if n < 0 or not beta > 0:
        raise InvalidInputError("need n >= 0 and beta > 0")
    return (
        math.lgamma(beta + 1.0)
        + math.lgamma(n + 1.0)
        - math.lgamma(n + 1.0 + beta + 1.0 - c)
    )


def seq_log_prior(seq: StateSequence, beta: float) -> float:
    """Log prior mass of a canonical staircase sequence given beta.

    Equals ``(K-1) log beta + sum_i log gamma_{I(i=K)}(n_i)`` with ``n_i`` the
    per-regime self-transition counts, and agrees with the sum of sequential
    :func:`transition_logprob` terms along the sequence.
    """
    if not beta > 0:
        raise InvalidInputError("beta must be > 0")
    counts = seq.self_transition_counts()
    total = (seq.K - 1) * math.log(beta)
    for idx, n in enumerate(counts):
        c = 1 if idx == seq.K - 1 else 0
        total += gamma_log(c, int(n), beta)
    return total

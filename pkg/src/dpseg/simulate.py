"""Synthetic dataset generation: two normal schemes and a trend surrogate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .emissions import LINTREND, NORMAL
from .errors import ConfigError
from .sequence import StateSequence, staircase_from_change_points
from .series import TimeSeries

__all__ = ["SchemeSpec", "SimulationTruth", "standard_scheme", "simulate"]

# (xi, per-regime parameter rows)
_SCHEME_1 = (
    (50, 250, 650, 750, 1000, 1400, 1500),
    [(0.0, 1.0), (5.0, 2.0), (2.0, 1.0), (-2.0, 0.5), (0.0, 1.0), (2.0, 3.0), (10.0, 5.0)],
)
_SCHEME_2 = (
    (50, 250, 900, 950, 1100, 1400, 1500),
    [(0.0, 1.0), (5.0, 2.0), (2.0, 1.0), (2.0, 0.1), (2.0, 1.0), (2.0, 15.0), (10.0, 5.0)],
)
# standardized-radon-like linear trends: (mu0, mu1, sigma2) per regime
_RADON = (
    (250, 470, 620, 880, 1020, 1180, 1320, 1500),
    [
        (-0.2, 0.0005, 0.03),
        (1.4, -0.003, 0.04),
        (5.8, -0.011, 0.03),
        (-1.1, 0.0005, 0.02),
        (-9.6, 0.01, 0.03),
        (-2.0, 0.002, 0.04),
        (-18.7, 0.016, 0.07),
        (31.8, -0.022, 0.05),
    ],
)


@dataclass(frozen=True)
class SimulationTruth:
    seq: StateSequence
    params: np.ndarray
    family_kind: str


@dataclass(frozen=True)
class SchemeSpec:
    """Generator description: change points plus per-regime parameters.

    ``scheme`` is one of "1", "2" (normal emissions, rows (mu, sigma2)) or
    "radon" (linear-trend emissions, rows (mu0, mu1, sigma2)).
    """

    scheme: str
    xi: tuple
    params: np.ndarray

    def __post_init__(self):
        if self.scheme not in ("1", "2", "radon"):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        xi = tuple(int(v) for v in self.xi)
        params = np.atleast_2d(np.asarray(self.params, dtype=float))
        if len(xi) != params.shape[0]:
            raise ConfigError("need one parameter row per regime")
        if any(b <= a for a, b in zip(xi, xi[1:])) or xi[0] < 1:
            raise ConfigError("change points must be strictly increasing")
        want = 3 if self.scheme == "radon" else 2
        if params.shape[1] != want:
            raise ConfigError(f"scheme {self.scheme} needs {want} parameters per regime")
        if np.any(params[:, -1] <= 0):
            raise ConfigError("regime variances must be > 0")
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "params", params)

    @property
    def T(self) -> int:
        return self.xi[-1]

    @property
    def family_kind(self) -> str:
        return LINTREND if self.scheme == "radon" else NORMAL


def standard_scheme(scheme) -> SchemeSpec:
    scheme = str(scheme)
    table = {"1": _SCHEME_1, "2": _SCHEME_2, "radon": _RADON}
    if scheme not in table:
        raise ConfigError(f"unknown scheme {scheme!r}")
    xi, params = table[scheme]
    return SchemeSpec(scheme=scheme, xi=xi, params=np.array(params))


def simulate(spec: SchemeSpec, seed: int) -> TimeSeries:
    """Draw one series from the scheme; the truth is stored in metadata."""
    rng = np.random.default_rng(seed)
    seq = staircase_from_change_points(spec.xi)
    y = np.empty(spec.T)
    start = 0
    for k, end in enumerate(spec.xi):
        row = spec.params[k]
        ln = end - start
        if spec.scheme == "radon":
            mean = row[0] + row[1] * np.arange(start + 1, end + 1)
            y[start:end] = mean + np.sqrt(row[2]) * rng.standard_normal(ln)
        else:
            y[start:end] = row[0] + np.sqrt(row[1]) * rng.standard_normal(ln)
        start = end
    return TimeSeries(
        y,
        name=f"scheme{spec.scheme}-seed{seed}",
        truth=SimulationTruth(seq=seq, params=spec.params, family_kind=spec.family_kind),
    )

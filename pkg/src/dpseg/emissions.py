"""Per-regime observation models, their priors and full-conditional draws.

Three families are supported:

``normal``
    ``Y_t ~ N(mu, sigma2)`` with independent ``N(m0, v0)`` prior on the mean
    and inverse-gamma ``IG(a0, b0)`` prior on the variance (rate
    parameterization: ``1/sigma2 ~ Gamma(a0, b0)``).
``poisson``
    ``Y_t ~ Pois(lam)`` with conjugate ``Gamma(a, b)`` prior (shape/rate).
``lintrend``
    ``Y_t ~ N(mu0 + mu1 * t, sigma2)`` with independent normal priors on the
    two coefficients and inverse-gamma prior on the variance.

The normal families are semi-conjugate: one full-conditional draw performs a
single inner cycle (coefficients given the variance, then the variance given
the coefficients), which is what the outer Gibbs sampler re-enters on every
sweep.  All density evaluations are returned in log space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

__all__ = [
    "NORMAL",
    "POISSON",
    "LINTREND",
    "FAMILY_KINDS",
    "NormalMeanVarPrior",
    "PoissonRatePrior",
    "LinearTrendPrior",
    "EmissionFamily",
    "RegimeData",
    "SufficientStats",
    "log_obs_density",
    "draw_prior",
    "posterior_draw",
    "sufficient_stats",
    "params_log_prior",
    "param_names",
]

NORMAL = "normal"
POISSON = "poisson"
LINTREND = "lintrend"
FAMILY_KINDS = (NORMAL, POISSON, LINTREND)

# integer codes shared with the compiled kernels
FAMILY_CODES = {NORMAL: 0, POISSON: 1, LINTREND: 2}

# number of free parameters per regime, used by the finite-model BIC
N_PARAMS = {NORMAL: 2, POISSON: 1, LINTREND: 3}

_PARAM_NAMES = {
    NORMAL: ("mu", "sigma2"),
    POISSON: ("lambda",),
    LINTREND: ("mu0", "mu1", "sigma2"),
}


def param_names(kind: str) -> tuple:
    return _PARAM_NAMES[kind]


def _require_pos(value, name):
    if not (np.isfinite(value) and value > 0):
        raise InvalidInputError(f"{name} must be finite and > 0, got {value}")


@dataclass(frozen=True)
class NormalMeanVarPrior:
    m0: float = 0.0
    v0: float = 1000.0
    a0: float = 1.0
    b0: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.m0):
            raise InvalidInputError("m0 must be finite")
        for name in ("v0", "a0", "b0"):
            _require_pos(getattr(self, name), name)

    def packed(self) -> np.ndarray:
        return np.array([self.m0, self.v0, self.a0, self.b0], dtype=float)


@dataclass(frozen=True)
class PoissonRatePrior:
    a: float = 2.0
    b: float = 1.0

    def __post_init__(self):
        _require_pos(self.a, "a")
        _require_pos(self.b, "b")

    def packed(self) -> np.ndarray:
        return np.array([self.a, self.b], dtype=float)


@dataclass(frozen=True)
class LinearTrendPrior:
    m0: float = 0.0
    m1: float = 0.0
    v0: float = 1000.0
    v1: float = 1000.0
    a0: float = 1.0
    b0: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.m0) and np.isfinite(self.m1)):
            raise InvalidInputError("prior coefficient means must be finite")
        for name in ("v0", "v1", "a0", "b0"):
            _require_pos(getattr(self, name), name)

    def packed(self) -> np.ndarray:
        return np.array(
            [self.m0, self.m1, self.v0, self.v1, self.a0, self.b0], dtype=float
        )


_PRIOR_TYPES = {
    NORMAL: NormalMeanVarPrior,
    POISSON: PoissonRatePrior,
    LINTREND: LinearTrendPrior,
}


@dataclass(frozen=True)
class EmissionFamily:
    """An observation-model family together with its prior hyperparameters.

    ``kind`` is fixed for the lifetime of a fit; ``prior`` must be the
    matching hyperparameter type (a default-constructed one is used when
    omitted).
    """

    kind: str
    prior: object = None

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise InvalidInputError(f"unknown emission family {self.kind!r}")
        prior = self.prior if self.prior is not None else _PRIOR_TYPES[self.kind]()
        if not isinstance(prior, _PRIOR_TYPES[self.kind]):
            raise InvalidInputError(
                f"prior for {self.kind!r} must be {_PRIOR_TYPES[self.kind].__name__}"
            )
        object.__setattr__(self, "prior", prior)

    @property
    def code(self) -> int:
        return FAMILY_CODES[self.kind]

    @property
    def n_params(self) -> int:
        return N_PARAMS[self.kind]

    def packed_prior(self) -> np.ndarray:
        return self.prior.packed()


class RegimeData:
    """The (time index, value) observations currently allocated to one regime.

    Time indices are 1-based and must be strictly increasing.
    """

    def __init__(self, t, y):
        t = np.asarray(t, dtype=np.int64)
        y = np.asarray(y, dtype=float)
        if t.shape != y.shape or t.ndim != 1:
            raise InvalidInputError("t and y must be 1-D arrays of equal length")
        if t.size:
            if t[0] < 1 or (t.size > 1 and np.any(np.diff(t) <= 0)):
                raise InvalidInputError("time indices must be >= 1 and increasing")
        if y.size and not np.all(np.isfinite(y)):
            raise InvalidInputError("observations must be finite")
        self.t = t
        self.y = y

    @classmethod
    def empty(cls):
        return cls(np.empty(0, dtype=np.int64), np.empty(0))

    def __len__(self):
        return self.t.size


def _check_counts(y):
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.size and (np.any(y < 0) or np.any(y != np.floor(y))):
        raise InvalidInputError("poisson observations must be non-negative integers")


@dataclass
class SufficientStats:
    """Running accumulators for O(1) full-conditional parameter updates."""

    n: int = 0
    sum_y: float = 0.0
    sum_y2: float = 0.0
    sum_t: float = 0.0
    sum_t2: float = 0.0
    sum_ty: float = 0.0

    def add(self, t, y):
        self.n += 1
        self.sum_y += y
        self.sum_y2 += y * y
        self.sum_t += t
        self.sum_t2 += t * t
        self.sum_ty += t * y

    def remove(self, t, y):
        self.n -= 1
        self.sum_y -= y
        self.sum_y2 -= y * y
        self.sum_t -= t
        self.sum_t2 -= t * t
        self.sum_ty -= t * y


def sufficient_stats(family: EmissionFamily, data: RegimeData) -> SufficientStats:
    """Accumulate the statistics that the full conditional of theta needs."""
    if family.kind == POISSON:
        _check_counts(data.y)
    t = data.t.astype(float)
    y = data.y
    return SufficientStats(
        n=len(data),
        sum_y=float(y.sum()),
        sum_y2=float((y * y).sum()),
        sum_t=float(t.sum()),
        sum_t2=float((t * t).sum()),
        sum_ty=float((t * y).sum()),
    )


def log_obs_density(family: EmissionFamily, params, t: int, y: float) -> float:
    """Log density f(y_t | theta) of one observation under one regime.

    ``params`` is the packed parameter tuple/array for the family; the time
    index ``t`` only matters for the linear-trend family.
    """
    if not np.isfinite(y):
        raise InvalidInputError("observation must be finite")
    p = np.asarray(params, dtype=float)
    if not np.all(np.isfinite(p)):
        raise InvalidInputError("parameters must be finite")
    if family.kind == NORMAL:
        mu, sigma2 = p[0], p[1]
        _require_pos(sigma2, "sigma2")
        return -0.5 * math.log(2.0 * math.pi * sigma2) - (y - mu) ** 2 / (2.0 * sigma2)
    if family.kind == POISSON:
        lam = p[0]
        _require_pos(lam, "lambda")
        _check_counts(y)
        return y * math.log(lam) - lam - math.lgamma(y + 1.0)
    mu = p[0] + p[1] * t
    sigma2 = p[2]
    _require_pos(sigma2, "sigma2")
    return -0.5 * math.log(2.0 * math.pi * sigma2) - (y - mu) ** 2 / (2.0 * sigma2)


def draw_prior(family: EmissionFamily, rng: np.random.Generator) -> np.ndarray:
    """One draw of theta from the prior H.

    The variance draw uses the reciprocal-of-gamma parameterization of the
    inverse gamma.  The per-family stream consumption is fixed (normal: one
    standard normal then one standard gamma; poisson: one standard gamma;
    lintrend: two standard normals then one standard gamma) and is mirrored
    exactly by the compiled kernels.
    """
    h = family.prior
    if family.kind == NORMAL:
        mu = h.m0 + math.sqrt(h.v0) * rng.standard_normal()
        sigma2 = h.b0 / rng.standard_gamma(h.a0)
        return np.array([mu, sigma2])
    if family.kind == POISSON:
        lam = rng.standard_gamma(h.a) / h.b
        return np.array([lam])
    mu0 = h.m0 + math.sqrt(h.v0) * rng.standard_normal()
    mu1 = h.m1 + math.sqrt(h.v1) * rng.standard_normal()
    sigma2 = h.b0 / rng.standard_gamma(h.a0)
    return np.array([mu0, mu1, sigma2])


def _posterior_draw_normal(h, st, rng, sigma2):
    v_n = 1.0 / (1.0 / h.v0 + st.n / sigma2)
    m_n = v_n * (h.m0 / h.v0 + st.sum_y / sigma2)
    mu = m_n + math.sqrt(v_n) * rng.standard_normal()
    shape = h.a0 + 0.5 * st.n
    rate = h.b0 + 0.5 * (st.sum_y2 - 2.0 * mu * st.sum_y + st.n * mu * mu)
    sigma2 = rate / rng.standard_gamma(shape)
    return np.array([mu, sigma2])


def _posterior_draw_lintrend(h, st, rng, sigma2):
    # 2x2 precision matrix of (mu0, mu1) given sigma2
    l00 = 1.0 / h.v0 + st.n / sigma2
    l01 = st.sum_t / sigma2
    l11 = 1.0 / h.v1 + st.sum_t2 / sigma2
    r0 = h.m0 / h.v0 + st.sum_y / sigma2
    r1 = h.m1 / h.v1 + st.sum_ty / sigma2
    # Cholesky L such that L L' = precision; solve and sample in fixed order
    c00 = math.sqrt(l00)
    c10 = l01 / c00
    c11 = math.sqrt(l11 - c10 * c10)
    w0 = r0 / c00
    w1 = (r1 - c10 * w0) / c11
    m1 = w1 / c11
    m0 = (w0 - c10 * m1) / c00
    z0 = rng.standard_normal()
    z1 = rng.standard_normal()
    u1 = z1 / c11
    u0 = (z0 - c10 * u1) / c00
    mu0 = m0 + u0
    mu1 = m1 + u1
    shape = h.a0 + 0.5 * st.n
    resid = (
        st.sum_y2
        + st.n * mu0 * mu0
        + mu1 * mu1 * st.sum_t2
        + 2.0 * mu0 * mu1 * st.sum_t
        - 2.0 * mu0 * st.sum_y
        - 2.0 * mu1 * st.sum_ty
    )
    rate = h.b0 + 0.5 * resid
    sigma2 = rate / rng.standard_gamma(shape)
    return np.array([mu0, mu1, sigma2])


def posterior_draw(
    family: EmissionFamily,
    data: RegimeData,
    rng: np.random.Generator,
    current=None,
) -> np.ndarray:
    """One draw from the full conditional of theta given a regime's data.

    For the Poisson family this is the exact conjugate gamma draw.  For the
    normal families the draw is one semi-conjugate inner cycle seeded with
    the variance of ``current`` (the regime's present parameters); when
    ``current`` is omitted the cycle starts from a prior variance draw.  With
    empty data the result is distributed exactly as :func:`draw_prior`.
    """
    st = sufficient_stats(family, data)
    return posterior_draw_from_stats(family, st, rng, current)


def posterior_draw_from_stats(
    family: EmissionFamily, st: SufficientStats, rng, current=None
) -> np.ndarray:
    h = family.prior
    if not all(
        np.isfinite(v)
        for v in (st.sum_y, st.sum_y2, st.sum_t, st.sum_t2, st.sum_ty)
    ):
        raise InvalidInputError("non-finite sufficient statistics")
    if family.kind == POISSON:
        shape = h.a + st.sum_y
        rate = h.b + st.n
        return np.array([rng.standard_gamma(shape) / rate])
    if current is not None:
        sigma2 = float(np.asarray(current, dtype=float)[-1])
        _require_pos(sigma2, "sigma2")
    else:
        sigma2 = h.b0 / rng.standard_gamma(h.a0)
    if family.kind == NORMAL:
        return _posterior_draw_normal(h, st, rng, sigma2)
    return _posterior_draw_lintrend(h, st, rng, sigma2)


def _log_normal_pdf(x, mean, var):
    return -0.5 * math.log(2.0 * math.pi * var) - (x - mean) ** 2 / (2.0 * var)


def _log_invgamma_pdf(x, shape, rate):
    return (
        shape * math.log(rate)
        - math.lgamma(shape)
        - (shape + 1.0) * math.log(x)
        - rate / x
    )


def params_log_prior(family: EmissionFamily, params) -> float:
    """log h(theta), used in the stored joint log posterior of a draw."""
    p = np.asarray(params, dtype=float)
    h = family.prior
    if family.kind == NORMAL:
        return _log_normal_pdf(p[0], h.m0, h.v0) + _log_invgamma_pdf(p[1], h.a0, h.b0)
    if family.kind == POISSON:
        lam = p[0]
        return h.a * math.log(h.b) - math.lgamma(h.a) + (h.a - 1.0) * math.log(lam) - h.b * lam
    return (
        _log_normal_pdf(p[0], h.m0, h.v0)
        + _log_normal_pdf(p[1], h.m1, h.v1)
        + _log_invgamma_pdf(p[2], h.a0, h.b0)
    )

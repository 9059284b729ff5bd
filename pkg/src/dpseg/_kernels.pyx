# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled chain cores mirroring dpseg._pykernels class for class.

Every stochastic decision consumes the NumPy bit stream through the same
C routines the Generator methods use, in the same order as the Python
reference, so chains are reproducible across backends bit for bit.
"""

import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport INFINITY, exp, lgamma, log, log1p, sqrt, fabs, pi as M_PI
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport (
    random_standard_gamma,
    random_standard_normal,
    random_standard_uniform,
)

from .errors import InfeasiblePathError, InvalidStateError

cnp.import_array()

BACKEND_NAME = "compiled"

DEF FLAT = -1
DEF NORMAL = 0
DEF POISSON = 1
DEF LINTREND = 2

DEF S_NEW = 0
DEF S_LEFT = 1
DEF S_RIGHT = 2
DEF S_STAY = 3
DEF S_OWN = 4

DEF P_KEEP = 0
DEF P_LEFT_NEW = 1
DEF P_RIGHT_NEW = 2

DEF M_NEW = 0
DEF M_DOWN = 1
DEF M_UP = 2
DEF M_KEEP = 3

cdef double LOG2PI = log(2.0 * M_PI)


cdef inline bitgen_t *_get_bitgen(object rng) except NULL:
    capsule = rng.bit_generator.capsule
    if not PyCapsule_IsValid(capsule, "BitGenerator"):
        raise ValueError("invalid BitGenerator capsule")
    return <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")


cdef inline double _lae(double a, double b) nogil:
    # log(exp(a) + exp(b)) with the branch structure mirrored in Python
    cdef double hi = a if a > b else b
    cdef double lo = b if a > b else a
    if hi == -INFINITY:
        return -INFINITY
    return hi + log1p(exp(lo - hi))


cdef inline int _categorical(double *lws, int n, double u) nogil:
    cdef double m = lws[0]
    cdef double tot = 0.0, acc = 0.0, thresh
    cdef int i
    for i in range(1, n):
        if lws[i] > m:
            m = lws[i]
    for i in range(n):
        tot += exp(lws[i] - m)
    thresh = u * tot
    for i in range(n):
        acc += exp(lws[i] - m)
        if thresh <= acc:
            return i
    return n - 1


cdef class ChainCore:
    """Marginalized change-point chain; see the Python twin for semantics."""

    cdef readonly Py_ssize_t T
    cdef int fam, npar
    cdef double[::1] y, tv, cy, cy2, ct, ct2, cty, clg
    cdef double hyper[8]
    cdef public double sigma_beta2, step, beta
    cdef long[::1] starts, ends
    cdef int _K
    cdef double[:, ::1] _thetas
    cdef object rng
    cdef bitgen_t *bg
    cdef public long beta_accepts, beta_updates
    cdef int win_acc, win_n

    def __init__(self, y, tv, fam, hyper, sigma_beta2, beta_step, rng):
        cdef cnp.ndarray[cnp.float64_t, ndim=1] yarr = np.ascontiguousarray(y, dtype=np.float64)
        cdef cnp.ndarray[cnp.float64_t, ndim=1] tarr = np.ascontiguousarray(tv, dtype=np.float64)
        cdef cnp.ndarray[cnp.float64_t, ndim=1] harr = np.ascontiguousarray(hyper, dtype=np.float64)
        cdef Py_ssize_t i
        self.T = yarr.shape[0]
        self.y = yarr
        self.tv = tarr
        self.fam = int(fam)
        self.npar = 2 if self.fam == NORMAL else (3 if self.fam == LINTREND else 1)
        for i in range(min(8, harr.shape[0])):
            self.hyper[i] = harr[i]
        self.sigma_beta2 = float(sigma_beta2)
        self.step = float(beta_step)
        self.rng = rng
        self.bg = _get_bitgen(rng) if rng is not None else NULL
        self._prefix()
        self.starts = np.zeros(self.T, dtype=np.int64)
        self.ends = np.zeros(self.T, dtype=np.int64)
        self._thetas = np.zeros((self.T, 3), dtype=np.float64)
        self._K = 0
        self.beta = 1.0
        self.beta_accepts = 0
        self.beta_updates = 0
        self.win_acc = 0
        self.win_n = 0

    # ------------------------------------------------------------------
    # data handling

    cdef void _prefix(self):
        cdef Py_ssize_t T = self.T, i
        cdef cnp.ndarray[cnp.float64_t, ndim=1] cy = np.zeros(T + 1)
        cdef cnp.ndarray[cnp.float64_t, ndim=1] cy2 = np.zeros(T + 1)
        cdef cnp.ndarray[cnp.float64_t, ndim=1] ct = np.zeros(T + 1)
        cdef cnp.ndarray[cnp.float64_t, ndim=1] ct2 = np.zeros(T + 1)
        cdef cnp.ndarray[cnp.float64_t, ndim=1] cty = np.zeros(T + 1)
        cdef cnp.ndarray[cnp.float64_t, ndim=1] clg = np.zeros(T + 1)
        cdef double v, t
        for i in range(T):
            v = self.y[i]
            t = self.tv[i]
            cy[i + 1] = cy[i] + v
            cy2[i + 1] = cy2[i] + v * v
            ct[i + 1] = ct[i] + t
            ct2[i + 1] = ct2[i] + t * t
            cty[i + 1] = cty[i] + t * v
            clg[i + 1] = clg[i] + (lgamma(v + 1.0) if self.fam == POISSON else 0.0)
        self.cy, self.cy2, self.ct, self.ct2, self.cty, self.clg = cy, cy2, ct, ct2, cty, clg

    def set_y(self, y):
        cdef cnp.ndarray[cnp.float64_t, ndim=1] yarr = np.ascontiguousarray(y, dtype=np.float64)
        if yarr.shape[0] != self.T:
            raise InvalidStateError("replacement data must keep the same length")
        self.y = yarr
        self._prefix()

    # ------------------------------------------------------------------
    # state handling

    @property
    def K(self):
        return self._K

    def init_state(self, K0):
        cdef Py_ssize_t T = self.T
        cdef int k, kk
        cdef long base, rem, pos, ln
        cdef int K0c = max(1, min(int(K0), <int> T))
        base = T // K0c
        rem = T % K0c
        pos = 0
        for k in range(K0c):
            ln = base + (1 if k < rem else 0)
            self.starts[k] = pos
            self.ends[k] = pos + ln - 1
            pos += ln
        self._K = K0c
        for k in range(K0c):
            self._draw_prior(&self._thetas[k, 0])
        self.beta = fabs(sqrt(self.sigma_beta2) * random_standard_normal(self.bg))

    def set_state(self, starts, ends, thetas, beta):
        cdef int k, j
        cdef int K = len(starts)
        for k in range(K):
            self.starts[k] = int(starts[k])
            self.ends[k] = int(ends[k])
            row = thetas[k]
            for j in range(self.npar):
                self._thetas[k, j] = float(row[j])
        self._K = K
        self.beta = float(beta)

    def labels(self):
        cdef cnp.ndarray[cnp.int32_t, ndim=1] lab = np.empty(self.T, dtype=np.int32)
        cdef int k
        cdef long t
        for k in range(self._K):
            for t in range(self.starts[k], self.ends[k] + 1):
                lab[t] = k + 1
        return lab

    def theta_matrix(self):
        return np.asarray(self._thetas[: self._K, : self.npar]).copy()

    @property
    def thetas(self):
        return [np.asarray(self._thetas[k, : self.npar]).copy() for k in range(self._K)]

    cdef int _block_of(self, long t) nogil:
        cdef int lo = 0, hi = self._K - 1, mid
        while lo < hi:
            mid = (lo + hi + 1) >> 1
            if self.starts[mid] <= t:
                lo = mid
            else:
                hi = mid - 1
        return lo

    # ------------------------------------------------------------------
    # emission math

    cdef inline double _rs(self, double[::1] c, long a, long b) nogil:
        return c[b + 1] - c[a]

    cdef double _ll_range(self, double *th, long a, long b) nogil:
        cdef double L, sy, sy2, mu, s2, q, mu0, mu1, st, st2, sty, lam
        if self.fam == FLAT:
            return 0.0
        L = <double> (b - a + 1)
        sy = self._rs(self.cy, a, b)
        if self.fam == POISSON:
            lam = th[0]
            return sy * log(lam) - L * lam - self._rs(self.clg, a, b)
        sy2 = self._rs(self.cy2, a, b)
        if self.fam == NORMAL:
            mu = th[0]
            s2 = th[1]
            q = sy2 - 2.0 * mu * sy + L * mu * mu
        else:
            mu0 = th[0]
            mu1 = th[1]
            s2 = th[2]
            st = self._rs(self.ct, a, b)
            st2 = self._rs(self.ct2, a, b)
            sty = self._rs(self.cty, a, b)
            q = (sy2 + L * mu0 * mu0 + mu1 * mu1 * st2
                 + 2.0 * mu0 * mu1 * st - 2.0 * mu0 * sy - 2.0 * mu1 * sty)
        return -0.5 * L * (LOG2PI + log(s2)) - q / (2.0 * s2)

    cdef inline double _ll_point(self, double *th, long t) nogil:
        return self._ll_range(th, t, t)

    cdef void _draw_prior(self, double *out):
        cdef double *h = self.hyper
        if self.fam == FLAT:
            out[0] = 0.0
            return
        if self.fam == NORMAL:
            out[0] = h[0] + sqrt(h[1]) * random_standard_normal(self.bg)
            out[1] = h[3] / random_standard_gamma(self.bg, h[2])
            return
        if self.fam == POISSON:
            out[0] = random_standard_gamma(self.bg, h[0]) / h[1]
            return
        out[0] = h[0] + sqrt(h[2]) * random_standard_normal(self.bg)
        out[1] = h[1] + sqrt(h[3]) * random_standard_normal(self.bg)
        out[2] = h[5] / random_standard_gamma(self.bg, h[4])

    cdef void _post_draw_range(self, long a, long b, double *cur, double *out):
        cdef double *h = self.hyper
        cdef double n, sy, sy2, s2, v_n, m_n, mu, rate
        cdef double m0, m1, v0, v1, a0, b0, st, st2, sty
        cdef double l00, l01, l11, r0, r1, c00, c10, c11, w0, w1, mn0, mn1
        cdef double z0, z1, u0, u1, mu0, mu1, resid
        if self.fam == FLAT:
            out[0] = 0.0
            return
        n = <double> (b - a + 1)
        sy = self._rs(self.cy, a, b)
        if self.fam == POISSON:
            out[0] = random_standard_gamma(self.bg, h[0] + sy) / (h[1] + n)
            return
        sy2 = self._rs(self.cy2, a, b)
        s2 = cur[self.npar - 1]
        if self.fam == NORMAL:
            v_n = 1.0 / (1.0 / h[1] + n / s2)
            m_n = v_n * (h[0] / h[1] + sy / s2)
            mu = m_n + sqrt(v_n) * random_standard_normal(self.bg)
            rate = h[3] + 0.5 * (sy2 - 2.0 * mu * sy + n * mu * mu)
            out[0] = mu
            out[1] = rate / random_standard_gamma(self.bg, h[2] + 0.5 * n)
            return
        m0 = h[0]; m1 = h[1]; v0 = h[2]; v1 = h[3]; a0 = h[4]; b0 = h[5]
        st = self._rs(self.ct, a, b)
        st2 = self._rs(self.ct2, a, b)
        sty = self._rs(self.cty, a, b)
        l00 = 1.0 / v0 + n / s2
        l01 = st / s2
        l11 = 1.0 / v1 + st2 / s2
        r0 = m0 / v0 + sy / s2
        r1 = m1 / v1 + sty / s2
        c00 = sqrt(l00)
        c10 = l01 / c00
        c11 = sqrt(l11 - c10 * c10)
        w0 = r0 / c00
        w1 = (r1 - c10 * w0) / c11
        mn1 = w1 / c11
        mn0 = (w0 - c10 * mn1) / c00
        z0 = random_standard_normal(self.bg)
        z1 = random_standard_normal(self.bg)
        u1 = z1 / c11
        u0 = (z0 - c10 * u1) / c00
        mu0 = mn0 + u0
        mu1 = mn1 + u1
        resid = (sy2 + n * mu0 * mu0 + mu1 * mu1 * st2
                 + 2.0 * mu0 * mu1 * st - 2.0 * mu0 * sy - 2.0 * mu1 * sty)
        rate = b0 + 0.5 * resid
        out[0] = mu0
        out[1] = mu1
        out[2] = rate / random_standard_gamma(self.bg, a0 + 0.5 * n)

    cdef double _theta_log_prior(self, double *th) nogil:
        cdef double *h = self.hyper
        cdef double lp, a, b
        if self.fam == FLAT:
            return 0.0
        if self.fam == NORMAL:
            lp = -0.5 * (LOG2PI + log(h[1])) - (th[0] - h[0]) * (th[0] - h[0]) / (2.0 * h[1])
            lp += h[2] * log(h[3]) - lgamma(h[2]) - (h[2] + 1.0) * log(th[1]) - h[3] / th[1]
            return lp
        if self.fam == POISSON:
            a = h[0]; b = h[1]
            return a * log(b) - lgamma(a) + (a - 1.0) * log(th[0]) - b * th[0]
        lp = -0.5 * (LOG2PI + log(h[2])) - (th[0] - h[0]) * (th[0] - h[0]) / (2.0 * h[2])
        lp += -0.5 * (LOG2PI + log(h[3])) - (th[1] - h[1]) * (th[1] - h[1]) / (2.0 * h[3])
        lp += h[4] * log(h[5]) - lgamma(h[4]) - (h[4] + 1.0) * log(th[2]) - h[5] / th[2]
        return lp

    # ------------------------------------------------------------------
    # sequence prior

    cdef inline double _gamma_log(self, double c, double n, double beta) nogil:
        return lgamma(beta + 1.0) + lgamma(n + 1.0) - lgamma(n + beta + 2.0 - c)

    cpdef double seq_log_prior_at(self, double beta):
        cdef int K = self._K, k
        cdef double lp = (K - 1) * log(beta)
        cdef double n
        for k in range(K):
            n = <double> (self.ends[k] - self.starts[k])
            lp += self._gamma_log(1.0 if k == K - 1 else 0.0, n, beta)
        return lp

    def log_posterior(self):
        cdef double lp = self.seq_log_prior_at(self.beta)
        cdef int k
        for k in range(self._K):
            lp += self._ll_range(&self._thetas[k, 0], self.starts[k], self.ends[k])
            lp += self._theta_log_prior(&self._thetas[k, 0])
        cdef double s2 = self.sigma_beta2
        lp += 0.5 * log(2.0 / (M_PI * s2)) - self.beta * self.beta / (2.0 * s2)
        return lp

    # ------------------------------------------------------------------
    # block surgery

    cdef void _drop(self, int k):
        cdef int i, j
        for i in range(k, self._K - 1):
            self.starts[i] = self.starts[i + 1]
            self.ends[i] = self.ends[i + 1]
            for j in range(3):
                self._thetas[i, j] = self._thetas[i + 1, j]
        self._K -= 1

    cdef void _insert(self, int k, long st, long en, double *th):
        cdef int i, j
        for i in range(self._K, k, -1):
            self.starts[i] = self.starts[i - 1]
            self.ends[i] = self.ends[i - 1]
            for j in range(3):
                self._thetas[i, j] = self._thetas[i - 1, j]
        self.starts[k] = st
        self.ends[k] = en
        for j in range(3):
            self._thetas[k, j] = th[j]
        self._K += 1

    # ------------------------------------------------------------------
    # single-site move

    cdef bint _single_eligible(self, long t) nogil:
        cdef int k = self._block_of(t)
        return (t == self.starts[k] and t > 0) or (
            t == self.ends[k] and t < self.T - 1
        )

    cdef int _single_options(self, long t, double *theta_star, double *lws, int *tags):
        cdef int k = self._block_of(t)
        cdef long st = self.starts[k], en = self.ends[k]
        cdef bint first = t == st, last = t == en
        cdef double beta = self.beta
        cdef double lb = log(beta)
        cdef int K = self._K
        cdef Py_ssize_t T = self.T
        cdef int n = 0
        cdef double nl, nr, n_stay, adj
        if first and last:
            if t > 0:
                nl = <double> (self.ends[k - 1] - self.starts[k - 1])
                tags[n] = S_LEFT
                lws[n] = (log(nl + 1.0) - log(nl + 2.0 + beta)
                          + self._ll_point(&self._thetas[k - 1, 0], t))
                n += 1
            if t < T - 1:
                nr = <double> (self.ends[k + 1] - self.starts[k + 1])
                adj = 1.0 if k + 1 == K - 1 else 0.0
                tags[n] = S_RIGHT
                lws[n] = (log(nr + 1.0) - log(nr + 2.0 + beta - adj)
                          + self._ll_point(&self._thetas[k + 1, 0], t))
                n += 1
            tags[n] = S_OWN
            lws[n] = lb - log1p(beta) + self._ll_point(&self._thetas[k, 0], t)
            n += 1
        elif first:
            nl = <double> (self.ends[k - 1] - self.starts[k - 1])
            n_stay = <double> (en - st - 1)
            tags[0] = S_NEW
            lws[0] = lb - log1p(beta) + self._ll_point(theta_star, t)
            tags[1] = S_LEFT
            lws[1] = (log(nl + 1.0) - log(nl + 2.0 + beta)
                      + self._ll_point(&self._thetas[k - 1, 0], t))
            adj = 1.0 if k == K - 1 else 0.0
            tags[2] = S_STAY
            lws[2] = (log(n_stay + 1.0) - log(n_stay + 2.0 + beta - adj)
                      + self._ll_point(&self._thetas[k, 0], t))
            n = 3
        else:
            n_stay = <double> (en - st - 1)
            nr = <double> (self.ends[k + 1] - self.starts[k + 1])
            tags[0] = S_NEW
            lws[0] = lb - log1p(beta) + self._ll_point(theta_star, t)
            tags[1] = S_STAY
            lws[1] = (log(n_stay + 1.0) - log(n_stay + 2.0 + beta)
                      + self._ll_point(&self._thetas[k, 0], t))
            adj = 1.0 if k + 1 == K - 1 else 0.0
            tags[2] = S_RIGHT
            lws[2] = (log(nr + 1.0) - log(nr + 2.0 + beta - adj)
                      + self._ll_point(&self._thetas[k + 1, 0], t))
            n = 3
        return n

    cdef void _apply_single(self, long t, int tag, double *theta_star):
        cdef int k = self._block_of(t)
        cdef long st = self.starts[k], en = self.ends[k]
        cdef bint singleton = st == en
        if tag == S_STAY or tag == S_OWN:
            return
        if tag == S_LEFT:
            self.ends[k - 1] = t
            if singleton:
                self._drop(k)
            else:
                self.starts[k] = t + 1
        elif tag == S_RIGHT:
            self.starts[k + 1] = t
            if singleton:
                self._drop(k)
            else:
                self.ends[k] = t - 1
        elif tag == S_NEW:
            if t == st:
                self._insert(k, t, t, theta_star)
                self.starts[k + 1] = t + 1
            else:
                self.ends[k] = t - 1
                self._insert(k + 1, t, t, theta_star)

    cdef void _single_sweep(self, bint forward):
        cdef long t, idx
        cdef int k, nopt, pick
        cdef bint singleton
        cdef double theta_star[3]
        cdef double lws[3]
        cdef int tags[3]
        cdef double u
        for idx in range(self.T):
            t = idx if forward else self.T - 1 - idx
            if not self._single_eligible(t):
                continue
            k = self._block_of(t)
            singleton = self.starts[k] == self.ends[k]
            if not singleton:
                self._draw_prior(theta_star)
            nopt = self._single_options(t, theta_star, lws, tags)
            u = random_standard_uniform(self.bg)
            pick = _categorical(lws, nopt, u)
            self._apply_single(t, tags[pick], theta_star)

    # ------------------------------------------------------------------
    # split move

    cdef int _split_options(self, long t, double *theta_star, double *lws, int *tags):
        cdef int k = self._block_of(t)
        cdef long st = self.starts[k], en = self.ends[k]
        cdef double beta = self.beta
        cdef double lb = log(beta)
        cdef double c = 1.0 if k == self._K - 1 else 0.0
        cdef double nk = <double> (en - st)
        cdef double nm = <double> (t - st - 1)
        cdef double npl = <double> (en - t)
        cdef double ll_lo_k = self._ll_range(&self._thetas[k, 0], st, t - 1)
        cdef double ll_hi_k = self._ll_range(&self._thetas[k, 0], t, en)
        cdef double ll_lo_s = self._ll_range(theta_star, st, t - 1)
        cdef double ll_hi_s = self._ll_range(theta_star, t, en)
        cdef double base = lb + self._gamma_log(0.0, nm, beta) + self._gamma_log(c, npl, beta)
        tags[0] = P_KEEP
        lws[0] = self._gamma_log(c, nk, beta) + ll_lo_k + ll_hi_k
        tags[1] = P_LEFT_NEW
        lws[1] = base + ll_lo_s + ll_hi_k
        tags[2] = P_RIGHT_NEW
        lws[2] = base + ll_lo_k + ll_hi_s
        return 3

    cdef void _apply_split(self, long t, int tag, double *theta_star):
        cdef int k, j
        cdef long en0
        cdef double keep[3]
        if tag == P_KEEP:
            return
        k = self._block_of(t)
        en0 = self.ends[k]
        self.ends[k] = t - 1
        if tag == P_LEFT_NEW:
            for j in range(3):
                keep[j] = self._thetas[k, j]
                self._thetas[k, j] = theta_star[j]
            self._insert(k + 1, t, en0, keep)
        else:
            self._insert(k + 1, t, en0, theta_star)

    cdef void _split_sweep(self, bint forward):
        cdef long t, idx
        cdef int nopt, pick
        cdef double theta_star[3]
        cdef double lws[3]
        cdef int tags[3]
        cdef double u
        for idx in range(self.T):
            t = idx if forward else self.T - 1 - idx
            if t == self.starts[self._block_of(t)]:
                continue
            self._draw_prior(theta_star)
            nopt = self._split_options(t, theta_star, lws, tags)
            u = random_standard_uniform(self.bg)
            pick = _categorical(lws, nopt, u)
            self._apply_split(t, tags[pick], theta_star)

    # ------------------------------------------------------------------
    # merge move

    cdef int _merge_options(self, int k, double *theta_star, double *lws, int *tags):
        cdef int K = self._K
        cdef double beta = self.beta
        cdef double lb = log(beta)
        cdef bint has_left = k > 0
        cdef bint has_right = k < K - 1
        cdef long st = self.starts[k], en = self.ends[k]
        cdef double nk = <double> (en - st)
        cdef double nl = <double> (self.ends[k - 1] - self.starts[k - 1]) if has_left else 0.0
        cdef double nr = <double> (self.ends[k + 1] - self.starts[k + 1]) if has_right else 0.0
        cdef double lw_left = self._gamma_log(0.0, nl, beta) if has_left else 0.0
        cdef double lw_right = self._gamma_log(0.0, nr, beta) if has_right else 0.0
        cdef double stay = lb + lw_left + self._gamma_log(0.0, nk, beta) + lw_right
        cdef int n = 0
        tags[n] = M_NEW
        lws[n] = stay + self._ll_range(theta_star, st, en)
        n += 1
        if has_left:
            tags[n] = M_DOWN
            lws[n] = (self._gamma_log(0.0, nl + nk + 1.0, beta) + lw_right
                      + self._ll_range(&self._thetas[k - 1, 0], st, en))
            n += 1
        if has_right:
            tags[n] = M_UP
            lws[n] = (lw_left + self._gamma_log(0.0, nk + nr + 1.0, beta)
                      + self._ll_range(&self._thetas[k + 1, 0], st, en))
            n += 1
        tags[n] = M_KEEP
        lws[n] = stay + self._ll_range(&self._thetas[k, 0], st, en)
        return n + 1

    cdef void _apply_merge(self, int k, int tag, double *theta_star):
        cdef int j
        if tag == M_KEEP:
            return
        if tag == M_NEW:
            for j in range(3):
                self._thetas[k, j] = theta_star[j]
        elif tag == M_DOWN:
            self.ends[k - 1] = self.ends[k]
            self._drop(k)
        else:
            self.starts[k + 1] = self.starts[k]
            self._drop(k)

    cdef void _merge_scan(self):
        cdef int k = 0, nopt, pick
        cdef double theta_star[3]
        cdef double lws[4]
        cdef int tags[4]
        cdef double u
        while k < self._K:
            self._draw_prior(theta_star)
            nopt = self._merge_options(k, theta_star, lws, tags)
            u = random_standard_uniform(self.bg)
            pick = _categorical(lws, nopt, u)
            self._apply_merge(k, tags[pick], theta_star)
            if tags[pick] != M_DOWN:
                k += 1

    # ------------------------------------------------------------------
    # parameter and concentration updates

    def update_thetas(self):
        cdef int k
        cdef double out[3]
        cdef int j
        for k in range(self._K):
            self._post_draw_range(self.starts[k], self.ends[k], &self._thetas[k, 0], out)
            for j in range(3):
                self._thetas[k, j] = out[j]

    def update_beta(self, adapt):
        self._update_beta(1 if adapt else 0)

    cdef void _update_beta(self, bint adapt):
        cdef double z = random_standard_normal(self.bg)
        cdef double u = random_standard_uniform(self.bg)
        cdef double beta = self.beta
        cdef double lb = log(beta)
        cdef double lb_new = lb + self.step * z
        cdef double beta_new = exp(lb_new)
        cdef double s2 = self.sigma_beta2
        cdef double num = self.seq_log_prior_at(beta_new) - beta_new * beta_new / (2.0 * s2) + lb_new
        cdef double den = self.seq_log_prior_at(beta) - beta * beta / (2.0 * s2) + lb
        cdef bint accepted = log(u) < num - den
        cdef double rate
        if accepted:
            self.beta = beta_new
        self.beta_updates += 1
        self.beta_accepts += (1 if accepted else 0)
        if adapt:
            self.win_n += 1
            self.win_acc += (1 if accepted else 0)
            if self.win_n == 50:
                rate = self.win_acc / 50.0
                self.step *= exp(0.5 * (rate - 0.3))
                self.step = min(max(self.step, 1e-3), 10.0)
                self.win_n = 0
                self.win_acc = 0

    def iteration(self, p_single, p_split, p_forward, adapt):
        cdef double ps = p_single, pp = p_split, pf = p_forward
        cdef double u = random_standard_uniform(self.bg)
        cdef bint forward
        if u < ps:
            forward = random_standard_uniform(self.bg) < pf
            self._single_sweep(forward)
        elif u < ps + pp:
            forward = random_standard_uniform(self.bg) < pf
            self._split_sweep(forward)
        else:
            self._merge_scan()
        self.update_thetas()
        self._update_beta(1 if adapt else 0)


cdef class FiniteCore:
    """Fixed-K* constrained-HMM sampler core (compiled twin)."""

    cdef ChainCore inner
    cdef readonly int kstar
    cdef public double beta
    cdef double _step
    cdef double[::1] _pis
    cdef double[:, ::1] filt
    cdef long[::1] _starts, _ends
    cdef object rng
    cdef bitgen_t *bg
    cdef public long beta_accepts, beta_updates
    cdef int win_acc, win_n

    def __init__(self, y, tv, fam, hyper, kstar, sigma_beta2, beta_step, rng):
        self.kstar = int(kstar)
        if self.kstar < 1:
            raise InvalidStateError("K* must be >= 1")
        if len(y) < self.kstar:
            raise InfeasiblePathError(
                f"cannot visit {self.kstar} regimes with T={len(y)}"
            )
        self.inner = ChainCore(y, tv, fam, hyper, sigma_beta2, beta_step, rng)
        self.rng = rng
        self.bg = _get_bitgen(rng) if rng is not None else NULL
        self._pis = np.ones(self.kstar)
        self.filt = np.zeros((self.inner.T, self.kstar))
        self._starts = np.zeros(self.kstar, dtype=np.int64)
        self._ends = np.zeros(self.kstar, dtype=np.int64)
        self.beta = 1.0
        self._step = float(beta_step)
        self.beta_accepts = 0
        self.beta_updates = 0
        self.win_acc = 0
        self.win_n = 0

    @property
    def pis(self):
        return np.asarray(self._pis).copy()

    @pis.setter
    def pis(self, value):
        cdef int k
        arr = np.ascontiguousarray(value, dtype=np.float64)
        if arr.shape[0] != self.kstar:
            raise InvalidStateError("need a full stay-probability vector")
        for k in range(self.kstar):
            self._pis[k] = arr[k]

    @property
    def thetas(self):
        return self.inner.thetas

    @thetas.setter
    def thetas(self, value):
        cdef int k, j
        if len(value) != self.kstar:
            raise InvalidStateError("need one theta per regime")
        for k in range(self.kstar):
            row = value[k]
            for j in range(self.inner.npar):
                self.inner._thetas[k, j] = float(row[j])

    @property
    def step(self):
        return self._step

    def init_state(self, starts, ends):
        cdef int k, j
        cdef double g1, g2, n_k
        cdef double out[3]
        if len(starts) != self.kstar or len(ends) != self.kstar:
            raise InvalidStateError("need exactly K* initial blocks")
        self.beta = fabs(sqrt(self.inner.sigma_beta2) * random_standard_normal(self.bg))
        for k in range(self.kstar):
            self._starts[k] = int(starts[k])
            self._ends[k] = int(ends[k])
        for k in range(self.kstar):
            self.inner._draw_prior(&self.inner._thetas[k, 0])
        for k in range(self.kstar):
            self.inner._post_draw_range(
                self._starts[k], self._ends[k], &self.inner._thetas[k, 0], out
            )
            for j in range(3):
                self.inner._thetas[k, j] = out[j]
        for k in range(self.kstar):
            self._pis[k] = 1.0
        for k in range(self.kstar - 1):
            n_k = <double> (self._ends[k] - self._starts[k])
            g1 = random_standard_gamma(self.bg, 1.0 + n_k)
            g2 = random_standard_gamma(self.bg, self.beta + 1.0)
            self._pis[k] = g1 / (g1 + g2)

    def ffbs(self):
        self._ffbs()

    cdef void _ffbs(self) except *:
        cdef Py_ssize_t T = self.inner.T
        cdef int Ks = self.kstar, k, j
        cdef long t
        cdef double m, tot, u, w_prev, la, lb
        cdef double[::1] lstay = np.empty(Ks)
        cdef double[::1] ljump = np.empty(Ks)
        cdef double[::1] prev = np.full(Ks, -np.inf)
        cdef double[::1] cur = np.empty(Ks)
        cdef long[::1] s = np.zeros(T, dtype=np.int64)
        for k in range(Ks):
            lstay[k] = log(self._pis[k])
            ljump[k] = log1p(-self._pis[k]) if k < Ks - 1 else -INFINITY
        prev[0] = 0.0
        for k in range(Ks):
            self.filt[0, k] = prev[k]
        for t in range(1, T):
            for k in range(Ks):
                la = prev[k] + lstay[k]
                lb = prev[k - 1] + ljump[k - 1] if k > 0 else -INFINITY
                cur[k] = _lae(la, lb) + self.inner._ll_point(
                    &self.inner._thetas[k, 0], t
                )
            m = cur[0]
            for k in range(1, Ks):
                if cur[k] > m:
                    m = cur[k]
            if m == -INFINITY:
                raise InfeasiblePathError("zero filtered mass in forward pass")
            for k in range(Ks):
                prev[k] = cur[k] - m
                self.filt[t, k] = prev[k]
        if self.filt[T - 1, Ks - 1] == -INFINITY:
            raise InfeasiblePathError("final state has zero filtered mass")
        s[T - 1] = Ks - 1
        for t in range(T - 2, -1, -1):
            j = <int> s[t + 1]
            if j == 0:
                s[t] = 0
                continue
            la = self.filt[t, j - 1] + ljump[j - 1]
            lb = self.filt[t, j] + lstay[j]
            m = la if la > lb else lb
            w_prev = exp(la - m)
            tot = w_prev + exp(lb - m)
            u = random_standard_uniform(self.bg)
            s[t] = j - 1 if u * tot <= w_prev else j
        cdef int nb = 0
        self._starts[0] = 0
        for t in range(1, T):
            if s[t] != s[t - 1]:
                self._ends[nb] = t - 1
                nb += 1
                self._starts[nb] = t
        self._ends[nb] = T - 1
        if nb + 1 != Ks:
            raise InvalidStateError("sampled path does not visit every regime")

    def update_pis(self):
        cdef int k
        cdef double n_k, g1, g2
        for k in range(self.kstar - 1):
            n_k = <double> (self._ends[k] - self._starts[k])
            g1 = random_standard_gamma(self.bg, 1.0 + n_k)
            g2 = random_standard_gamma(self.bg, self.beta + 1.0)
            self._pis[k] = g1 / (g1 + g2)

    def update_thetas(self):
        cdef int k, j
        cdef double out[3]
        for k in range(self.kstar):
            self.inner._post_draw_range(
                self._starts[k], self._ends[k], &self.inner._thetas[k, 0], out
            )
            for j in range(3):
                self.inner._thetas[k, j] = out[j]

    def update_beta(self, adapt):
        self._update_beta(1 if adapt else 0)

    cdef void _update_beta(self, bint adapt):
        cdef double z = random_standard_normal(self.bg)
        cdef double u = random_standard_uniform(self.bg)
        cdef double beta = self.beta
        cdef double lb = log(beta)
        cdef double lb_new = lb + self._step * z
        cdef double beta_new = exp(lb_new)
        cdef double s2 = self.inner.sigma_beta2
        cdef double sl1p = 0.0
        cdef int k
        cdef int m = self.kstar - 1
        for k in range(m):
            sl1p += log1p(-self._pis[k])
        cdef double num = m * lb_new + (beta_new - 1.0) * sl1p - beta_new * beta_new / (2.0 * s2)
        cdef double den = m * lb + (beta - 1.0) * sl1p - beta * beta / (2.0 * s2)
        cdef bint accepted = log(u) < num - den + lb_new - lb
        cdef double rate
        if accepted:
            self.beta = beta_new
        self.beta_updates += 1
        self.beta_accepts += (1 if accepted else 0)
        if adapt:
            self.win_n += 1
            self.win_acc += (1 if accepted else 0)
            if self.win_n == 50:
                rate = self.win_acc / 50.0
                self._step *= exp(0.5 * (rate - 0.3))
                self._step = min(max(self._step, 1e-3), 10.0)
                self.win_n = 0
                self.win_acc = 0

    def iteration(self, adapt):
        self._ffbs()
        self.update_pis()
        self.update_thetas()
        self._update_beta(1 if adapt else 0)

    def labels(self):
        cdef cnp.ndarray[cnp.int32_t, ndim=1] lab = np.empty(self.inner.T, dtype=np.int32)
        cdef int k
        cdef long t
        for k in range(self.kstar):
            for t in range(self._starts[k], self._ends[k] + 1):
                lab[t] = k + 1
        return lab

    def theta_matrix(self):
        return np.asarray(self.inner._thetas[: self.kstar, : self.inner.npar]).copy()

    def log_posterior(self):
        cdef double lp = 0.0
        cdef int k
        cdef double n_k
        for k in range(self.kstar):
            n_k = <double> (self._ends[k] - self._starts[k])
            lp += self.inner._ll_range(
                &self.inner._thetas[k, 0], self._starts[k], self._ends[k]
            )
            lp += self.inner._theta_log_prior(&self.inner._thetas[k, 0])
            if k < self.kstar - 1:
                lp += n_k * log(self._pis[k]) + log1p(-self._pis[k])
                lp += log(self.beta) + (self.beta - 1.0) * log1p(-self._pis[k])
        cdef double s2 = self.inner.sigma_beta2
        lp += 0.5 * log(2.0 / (M_PI * s2)) - self.beta * self.beta / (2.0 * s2)
        return lp

    def loglik_terms(self, thetas, pis):
        cdef Py_ssize_t T = self.inner.T
        cdef int Ks = self.kstar, k
        cdef long t
        cdef cnp.ndarray[cnp.float64_t, ndim=2] th = np.ascontiguousarray(thetas, dtype=np.float64)
        cdef cnp.ndarray[cnp.float64_t, ndim=1] pv = np.ascontiguousarray(pis, dtype=np.float64)
        cdef double[::1] lstay = np.empty(Ks)
        cdef double[::1] ljump = np.empty(Ks)
        cdef double[::1] prev = np.empty(Ks)
        cdef double[::1] cur = np.empty(Ks)
        cdef double la, lb, log_joint, log_prior
        cdef bint with_data
        for k in range(Ks):
            lstay[k] = log(pv[k])
            ljump[k] = log1p(-pv[k]) if k < Ks - 1 else -INFINITY
        for with_data in (True, False):
            for k in range(Ks):
                prev[k] = -INFINITY
            prev[0] = self.inner._ll_point(&th[0, 0], 0) if with_data else 0.0
            for t in range(1, T):
                for k in range(Ks):
                    la = prev[k] + lstay[k]
                    lb = prev[k - 1] + ljump[k - 1] if k > 0 else -INFINITY
                    cur[k] = _lae(la, lb)
                    if with_data:
                        cur[k] += self.inner._ll_point(&th[k, 0], t)
                for k in range(Ks):
                    prev[k] = cur[k]
            if with_data:
                log_joint = prev[Ks - 1]
            else:
                log_prior = prev[Ks - 1]
        return log_joint, log_prior


cdef class KoCore:
    """Collapsing competitor replica (compiled twin)."""

    cdef ChainCore inner
    cdef double alpha
    cdef object rng
    cdef bitgen_t *bg

    def __init__(self, y, tv, fam, hyper, alpha, sigma_beta2, beta_step, rng):
        self.inner = ChainCore(y, tv, fam, hyper, sigma_beta2, beta_step, rng)
        self.alpha = float(alpha)
        self.rng = rng
        self.bg = _get_bitgen(rng) if rng is not None else NULL

    @property
    def K(self):
        return self.inner._K

    @property
    def beta(self):
        return self.inner.beta

    def init_state(self, K0):
        self.inner.init_state(K0)

    def labels(self):
        return self.inner.labels()

    def theta_matrix(self):
        return self.inner.theta_matrix()

    def ko_joint_at(self, beta):
        return self._ko_joint_at(beta)

    cdef double _ko_joint_at(self, double beta):
        cdef ChainCore ch = self.inner
        cdef double a = self.alpha
        cdef int K = ch._K, k
        cdef double lp = K * log(beta)
        cdef double n
        for k in range(K):
            n = <double> (ch.ends[k] - ch.starts[k])
            lp += (lgamma(a + beta) - lgamma(a)
                   + lgamma(n + a) - lgamma(n + 1.0 + a + beta))
        return lp

    cdef void _allocation_sweep(self):
        cdef ChainCore ch = self.inner
        cdef double a = self.alpha
        cdef Py_ssize_t T = ch.T
        cdef long t, st, en
        cdef int k
        cdef double beta, nl, nr, p_stay, p_right, u
        for t in range(T):
            if not ch._single_eligible(t):
                continue
            k = ch._block_of(t)
            st = ch.starts[k]
            en = ch.ends[k]
            beta = ch.beta
            if t == st and t > 0:
                nl = <double> (ch.ends[k - 1] - ch.starts[k - 1])
                p_stay = beta / (nl + 1.0 + beta + a)
                u = random_standard_uniform(self.bg)
                if u >= p_stay:
                    ch._apply_single(t, S_LEFT, NULL)
            elif t == en and t < T - 1:
                nr = <double> (ch.ends[k + 1] - ch.starts[k + 1])
                p_right = (nr + a) / (nr + beta + a)
                u = random_standard_uniform(self.bg)
                if u < p_right:
                    ch._apply_single(t, S_RIGHT, NULL)

    cdef void _update_beta(self, bint adapt):
        cdef ChainCore ch = self.inner
        cdef double z = random_standard_normal(self.bg)
        cdef double u = random_standard_uniform(self.bg)
        cdef double beta = ch.beta
        cdef double lb = log(beta)
        cdef double lb_new = lb + ch.step * z
        cdef double beta_new = exp(lb_new)
        cdef double s2 = ch.sigma_beta2
        cdef double num = self._ko_joint_at(beta_new) - beta_new * beta_new / (2.0 * s2) + lb_new
        cdef double den = self._ko_joint_at(beta) - beta * beta / (2.0 * s2) + lb
        cdef bint accepted = log(u) < num - den
        cdef double rate
        if accepted:
            ch.beta = beta_new
        ch.beta_updates += 1
        ch.beta_accepts += (1 if accepted else 0)
        if adapt:
            ch.win_n += 1
            ch.win_acc += (1 if accepted else 0)
            if ch.win_n == 50:
                rate = ch.win_acc / 50.0
                ch.step *= exp(0.5 * (rate - 0.3))
                ch.step = min(max(ch.step, 1e-3), 10.0)
                ch.win_n = 0
                ch.win_acc = 0

    def iteration(self, adapt):
        self._allocation_sweep()
        self.inner.update_thetas()
        self._update_beta(1 if adapt else 0)

    def log_posterior(self):
        cdef ChainCore ch = self.inner
        cdef double lp = self._ko_joint_at(ch.beta)
        cdef int k
        for k in range(ch._K):
            lp += ch._ll_range(&ch._thetas[k, 0], ch.starts[k], ch.ends[k])
            lp += ch._theta_log_prior(&ch._thetas[k, 0])
        cdef double s2 = ch.sigma_beta2
        lp += 0.5 * log(2.0 / (M_PI * s2)) - ch.beta * ch.beta / (2.0 * s2)
        return lp

"""Pure-Python chain cores: reference implementation and import fallback.

The compiled extension (:mod:`dpseg._kernels`) mirrors these classes method
for method and consumes the NumPy random stream in exactly the same order,
so a chain driven with the same seed yields identical draws on either
backend.  Keep the two files in lock-step; the parity tests compare them
draw by draw.

Regime allocations are stored as contiguous blocks (``starts``/``ends``,
0-based inclusive) rather than a label vector, and all range likelihood
sums come from prefix-sum tables, so every move weight is O(1).
"""

from __future__ import annotations

import math
from bisect import bisect_right

import numpy as np

from .errors import InfeasiblePathError, InvalidStateError

BACKEND_NAME = "python"

# family codes (FLAT is test-only: zero likelihood everywhere)
FLAT = -1
NORMAL = 0
POISSON = 1
LINTREND = 2

N_PAR = {FLAT: 1, NORMAL: 2, POISSON: 1, LINTREND: 3}

# single-site outcome tags, in the order the weights are listed
S_NEW, S_LEFT, S_RIGHT, S_STAY, S_OWN = 0, 1, 2, 3, 4
# split outcome tags
P_KEEP, P_LEFT_NEW, P_RIGHT_NEW = 0, 1, 2
# merge outcome tags
M_NEW, M_DOWN, M_UP, M_KEEP = 0, 1, 2, 3

_LOG2PI = math.log(2.0 * math.pi)


def _categorical(logws, u):
    """Inverse-CDF draw over log weights, in listed order."""
    m = max(logws)
    ws = [math.exp(lw - m) for lw in logws]
    tot = 0.0
    for w in ws:
        tot += w
    thresh = u * tot
    acc = 0.0
    for i, w in enumerate(ws):
        acc += w
        if thresh <= acc:
            return i
    return len(ws) - 1


def _logaddexp(a, b):
    # same branch structure as the compiled twin, so results match bitwise
    hi = np.maximum(a, b)
    lo = np.minimum(a, b)
    with np.errstate(invalid="ignore", over="ignore"):
        out = hi + np.log1p(np.exp(lo - hi))
    return np.where(np.isneginf(hi), -np.inf, out)


class PyChainCore:
    """One marginalized change-point chain confined to a single worker."""

    def __init__(self, y, tv, fam, hyper, sigma_beta2, beta_step, rng):
        y = np.ascontiguousarray(y, dtype=np.float64)
        tv = np.ascontiguousarray(tv, dtype=np.float64)
        self.T = y.shape[0]
        self.y = y
        self.tv = tv
        self.fam = int(fam)
        self.hyper = np.ascontiguousarray(hyper, dtype=np.float64)
        self.sigma_beta2 = float(sigma_beta2)
        self.step = float(beta_step)
        self.rng = rng
        self._prefix()
        # state
        self.starts = []
        self.ends = []
        self.thetas = []
        self.beta = 1.0
        # beta-update bookkeeping
        self.beta_accepts = 0
        self.beta_updates = 0
        self._win_acc = 0
        self._win_n = 0

    # ------------------------------------------------------------------
    # data handling

    def _prefix(self):
        y, tv = self.y, self.tv
        z = np.zeros(1)
        self.cy = np.concatenate((z, np.cumsum(y)))
        self.cy2 = np.concatenate((z, np.cumsum(y * y)))
        self.ct = np.concatenate((z, np.cumsum(tv)))
        self.ct2 = np.concatenate((z, np.cumsum(tv * tv)))
        self.cty = np.concatenate((z, np.cumsum(tv * y)))
        if self.fam == POISSON:
            lg = np.array([math.lgamma(v + 1.0) for v in y])
            self.clg = np.concatenate((z, np.cumsum(lg)))
        else:
            self.clg = np.zeros(self.T + 1)

    def set_y(self, y):
        self.y = np.ascontiguousarray(y, dtype=np.float64)
        self._prefix()

    # ------------------------------------------------------------------
    # state handling

    @property
    def K(self):
        return len(self.starts)

    def init_state(self, K0):
        T = self.T
        K0 = max(1, min(int(K0), T))
        base, rem = divmod(T, K0)
        self.starts, self.ends, self.thetas = [], [], []
        pos = 0
        for k in range(K0):
            ln = base + (1 if k < rem else 0)
            self.starts.append(pos)
            self.ends.append(pos + ln - 1)
            pos += ln
        for _ in range(K0):
            self.thetas.append(self._draw_prior())
        self.beta = abs(
            math.sqrt(self.sigma_beta2) * self.rng.standard_normal()
        )

    def set_state(self, starts, ends, thetas, beta):
        self.starts = [int(v) for v in starts]
        self.ends = [int(v) for v in ends]
        self.thetas = [np.array(th, dtype=np.float64) for th in thetas]
        self.beta = float(beta)

    def labels(self):
        lab = np.empty(self.T, dtype=np.int32)
        for k in range(self.K):
            lab[self.starts[k] : self.ends[k] + 1] = k + 1
        return lab

    def theta_matrix(self):
        return np.array(self.thetas, dtype=np.float64)

    def block_of(self, t):
        return bisect_right(self.starts, t) - 1

    # ------------------------------------------------------------------
    # emission math (prefix-sum ranges, O(1) per call)

    def _rs(self, c, a, b):
        return c[b + 1] - c[a]

    def _ll_range(self, th, a, b):
        fam = self.fam
        if fam == FLAT:
            return 0.0
        L = float(b - a + 1)
        sy = self._rs(self.cy, a, b)
        if fam == POISSON:
            lam = th[0]
            return sy * math.log(lam) - L * lam - self._rs(self.clg, a, b)
        sy2 = self._rs(self.cy2, a, b)
        if fam == NORMAL:
            mu, s2 = th[0], th[1]
            q = sy2 - 2.0 * mu * sy + L * mu * mu
        else:
            mu0, mu1, s2 = th[0], th[1], th[2]
            st = self._rs(self.ct, a, b)
            st2 = self._rs(self.ct2, a, b)
            sty = self._rs(self.cty, a, b)
            q = (
                sy2
                + L * mu0 * mu0
                + mu1 * mu1 * st2
                + 2.0 * mu0 * mu1 * st
                - 2.0 * mu0 * sy
                - 2.0 * mu1 * sty
            )
        return -0.5 * L * (_LOG2PI + math.log(s2)) - q / (2.0 * s2)

    def _ll_point(self, th, t):
        return self._ll_range(th, t, t)

    def _draw_prior(self):
        fam, h, rng = self.fam, self.hyper, self.rng
        if fam == FLAT:
            return np.zeros(1)
        if fam == NORMAL:
            mu = h[0] + math.sqrt(h[1]) * rng.standard_normal()
            s2 = h[3] / rng.standard_gamma(h[2])
            return np.array([mu, s2])
        if fam == POISSON:
            return np.array([rng.standard_gamma(h[0]) / h[1]])
        mu0 = h[0] + math.sqrt(h[2]) * rng.standard_normal()
        mu1 = h[1] + math.sqrt(h[3]) * rng.standard_normal()
        s2 = h[5] / rng.standard_gamma(h[4])
        return np.array([mu0, mu1, s2])

    def _post_draw_range(self, a, b, current):
        fam, h, rng = self.fam, self.hyper, self.rng
        if fam == FLAT:
            return np.zeros(1)
        n = float(b - a + 1)
        sy = self._rs(self.cy, a, b)
        if fam == POISSON:
            return np.array([rng.standard_gamma(h[0] + sy) / (h[1] + n)])
        sy2 = self._rs(self.cy2, a, b)
        s2 = current[-1]
        if fam == NORMAL:
            m0, v0, a0, b0 = h[0], h[1], h[2], h[3]
            v_n = 1.0 / (1.0 / v0 + n / s2)
            m_n = v_n * (m0 / v0 + sy / s2)
            mu = m_n + math.sqrt(v_n) * rng.standard_normal()
            rate = b0 + 0.5 * (sy2 - 2.0 * mu * sy + n * mu * mu)
            s2 = rate / rng.standard_gamma(a0 + 0.5 * n)
            return np.array([mu, s2])
        m0, m1, v0, v1, a0, b0 = h[0], h[1], h[2], h[3], h[4], h[5]
        st = self._rs(self.ct, a, b)
        st2 = self._rs(self.ct2, a, b)
        sty = self._rs(self.cty, a, b)
        l00 = 1.0 / v0 + n / s2
        l01 = st / s2
        l11 = 1.0 / v1 + st2 / s2
        r0 = m0 / v0 + sy / s2
        r1 = m1 / v1 + sty / s2
        c00 = math.sqrt(l00)
        c10 = l01 / c00
        c11 = math.sqrt(l11 - c10 * c10)
        w0 = r0 / c00
        w1 = (r1 - c10 * w0) / c11
        mn1 = w1 / c11
        mn0 = (w0 - c10 * mn1) / c00
        z0 = rng.standard_normal()
        z1 = rng.standard_normal()
        u1 = z1 / c11
        u0 = (z0 - c10 * u1) / c00
        mu0 = mn0 + u0
        mu1 = mn1 + u1
        resid = (
            sy2
            + n * mu0 * mu0
            + mu1 * mu1 * st2
            + 2.0 * mu0 * mu1 * st
            - 2.0 * mu0 * sy
            - 2.0 * mu1 * sty
        )
        rate = b0 + 0.5 * resid
        s2 = rate / rng.standard_gamma(a0 + 0.5 * n)
        return np.array([mu0, mu1, s2])

    def _theta_log_prior(self, th):
        fam, h = self.fam, self.hyper
        if fam == FLAT:
            return 0.0

        def lnorm(x, mean, var):
            d = x - mean
            return -0.5 * (_LOG2PI + math.log(var)) - d * d / (2.0 * var)

        def lig(x, shape, rate):
            return (
                shape * math.log(rate)
                - math.lgamma(shape)
                - (shape + 1.0) * math.log(x)
                - rate / x
            )

        if fam == NORMAL:
            return lnorm(th[0], h[0], h[1]) + lig(th[1], h[2], h[3])
        if fam == POISSON:
            a, b = h[0], h[1]
            return a * math.log(b) - math.lgamma(a) + (a - 1.0) * math.log(th[0]) - b * th[0]
        return (
            lnorm(th[0], h[0], h[2])
            + lnorm(th[1], h[1], h[3])
            + lig(th[2], h[4], h[5])
        )

    # ------------------------------------------------------------------
    # sequence prior

    def _gamma_log(self, c, n, beta):
        return (
            math.lgamma(beta + 1.0)
            + math.lgamma(n + 1.0)
            - math.lgamma(n + beta + 2.0 - c)
        )

    def seq_log_prior_at(self, beta):
        K = self.K
        lp = (K - 1) * math.log(beta)
        for k in range(K):
            n = float(self.ends[k] - self.starts[k])
            lp += self._gamma_log(1.0 if k == K - 1 else 0.0, n, beta)
        return lp

    def log_posterior(self):
        lp = self.seq_log_prior_at(self.beta)
        for k in range(self.K):
            lp += self._ll_range(self.thetas[k], self.starts[k], self.ends[k])
            lp += self._theta_log_prior(self.thetas[k])
        s2 = self.sigma_beta2
        lp += 0.5 * math.log(2.0 / (math.pi * s2)) - self.beta * self.beta / (2.0 * s2)
        return lp

    # ------------------------------------------------------------------
    # single-site move

    def single_eligible(self, t):
        k = self.block_of(t)
        return (t == self.starts[k] and t > 0) or (
            t == self.ends[k] and t < self.T - 1
        )

    def single_options(self, t, theta_star):
        """Outcome tags and log weights for resampling site t.

        Candidate order follows the listing: fresh regime, match-left,
        match-right, own singleton regime.  Weights are the printed ones:
        only the match-right denominator carries the final-regime
        indicator.
        """
        k = self.block_of(t)
        st, en = self.starts[k], self.ends[k]
        first, last = t == st, t == en
        beta = self.beta
        lb = math.log(beta)
        K, T = self.K, self.T
        tags, lws = [], []

        def left_lw(nl, theta):
            return (
                math.log(nl + 1.0)
                - math.log(nl + 2.0 + beta)
                + self._ll_point(theta, t)
            )

        def right_lw(nr, theta, blk_is_last):
            adj = 1.0 if blk_is_last else 0.0
            return (
                math.log(nr + 1.0)
                - math.log(nr + 2.0 + beta - adj)
                + self._ll_point(theta, t)
            )

        if first and last:
            if t > 0:
                nl = float(self.ends[k - 1] - self.starts[k - 1])
                tags.append(S_LEFT)
                lws.append(left_lw(nl, self.thetas[k - 1]))
            if t < T - 1:
                nr = float(self.ends[k + 1] - self.starts[k + 1])
                tags.append(S_RIGHT)
                lws.append(right_lw(nr, self.thetas[k + 1], k + 1 == K - 1))
            tags.append(S_OWN)
            lws.append(lb - math.log1p(beta) + self._ll_point(self.thetas[k], t))
        elif first:
            nl = float(self.ends[k - 1] - self.starts[k - 1])
            n_stay = float(en - st - 1)
            tags.append(S_NEW)
            lws.append(lb - math.log1p(beta) + self._ll_point(theta_star, t))
            tags.append(S_LEFT)
            lws.append(left_lw(nl, self.thetas[k - 1]))
            tags.append(S_STAY)
            lws.append(right_lw(n_stay, self.thetas[k], k == K - 1))
        else:
            n_stay = float(en - st - 1)
            nr = float(self.ends[k + 1] - self.starts[k + 1])
            tags.append(S_NEW)
            lws.append(lb - math.log1p(beta) + self._ll_point(theta_star, t))
            tags.append(S_STAY)
            lws.append(left_lw(n_stay, self.thetas[k]))
            tags.append(S_RIGHT)
            lws.append(right_lw(nr, self.thetas[k + 1], k + 1 == K - 1))
        return tags, lws

    def apply_single(self, t, tag, theta_star):
        k = self.block_of(t)
        st, en = self.starts[k], self.ends[k]
        singleton = st == en
        if tag in (S_STAY, S_OWN):
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
                self.starts.insert(k, t)
                self.ends.insert(k, t)
                self.thetas.insert(k, theta_star)
                self.starts[k + 1] = t + 1
            else:
                self.ends[k] = t - 1
                self.starts.insert(k + 1, t)
                self.ends.insert(k + 1, t)
                self.thetas.insert(k + 1, theta_star)

    def _drop(self, k):
        del self.starts[k]
        del self.ends[k]
        del self.thetas[k]

    def single_sweep(self, forward):
        rng = self.rng
        order = range(self.T) if forward else range(self.T - 1, -1, -1)
        for t in order:
            if not self.single_eligible(t):
                continue
            k = self.block_of(t)
            singleton = self.starts[k] == self.ends[k]
            theta_star = None if singleton else self._draw_prior()
            tags, lws = self.single_options(t, theta_star)
            u = rng.random()
            self.apply_single(t, tags[_categorical(lws, u)], theta_star)

    # ------------------------------------------------------------------
    # split move

    def split_options(self, t, theta_star):
        k = self.block_of(t)
        st, en = self.starts[k], self.ends[k]
        beta = self.beta
        lb = math.log(beta)
        c = 1.0 if k == self.K - 1 else 0.0
        nk = float(en - st)
        nm = float(t - st - 1)
        npl = float(en - t)
        th = self.thetas[k]
        ll_lo_k = self._ll_range(th, st, t - 1)
        ll_hi_k = self._ll_range(th, t, en)
        ll_lo_s = self._ll_range(theta_star, st, t - 1)
        ll_hi_s = self._ll_range(theta_star, t, en)
        base = lb + self._gamma_log(0.0, nm, beta) + self._gamma_log(c, npl, beta)
        return (
            [P_KEEP, P_LEFT_NEW, P_RIGHT_NEW],
            [
                self._gamma_log(c, nk, beta) + ll_lo_k + ll_hi_k,
                base + ll_lo_s + ll_hi_k,
                base + ll_lo_k + ll_hi_s,
            ],
        )

    def apply_split(self, t, tag, theta_star):
        if tag == P_KEEP:
            return
        k = self.block_of(t)
        en0 = self.ends[k]
        self.ends[k] = t - 1
        self.starts.insert(k + 1, t)
        self.ends.insert(k + 1, en0)
        if tag == P_LEFT_NEW:
            self.thetas.insert(k + 1, self.thetas[k])
            self.thetas[k] = theta_star
        else:
            self.thetas.insert(k + 1, theta_star)

    def split_sweep(self, forward):
        rng = self.rng
        order = range(self.T) if forward else range(self.T - 1, -1, -1)
        for t in order:
            k = self.block_of(t)
            if t == self.starts[k]:
                continue
            theta_star = self._draw_prior()
            tags, lws = self.split_options(t, theta_star)
            u = rng.random()
            self.apply_split(t, tags[_categorical(lws, u)], theta_star)

    # ------------------------------------------------------------------
    # merge move

    def merge_options(self, k, theta_star):
        """Outcome tags and log weights for reassigning the whole block k.

        Order follows the listing: relabel with a fresh theta, merge into
        the block below, merge into the block above, keep.  The gamma
        factors on existing neighbours drop out when the neighbour does
        not exist (first/last block).
        """
        K = self.K
        beta = self.beta
        lb = math.log(beta)
        has_left = k > 0
        has_right = k < K - 1
        st, en = self.starts[k], self.ends[k]
        nk = float(en - st)
        gl = self._gamma_log
        nl = float(self.ends[k - 1] - self.starts[k - 1]) if has_left else 0.0
        nr = float(self.ends[k + 1] - self.starts[k + 1]) if has_right else 0.0
        lw_left = gl(0.0, nl, beta) if has_left else 0.0
        lw_right = gl(0.0, nr, beta) if has_right else 0.0
        stay = lb + lw_left + gl(0.0, nk, beta) + lw_right
        tags = [M_NEW]
        lws = [stay + self._ll_range(theta_star, st, en)]
        if has_left:
            lws.append(
                gl(0.0, nl + nk + 1.0, beta)
                + lw_right
                + self._ll_range(self.thetas[k - 1], st, en)
            )
            tags.append(M_DOWN)
        if has_right:
            lws.append(
                lw_left
                + gl(0.0, nk + nr + 1.0, beta)
                + self._ll_range(self.thetas[k + 1], st, en)
            )
            tags.append(M_UP)
        tags.append(M_KEEP)
        lws.append(stay + self._ll_range(self.thetas[k], st, en))
        return tags, lws

    def apply_merge(self, k, tag, theta_star):
        if tag == M_KEEP:
            return
        if tag == M_NEW:
            self.thetas[k] = theta_star
        elif tag == M_DOWN:
            self.ends[k - 1] = self.ends[k]
            self._drop(k)
        else:
            self.starts[k + 1] = self.starts[k]
            self._drop(k)

    def merge_scan(self):
        rng = self.rng
        k = 0
        while k < self.K:
            theta_star = self._draw_prior()
            tags, lws = self.merge_options(k, theta_star)
            u = rng.random()
            tag = tags[_categorical(lws, u)]
            self.apply_merge(k, tag, theta_star)
            if tag != M_DOWN:
                k += 1

    # ------------------------------------------------------------------
    # parameter and concentration updates

    def update_thetas(self):
        for k in range(self.K):
            self.thetas[k] = self._post_draw_range(
                self.starts[k], self.ends[k], self.thetas[k]
            )

    def update_beta(self, adapt):
        rng = self.rng
        z = rng.standard_normal()
        u = rng.random()
        beta = self.beta
        lb = math.log(beta)
        lb_new = lb + self.step * z
        beta_new = math.exp(lb_new)
        s2 = self.sigma_beta2
        num = self.seq_log_prior_at(beta_new) - beta_new * beta_new / (2.0 * s2) + lb_new
        den = self.seq_log_prior_at(beta) - beta * beta / (2.0 * s2) + lb
        accepted = math.log(u) < num - den
        if accepted:
            self.beta = beta_new
        self.beta_updates += 1
        self.beta_accepts += int(accepted)
        if adapt:
            self._win_n += 1
            self._win_acc += int(accepted)
            if self._win_n == 50:
                rate = self._win_acc / 50.0
                self.step *= math.exp(0.5 * (rate - 0.3))
                self.step = min(max(self.step, 1e-3), 10.0)
                self._win_n = 0
                self._win_acc = 0

    # ------------------------------------------------------------------
    # one full Gibbs iteration

    def iteration(self, p_single, p_split, p_forward, adapt):
        rng = self.rng
        u = rng.random()
        if u < p_single:
            forward = rng.random() < p_forward
            self.single_sweep(forward)
        elif u < p_single + p_split:
            forward = rng.random() < p_forward
            self.split_sweep(forward)
        else:
            self.merge_scan()
        self.update_thetas()
        self.update_beta(adapt)


class PyFiniteCore:
    """Fixed-K* constrained-HMM sampler core (stay/advance transitions)."""

    def __init__(self, y, tv, fam, hyper, kstar, sigma_beta2, beta_step, rng):
        self.T = len(y)
        self.kstar = int(kstar)
        if self.kstar < 1:
            raise InvalidStateError("K* must be >= 1")
        if self.T < self.kstar:
            raise InfeasiblePathError(
                f"cannot visit {self.kstar} regimes with T={self.T}"
            )
        self.inner = PyChainCore(y, tv, fam, hyper, sigma_beta2, beta_step, rng)
        self.rng = rng
        self.pis = np.ones(self.kstar)
        self.beta = 1.0
        self.beta_accepts = 0
        self.beta_updates = 0
        self._win_acc = 0
        self._win_n = 0
        # block boundaries of the current allocation
        self.starts = []
        self.ends = []
        self.thetas = []

    @property
    def step(self):
        return self._step

    def init_state(self, starts, ends):
        """Start from the given blocks with parameters drawn from their
        block conditionals; a data-informed starting point that avoids the
        long escape from wild prior draws under the ordered-regime
        constraint."""
        rng = self.rng
        Ks = self.kstar
        if len(starts) != Ks or len(ends) != Ks:
            raise InvalidStateError("need exactly K* initial blocks")
        self.beta = abs(
            math.sqrt(self.inner.sigma_beta2) * rng.standard_normal()
        )
        self.starts = [int(v) for v in starts]
        self.ends = [int(v) for v in ends]
        self.thetas = [self.inner._draw_prior() for _ in range(Ks)]
        for k in range(Ks):
            self.thetas[k] = self.inner._post_draw_range(
                self.starts[k], self.ends[k], self.thetas[k]
            )
        self.pis = np.ones(Ks)
        for k in range(Ks - 1):
            n_k = float(self.ends[k] - self.starts[k])
            g1 = rng.standard_gamma(1.0 + n_k)
            g2 = rng.standard_gamma(self.beta + 1.0)
            self.pis[k] = g1 / (g1 + g2)
        self._step = self.inner.step

    def _emission_row(self, t):
        return np.array(
            [self.inner._ll_point(self.thetas[k], t) for k in range(self.kstar)]
        )

    def ffbs(self):
        """Exact joint draw of the allocation given parameters.

        Log-space forward filter (each state has at most two incoming
        transitions), backward sample conditioned on the final state K*.
        """
        T, Ks = self.T, self.kstar
        rng = self.rng
        lstay = np.log(self.pis)
        ljump = np.full(Ks, -np.inf)
        ljump[: Ks - 1] = np.log1p(-self.pis[: Ks - 1])
        lfilt = np.full((T, Ks), -np.inf)
        prev = np.full(Ks, -np.inf)
        prev[0] = 0.0
        lfilt[0] = prev
        for t in range(1, T):
            lp = self._emission_row(t)
            a = prev + lstay
            b = np.concatenate(([-np.inf], prev[:-1] + ljump[:-1]))
            cur = _logaddexp(a, b) + lp
            m = cur.max()
            if m == -np.inf:
                raise InfeasiblePathError("zero filtered mass in forward pass")
            prev = cur - m
            lfilt[t] = prev
        if lfilt[T - 1, Ks - 1] == -np.inf:
            raise InfeasiblePathError("final state has zero filtered mass")
        s = np.empty(T, dtype=np.int64)
        s[T - 1] = Ks - 1
        for t in range(T - 2, -1, -1):
            j = s[t + 1]
            if j == 0:
                s[t] = 0
                continue
            la = lfilt[t, j - 1] + ljump[j - 1]
            lb = lfilt[t, j] + lstay[j]
            m = max(la, lb)
            w_prev = math.exp(la - m)
            tot = w_prev + math.exp(lb - m)
            u = rng.random()
            s[t] = j - 1 if u * tot <= w_prev else j
        # store as blocks
        starts, ends = [0], []
        for t in range(1, T):
            if s[t] != s[t - 1]:
                ends.append(t - 1)
                starts.append(t)
        ends.append(T - 1)
        if len(starts) != Ks:
            raise InvalidStateError("sampled path does not visit every regime")
        self.starts, self.ends = starts, ends

    def update_pis(self):
        rng = self.rng
        for k in range(self.kstar - 1):
            n_k = float(self.ends[k] - self.starts[k])
            g1 = rng.standard_gamma(1.0 + n_k)
            g2 = rng.standard_gamma(self.beta + 1.0)
            self.pis[k] = g1 / (g1 + g2)

    def update_thetas(self):
        for k in range(self.kstar):
            self.thetas[k] = self.inner._post_draw_range(
                self.starts[k], self.ends[k], self.thetas[k]
            )

    def update_beta(self, adapt):
        rng = self.rng
        z = rng.standard_normal()
        u = rng.random()
        beta = self.beta
        lb = math.log(beta)
        lb_new = lb + self._step * z
        beta_new = math.exp(lb_new)
        s2 = self.inner.sigma_beta2
        sl1p = 0.0
        for k in range(self.kstar - 1):
            sl1p += math.log1p(-self.pis[k])

        def kern(b, logb):
            return (self.kstar - 1) * logb + (b - 1.0) * sl1p - b * b / (2.0 * s2)

        accepted = math.log(u) < kern(beta_new, lb_new) - kern(beta, lb) + lb_new - lb
        if accepted:
            self.beta = beta_new
        self.beta_updates += 1
        self.beta_accepts += int(accepted)
        if adapt:
            self._win_n += 1
            self._win_acc += int(accepted)
            if self._win_n == 50:
                rate = self._win_acc / 50.0
                self._step *= math.exp(0.5 * (rate - 0.3))
                self._step = min(max(self._step, 1e-3), 10.0)
                self._win_n = 0
                self._win_acc = 0

    def iteration(self, adapt):
        self.ffbs()
        self.update_pis()
        self.update_thetas()
        self.update_beta(adapt)

    def labels(self):
        lab = np.empty(self.T, dtype=np.int32)
        for k in range(self.kstar):
            lab[self.starts[k] : self.ends[k] + 1] = k + 1
        return lab

    def theta_matrix(self):
        return np.array(self.thetas, dtype=np.float64)

    def log_posterior(self):
        """Complete-data joint log density at the current state."""
        ch = self.inner
        lp = 0.0
        for k in range(self.kstar):
            n_k = float(self.ends[k] - self.starts[k])
            lp += ch._ll_range(self.thetas[k], self.starts[k], self.ends[k])
            lp += ch._theta_log_prior(self.thetas[k])
            if k < self.kstar - 1:
                lp += n_k * math.log(self.pis[k]) + math.log1p(-self.pis[k])
                # Beta(1, beta) prior density of pi_k
                lp += math.log(self.beta) + (self.beta - 1.0) * math.log1p(
                    -self.pis[k]
                )
        s2 = ch.sigma_beta2
        lp += 0.5 * math.log(2.0 / (math.pi * s2)) - self.beta * self.beta / (2.0 * s2)
        return lp

    def loglik_terms(self, thetas, pis):
        """(log p(y, s_T=K* | params), log p(s_T=K* | params)) by filtering."""
        T, Ks = self.T, self.kstar
        thetas = [np.asarray(th, dtype=float) for th in thetas]
        pis = np.asarray(pis, dtype=float)
        lstay = np.log(pis)
        ljump = np.full(Ks, -np.inf)
        ljump[: Ks - 1] = np.log1p(-pis[: Ks - 1])

        def final_log_mass(with_data):
            prev = np.full(Ks, -np.inf)
            prev[0] = (
                self.inner._ll_point(thetas[0], 0) if with_data else 0.0
            )
            for t in range(1, T):
                a = prev + lstay
                b = np.concatenate(([-np.inf], prev[:-1] + ljump[:-1]))
                cur = _logaddexp(a, b)
                if with_data:
                    cur = cur + np.array(
                        [self.inner._ll_point(thetas[k], t) for k in range(Ks)]
                    )
                prev = cur
            return prev[Ks - 1]

        return final_log_mass(True), final_log_mass(False)


class PyKoCore:
    """Replica of the flawed allocation sampler documented for comparison.

    Boundary sites are reallocated between the two adjacent existing
    regimes with prior-shaped probabilities only (the printed conditionals
    carry no data terms), scanning first-to-last; no move can create a
    regime, so the regime count is non-increasing by construction.
    """

    def __init__(self, y, tv, fam, hyper, alpha, sigma_beta2, beta_step, rng):
        self.inner = PyChainCore(y, tv, fam, hyper, sigma_beta2, beta_step, rng)
        self.alpha = float(alpha)
        self.rng = rng

    @property
    def K(self):
        return self.inner.K

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
        ch = self.inner
        a = self.alpha
        K = ch.K
        lp = K * math.log(beta)
        for k in range(K):
            n = float(ch.ends[k] - ch.starts[k])
            lp += (
                math.lgamma(a + beta)
                - math.lgamma(a)
                + math.lgamma(n + a)
                - math.lgamma(n + 1.0 + a + beta)
            )
        return lp

    def allocation_sweep(self):
        ch = self.inner
        rng = self.rng
        a = self.alpha
        T = ch.T
        for t in range(T):
            if not ch.single_eligible(t):
                continue
            k = ch.block_of(t)
            st, en = ch.starts[k], ch.ends[k]
            beta = ch.beta
            if t == st and t > 0:
                # jump-now-or-delay shape: stay in own regime vs join left
                nl = float(ch.ends[k - 1] - ch.starts[k - 1])
                p_stay = beta / (nl + 1.0 + beta + a)
                u = rng.random()
                if u >= p_stay:
                    ch.apply_single(t, S_LEFT, None)
            elif t == en and t < T - 1:
                # entered-regime shape: absorb into the regime that follows
                nr = float(ch.ends[k + 1] - ch.starts[k + 1])
                p_right = (nr + a) / (nr + beta + a)
                u = rng.random()
                if u < p_right:
                    ch.apply_single(t, S_RIGHT, None)

    def update_beta(self, adapt):
        ch = self.inner
        rng = self.rng
        z = rng.standard_normal()
        u = rng.random()
        beta = ch.beta
        lb = math.log(beta)
        lb_new = lb + ch.step * z
        beta_new = math.exp(lb_new)
        s2 = ch.sigma_beta2
        num = self.ko_joint_at(beta_new) - beta_new * beta_new / (2.0 * s2) + lb_new
        den = self.ko_joint_at(beta) - beta * beta / (2.0 * s2) + lb
        accepted = math.log(u) < num - den
        if accepted:
            ch.beta = beta_new
        ch.beta_updates += 1
        ch.beta_accepts += int(accepted)
        if adapt:
            ch._win_n += 1
            ch._win_acc += int(accepted)
            if ch._win_n == 50:
                rate = ch._win_acc / 50.0
                ch.step *= math.exp(0.5 * (rate - 0.3))
                ch.step = min(max(ch.step, 1e-3), 10.0)
                ch._win_n = 0
                ch._win_acc = 0

    def iteration(self, adapt):
        self.allocation_sweep()
        self.inner.update_thetas()
        self.update_beta(adapt)

    def log_posterior(self):
        ch = self.inner
        lp = self.ko_joint_at(ch.beta)
        for k in range(ch.K):
            lp += ch._ll_range(ch.thetas[k], ch.starts[k], ch.ends[k])
            lp += ch._theta_log_prior(ch.thetas[k])
        s2 = ch.sigma_beta2
        lp += 0.5 * math.log(2.0 / (math.pi * s2)) - ch.beta * ch.beta / (2.0 * s2)
        return lp


# names shared with the compiled backend
ChainCore = PyChainCore
FiniteCore = PyFiniteCore
KoCore = PyKoCore

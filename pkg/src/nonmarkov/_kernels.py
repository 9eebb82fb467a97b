"""Compiled inner loop of the revival search.

The formulas here are deliberately re-derived scalar versions of the ones in
:mod:`nonmarkov.quantifiers`; the test-suite checks one against the other.
"""

import math

import numba as nb

# prefer OpenMP; the bundled TBB is too old and only triggers a warning
nb.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]
import numpy as np

TD = 0
HELSTROM = 1
JSD = 2
SQRT_JSD = 3
HOLEVO_SKEW = 4
QUANTUM_SKEW = 5
NEG_ENTROPY = 6

PARAMETRIC = (HELSTROM, HOLEVO_SKEW, QUANTUM_SKEW)

_LN2 = math.log(2.0)
_INV_LN2 = 1.0 / _LN2
_HALF_INV_LN2 = 0.5 / _LN2
# below this squared norm the entropy terms use their power series in |r|^2
_SERIES_X = 0.0025
_SERIES_TOL = 1e-18
# mirror quantifiers.JSD_EXPANSION_*
_EXPANSION_MAX_RATIO = 1e-2
_EXPANSION_BUDGET = 2e-15


@nb.njit(cache=True, inline="always")
def _xlog2x(p):
    if p <= 0.0:
        return 0.0
    return p * math.log(p) * _INV_LN2


@nb.njit(cache=True, inline="always")
def _entropy(rn):
    if rn > 1.0:
        rn = 1.0
    lo = 0.5 * (1.0 - rn)
    return -_xlog2x(lo) - _xlog2x(1.0 - lo)


@nb.njit(cache=True)
def _binary_entropy(p):
    return -_xlog2x(p) - _xlog2x(1.0 - p)


@nb.njit(cache=True, inline="always")
def _negentropy(x):
    """``1 - H`` (bits) of a qubit with squared Bloch norm ``x``.

    With ``c = sqrt(x)``: ``1 - H = [(1+c) ln(1+c) + (1-c) ln(1-c)] / (2 ln 2)``
    ``= sum_k x^k / (k (2k-1)) / (2 ln 2)``.
    """
    if x < _SERIES_X:
        total = 0.0
        xk = x
        k = 1.0
        while xk > _SERIES_TOL * total or k == 1.0:
            total += xk / (k * (2.0 * k - 1.0))
            xk *= x
            k += 1.0
        return total * _HALF_INV_LN2
    if x >= 1.0:
        return 1.0
    c = math.sqrt(x)
    return ((1.0 + c) * math.log1p(c) + (1.0 - c) * math.log1p(-c)) * _HALF_INV_LN2


@nb.njit(cache=True, inline="always")
def _mixture_terms(x):
    """``(1 - H, g1, g2)`` for a mixture with squared norm ``x``.

    ``tr(a log2 m) = -1 + g1 + (a . m) g2`` for any state ``a``, where
    ``g1 = log2(1 - x) / 2`` and ``g2 = atanh(c) / (c ln 2)``.
    """
    if x < _SERIES_X:
        f = 0.0
        l1 = 0.0
        at = 1.0
        xk = x
        k = 1.0
        while xk > _SERIES_TOL * x or k == 1.0:
            f += xk / (k * (2.0 * k - 1.0))
            l1 += xk / k
            at += xk / (2.0 * k + 1.0)
            xk *= x
            k += 1.0
        return f * _HALF_INV_LN2, -l1 * _HALF_INV_LN2, at * _INV_LN2
    if x >= 1.0:
        return 1.0, -np.inf, np.inf
    c = math.sqrt(x)
    lp = math.log1p(c)
    lm = math.log1p(-c)
    f = ((1.0 + c) * lp + (1.0 - c) * lm) * _HALF_INV_LN2
    return f, (lp + lm) * _HALF_INV_LN2, (lp - lm) * _HALF_INV_LN2 / c


@nb.njit(cache=True, inline="always")
def _jsd_pair(a0, a1, a2, b0, b1, b2, fa, fb):
    """JSD of two states; nearly equal pairs use the second-order expansion."""
    c0 = 0.5 * (a0 + b0)
    c1 = 0.5 * (a1 + b1)
    c2 = 0.5 * (a2 + b2)
    x = c0 * c0 + c1 * c1 + c2 * c2
    e0 = 0.5 * (a0 - b0)
    e1 = 0.5 * (a1 - b1)
    e2 = 0.5 * (a2 - b2)
    dd = e0 * e0 + e1 * e1 + e2 * e2
    c = math.sqrt(x)
    dist = math.sqrt(dd)
    if c < 1.0 and dist <= _EXPANSION_MAX_RATIO * (1.0 - c):
        md = c0 * e0 + c1 * e1 + c2 * e2
        if x < 1e-2:
            tang = 0.0
            gap = 0.0
            xk = 1.0
            for k in range(12):
                tang += xk / (2.0 * k + 1.0)
                gap += xk * (2.0 * k + 2.0) / (2.0 * k + 3.0)
                xk *= x
        else:
            tang = 0.5 * (math.log1p(c) - math.log1p(-c)) / c
            gap = (1.0 / (1.0 - x) - tang) / x
        local = 0.5 * (tang * dd + gap * md * md) * _INV_LN2
        ratio = dist / (1.0 - c)
        if ratio * ratio * local <= _EXPANSION_BUDGET:
            return local
    return 0.5 * (fa + fb) - _negentropy(x)


@nb.njit(cache=True, inline="always")
def _skew_term(fa, dot, g1, g2, x):
    # S(a || m) in bits; zero when the mixture is pure (then a equals it)
    if x >= 1.0:
        return 0.0
    return fa - g1 - dot * g2


@nb.njit(cache=True, inline="always")
def _record(k, m, t, v, prev, floor, out_floored, out_raw, p):
    if t > 0:
        inc = v - prev[k, m]
        if inc > 0.0:
            out_raw[p, k, m] += inc
            if inc > floor:
                out_floored[p, k, m] += inc
    prev[k, m] = v


@nb.njit(cache=True, parallel=True)
def revival_sums(diag, shift, r1, r2, kinds, params, floor, out_floored, out_raw):
    """Accumulate positive increments of each quantifier along each pair.

    diag, shift: (n, 3) map trajectory; r1, r2: (P, 3) initial pairs;
    kinds: (K,) codes; params: (M,) bias/skew values shared by the parametric
    kinds. Outputs have shape (P, K, M); non-parametric kinds use column 0.
    Entropic terms are written as ``1 - H`` so that nearly mixed states keep
    full relative precision.
    """
    n = diag.shape[0]
    npairs = r1.shape[0]
    nk = kinds.shape[0]
    nm = params.shape[0]
    need_f = False
    need_mix = False
    need_skew = False
    for k in range(nk):
        if kinds[k] == JSD or kinds[k] == SQRT_JSD or kinds[k] == NEG_ENTROPY:
            need_f = True
        if kinds[k] == HOLEVO_SKEW or kinds[k] == QUANTUM_SKEW:
            need_f = True
            need_mix = True
        if kinds[k] == QUANTUM_SKEW:
            need_skew = True
    norm_k = np.empty(nm)
    norm_s1 = np.empty(nm)
    norm_s2 = np.empty(nm)
    for m in range(nm):
        mu = params[m]
        norm_k[m] = 1.0 / _binary_entropy(mu)
        norm_s1[m] = mu / math.log2(1.0 / mu)
        norm_s2[m] = (1.0 - mu) / math.log2(1.0 / (1.0 - mu))

    for p in nb.prange(npairs):
        prev = np.zeros((nk, nm))
        x0, x1, x2 = r1[p, 0], r1[p, 1], r1[p, 2]
        y0, y1, y2 = r2[p, 0], r2[p, 1], r2[p, 2]
        for t in range(n):
            d0, d1, d2 = diag[t, 0], diag[t, 1], diag[t, 2]
            s0, s1, s2 = shift[t, 0], shift[t, 1], shift[t, 2]
            a0 = d0 * x0 + s0
            a1 = d1 * x1 + s1
            a2 = d2 * x2 + s2
            b0 = d0 * y0 + s0
            b1 = d1 * y1 + s1
            b2 = d2 * y2 + s2
            fa = 0.0
            fb = 0.0
            if need_f:
                fa = _negentropy(a0 * a0 + a1 * a1 + a2 * a2)
                fb = _negentropy(b0 * b0 + b1 * b1 + b2 * b2)
            for k in range(nk):
                kind = kinds[k]
                if kind == TD:
                    e0 = a0 - b0
                    e1 = a1 - b1
                    e2 = a2 - b2
                    _record(k, 0, t, 0.5 * math.sqrt(e0 * e0 + e1 * e1 + e2 * e2), prev, floor, out_floored, out_raw, p)
                elif kind == JSD or kind == SQRT_JSD:
                    v = _jsd_pair(a0, a1, a2, b0, b1, b2, fa, fb)
                    if kind == SQRT_JSD:
                        v = math.sqrt(max(v, 0.0))
                    _record(k, 0, t, v, prev, floor, out_floored, out_raw, p)
                elif kind == NEG_ENTROPY:
                    _record(k, 0, t, fa - 1.0, prev, floor, out_floored, out_raw, p)
                elif kind == HELSTROM:
                    for m in range(nm):
                        mu = params[m]
                        e0 = mu * a0 - (1.0 - mu) * b0
                        e1 = mu * a1 - (1.0 - mu) * b1
                        e2 = mu * a2 - (1.0 - mu) * b2
                        v = max(abs(2.0 * mu - 1.0), math.sqrt(e0 * e0 + e1 * e1 + e2 * e2))
                        _record(k, m, t, v, prev, floor, out_floored, out_raw, p)
            if not need_mix:
                continue
            for m in range(nm):
                mu = params[m]
                c0 = mu * a0 + (1.0 - mu) * b0
                c1 = mu * a1 + (1.0 - mu) * b1
                c2 = mu * a2 + (1.0 - mu) * b2
                x = c0 * c0 + c1 * c1 + c2 * c2
                if need_skew:
                    fc, g1, g2 = _mixture_terms(x)
                else:
                    fc = _negentropy(x)
                    g1 = 0.0
                    g2 = 0.0
                for k in range(nk):
                    kind = kinds[k]
                    if kind == HOLEVO_SKEW:
                        v = (mu * fa + (1.0 - mu) * fb - fc) * norm_k[m]
                    elif kind == QUANTUM_SKEW:
                        sa = _skew_term(fa, a0 * c0 + a1 * c1 + a2 * c2, g1, g2, x)
                        sb = _skew_term(fb, b0 * c0 + b1 * c1 + b2 * c2, g1, g2, x)
                        v = norm_s1[m] * sa + norm_s2[m] * sb
                    else:
                        continue
                    _record(k, m, t, v, prev, floor, out_floored, out_raw, p)
    return out_floored, out_raw


@nb.njit(cache=True, parallel=True)
def ncd_scan(pts, img_pts, pool, img_pool, floor, out_idx, out_gain):
    """For each point, the first pool partner whose JSD grows by more than ``floor``.

    ``out_idx`` gets -1 when no partner qualifies; ``out_gain`` holds the
    witness gain, or the best gain seen when there is no witness.
    """
    n = pts.shape[0]
    m = pool.shape[0]
    h_pool = np.empty(m)
    h_img_pool = np.empty(m)
    for j in range(m):
        h_pool[j] = _entropy(math.sqrt(pool[j, 0] ** 2 + pool[j, 1] ** 2 + pool[j, 2] ** 2))
        h_img_pool[j] = _entropy(math.sqrt(img_pool[j, 0] ** 2 + img_pool[j, 1] ** 2 + img_pool[j, 2] ** 2))
    for i in nb.prange(n):
        p0, p1, p2 = pts[i, 0], pts[i, 1], pts[i, 2]
        q0, q1, q2 = img_pts[i, 0], img_pts[i, 1], img_pts[i, 2]
        hp = _entropy(math.sqrt(p0 * p0 + p1 * p1 + p2 * p2))
        hq = _entropy(math.sqrt(q0 * q0 + q1 * q1 + q2 * q2))
        best = -np.inf
        idx = -1
        for j in range(m):
            c0 = 0.5 * (p0 + pool[j, 0])
            c1 = 0.5 * (p1 + pool[j, 1])
            c2 = 0.5 * (p2 + pool[j, 2])
            pre = _entropy(math.sqrt(c0 * c0 + c1 * c1 + c2 * c2)) - 0.5 * (hp + h_pool[j])
            c0 = 0.5 * (q0 + img_pool[j, 0])
            c1 = 0.5 * (q1 + img_pool[j, 1])
            c2 = 0.5 * (q2 + img_pool[j, 2])
            post = _entropy(math.sqrt(c0 * c0 + c1 * c1 + c2 * c2)) - 0.5 * (hq + h_img_pool[j])
            g = post - pre
            if g > best:
                best = g
            if g > floor:
                idx = j
                break
        out_idx[i] = idx
        out_gain[i] = best
    return out_idx, out_gain

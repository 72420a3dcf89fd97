"""Compiled random-walk Metropolis samplers for the MCMC-backed designs.

Both kernels run componentwise random-walk Metropolis on unconstrained
transforms (logits for the ratio surface, logs/identity for the logistic
model), adapt step sizes during burn-in only, and return Monte Carlo
posterior summaries plus a split-chain convergence statistic.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_SEED_MASK = 0x7FFFFFFF


def _prep_seed(seed: int) -> int:
    return int(seed) & _SEED_MASK


@njit(cache=True, fastmath=True)
def _softplus(x: float) -> float:
    if x > 30.0:
        return x
    if x < -30.0:
        return np.exp(x)
    return np.log1p(np.exp(x))


@njit(cache=True, fastmath=True)
def _rhat_from_halves(s1, ss1, c1, s2, ss2, c2):
    """Split-chain R-hat over accumulated per-half sums and sums of squares."""
    worst = 1.0
    for k in range(s1.size):
        m1 = s1.flat[k] / c1
        m2 = s2.flat[k] / c2
        v1 = ss1.flat[k] / c1 - m1 * m1
        v2 = ss2.flat[k] / c2 - m2 * m2
        w = 0.5 * (v1 + v2)
        if w <= 1e-12:
            continue
        mbar = 0.5 * (m1 + m2)
        b = (m1 - mbar) ** 2 + (m2 - mbar) ** 2  # n/ m-1 factor with m=2 chains
        n = 0.5 * (c1 + c2)
        var_plus = (n - 1.0) / n * w + b
        r = np.sqrt(var_plus / w)
        if r > worst:
            worst = r
    return worst


@njit(cache=True, fastmath=True)
def ratio_surface_mcmc(n_mat, y_mat, a, b, phi, burn, iters, seed, step0):
    """Posterior of the ratio-parametrised toxicity surface.

    Parameters are the K = 1+(I-1)+(J-1) survival ratios, sampled on the
    logit scale. Returns (posterior mean matrix, P(pi > phi) matrix, r-hat).
    """
    np.random.seed(seed)
    I, J = n_mat.shape
    K = 1 + (I - 1) + (J - 1)

    # factorised exponents: each ratio k collects sum(n-y) over the cells it divides
    e = np.zeros(K)
    for i in range(I):
        for j in range(J):
            m = n_mat[i, j] - y_mat[i, j]
            if m <= 0 and y_mat[i, j] <= 0:
                continue
            e[0] += m
            for k in range(1, i + 1):
                e[k] += m
            for k in range(1, j + 1):
                e[I - 1 + k] += m

    # cells with observed toxicities enter through the non-factorised term
    n_tox = 0
    for i in range(I):
        for j in range(J):
            if y_mat[i, j] > 0:
                n_tox += 1
    tox_i = np.empty(n_tox, dtype=np.int64)
    tox_j = np.empty(n_tox, dtype=np.int64)
    tox_y = np.empty(n_tox)
    t = 0
    for i in range(I):
        for j in range(J):
            if y_mat[i, j] > 0:
                tox_i[t] = i
                tox_j[t] = j
                tox_y[t] = y_mat[i, j]
                t += 1

    x = np.zeros(K)
    logr = np.empty(K)
    log1mr = np.empty(K)
    r = np.empty(K)
    for k in range(K):
        sp = _softplus(-x[k])
        logr[k] = -sp
        log1mr[k] = -x[k] - sp
        r[k] = np.exp(logr[k])

    def_surv = np.empty(n_tox)  # survival product at each toxicity cell
    for t in range(n_tox):
        s = r[0]
        for k in range(1, tox_i[t] + 1):
            s *= r[k]
        for k in range(1, tox_j[t] + 1):
            s *= r[I - 1 + k]
        def_surv[t] = s

    step = np.full(K, step0)
    acc = np.zeros(K)
    means = np.zeros((I, J))
    exceed = np.zeros((I, J))
    s1 = np.zeros((I, J))
    ss1 = np.zeros((I, J))
    s2 = np.zeros((I, J))
    ss2 = np.zeros((I, J))
    kept = 0
    half = iters // 2

    ca = np.empty(I)
    cb = np.empty(J)
    for it in range(burn + iters):
        for k in range(K):
            xk_new = x[k] + step[k] * np.random.normal()
            sp = _softplus(-xk_new)
            logr_new = -sp
            log1mr_new = -xk_new - sp
            r_new = np.exp(logr_new)
            ratio = r_new / r[k]
            delta = (a[k] + e[k]) * (logr_new - logr[k]) + b[k] * (log1mr_new - log1mr[k])
            # toxicity cells affected by this component
            for t in range(n_tox):
                if k == 0:
                    hit = True
                elif k < I:
                    hit = tox_i[t] >= k
                else:
                    hit = tox_j[t] >= k - (I - 1)
                if hit:
                    s_new = def_surv[t] * ratio
                    if s_new >= 1.0:
                        delta = -np.inf
                        break
                    delta += tox_y[t] * (np.log1p(-s_new) - np.log1p(-def_surv[t]))
            if np.log(np.random.random()) < delta:
                x[k] = xk_new
                logr[k] = logr_new
                log1mr[k] = log1mr_new
                r[k] = r_new
                acc[k] += 1.0
                for t in range(n_tox):
                    if k == 0:
                        hit = True
                    elif k < I:
                        hit = tox_i[t] >= k
                    else:
                        hit = tox_j[t] >= k - (I - 1)
                    if hit:
                        def_surv[t] *= ratio
        if it < burn:
            if (it + 1) % 100 == 0:
                for k in range(K):
                    step[k] *= np.exp(0.8 * (acc[k] / 100.0 - 0.44))
                    if step[k] < 0.05:
                        step[k] = 0.05
                    elif step[k] > 10.0:
                        step[k] = 10.0
                    acc[k] = 0.0
            continue
        # accumulate the implied toxicity surface
        ca[0] = r[0]
        for i in range(1, I):
            ca[i] = ca[i - 1] * r[i]
        cb[0] = 1.0
        for j in range(1, J):
            cb[j] = cb[j - 1] * r[I - 1 + j]
        first_half = kept < half
        kept += 1
        for i in range(I):
            for j in range(J):
                p = 1.0 - ca[i] * cb[j]
                means[i, j] += p
                if p > phi:
                    exceed[i, j] += 1.0
                if first_half:
                    s1[i, j] += p
                    ss1[i, j] += p * p
                else:
                    s2[i, j] += p
                    ss2[i, j] += p * p

    rhat = _rhat_from_halves(s1, ss1, float(half), s2, ss2, float(kept - half))
    mean = means / kept
    var = (ss1 + ss2) / kept - mean * mean
    return mean, exceed / kept, var, rhat


@njit(cache=True, fastmath=True)
def _logistic_combo_loglik(v, ld_a, ld_b, dd, n_mat, y_mat):
    la1, la2, lb1, lb2, eta = v[0], v[1], v[2], v[3], v[4]
    b1 = np.exp(lb1)
    b2 = np.exp(lb2)
    I = ld_a.size
    J = ld_b.size
    ll = 0.0
    for i in range(I):
        t1 = np.exp(la1 + b1 * ld_a[i])
        for j in range(J):
            if n_mat[i, j] <= 0:
                continue
            t2 = np.exp(la2 + b2 * ld_b[j])
            odds = t1 + t2 + t1 * t2
            lo = np.log(odds) + eta * dd[i, j]
            ll += y_mat[i, j] * lo - n_mat[i, j] * _softplus(lo)
    return ll


@njit(cache=True, fastmath=True)
def logistic_combo_mcmc(
    n_mat, y_mat, ld_a, ld_b, dd, mu, sd, lower, upper, burn, iters, seed, step0
):
    """Posterior of the five-parameter combination logistic model.

    Parameter vector: (log a1, log a2, log b1, log b2, eta) with independent
    normal priors. Returns per-cell (mean pi, P(pi > upper),
    P(lower < pi < upper), r-hat).
    """
    np.random.seed(seed)
    I = ld_a.size
    J = ld_b.size
    K = 5
    v = mu.copy()
    ll = _logistic_combo_loglik(v, ld_a, ld_b, dd, n_mat, y_mat)
    lp = ll
    for k in range(K):
        lp += -0.5 * ((v[k] - mu[k]) / sd[k]) ** 2

    step = np.empty(K)
    for k in range(K):
        step[k] = step0 * sd[k] if sd[k] < 1.0 else step0
    acc = np.zeros(K)
    means = np.zeros((I, J))
    p_over = np.zeros((I, J))
    p_band = np.zeros((I, J))
    s1 = np.zeros((I, J))
    ss1 = np.zeros((I, J))
    s2 = np.zeros((I, J))
    ss2 = np.zeros((I, J))
    kept = 0
    half = iters // 2

    for it in range(burn + iters):
        for k in range(K):
            old = v[k]
            v[k] = old + step[k] * np.random.normal()
            ll_new = _logistic_combo_loglik(v, ld_a, ld_b, dd, n_mat, y_mat)
            lp_new = ll_new
            for kk in range(K):
                lp_new += -0.5 * ((v[kk] - mu[kk]) / sd[kk]) ** 2
            if np.log(np.random.random()) < lp_new - lp:
                lp = lp_new
                acc[k] += 1.0
            else:
                v[k] = old
        if it < burn:
            if (it + 1) % 100 == 0:
                for k in range(K):
                    step[k] *= np.exp(0.8 * (acc[k] / 100.0 - 0.44))
                    floor = 1e-7
                    if step[k] < floor:
                        step[k] = floor
                    elif step[k] > 10.0:
                        step[k] = 10.0
                    acc[k] = 0.0
            continue
        first_half = kept < half
        kept += 1
        b1 = np.exp(v[2])
        b2 = np.exp(v[3])
        for i in range(I):
            t1 = np.exp(v[0] + b1 * ld_a[i])
            for j in range(J):
                t2 = np.exp(v[1] + b2 * ld_b[j])
                lo = np.log(t1 + t2 + t1 * t2) + v[4] * dd[i, j]
                if lo > 30.0:
                    p = 1.0
                elif lo < -30.0:
                    p = np.exp(lo)
                else:
                    p = 1.0 / (1.0 + np.exp(-lo))
                means[i, j] += p
                if p > upper:
                    p_over[i, j] += 1.0
                elif p > lower:
                    p_band[i, j] += 1.0
                if first_half:
                    s1[i, j] += p
                    ss1[i, j] += p * p
                else:
                    s2[i, j] += p
                    ss2[i, j] += p * p

    rhat = _rhat_from_halves(s1, ss1, float(half), s2, ss2, float(kept - half))
    return means / kept, p_over / kept, p_band / kept, rhat

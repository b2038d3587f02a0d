"""Compiled inner loops for intensities, compensators and thinning.

Every routine here is univariate. ``query`` arrays must be sorted ascending and
only events strictly before a query point contribute to it.
"""
import math

import numpy as np
from numba import njit

# ---------------------------------------------------------------------------
# exponential-kernel sums
# ---------------------------------------------------------------------------


@njit(cache=True)
def expsum_at(drivers, weights, beta, query):
    """Return (W, S) with W(q) = sum w_i and S(q) = sum w_i exp(-beta (q - d_i)) over d_i < q."""
    nq = query.shape[0]
    W = np.zeros(nq)
    S = np.zeros(nq)
    j = 0
    nd = drivers.shape[0]
    s = 0.0
    w = 0.0
    last = 0.0
    for k in range(nq):
        q = query[k]
        while j < nd and drivers[j] < q:
            s = s * math.exp(-beta * (drivers[j] - last)) + weights[j]
            w += weights[j]
            last = drivers[j]
            j += 1
        W[k] = w
        S[k] = s * math.exp(-beta * (q - last))
    return W, S


@njit(cache=True)
def exp_hawkes_event_intensity(times, mu, alpha, beta):
    n = times.shape[0]
    out = np.empty(n)
    s = 0.0
    last = 0.0
    for i in range(n):
        s *= math.exp(-beta * (times[i] - last))
        out[i] = mu + alpha * s
        s += 1.0
        last = times[i]
    return out


@njit(cache=True)
def exp_hawkes_loglik(times, horizon, mu, alpha, beta):
    n = times.shape[0]
    s = 0.0
    last = 0.0
    ll = 0.0
    for i in range(n):
        s *= math.exp(-beta * (times[i] - last))
        lam = mu + alpha * s
        if not lam > 0.0:
            return -np.inf
        ll += math.log(lam)
        s += 1.0
        last = times[i]
    tail = s * math.exp(-beta * (horizon - last))
    comp = mu * horizon + alpha / beta * (n - tail)
    return ll - comp


@njit(cache=True)
def recursive_event_intensity(times, mu, kappa, beta, alpha):
    """Left-limit intensities of the recursive model with H(x) = kappa x^-alpha, g(u) = beta e^{-beta u}."""
    n = times.shape[0]
    out = np.empty(n)
    e = 0.0
    last = 0.0
    for i in range(n):
        e *= math.exp(-beta * (times[i] - last))
        lam = mu + e
        out[i] = lam
        if lam > 0.0:
            e += kappa * lam ** (-alpha) * beta
        else:
            e = np.inf
        last = times[i]
    return out


# ---------------------------------------------------------------------------
# direct-sum kernels (power law, Omori/ETAS)
# ---------------------------------------------------------------------------


@njit(cache=True)
def _pl_primitive(u, beta):
    # integral_0^u (1 + s)^-beta ds
    L = math.log1p(u)
    if beta == 1.0:
        return L
    return -math.expm1((1.0 - beta) * L) / (beta - 1.0)


@njit(cache=True)
def powerlaw_at(times, mu, alpha, beta, query):
    nq = query.shape[0]
    lam = np.empty(nq)
    comp = np.empty(nq)
    n = times.shape[0]
    for k in range(nq):
        q = query[k]
        a = 0.0
        c = 0.0
        for i in range(n):
            if times[i] >= q:
                break
            d = q - times[i]
            a += math.exp(-beta * math.log1p(d))
            c += _pl_primitive(d, beta)
        lam[k] = mu + alpha * a
        comp[k] = mu * q + alpha * c
    return lam, comp


@njit(cache=True)
def powerlaw_event_intensity(times, mu, alpha, beta):
    n = times.shape[0]
    out = np.empty(n)
    for j in range(n):
        a = 0.0
        tj = times[j]
        for i in range(j):
            a += math.exp(-beta * math.log1p(tj - times[i]))
        out[j] = mu + alpha * a
    return out


@njit(cache=True)
def powerlaw_loglik(times, horizon, mu, alpha, beta):
    n = times.shape[0]
    ll = 0.0
    for j in range(n):
        a = 0.0
        tj = times[j]
        for i in range(j):
            a += math.exp(-beta * math.log1p(tj - times[i]))
        lam = mu + alpha * a
        if not lam > 0.0:
            return -np.inf
        ll += math.log(lam)
    c = 0.0
    for i in range(n):
        c += _pl_primitive(horizon - times[i], beta)
    return ll - mu * horizon - alpha * c


@njit(cache=True)
def etas_at(times, marks, cutoff, mu, K, c, beta, query):
    nq = query.shape[0]
    lam = np.empty(nq)
    comp = np.empty(nq)
    n = times.shape[0]
    for k in range(nq):
        q = query[k]
        a = 0.0
        b = 0.0
        for i in range(n):
            if times[i] >= q:
                break
            w = math.exp(beta * (marks[i] - cutoff))
            d = q - times[i]
            a += w / (d + c)
            b += w * math.log1p(d / c)
        lam[k] = mu + K * a
        comp[k] = mu * q + K * b
    return lam, comp


@njit(cache=True)
def etas_event_intensity(times, marks, cutoff, mu, K, c, beta):
    n = times.shape[0]
    w = np.empty(n)
    for i in range(n):
        w[i] = math.exp(beta * (marks[i] - cutoff))
    out = np.empty(n)
    for j in range(n):
        a = 0.0
        tj = times[j]
        for i in range(j):
            a += w[i] / (tj - times[i] + c)
        out[j] = mu + K * a
    return out


# ---------------------------------------------------------------------------
# self-correcting process
# ---------------------------------------------------------------------------


@njit(cache=True)
def selfcorrecting_at(times, mu, alpha, beta, query):
    """Intensity mu exp(beta t) alpha^N(t-) and its integral, in log space."""
    nq = query.shape[0]
    lam = np.empty(nq)
    comp = np.empty(nq)
    la = math.log(alpha)
    n = times.shape[0]
    j = 0
    acc = 0.0
    seg_start = 0.0
    for k in range(nq):
        q = query[k]
        while j < n and times[j] < q:
            # close the segment [seg_start, times[j]) carrying j previous events
            acc += mu / beta * math.exp(beta * seg_start + j * la) * math.expm1(beta * (times[j] - seg_start))
            seg_start = times[j]
            j += 1
        lam[k] = mu * math.exp(beta * q + j * la)
        comp[k] = acc + mu / beta * math.exp(beta * seg_start + j * la) * math.expm1(beta * (q - seg_start))
    return lam, comp


# ---------------------------------------------------------------------------
# thinning samplers
# ---------------------------------------------------------------------------


@njit(cache=True)
def _grow(buf, n):
    if n < buf.shape[0]:
        return buf
    new = np.empty(2 * buf.shape[0])
    new[: buf.shape[0]] = buf
    return new


@njit(cache=True)
def thin_exp_hawkes(rng, mu, alpha, beta, horizon, cap):
    buf = np.empty(1024)
    n = 0
    t = 0.0
    s = 0.0
    while True:
        bound = mu + alpha * s
        if not bound > 0.0:
            return buf[:n], -1
        w = rng.exponential(1.0 / bound)
        t += w
        if t > horizon:
            break
        s *= math.exp(-beta * w)
        lam = mu + alpha * s
        if rng.random() * bound <= lam:
            buf = _grow(buf, n)
            buf[n] = t
            n += 1
            s += 1.0
            if n >= cap:
                return buf[:n], -2
    return buf[:n], 0


@njit(cache=True)
def thin_powerlaw(rng, mu, alpha, beta, horizon, cap):
    buf = np.empty(1024)
    n = 0
    t = 0.0
    bound = mu
    while True:
        if not bound > 0.0:
            return buf[:n], -1
        t += rng.exponential(1.0 / bound)
        if t > horizon:
            break
        a = 0.0
        for i in range(n):
            a += math.exp(-beta * math.log1p(t - buf[i]))
        lam = mu + alpha * a
        if rng.random() * bound <= lam:
            buf = _grow(buf, n)
            buf[n] = t
            n += 1
            if n >= cap:
                return buf[:n], -2
            bound = lam + alpha
        else:
            bound = lam
    return buf[:n], 0


@njit(cache=True)
def thin_shot_noise(rng, shots, alpha, beta, horizon, cap):
    buf = np.empty(1024)
    n = 0
    t = 0.0
    s = 0.0
    j = 0
    ns = shots.shape[0]
    while True:
        bound = alpha * s
        if not bound > 0.0:
            if j >= ns:
                break
            s = s * math.exp(-beta * (shots[j] - t)) + 1.0
            t = shots[j]
            j += 1
            continue
        cand = t + rng.exponential(1.0 / bound)
        if j < ns and cand >= shots[j]:
            s = s * math.exp(-beta * (shots[j] - t)) + 1.0
            t = shots[j]
            j += 1
            continue
        if cand > horizon:
            break
        s *= math.exp(-beta * (cand - t))
        t = cand
        if rng.random() * bound <= alpha * s:
            buf = _grow(buf, n)
            buf[n] = t
            n += 1
            if n >= cap:
                return buf[:n], -2
    return buf[:n], 0


@njit(cache=True)
def thin_self_correcting(rng, mu, alpha, beta, horizon, cap):
    buf = np.empty(1024)
    n = 0
    t = 0.0
    la = math.log(alpha)
    while t <= horizon:
        lam_now = mu * math.exp(beta * t + n * la)
        if not lam_now > 0.0 or not math.isfinite(lam_now):
            return buf[:n], -1
        # four expected gaps, capped so the bound grows by at most a factor e
        window = min(4.0 / lam_now, 1.0 / beta)
        bound = mu * math.exp(beta * (t + window) + n * la)
        w = rng.exponential(1.0 / bound)
        if w > window:
            t += window
            continue
        t += w
        if t > horizon:
            break
        lam = mu * math.exp(beta * t + n * la)
        if rng.random() * bound <= lam:
            buf = _grow(buf, n)
            buf[n] = t
            n += 1
            if n >= cap:
                return buf[:n], -2
    return buf[:n], 0


@njit(cache=True)
def thin_etas(rng, marks_pool, cutoff, mu, K, c, beta, horizon, cap):
    """Marks are consumed from ``marks_pool`` in acceptance order; returns (times, n_used, status)."""
    buf = np.empty(1024)
    wts = np.empty(1024)
    n = 0
    t = 0.0
    bound = mu
    while True:
        if not bound > 0.0:
            return buf[:n], n, -1
        t += rng.exponential(1.0 / bound)
        if t > horizon:
            break
        a = 0.0
        for i in range(n):
            a += wts[i] / (t - buf[i] + c)
        lam = mu + K * a
        if rng.random() * bound <= lam:
            if n >= marks_pool.shape[0]:
                return buf[:n], n, -3
            buf = _grow(buf, n)
            wts = _grow(wts, n)
            buf[n] = t
            wts[n] = math.exp(beta * (marks_pool[n] - cutoff))
            bound = lam + K * wts[n] / c
            n += 1
            if n >= cap:
                return buf[:n], n, -2
        else:
            bound = lam
    return buf[:n], n, 0


@njit(cache=True)
def thin_recursive(rng, mu, kappa, beta, alpha, horizon, cap):
    buf = np.empty(1024)
    lam_at = np.empty(1024)
    n = 0
    t = 0.0
    e = 0.0
    while True:
        bound = mu + e
        if not bound > 0.0 or not math.isfinite(bound):
            return buf[:n], lam_at[:n], -1
        w = rng.exponential(1.0 / bound)
        t += w
        if t > horizon:
            break
        e *= math.exp(-beta * w)
        lam = mu + e
        if rng.random() * bound <= lam:
            buf = _grow(buf, n)
            lam_at = _grow(lam_at, n)
            buf[n] = t
            lam_at[n] = lam
            n += 1
            e += kappa * lam ** (-alpha) * beta
            if n >= cap:
                return buf[:n], lam_at[:n], -2
    return buf[:n], lam_at[:n], 0

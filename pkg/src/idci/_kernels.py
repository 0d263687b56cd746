"""Numba path kernels for the controlled-reserve simulation.

Design notes:

* Per-path RNG: xoshiro256++ seeded through splitmix64 from (seed, path
  index), so estimates are bit-identical for a given configuration no
  matter how many threads run the loop.
* Brownian paths advance on multiples of ``dt``.  Away from both barriers
  the step is a single Gaussian block whose length is capped so that the
  probability of an unobserved barrier touch is below ~1e-18; near a
  barrier the block shrinks back to ``dt``.  Within every step the exact
  joint law of (endpoint, bridge minimum) drives the reflection at 0, and
  the bridge-maximum law drives the dividend trigger, so blocking changes
  nothing but the time resolution of event stamps.
* Compound-Poisson paths are event-driven and exact: exponential
  inter-arrival times, deterministic drift between claims, dividend
  hits solved in closed form.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

U64 = np.uint64
_INV53 = 1.0 / 9007199254740992.0  # 2^-53
_GATE = 41.4  # exp(-GATE) ~ 1e-18: ignore rarer bridge touches
_SPAN = 5.0  # Gaussian reach multiplier for block sizing (touch prob ~ e^-25)
_INJ_BLOCK = 2e-3  # block cap while the reflecting barrier is in reach, so
# that stamping a block's injections at its midpoint costs only O(q*2e-3)


@njit(inline="always", cache=True, fastmath=True)
def _splitmix(z):
    z = U64(z + U64(0x9E3779B97F4A7C15))
    t = z
    t = U64((t ^ (t >> U64(30))) * U64(0xBF58476D1CE4E5B9))
    t = U64((t ^ (t >> U64(27))) * U64(0x94D049BB133111EB))
    return z, U64(t ^ (t >> U64(31)))


@njit(inline="always", cache=True, fastmath=True)
def _seed_state(seed, idx):
    s = np.empty(4, dtype=np.uint64)
    z = U64(U64(seed) ^ U64(U64(idx + 1) * U64(0xD1342543DE82EF95)))
    z, s[0] = _splitmix(z)
    z, s[1] = _splitmix(z)
    z, s[2] = _splitmix(z)
    z, s[3] = _splitmix(z)
    if s[0] == U64(0) and s[1] == U64(0) and s[2] == U64(0) and s[3] == U64(0):
        s[0] = U64(0x9E3779B97F4A7C15)
    return s


@njit(inline="always", cache=True, fastmath=True)
def _next_u64(s):
    x = U64(s[0] + s[3])
    res = U64(U64((x << U64(23)) | (x >> U64(41))) + s[0])
    t = U64(s[1] << U64(17))
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = U64((s[3] << U64(45)) | (s[3] >> U64(19)))
    return res


@njit(inline="always", cache=True, fastmath=True)
def _u01(s):
    # uniform in [0, 1)
    return np.float64(_next_u64(s) >> U64(11)) * _INV53


@njit(inline="always", cache=True, fastmath=True)
def _u01_open(s):
    # uniform in (0, 1]
    return (np.float64(_next_u64(s) >> U64(11)) + 1.0) * _INV53


@njit(inline="always", cache=True, fastmath=True)
def _normal(s, cache):
    # Marsaglia polar method with one cached spare per path
    if cache[0] > 0.0:
        cache[0] = -1.0
        return cache[1]
    while True:
        a = 2.0 * _u01(s) - 1.0
        b = 2.0 * _u01(s) - 1.0
        r2 = a * a + b * b
        if 0.0 < r2 < 1.0:
            break
    f = np.sqrt(-2.0 * np.log(r2) / r2)
    cache[0] = 1.0
    cache[1] = b * f
    return a * f


@njit(inline="always", cache=True, fastmath=True)
def _bridge_min(s, a, b, var_h):
    # exact minimum of a Brownian bridge from a to b with variance var_h
    u = _u01_open(s)
    d = a - b
    return 0.5 * (a + b - np.sqrt(d * d - 2.0 * var_h * np.log(u)))


@njit(inline="always", cache=True, fastmath=True)
def _block_length(u, z2, sigma, mu_abs, dt, block_max, remaining):
    # longest step keeping at most one barrier within Gaussian reach and
    # shrinking to dt resolution as the dividend trigger gets close
    h = block_max
    if h > remaining:
        h = remaining
    d2 = z2 - u
    reach = _SPAN * sigma * np.sqrt(h) + mu_abs * h
    if d2 < reach:
        hh = (d2 / (_SPAN * sigma)) ** 2
        if hh < h:
            h = hh
        reach = _SPAN * sigma * np.sqrt(h) + mu_abs * h
        if u < reach:
            hh = (u / (_SPAN * sigma)) ** 2
            if hh < h:
                h = hh
    # shorten blocks only where injection mass actually concentrates (zero
    # within reach of a capped block); farther out the bridge minimum is
    # still sampled exactly and its touch mass is too small to bias stamps
    if h > _INJ_BLOCK and u < _SPAN * sigma * np.sqrt(_INJ_BLOCK) + mu_abs * _INJ_BLOCK:
        h = _INJ_BLOCK
    if h < dt:
        h = dt
    k = int(h / dt)
    if k < 1:
        k = 1
    h = k * dt
    if h > remaining:
        h = remaining
    return h


@njit(parallel=True, cache=True, fastmath=True)
def brownian_value_paths(
    mu, sigma, q, c, z1, z2, x0, dt, horizon, n_paths, seed, bridge, block_max,
    out_div, out_inj,
):
    s2 = sigma * sigma
    mu_abs = abs(mu)
    for i in prange(n_paths):
        st = _seed_state(seed, i)
        cache = np.zeros(2, dtype=np.float64)
        cache[0] = -1.0
        div = 0.0
        inj = 0.0
        t = 0.0
        u = x0
        while t < horizon:
            if u >= z2:
                div += np.exp(-q * t) * (u - z1 - c)
                u = z1
                continue
            if bridge:
                h = _block_length(u, z2, sigma, mu_abs, dt, block_max, horizon - t)
            else:
                h = dt if dt <= horizon - t else horizon - t
            if h <= 0.0:
                break
            b = u + mu * h + sigma * np.sqrt(h) * _normal(st, cache)
            if bridge:
                crossed = False
                tc = t
                if b >= z2:
                    crossed = True
                    tc = t + h * (z2 - u) / (b - u)
                else:
                    ex = 2.0 * (z2 - u) * (z2 - b) / (s2 * h)
                    if ex < _GATE and _u01(st) < np.exp(-ex):
                        crossed = True
                        tc = t + 0.5 * h
                if crossed:
                    div += np.exp(-q * tc) * (z2 - z1 - c)
                    u = z1
                    t = tc
                    continue
                if b <= 0.0:
                    m = _bridge_min(st, u, b, s2 * h)
                    inj += np.exp(-q * (t + 0.5 * h)) * (-m)
                    u = b - m
                else:
                    ex = 2.0 * u * b / (s2 * h)
                    if ex < _GATE:
                        m = _bridge_min(st, u, b, s2 * h)
                        if m < 0.0:
                            inj += np.exp(-q * (t + 0.5 * h)) * (-m)
                            b = b - m
                    u = b
                t += h
            else:
                t += h
                if b >= z2:
                    div += np.exp(-q * t) * (b - z1 - c)
                    u = z1
                elif b < 0.0:
                    inj += np.exp(-q * t) * (-b)
                    u = 0.0
                else:
                    u = b
        out_div[i] = div
        out_inj[i] = inj


@njit(parallel=True, cache=True, fastmath=True)
def brownian_exit_paths(
    mu, sigma, q, x0, level, dt, horizon, n_paths, seed, bridge, block_max, out_lap
):
    s2 = sigma * sigma
    mu_abs = abs(mu)
    for i in prange(n_paths):
        st = _seed_state(seed, i)
        cache = np.zeros(2, dtype=np.float64)
        cache[0] = -1.0
        t = 0.0
        u = x0
        lap = 0.0
        if u >= level:
            lap = 1.0
        else:
            while t < horizon:
                if bridge:
                    h = _block_length(u, level, sigma, mu_abs, dt, block_max, horizon - t)
                else:
                    h = dt if dt <= horizon - t else horizon - t
                if h <= 0.0:
                    break
                b = u + mu * h + sigma * np.sqrt(h) * _normal(st, cache)
                if bridge:
                    if b >= level:
                        tc = t + h * (level - u) / (b - u)
                        lap = np.exp(-q * tc)
                        break
                    ex = 2.0 * (level - u) * (level - b) / (s2 * h)
                    if ex < _GATE and _u01(st) < np.exp(-ex):
                        lap = np.exp(-q * (t + 0.5 * h))
                        break
                    if b <= 0.0:
                        m = _bridge_min(st, u, b, s2 * h)
                        u = b - m
                    else:
                        ex = 2.0 * u * b / (s2 * h)
                        if ex < _GATE:
                            m = _bridge_min(st, u, b, s2 * h)
                            if m < 0.0:
                                b = b - m
                        u = b
                    t += h
                else:
                    t += h
                    if b >= level:
                        lap = np.exp(-q * t)
                        break
                    u = 0.0 if b < 0.0 else b
        out_lap[i] = lap


@njit(parallel=True, cache=True, fastmath=True)
def poisson_value_paths(
    beta, lam, q, c, z1, z2, x0, horizon, n_paths, seed, exp_jumps, jump_param,
    out_div, out_inj,
):
    for i in prange(n_paths):
        st = _seed_state(seed, i)
        div = 0.0
        inj = 0.0
        t = 0.0
        u = x0
        if u >= z2:
            div += (u - z1 - c)
            u = z1
        while True:
            wait = -np.log(_u01_open(st)) / lam
            hit = (z2 - u) / beta
            if hit < wait:
                t += hit
                if t >= horizon:
                    break
                div += np.exp(-q * t) * (z2 - z1 - c)
                u = z1
                continue  # residual waiting time is again exponential
            t += wait
            if t >= horizon:
                break
            u += beta * wait
            if exp_jumps:
                u -= -np.log(_u01_open(st)) / jump_param
            else:
                u -= jump_param
            if u < 0.0:
                inj += np.exp(-q * t) * (-u)
                u = 0.0
        out_div[i] = div
        out_inj[i] = inj


@njit(parallel=True, cache=True, fastmath=True)
def poisson_exit_paths(
    beta, lam, q, x0, level, horizon, n_paths, seed, exp_jumps, jump_param, out_lap
):
    for i in prange(n_paths):
        st = _seed_state(seed, i)
        t = 0.0
        u = x0
        lap = 0.0
        if u >= level:
            lap = 1.0
        else:
            while True:
                wait = -np.log(_u01_open(st)) / lam
                hit = (level - u) / beta
                if hit < wait:
                    t += hit
                    if t < horizon:
                        lap = np.exp(-q * t)
                    break
                t += wait
                if t >= horizon:
                    break
                u += beta * wait
                if exp_jumps:
                    u -= -np.log(_u01_open(st)) / jump_param
                else:
                    u -= jump_param
                if u < 0.0:
                    u = 0.0
        out_lap[i] = lap

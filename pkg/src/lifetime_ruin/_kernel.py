"""Compiled path kernel for the Monte Carlo estimator.

Each path owns a SplitMix64 stream keyed by ``(seed, path index)``, so its
draws never depend on how paths are batched or threaded. Normals come from a
256-layer ziggurat over that stream; the Brownian-bridge test draws its
uniforms from a second stream keyed the same way.

``run_paths`` keeps a few dozen paths in flight as lanes. For each block of
steps it first hashes every lane's counters and turns them into normals, then
advances all lanes one step at a time in a branch-free loop that LLVM turns
into SIMD code. Idle lanes pick up new paths only at block boundaries, so a
path's draws never depend on the lane layout.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, uint64

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_ZIG_R = 3.6541528853610088
_ZIG_V = 0.00492867323399

# outcome codes written per path
DIED, RUINED, SAFE, HORIZON = 0, 1, 2, 3
# lane states besides a final outcome code
_ACTIVE, _PENDING, _IDLE = -1.0, -2.0, 9.0
BLOCK = 64
# no nnan/ninf: a zero-volatility step divides by zero in the bridge ratio
_FAST = {"nsz", "arcp", "contract", "afn", "reassoc"}
_BRIDGE_KEY = np.uint64(0x5DEECE66D)
_CHAIN_KEY = np.uint64(0xD1B54A32D192ED03)


def _ziggurat_tables():
    m1 = 2.0**52
    dn = tn = _ZIG_R
    q = _ZIG_V / math.exp(-0.5 * dn * dn)
    ki = np.zeros(256, np.uint64)
    wi = np.zeros(256)
    fi = np.zeros(256)
    ki[0] = np.uint64((dn / q) * m1)
    wi[0] = q / m1
    wi[255] = dn / m1
    fi[0] = 1.0
    fi[255] = math.exp(-0.5 * dn * dn)
    for i in range(254, 0, -1):
        dn = math.sqrt(-2.0 * math.log(_ZIG_V / dn + math.exp(-0.5 * dn * dn)))
        ki[i + 1] = np.uint64((dn / tn) * m1)
        tn = dn
        fi[i] = math.exp(-0.5 * dn * dn)
        wi[i] = dn / m1
    return ki, wi, fi


ZIG_K, ZIG_W, ZIG_F = _ziggurat_tables()


@njit(inline="always")
def splitmix(z):
    z = (z ^ (z >> uint64(30))) * uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> uint64(27))) * uint64(0x94D049BB133111EB)
    return z ^ (z >> uint64(31))


@njit(inline="always")
def stream_start(seed, index):
    return splitmix(splitmix(uint64(seed)) ^ (uint64(index) * GOLDEN))


@njit(inline="always")
def uniform(st):
    """Uniform on the open interval (0, 1)."""
    st += GOLDEN
    return st, ((splitmix(st) >> uint64(11)) + uint64(1)) * (1.0 / 9007199254740993.0)


@njit(inline="always")
def normal_bits(bits, ki, wi, fi):
    """Ziggurat normal from 64 hashed bits.

    Rejected draws continue on a hash chain seeded by the rejected bits, so
    the k-th normal of a stream depends only on the k-th counter value. That
    lets a whole block of counters be hashed in one vectorised loop.
    """
    while True:
        idx = bits & uint64(0xFF)
        rest = bits >> uint64(8)
        sign = rest & uint64(1)
        mag = (rest >> uint64(1)) & uint64(0x000FFFFFFFFFFFFF)
        x = mag * wi[idx]
        if sign:
            x = -x
        if mag < ki[idx]:
            return x
        c = bits
        if idx == 0:
            while True:
                c, u1 = uniform(c)
                c, u2 = uniform(c)
                xx = -math.log(u1) / _ZIG_R
                yy = -math.log(u2)
                if yy + yy > xx * xx:
                    break
            if sign:
                return -(_ZIG_R + xx)
            return _ZIG_R + xx
        c, u = uniform(c)
        if fi[idx] + u * (fi[idx - 1] - fi[idx]) < math.exp(-0.5 * x * x):
            return x
        bits = splitmix(c ^ _CHAIN_KEY)


@njit(nogil=True, cache=True)
def normal_sample(seed, index, n):
    """``n`` normals from the stream of path ``index``; used for testing."""
    out = np.empty(n)
    st = stream_start(seed, index)
    for i in range(n):
        st += GOLDEN
        out[i] = normal_bits(splitmix(st), ZIG_K, ZIG_W, ZIG_F)
    return out


@njit(inline="always")
def _begin(seed, index, lam_dt, n_horizon):
    """Normal stream, bridge stream and the step plan of one path.

    Returns ``(normal state, bridge state, full, last_dt_fraction, end code)``:
    the path takes ``full`` steps of ``dt`` and then one last step of
    ``fraction * dt`` ending at its death time, or ends after the horizon.
    """
    st = stream_start(seed, index)
    su = stream_start(seed ^ _BRIDGE_KEY, index)
    st, u = uniform(st)
    steps = -math.log(u) / lam_dt  # death time in units of dt
    if steps >= n_horizon:
        return st, su, n_horizon - 1, 1.0, HORIZON
    full = int(steps)
    frac = steps - full
    if frac == 0.0:
        return st, su, full - 1, 1.0, DIED
    return st, su, full, frac, DIED


@njit(nogil=True, cache=True, error_model="numpy", fastmath=_FAST)
def run_paths(first, count, seed, w_start, ruin, safe, table, inv_h, tail_frac,
              r, b, mu, sig, lam, cons, prop, dt, n_horizon, bridge, lanes,
              ki, wi, fi, codes, times):
    """Simulate paths ``first .. first+count-1`` and fill ``codes`` and ``times``.

    ``codes`` and ``times`` are indexed relative to ``first``.
    """
    sq = math.sqrt(dt)
    lam_dt = lam * dt
    inv_dt = 1.0 / dt
    ng = table.shape[0]
    xmax = ng - 1.0
    jmax = ng - 2
    use_bridge = 1.0 if bridge else 0.0
    pid = np.full(lanes, -1, np.int64)
    state = np.full(lanes, _IDLE)
    st = np.zeros(lanes, np.uint64)
    su = np.zeros(lanes, np.uint64)
    w = np.zeros(lanes)
    p = np.zeros(lanes)
    k = np.zeros(lanes)
    full = np.zeros(lanes)
    h_last = np.zeros(lanes)
    sh_last = np.zeros(lanes)
    ih_last = np.zeros(lanes)
    end = np.zeros(lanes)
    ratio = np.zeros(lanes)
    zb = np.empty((BLOCK, lanes))
    raw = np.empty(BLOCK, np.uint64)
    nxt = 0
    while True:
        live = 0
        for l in range(lanes):
            c = state[l]
            if c >= 0.0 and c != _IDLE:
                kk = k[l]
                codes[pid[l]] = int(c)
                times[pid[l]] = (kk - 1.0) * dt + (h_last[l] if kk > full[l] else dt)
                state[l] = _IDLE
            if state[l] == _IDLE and nxt < count:
                pid[l] = nxt
                st[l], su[l], f0, r0, e0 = _begin(seed, first + nxt, lam_dt, n_horizon)
                full[l] = f0
                h_last[l] = r0 * dt
                sh_last[l] = math.sqrt(r0 * dt)
                ih_last[l] = 1.0 / (r0 * dt)
                end[l] = e0
                w[l] = w_start
                k[l] = 0.0
                state[l] = _ACTIVE
                nxt += 1
            if state[l] == _ACTIVE:
                live += 1
        if live == 0:
            break
        for l in range(lanes):
            if state[l] == _ACTIVE:
                s = st[l]
                for m in range(BLOCK):
                    raw[m] = splitmix(s + uint64(m + 1) * GOLDEN)
                st[l] = s + uint64(BLOCK) * GOLDEN
                for m in range(BLOCK):
                    zb[m, l] = normal_bits(raw[m], ki, wi, fi)
        for m in range(BLOCK):
            # table lookups stay scalar; the update below vectorises
            for l in range(lanes):
                x = min(w[l] * inv_h, xmax)
                j = min(int(x), jmax)
                t0 = table[j]
                p[l] = tail_frac * w[l] if x >= xmax else t0 + (table[j + 1] - t0) * (x - j)
            pending = 0.0
            for l in range(lanes):
                ww = w[l]
                kk = k[l] + 1.0
                last = kk > full[l]
                h = h_last[l] if last else dt
                sh = sh_last[l] if last else sq
                ih = ih_last[l] if last else inv_dt
                pp = p[l]
                dev = ww - pp
                drift = mu * pp - cons - prop * ww + (r * dev if dev > 0.0 else b * dev)
                vol = sig * pp
                wn = ww + drift * h + vol * sh * zb[m, l]
                vv = vol * vol
                # bridge: the path touched the barrier inside the step with
                # probability exp(-q / vv); only worth a draw when q < 40 vv
                q = 2.0 * (ww - ruin) * (wn - ruin) * ih
                near = use_bridge * (40.0 * vv - q) > 0.0
                nc = end[l] if last else _ACTIVE
                nc = SAFE if wn >= safe else nc
                nc = _PENDING if near else nc
                nc = RUINED if wn <= ruin else nc
                alive = state[l] == _ACTIVE
                state[l] = nc if alive else state[l]
                w[l] = wn if alive else ww
                k[l] = kk if alive else k[l]
                ratio[l] = q / vv
                pending += 1.0 if (alive and nc == _PENDING) else 0.0
            if pending > 0.0:
                for l in range(lanes):
                    if state[l] == _PENDING:
                        su[l], u = uniform(su[l])
                        if u < math.exp(-ratio[l]):
                            state[l] = RUINED
                        elif w[l] >= safe:
                            state[l] = SAFE
                        elif k[l] > full[l]:
                            state[l] = end[l]
                        else:
                            state[l] = _ACTIVE


@njit(nogil=True, cache=True, error_model="numpy")
def trace_path(index, seed, w_start, ruin, safe, table, inv_h, tail_frac,
               r, b, mu, sig, lam, cons, prop, dt, n_horizon, bridge, ki, wi, fi):
    """Wealth and allocation at every step of one path, with its outcome code.

    Draws from the same streams with the same step rule as :func:`run_paths`.
    """
    sq = math.sqrt(dt)
    ng = table.shape[0]
    xmax = ng - 1.0
    jmax = ng - 2
    s, su, full, frac, end = _begin(seed, index, lam * dt, n_horizon)
    wealth = np.empty(full + 2)
    alloc = np.empty(full + 1)
    ww = w_start
    wealth[0] = ww
    kk = 0
    code = -1
    while code < 0:
        s += GOLDEN
        z = normal_bits(splitmix(s), ki, wi, fi)
        kk += 1
        h = dt
        sh = sq
        if kk > full:
            h = frac * dt
            sh = math.sqrt(h)
        x = min(ww * inv_h, xmax)
        j = min(int(x), jmax)
        p = tail_frac * ww if x >= xmax else table[j] + (table[j + 1] - table[j]) * (x - j)
        alloc[kk - 1] = p
        dev = ww - p
        drift = mu * p - cons - prop * ww + (r * dev if dev > 0.0 else b * dev)
        vol = sig * p
        wn = ww + drift * h + vol * sh * z
        if wn <= ruin:
            code = RUINED
        else:
            vv = vol * vol
            q = 2.0 * (ww - ruin) * (wn - ruin) / h
            if bridge and q < 40.0 * vv:
                su, u = uniform(su)
                if u < math.exp(-q / vv):
                    code = RUINED
            if code < 0:
                if wn >= safe:
                    code = SAFE
                elif kk > full:
                    code = end
        ww = wn
        wealth[kk] = ww
    return wealth[: kk + 1], alloc[:kk], code

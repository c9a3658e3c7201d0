"""Compiled batch scoring of candidate rollouts.

Mirrors :func:`lambda_nav.risk.expected_path_risk` cell for cell; the test
suite checks the two against each other.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

SNAP_TOL = 1e-9
TIE_TOL = 1e-10


@njit(cache=True)
def _snap(u):
    k = np.floor(u + 0.5)
    if abs(u - k) < SNAP_TOL:
        return k
    return u


@njit(cache=True)
def _walk(ux0, uy0, ux1, uy1, W, Hh, out_c, out_r, out_t):
    """Supercover of one segment in cell units; returns the number of cells written."""
    c = int(math.floor(ux0))
    r = int(math.floor(uy0))
    ce = int(math.floor(ux1))
    re = int(math.floor(uy1))
    dx = ux1 - ux0
    dy = uy1 - uy0
    sx = 1 if dx > 0 else (-1 if dx < 0 else 0)
    sy = 1 if dy > 0 else (-1 if dy < 0 else 0)
    bx = c + 1 if sx > 0 else c
    by = r + 1 if sy > 0 else r
    n = 0
    out_c[n] = c
    out_r[n] = r
    out_t[n] = 0.0
    n += 1
    budget = abs(ce - c) + abs(re - r) + 2
    while (c != ce or r != re) and budget > 0:
        budget -= 1
        tmx = (bx - ux0) / dx if sx != 0 else np.inf
        tmy = (by - uy0) / dy if sy != 0 else np.inf
        t = min(tmx, tmy)
        if t > 1.0:
            break
        if abs(tmx - tmy) <= TIE_TOL:
            if 0.0 < t < 1.0:
                if 0 <= c + sx < W:
                    out_c[n] = c + sx
                    out_r[n] = r
                    out_t[n] = t
                    n += 1
                if 0 <= r + sy < Hh:
                    out_c[n] = c
                    out_r[n] = r + sy
                    out_t[n] = t
                    n += 1
            if t >= 1.0:
                c = ce
                r = re
            else:
                c += sx
                r += sy
            bx += sx
            by += sy
        elif tmx < tmy:
            c += sx
            bx += sx
        else:
            r += sy
            by += sy
        out_c[n] = c
        out_r[n] = r
        out_t[n] = t
        n += 1
    return n


@njit(cache=True)
def _inside(ux, uy, W, Hh):
    c = math.floor(ux)
    r = math.floor(uy)
    return 0 <= c < W and 0 <= r < Hh


@njit(cache=True)
def batch_expected_risk(xs, ys, ths, vs, lam, hmap, ox, oy, cs, da, R, k_r, omega, track_width):
    """Expected risk of each candidate; ``inf`` marks a path leaving the grid.

    ``xs, ys, ths`` have shape (n, N+1) with the start state in column 0;
    ``vs`` has shape (n, N), speed of segment k. ``hmap`` holds the neighbour
    elevation difference with 0 on unobserved cells.
    """
    n_cand, n_pts = xs.shape
    Hh, W = lam.shape
    out = np.zeros(n_cand)
    cap = 4 * (W + Hh) + 8
    sc = np.empty(cap, np.int64)
    sr = np.empty(cap, np.int64)
    st = np.empty(cap)
    tc = np.empty(cap, np.int64)
    tr = np.empty(cap, np.int64)
    tt = np.empty(cap)
    half = track_width / 2.0
    for i in range(n_cand):
        prefix = 0.0
        total = 0.0
        last_c = -1
        last_r = -1
        bad = False
        for k in range(n_pts - 1):
            ax = xs[i, k]
            ay = ys[i, k]
            bx = xs[i, k + 1]
            by = ys[i, k + 1]
            ux0 = _snap((ax - ox) / cs)
            uy0 = _snap((ay - oy) / cs)
            ux1 = _snap((bx - ox) / cs)
            uy1 = _snap((by - oy) / cs)
            if not (_inside(ux0, uy0, W, Hh) and _inside(ux1, uy1, W, Hh)):
                bad = True
                break
            m = _walk(ux0, uy0, ux1, uy1, W, Hh, sc, sr, st)
            th = ths[i, k]
            v = vs[i, k]
            hx = -math.sin(th) * half
            hy = math.cos(th) * half
            for j in range(m):
                c = sc[j]
                r = sr[j]
                if c == last_c and r == last_r:
                    continue
                last_c = c
                last_r = r
                px = ax + st[j] * (bx - ax)
                py = ay + st[j] * (by - ay)
                p0x = px - hx
                p0y = py - hy
                p1x = px + hx
                p1y = py + hy
                if (p1x < p0x) or (p1x == p0x and p1y < p0y):
                    p0x, p1x = p1x, p0x
                    p0y, p1y = p1y, p0y
                vx0 = _snap((p0x - ox) / cs)
                vy0 = _snap((p0y - oy) / cs)
                vx1 = _snap((p1x - ox) / cs)
                vy1 = _snap((p1y - oy) / cs)
                if not (_inside(vx0, vy0, W, Hh) and _inside(vx1, vy1, W, Hh)):
                    bad = True
                    break
                li = lam[r, c]
                K = math.exp(-da * prefix) * -math.expm1(-da * li)
                prefix += li
                if K > 0.0 and v > 0.0:
                    H = hmap[r, c]
                    mt = _walk(vx0, vy0, vx1, vy1, W, Hh, tc, tr, tt)
                    for q in range(mt):
                        hq = hmap[tr[q], tc[q]]
                        if hq > H:
                            H = hq
                    psi = math.asin((R - min(H, R)) / R)
                    cp = 0.0 if psi >= math.pi / 2 else math.cos(psi)
                    lm = v * cp / omega
                    total += K * (0.5 * k_r * lm * lm)
            if bad:
                break
        out[i] = np.inf if bad else total
    return out


@njit(cache=True)
def _raster_height(raster, ox, oy, res, px, py):
    i = int(math.floor((px - ox) / res))
    j = int(math.floor((py - oy) / res))
    if 0 <= i < raster.shape[1] and 0 <= j < raster.shape[0]:
        return raster[j, i]
    return 0.0


@njit(cache=True)
def march_beams(x0, y0, z0, dirx, diry, dirz, k_lo, k_hi, step, raster, ox, oy, res):
    """First sample of each beam at or below the rastered surface, refined by one bisection.

    Returns (n, 3) hit points in beam order; beams without a hit are skipped.
    """
    nb = dirx.size
    out = np.empty((nb, 3))
    n = 0
    for b in range(nb):
        for k in range(k_lo[b], k_hi[b] + 1):
            t = k * step
            px = x0 + t * dirx[b]
            py = y0 + t * diry[b]
            pz = z0 + t * dirz[b]
            if pz <= _raster_height(raster, ox, oy, res, px, py):
                tm = t - 0.5 * step
                mx = x0 + tm * dirx[b]
                my = y0 + tm * diry[b]
                mz = z0 + tm * dirz[b]
                if mz <= _raster_height(raster, ox, oy, res, mx, my):
                    px, py, pz = mx, my, mz
                out[n, 0] = px
                out[n, 1] = py
                out[n, 2] = pz
                n += 1
                break
    return out[:n]

"""Straight-line reference for the four learners on 1-d quadratic environments.

Deliberately shares no code with the package: plain floats, closed forms,
its own environment formulas. Used only as a test oracle.
"""

import math

import numpy as np

LO, HI = -4.0, 4.0
D_SQ = 32.0  # half the squared interval length
LIP = 8.0
C = 2.0 * math.sqrt(D_SQ) * (math.sqrt(D_SQ) + math.sqrt(2.0) * LIP)


def clamp(v):
    return min(max(v, LO), HI)


def case_one_saddle(t):
    r = math.log(math.log(math.e + t))
    th = math.log(1.0 + t)
    return r * math.cos(th), r * math.sin(th)


def fval(ab, x, y):
    if ab is None:  # zero payoff
        return 0.0
    a, b = ab
    return 0.5 * (x - a) ** 2 - 0.5 * (y - b) ** 2 + (x - a) * (y - b)


def reg_saddle(ab, x0, y0, eta):
    """Saddle of f + (x-x0)^2/(2 eta) - (y-y0)^2/(2 eta) on the square."""
    if ab is None:
        return x0, y0
    a, b = ab
    k = 1.0 / eta
    # (1+k) x + y = a + b + k x0 ;  x - (1+k) y = a - b - k y0
    m11, m12, r1 = 1.0 + k, 1.0, a + b + k * x0
    m21, m22, r2 = 1.0, -(1.0 + k), a - b - k * y0
    det = m11 * m22 - m12 * m21
    x = (r1 * m22 - m12 * r2) / det
    y = (m11 * r2 - m21 * r1) / det
    if LO <= x <= HI and LO <= y <= HI:
        return x, y
    # nested 1-d: inner max in y is a clamp, outer min in x by ternary search
    def y_of(x):
        return clamp((b + (x - a) + k * y0) / (1.0 + k))

    def phi(x):
        y = y_of(x)
        return fval(ab, x, y) + k * 0.5 * (x - x0) ** 2 - k * 0.5 * (y - y0) ** 2

    lo, hi = LO, HI
    for _ in range(200):
        m1 = lo + (hi - lo) / 3
        m2 = hi - (hi - lo) / 3
        if phi(m1) <= phi(m2):
            hi = m2
        else:
            lo = m1
    x = 0.5 * (lo + hi)
    return x, y_of(x)


def prox_x(ab, y, anchor, eta):
    a, b = ab
    k = 1.0 / eta
    return clamp((a - (y - b) + k * anchor) / (1.0 + k))


def prox_y(ab, x, anchor, eta):
    a, b = ab
    k = 1.0 / eta
    return clamp((b + (x - a) + k * anchor) / (1.0 + k))


def residual(ab, x, y):
    a, b = ab
    ybest = clamp(b + (x - a))
    xbest = clamp(a - (y - b))
    return fval(ab, x, ybest) - fval(ab, xbest, y)


def start_point(seed):
    rng = np.random.default_rng(seed)
    return float(rng.uniform(LO, HI)), float(rng.uniform(LO, HI))


def run(algo, rounds, seed=0, lag=1, eps=0.1, P0=1.0):
    """Per-round log of ``eta, x, y, dual_gap, ne_sum, tracking, residual, path, bound``."""
    ne_kind = algo.startswith("ne-")
    optimistic = algo.endswith("optiomda")
    if algo == "iomda":
        K = C
    elif algo == "optiomda":
        K = 2.0 * D_SQ
    else:
        K = D_SQ

    x, y = start_point(seed)
    P = P0
    gpath = 0.0
    closed = 0.0
    history = []
    log = []
    dg = ne = tr = res = 0.0
    path_metric = 0.0
    prev_comp = None

    def fresh():
        return dict(t=0, dsum=0.0, Dsum=0.0, smax=0.0, Sx=0.0, Sy=0.0, path=0.0, prev=None, eta=None, last=None)

    s = fresh()
    for t in range(1, rounds + 1):
        s["t"] += 1
        if algo in ("iomda", "ne-iomda"):
            acc = s["Dsum"]
        else:
            acc = s["dsum"]
        eta = (K + LIP * P) / (eps + acc)
        if optimistic:
            h = history[-lag] if len(history) >= lag else None
            px, py = reg_saddle(h, x, y, eta)  # x, y hold the auxiliary point
        else:
            px, py = x, y
        a, b = case_one_saddle(t)
        ab = (a, b)
        comp = (a, b)
        # metrics
        dg += fval(ab, px, comp[1]) - fval(ab, comp[0], py)
        ne += fval(ab, px, py) - fval(ab, a, b)
        tr += max(abs(px - a), abs(py - b))
        res += residual(ab, px, py)
        inc_dg = 0.0 if prev_comp is None else abs(comp[0] - prev_comp[0]) + abs(comp[1] - prev_comp[1])
        inc_ne = 0.0 if prev_comp is None else max(abs(comp[0] - prev_comp[0]), abs(comp[1] - prev_comp[1]))
        inc = inc_ne if ne_kind else inc_dg
        path_metric += inc
        stage_inc = 0.0 if s["last"] is None else inc
        s["path"] += stage_inc
        s["last"] = comp
        prev_comp = comp

        if algo == "iomda":
            nx, ny = reg_saddle(ab, px, py, eta)
            if s["prev"] is not None:
                f_p, xp, yp, up, vp, eta_p = s["prev"]
                d = (fval(f_p, xp, vp) - fval(f_p, px, comp[1]) + fval(f_p, comp[0], py) - fval(f_p, up, yp)
                     - (0.5 * (px - xp) ** 2 + 0.5 * (py - yp) ** 2) / eta_p)
                s["dsum"] += d
                sig = max(s["dsum"], 0.0)
                Dl = max(sig - s["smax"], 0.0)
                s["Dsum"] += Dl
                s["smax"] = max(s["smax"], sig)
            s["prev"] = (ab, px, py, comp[0], comp[1], eta)
            prov = (fval(ab, px, comp[1]) - fval(ab, nx, comp[1]) + fval(ab, comp[0], ny) - fval(ab, comp[0], py)
                    - (0.5 * (nx - px) ** 2 + 0.5 * (ny - py) ** 2) / eta)
            bound_stage = (K + LIP * s["path"]) / eta + s["dsum"] + prov
            x, y = nx, ny
        elif algo == "ne-iomda":
            nx, ny = reg_saddle(ab, px, py, eta)
            f0, f1 = fval(ab, px, py), fval(ab, nx, ny)
            s["Sx"] += f0 - f1 - 0.5 * (nx - px) ** 2 / eta
            s["Sy"] += f1 - f0 - 0.5 * (ny - py) ** 2 / eta
            sig = max(s["Sx"], s["Sy"], 0.0)
            s["Dsum"] += max(sig - s["smax"], 0.0)
            s["smax"] = max(s["smax"], sig)
            bound_stage = (K + LIP * s["path"]) / eta + max(s["Sx"], s["Sy"])
            x, y = nx, ny
        else:
            xa = prox_x(ab, py, x, eta)
            ya = prox_y(ab, px, y, eta)
            dx = fval(ab, px, py) - fval(h, px, py) + fval(h, xa, py) - fval(ab, xa, py) - 0.5 * (xa - px) ** 2 / eta
            dy = fval(h, px, py) - fval(ab, px, py) + fval(ab, px, ya) - fval(h, px, ya) - 0.5 * (ya - py) ** 2 / eta
            d = max(dx, dy) if ne_kind else dx + dy
            s["dsum"] += max(d, 0.0)
            bound_stage = (K + LIP * s["path"]) / eta + s["dsum"]
            x, y = xa, ya
            history.append(ab)

        gpath += inc
        bound = closed + bound_stage
        log.append(dict(eta=eta, x=px, y=py, dual_gap=dg, ne_sum=ne, tracking=tr, residual=res,
                        path=path_metric, bound=bound))
        if gpath > P:
            closed += bound_stage
            P *= 2.0
            s = fresh()
    return log

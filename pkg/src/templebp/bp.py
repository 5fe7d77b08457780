"""Bound-preserving flux limiter.

For cell j the limited update is affine in the two interface weights,

    U_j(tm, tp) = A_j + tm * Bm_j + tp * Bp_j,

where A_j is the first-order update, Bm_j = lam * dG_{j-1/2} and
Bp_j = -lam * dG_{j+1/2} with dG the high-order minus first-order flux.
Every cell then produces a rectangle [0, Lm_j] x [0, Lp_j] of admissible
weights in three passes:

1. linear constraints (J >= eps, 0 <= J phi <= J, k_min <= k <= k_max);
2. v >= v_min, whose admissible set is convex, via bisection at the three
   far vertices of the rectangle;
3. v <= v_max, whose inadmissible set is convex, via tangent half-planes
   at the crossing of the boundary curve.

The interface weight is the smaller of the two adjacent cells' bounds.
"""
from dataclasses import dataclass

import numpy as np

from ._accel import kernel
from .model import _grad_h_nb, _h, _h_theta_nb

EPS_RATIO = 1e-13
GAMMA_TOL = 1e-13
BISECT_ITERS = 60
H_RTOL = 1e-14


class LimiterError(RuntimeError):
    pass


@dataclass
class LimiterStats:
    theta_lt1: int = 0
    n_interfaces: int = 0
    step3_cells: int = 0
    step3_iterations: int = 0
    fallbacks: int = 0


# ---------------------------------------------------------------------------
# step 1: linear constraints
# ---------------------------------------------------------------------------


def linear_ratio_bounds(gam, coef_m, coef_p, lam=1.0, eps=EPS_RATIO):
    """Largest (Lm, Lp) in [0, 1]^2 with gam + lam*(tm*coef_m + tp*coef_p) >= 0
    on the whole rectangle [0, Lm] x [0, Lp].

    ``coef_m`` and ``coef_p`` are the unscaled coefficients; the usual call has
    lam folded in already (lam=1).
    """
    gam = np.asarray(gam, dtype=float)
    P = lam * np.asarray(coef_m, dtype=float)
    Q = lam * np.asarray(coef_p, dtype=float)
    P, Q, gam = np.broadcast_arrays(P, Q, gam)
    one = np.ones_like(gam)
    with np.errstate(divide="ignore", invalid="ignore"):
        r_p = np.minimum(1.0, gam / (-Q + eps))
        r_m = np.minimum(1.0, gam / (-P + eps))
        r_both = gam / (-P - Q + eps)
    helps_m = P >= 0
    helps_p = Q >= 0
    both_ok = gam + P + Q >= 0
    lm = np.where(helps_m, one, np.where(helps_p, r_m, np.where(both_ok, one, r_both)))
    lp = np.where(helps_p, one, np.where(helps_m, r_p, np.where(both_ok, one, r_both)))
    return np.clip(lm, 0.0, 1.0), np.clip(lp, 0.0, 1.0)


def _linear_constraints(A, Bm, Bp, kmin, kmax, eps_j):
    """Yield (Gamma, P, Q) for the five linear constraints."""
    def comb(c0, c1, c2, X):
        return c0 * X[0] + c1 * X[1] + c2 * X[2]

    rows = [
        (0.0, 0.0, 1.0, -eps_j),  # J >= eps_J
        (-1.0, 0.0, 1.0, 0.0),    # J phi <= J
        (1.0, 0.0, 0.0, 0.0),     # J phi >= 0
        (-kmin, 1.0, 0.0, 0.0),   # k >= k_min
        (kmax, -1.0, 0.0, 0.0),   # k <= k_max
    ]
    for c0, c1, c2, const in rows:
        yield comb(c0, c1, c2, A) + const, comb(c0, c1, c2, Bm), comb(c0, c1, c2, Bp)


def step1(A, Bm, Bp, kmin, kmax, eps_j):
    lm = np.ones(A.shape[1])
    lp = np.ones(A.shape[1])
    for gam, P, Q in _linear_constraints(A, Bm, Bp, kmin, kmax, eps_j):
        scale = np.abs(A).max(axis=0) + 1.0
        if np.any(gam < -GAMMA_TOL * scale):
            raise LimiterError("first-order update violates a linear bound")
        a, b = linear_ratio_bounds(np.maximum(gam, 0.0), P, Q)
        np.minimum(lm, a, out=lm)
        np.minimum(lp, b, out=lp)
    return lm, lp


# ---------------------------------------------------------------------------
# step 2: v >= v_min
# ---------------------------------------------------------------------------


def _h_at(params, A, Bm, Bp, tm, tp, s):
    U = A + tm * Bm + tp * Bp
    return _h(*params, U[0], U[1], U[2], s)


def bisect_ray(func, iters=BISECT_ITERS, shape=None):
    """Largest r in [0, 1] with func(r) True, assuming the feasible set is [0, r*].

    ``func`` maps an array of r values to a boolean array; returns the last
    feasible point found (r = 1 when feasible at 1).
    """
    ok1 = func(np.ones(shape))
    lo = np.zeros(shape)
    hi = np.ones(shape)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        good = func(mid)
        lo = np.where(good, mid, lo)
        hi = np.where(good, hi, mid)
    return np.where(ok1, 1.0, lo)


def step2(params, A, Bm, Bp, vmin, lm1, lp1):
    n = A.shape[1]
    h0 = _h(*params, A[0], A[1], A[2], vmin)
    scale = np.abs(A[1]) + np.abs(A[0]) + 1e-300
    if np.any(h0 < -1e-12 * np.maximum(scale, 1.0)):
        raise LimiterError("first-order update is below v_min")

    def ray(tm, tp):
        return bisect_ray(lambda r: _h_at(params, A, Bm, Bp, r * tm, r * tp, vmin) >= 0.0,
                          shape=n)

    zero = np.zeros(n)
    r1 = ray(lm1, zero)
    r2 = ray(lm1, lp1)
    r3 = ray(zero, lp1)
    lm2 = np.minimum(r1, r2) * lm1
    lp2 = np.minimum(r2, r3) * lp1
    # the far corner of the new rectangle should already be admissible;
    # shrink along the diagonal if rounding says otherwise
    bad = _h_at(params, A, Bm, Bp, lm2, lp2, vmin) < 0.0
    if np.any(bad):
        r = ray(lm2, lp2)
        lm2 = np.where(bad, r * lm2, lm2)
        lp2 = np.where(bad, r * lp2, lp2)
    return lm2, lp2


# ---------------------------------------------------------------------------
# step 3: v <= v_max
# ---------------------------------------------------------------------------


@kernel
def _eff(j, n, lm, lp, periodic):
    tm = lm[j]
    if j > 0:
        tm = min(tm, lp[j - 1])
    elif periodic:
        tm = min(tm, lp[n - 1])
    tp = lp[j]
    if j < n - 1:
        tp = min(tp, lm[j + 1])
    elif periodic:
        tp = min(tp, lm[0])
    return tm, tp


@kernel
def _bisect_h(kind, gamma, vref, a, bm, bp, tm, tp, s):
    """Largest r in [0, 1] with h(r*tm, r*tp) <= 0 (h(0, 0) <= 0 assumed)."""
    lo = 0.0
    hi = 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _h_theta_nb(kind, gamma, vref, a, bm, bp, mid * tm, mid * tp, s) <= 0.0:
            lo = mid
        else:
            hi = mid
    return lo


@kernel
def _theta_grad(kind, gamma, vref, a, bm, bp, tm, tp, s):
    jphi = a[0] + tm * bm[0] + tp * bp[0]
    jy = a[1] + tm * bm[1] + tp * bp[1]
    jac = a[2] + tm * bm[2] + tp * bp[2]
    g0, g1, g2 = _grad_h_nb(kind, gamma, vref, jphi, jy, jac)
    g0 = g0 - s
    return g0 * bm[0] + g1 * bm[1] + g2 * bm[2], g0 * bp[0] + g1 * bp[1] + g2 * bp[2]


@kernel
def _shrink_one(kind, gamma, vref, a, bm, bp, tm, tp, s, along_minus):
    """Bound on the harmful weight (left one if ``along_minus``) certified by
    the tangent line where the boundary curve crosses that weight's axis.
    Returns 0 when the axis point is already admissible."""
    best = 0.0
    if along_minus:
        if _h_theta_nb(kind, gamma, vref, a, bm, bp, tm, 0.0, s) > 0.0:
            r = _bisect_h(kind, gamma, vref, a, bm, bp, tm, 0.0, s)
            c = r * tm
            gm, gp = _theta_grad(kind, gamma, vref, a, bm, bp, c, 0.0, s)
            if gm > 0.0:
                best = c - max(gp, 0.0) * tp / gm
    else:
        if _h_theta_nb(kind, gamma, vref, a, bm, bp, 0.0, tp, s) > 0.0:
            r = _bisect_h(kind, gamma, vref, a, bm, bp, 0.0, tp, s)
            c = r * tp
            gm, gp = _theta_grad(kind, gamma, vref, a, bm, bp, 0.0, c, s)
            if gp > 0.0:
                best = c - max(gm, 0.0) * tm / gp
    return best


@kernel
def _step3_kernel(kind, gamma, vref, A, Bm, Bp, vmax, lm, lp, periodic, tol, max_iter):
    n = A.shape[1]
    queue = np.empty(n, dtype=np.int64)
    inq = np.zeros(n, dtype=np.bool_)
    head = 0
    count = 0
    for j in range(n):
        tm, tp = _eff(j, n, lm, lp, periodic)
        if _h_theta_nb(kind, gamma, vref, A[:, j], Bm[:, j], Bp[:, j], tm, tp, vmax[j]) > tol[j]:
            queue[(head + count) % n] = j
            inq[j] = True
            count += 1
    processed = 0
    iters = 0
    while count > 0 and iters < max_iter:
        j = queue[head]
        head = (head + 1) % n
        count -= 1
        inq[j] = False
        iters += 1
        a = A[:, j]
        bm = Bm[:, j]
        bp = Bp[:, j]
        s = vmax[j]
        tm, tp = _eff(j, n, lm, lp, periodic)
        if _h_theta_nb(kind, gamma, vref, a, bm, bp, tm, tp, s) <= tol[j]:
            continue
        processed += 1
        r = _bisect_h(kind, gamma, vref, a, bm, bp, tm, tp, s)
        b1m = r * tm
        b1p = r * tp
        gm, gp = _theta_grad(kind, gamma, vref, a, bm, bp, b1m, b1p, s)
        d = gm * b1m + gp * b1p
        new_m = b1m
        new_p = b1p
        if gm > 0.0 and gp <= 0.0:
            # only the left weight hurts: keep the right one, cut the left
            c = d / gm
            c2 = _shrink_one(kind, gamma, vref, a, bm, bp, tm, tp, s, True)
            new_m = min(max(max(c, c2), 0.0), tm)
            new_p = tp
        elif gp > 0.0 and gm <= 0.0:
            c = d / gp
            c2 = _shrink_one(kind, gamma, vref, a, bm, bp, tm, tp, s, False)
            new_p = min(max(max(c, c2), 0.0), tp)
            new_m = tm
        lm[j] = new_m
        lp[j] = new_p
        for nb in (j - 1, j + 1):
            if nb < 0 or nb >= n:
                if not periodic:
                    continue
                nb = nb % n
            if inq[nb]:
                continue
            um, up = _eff(nb, n, lm, lp, periodic)
            if _h_theta_nb(kind, gamma, vref, A[:, nb], Bm[:, nb], Bp[:, nb], um, up,
                           vmax[nb]) > tol[nb]:
                queue[(head + count) % n] = nb
                inq[nb] = True
                count += 1
    return processed, iters


def step3(params, A, Bm, Bp, vmax, lm, lp, periodic, max_iter=None):
    n = A.shape[1]
    lm = lm.copy()
    lp = lp.copy()
    tol = H_RTOL * (np.abs(A[0]) + np.abs(A[1]))
    if max_iter is None:
        max_iter = 10 * n
    processed, iters = _step3_kernel(*params, np.ascontiguousarray(A), np.ascontiguousarray(Bm),
                                     np.ascontiguousarray(Bp), np.ascontiguousarray(vmax),
                                     lm, lp, bool(periodic), tol, int(max_iter))
    return lm, lp, int(processed), int(iters)


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


def interface_theta(lm, lp, periodic):
    """Interface weights (N+1 values) from the per-cell bounds."""
    n = lm.size
    theta = np.empty(n + 1)
    theta[1:n] = np.minimum(lp[:-1], lm[1:])
    if periodic:
        theta[0] = theta[n] = min(lm[0], lp[-1])
    else:
        theta[0] = lm[0]
        theta[n] = lp[-1]
    return theta


def violations(params, U, boxes, eps_j, vtol=0.0):
    """Boolean mask of cells whose state breaks any bound."""
    jphi, jy, jac = U
    scale = np.abs(jphi) + np.abs(jy)
    bad = (jac < eps_j * (1.0 - 1e-12)) | ~(jphi > 0.0) | ~(jphi < jac)
    with np.errstate(invalid="ignore", divide="ignore"):
        bad |= jy - boxes.kmin * jphi < -H_RTOL * scale
        bad |= boxes.kmax * jphi - jy < -H_RTOL * scale
        safe = ~bad
        hmin = np.where(safe, _h(*params, jphi, jy, np.where(safe, jac, 1.0), boxes.vmin - vtol), 0.0)
        hmax = np.where(safe, _h(*params, jphi, jy, np.where(safe, jac, 1.0), boxes.vmax + vtol), 0.0)
    bad |= hmin < -H_RTOL * scale
    bad |= hmax > H_RTOL * scale
    return bad


def select_theta(model, A, dG, lam, boxes, eps_j, periodic):
    """Interface weights theta in [0, 1]^(N+1) and limiter statistics.

    ``A`` is the first-order update (3, N), ``dG`` the high-order minus
    first-order interface fluxes (3, N+1) and ``lam`` = d_tau / d_xi.
    """
    params = model.params
    n = A.shape[1]
    Bm = lam * dG[:, :-1]
    Bp = -lam * dG[:, 1:]
    lm, lp = step1(A, Bm, Bp, boxes.kmin, boxes.kmax, eps_j)
    lm, lp = step2(params, A, Bm, Bp, boxes.vmin, lm, lp)
    lm, lp, processed, iters = step3(params, A, Bm, Bp, boxes.vmax, lm, lp, periodic)
    stats = LimiterStats(step3_cells=processed, step3_iterations=iters)

    # final check on the actual weights; zero the weights of any cell that
    # still fails and re-check its neighbours
    for _ in range(n + 1):
        theta = interface_theta(lm, lp, periodic)
        U = A + theta[:-1] * Bm + theta[1:] * Bp
        bad = violations(params, U, boxes, eps_j)
        if not bad.any():
            break
        stats.fallbacks += int(bad.sum())
        lm[bad] = 0.0
        lp[bad] = 0.0
    else:
        raise LimiterError("fallback did not converge")
    stats.n_interfaces = n if periodic else n + 1
    stats.theta_lt1 = int(np.count_nonzero(theta[: stats.n_interfaces] < 1.0))
    return theta, stats


def limited_flux(theta, G_high, g_low):
    """theta*(G_high - g_low) + g_low, exact at theta = 0 and theta = 1."""
    out = g_low + theta * (G_high - g_low)
    return np.where(theta == 1.0, G_high, out)


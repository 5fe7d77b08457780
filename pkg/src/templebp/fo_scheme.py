"""First-order moving-mesh scheme and its bound-preserving step limits.

With the mesh moving at the flow speed, the first-order update leaves
(J phi, J y) untouched and only stretches J by the speed jump across the
cell.  The limits below keep J positive, phi inside (0, 1) and v inside the
cell's box.
"""
import numpy as np

from .boxes import local_boxes
from .mesh import NGHOST, State, node_primitives, pad
from .model import ARZ, ARZ_LOG

EPS_J = 1e-10
SAFETY = 0.99


class StepTooLargeError(ValueError):
    pass


def dtau_star(jac, phi, v, v_next, d_xi, eps_j=EPS_J):
    """Largest step keeping J >= eps_j and phi < 1 (infinite if J grows)."""
    dv = v - v_next
    room = np.minimum(jac - eps_j, jac * (1.0 - phi))
    with np.errstate(divide="ignore"):
        return np.where(dv > 0, d_xi / np.where(dv > 0, dv, 1.0) * room, np.inf)


def dtau_star_star(model, jac, phi, k, v, v_next, vmin, vmax, d_xi):
    """Largest step keeping v inside [vmin, vmax] under the first-order update."""
    jac, phi, k, v, v_next = np.broadcast_arrays(*map(np.asarray, (jac, phi, k, v, v_next)))
    vmin = np.broadcast_to(np.asarray(vmin, dtype=float), phi.shape)
    vmax = np.broadcast_to(np.asarray(vmax, dtype=float), phi.shape)
    out = np.full(phi.shape, np.inf)
    gamma, vref = model.gamma, model.vref

    # J grows, phi drops, v rises towards vmax
    grow = v < v_next
    if model.kind == ARZ_LOG:
        act = grow
        lo = np.exp((k - vmax) / vref)
    elif model.kind == ARZ:
        act = grow & (k > vmax)
        lo = np.where(act, gamma / vref * np.maximum(k - vmax, 0.0), 0.0) ** (1.0 / gamma)
    else:
        act = grow & (k > vmax)
        lo = 1.0 - np.sqrt(np.where(act, vmax / np.where(k > 0, k, 1.0), 1.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        lim = d_xi * jac * (phi - lo) / (lo * (v_next - v))
    out = np.where(act & (lo > 0), lim, out)

    # J shrinks, phi rises, v drops towards vmin
    shrink = v > v_next
    if model.kind == ARZ_LOG:
        hi = np.exp((k - vmin) / vref)
    elif model.kind == ARZ:
        hi = (gamma / vref * np.maximum(k - vmin, 0.0)) ** (1.0 / gamma)
    else:
        ratio = np.where((vmin > 0) & (k > 0), vmin / np.where(k > 0, k, 1.0), 0.0)
        hi = 1.0 - np.sqrt(np.minimum(ratio, 1.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        lim = d_xi * jac * (hi - phi) / (hi * (v - v_next))
    out = np.where(shrink & (hi > 0), lim, out)
    return np.maximum(out, 0.0)


def fo_bounds(model, Up, boxes, d_xi, eps_j=EPS_J):
    """Per-cell (dtau_star, dtau_star_star) from padded conserved data."""
    g = NGHOST
    n = Up.shape[1] - 2 * g
    phi, k, v = node_primitives(model, Up)
    cell = slice(g, g + n)
    nxt = slice(g + 1, g + n + 1)
    jac = Up[2, cell]
    ds = dtau_star(jac, phi[cell], v[cell], v[nxt], d_xi, eps_j)
    dss = dtau_star_star(model, jac, phi[cell], k[cell], v[cell], v[nxt],
                         boxes.vmin, boxes.vmax, d_xi)
    return ds, dss


def bp_max_dtau(model, Up, boxes, d_xi, eps_j=EPS_J):
    """Largest bound-preserving first-order step (before the safety factor)."""
    ds, dss = fo_bounds(model, Up, boxes, d_xi, eps_j)
    return float(min(ds.min(), dss.min()))


def fo_step(model, state, d_tau, grid, bc, boxes=None, eps_j=EPS_J):
    """Advance one first-order step; (J phi, J y) are returned unchanged."""
    Up, xp = pad(state.U, state.x, bc, grid)
    phi, k, v = node_primitives(model, Up)
    if boxes is None:
        boxes = local_boxes(xp, v, k, bc.periodic)
    limit = bp_max_dtau(model, Up, boxes, grid.d_xi, eps_j)
    if not d_tau < limit:
        raise StepTooLargeError(f"d_tau={d_tau:g} exceeds the bound-preserving limit {limit:g}")
    g = NGHOST
    n = state.n
    lam = d_tau / grid.d_xi
    U = state.U.copy()
    vc = v[g:g + n]
    U[2] = state.U[2] + lam * (v[g + 1:g + n + 1] - vc)
    x = state.x + d_tau * vc
    return State(U, x, state.tau + d_tau, state.step + 1)


def fixed_mesh_llf_step(model, phi, y, d_t, d_x, cfl_check=True):
    """One first-order local Lax-Friedrichs step on a fixed mesh with outflow ends."""
    k = y / phi
    v = model.velocity(phi, k)
    lam1, lam2 = model.eigen_speeds(phi, k)
    speed = np.maximum(np.abs(lam1), np.abs(lam2))
    up = np.concatenate([[phi[0]], phi, [phi[-1]]])
    uy = np.concatenate([[y[0]], y, [y[-1]]])
    vv = np.concatenate([[v[0]], v, [v[-1]]])
    sp = np.concatenate([[speed[0]], speed, [speed[-1]]])
    a = np.maximum(sp[:-1], sp[1:])
    if cfl_check and d_t * a.max() > d_x:
        raise StepTooLargeError("CFL condition violated")
    f_phi = 0.5 * (vv[:-1] * up[:-1] + vv[1:] * up[1:]) - 0.5 * a * (up[1:] - up[:-1])
    f_y = 0.5 * (vv[:-1] * uy[:-1] + vv[1:] * uy[1:]) - 0.5 * a * (uy[1:] - uy[:-1])
    lam = d_t / d_x
    return phi - lam * np.diff(f_phi), y - lam * np.diff(f_y)


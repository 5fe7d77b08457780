"""Experiment catalog, run monitors and error studies."""
import json
import os
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from .boxes import local_boxes
from .fo_scheme import SAFETY, bp_max_dtau, fixed_mesh_llf_step, fo_step
from .integrator import DEFAULT_CFL, SPEED_FLOOR, Solver
from .mesh import Boundary, Grid, initial_state, node_primitives, pad, write_csv
from .model import DomainError, Model

BOUND_TOL = 1e-10


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Case:
    name: str
    model: Model
    xi_left: float
    xi_right: float
    bc: str
    t_end: float
    phi0: Callable
    v0: Callable
    n_default: int = 500

    def grid(self, n=None):
        return Grid(self.xi_left, self.xi_right, int(n or self.n_default))

    def initial(self, n=None):
        grid = self.grid(n)
        return grid, initial_state(self.model, grid, self.phi0, self.v0)


def _riemann(left, right, at=0.0):
    return lambda xi: np.where(xi < at, left, right)


def _sed_wave(xi):
    inner = (xi > 0.5) & (xi < 3.5)
    bump = 0.01 * (3.5 - xi) * (xi - 0.5) * np.sin(10 * np.pi * (xi - 0.5) * (3.5 - xi))
    return np.where(inner, 0.1 + bump, 0.1)


def _three_state(values):
    def f(xi):
        return np.where(xi < -0.05, values[0], np.where(xi <= 0.05, values[1], values[2]))
    return f


def _build_catalog():
    arz2 = Model.arz(2.0, 1.0)
    sed = Model.sedimentation()
    riemann = {
        "T1": (arz2, 0.8, 0.4, 0.1, 0.4),
        "T2": (Model.arz(1.0, 1.0), 0.5, 0.1, 1e-8, 0.4),
        "T3": (Model.arz_log(1.0), 0.8, 0.4, 1e-10, 0.4),
        "T4": (sed, 0.55, 0.0405, 0.1, 0.0405),
        "T5": (sed, 0.8, 0.024, 0.1, 0.243),
    }
    cat = {
        "ex51": Case("ex51", Model.arz_log(0.4), 0.0, 1.0, "periodic", 0.1, 0.5,
                     lambda xi: 0.1 + 0.4 * np.cos(2 * np.pi * xi), 320),
        "ex52": Case("ex52", arz2, -2.0, 2.0, "periodic", 1.0,
                     lambda xi: np.where(np.abs(xi) <= 0.2, 0.6, 0.5), 0.6, 500),
        "ex53": Case("ex53", sed, 0.0, 4.0, "outflow", 1.0, 0.4, _sed_wave, 500),
        "three_state": Case("three_state", Model.arz(3.0, 3.0), -1.0, 1.0, "outflow", 1.0,
                            _three_state((0.4762, 0.2, 0.4)), _three_state((0.092, 0.092, 0.036)),
                            500),
    }
    for name, (model, pl, vl, pr, vr) in riemann.items():
        cat[name] = Case(name, model, -1.0, 1.0, "outflow", 1.0,
                         _riemann(pl, pr), _riemann(vl, vr), 500)
    return cat


CATALOG = _build_catalog()


def get_case(name, model=None):
    try:
        case = CATALOG[name]
    except KeyError:
        raise ValueError(f"unknown case {name!r}; choose from {sorted(CATALOG)}") from None
    if model is not None:
        case = Case(case.name, model, case.xi_left, case.xi_right, case.bc, case.t_end,
                    case.phi0, case.v0, case.n_default)
    return case


# ---------------------------------------------------------------------------
# monitoring
# ---------------------------------------------------------------------------


@dataclass
class RunSummary:
    case: str
    n: int
    limiter: bool
    mode: str
    mesh: str
    t_end: float
    t_final: float = 0.0
    steps: int = 0
    completed: bool = False
    error: Optional[str] = None
    max_v_violation: float = -np.inf
    max_k_violation: float = -np.inf
    first_v_exceed_time: Optional[float] = None
    min_phi: float = np.inf
    max_phi: float = -np.inf
    min_J: float = np.inf
    err_Jphi: float = 0.0
    err_Jy: float = 0.0
    err_Jphi_unweighted: float = 0.0
    theta_lt1: int = 0
    interfaces: int = 0
    step3_fallbacks: int = 0
    wall_time: float = 0.0

    @property
    def theta_lt1_fraction(self):
        return self.theta_lt1 / self.interfaces if self.interfaces else 0.0

    @property
    def bounds_ok(self):
        return (self.max_v_violation <= BOUND_TOL and self.max_k_violation <= BOUND_TOL
                and self.min_phi > 0.0 and self.max_phi < 1.0)

    @property
    def passed(self):
        return self.completed and self.bounds_ok

    def to_dict(self):
        d = asdict(self)
        d["theta_lt1_fraction"] = self.theta_lt1_fraction
        d["bounds_ok"] = self.bounds_ok
        d["passed"] = self.passed
        return {k: (None if isinstance(v, float) and not np.isfinite(v) else v)
                for k, v in d.items()}


class BoundMonitor:
    """Checks each accepted step against the boxes the step was taken with.

    With the limiter off no boxes are built by the solver, so the monitor
    builds them from the old state in the run's domain mode.
    """

    def __init__(self, solver, summary, exceed_tol=0.0):
        self.solver = solver
        self.summary = summary
        self.exceed_tol = exceed_tol
        self._shadow = None

    def _boxes(self, old, info):
        if info.boxes is not None:
            return info.boxes
        s = self.solver
        Up, xp = pad(old.U, old.x, s.bc, s.grid)
        if self._shadow is None:
            self._shadow = Solver(s.model, s.grid, s.bc, limiter=False, mode=s.mode,
                                  mesh="moving")
        return self._shadow.boxes_for(Up, xp)

    def __call__(self, old, new, info):
        sm = self.summary
        boxes = self._boxes(old, info)
        phi, k, v = node_primitives(self.solver.model, new.U, clamp=True)
        jphi, _, jac = new.U
        sm.min_phi = min(sm.min_phi, float((jphi / jac).min()))
        sm.max_phi = max(sm.max_phi, float((jphi / jac).max()))
        sm.min_J = min(sm.min_J, float(jac.min()))
        v_exc = float(np.max(np.maximum(boxes.vmin - v, v - boxes.vmax)))
        k_exc = float(np.max(np.maximum(boxes.kmin - k, k - boxes.kmax)))
        sm.max_v_violation = max(sm.max_v_violation, v_exc)
        sm.max_k_violation = max(sm.max_k_violation, k_exc)
        if sm.first_v_exceed_time is None and float(np.max(v - boxes.vmax)) > self.exceed_tol:
            sm.first_v_exceed_time = new.tau
        sm.theta_lt1 += info.stats.theta_lt1
        sm.interfaces += info.stats.n_interfaces
        sm.step3_fallbacks += info.stats.fallbacks
        sm.steps = new.step
        sm.t_final = new.tau


def run_case(name, n=None, limiter=True, mode="local", mesh="moving", cfl=DEFAULT_CFL,
             t_end=None, model=None, out_dir=None, wall_limit=None, max_steps=10**7,
             stop_on_exceed=False, use_numba=None):
    """Run one catalog case; returns (final state, RunSummary).

    Solver failures are recorded in the summary rather than raised.  With
    ``wall_limit`` (seconds) a run that has not reached ``t_end`` in time is
    stopped and reported as incomplete.
    """
    case = get_case(name, model)
    grid, state0 = case.initial(n)
    t_end = case.t_end if t_end is None else t_end
    bc = Boundary(case.bc)
    solver = Solver(case.model, grid, bc, limiter=limiter, mode=mode, cfl=cfl, mesh=mesh,
                    use_numba=use_numba)
    summary = RunSummary(name, grid.n, limiter, mode, mesh, t_end)
    monitor = BoundMonitor(solver, summary)
    state = state0
    start = time.time()
    try:
        while t_end - state.tau > 1e-14 * max(1.0, t_end):
            new, info = solver.step(state, t_end)
            monitor(state, new, info)
            state = new
            if stop_on_exceed and summary.first_v_exceed_time is not None:
                break
            if state.step >= max_steps:
                summary.error = f"step budget exhausted at t={state.tau:.6g}"
                break
            if wall_limit is not None and time.time() - start > wall_limit:
                summary.error = f"wall-clock budget exhausted at t={state.tau:.6g}"
                break
        else:
            summary.completed = True
    except DomainError as err:
        summary.error = f"{type(err).__name__} at step {state.step + 1}: {err}"
    summary.wall_time = time.time() - start
    summary.t_final = state.tau
    summary.steps = state.step
    err = conservation_report(state0.U, state.U, grid.d_xi)
    summary.err_Jphi, summary.err_Jy, summary.err_Jphi_unweighted = (
        err["Jphi"], err["Jy"], err["Jphi_unweighted"])
    if out_dir is not None:
        write_outputs(out_dir, case.model, state, summary)
    return state, summary


def write_outputs(out_dir, model, state, summary, stem=None):
    os.makedirs(out_dir, exist_ok=True)
    stem = stem or f"{summary.case}_N{summary.n}"
    try:
        write_csv(os.path.join(out_dir, stem + ".csv"), model, state)
    except DomainError:
        pass  # the final state of a failed run may not be representable
    with open(os.path.join(out_dir, stem + "_summary.json"), "w") as fh:
        json.dump(summary.to_dict(), fh, indent=2)


# ---------------------------------------------------------------------------
# conservation and errors
# ---------------------------------------------------------------------------


def conservation_report(U0, U1, d_xi):
    """Change of total J phi and J y (cell sums weighted by d_xi, and the raw sum)."""
    return {"Jphi": abs(float(U1[0].sum() - U0[0].sum())) * d_xi,
            "Jy": abs(float(U1[1].sum() - U0[1].sum())) * d_xi,
            "Jphi_unweighted": abs(float(U1[0].sum() - U0[0].sum()))}


def lagrange_at(x_ref, f_ref, x, npts=6, period=None):
    """Degree npts-1 Lagrange interpolation through the npts reference points nearest each x."""
    x_ref = np.asarray(x_ref, dtype=float)
    f_ref = np.asarray(f_ref, dtype=float)
    x = np.asarray(x, dtype=float)
    if period is not None:
        x_ref = np.concatenate([x_ref - period, x_ref, x_ref + period])
        f_ref = np.concatenate([f_ref, f_ref, f_ref])
    order = np.argsort(x_ref, kind="stable")
    x_ref, f_ref = x_ref[order], f_ref[order]
    if period is None and (x.min() < x_ref[0] or x.max() > x_ref[-1]):
        import warnings
        warnings.warn("interpolation point outside the reference hull", RuntimeWarning)
    pos = np.searchsorted(x_ref, x)
    window = pos[:, None] + np.arange(-npts, npts)[None, :]
    window = np.clip(window, 0, x_ref.size - 1)
    dist = np.abs(x_ref[window] - x[:, None])
    nearest = np.take_along_axis(window, np.argsort(dist, axis=1, kind="stable")[:, :npts], axis=1)
    nearest = np.sort(nearest, axis=1)
    xs, fs = x_ref[nearest], f_ref[nearest]
    out = np.zeros_like(x)
    for a in range(npts):
        w = np.ones_like(x)
        for b in range(npts):
            if b != a:
                w *= (x - xs[:, b]) / (xs[:, a] - xs[:, b])
        out += w * fs[:, a]
    return out


@dataclass
class ErrorReport:
    field: str
    n: list
    l1: list = field(default_factory=list)
    l1_unweighted: list = field(default_factory=list)
    l2: list = field(default_factory=list)
    linf: list = field(default_factory=list)

    @staticmethod
    def _orders(errs):
        return [None] + [float(np.log2(a / b)) if a > 0 and b > 0 else None
                         for a, b in zip(errs[:-1], errs[1:])]

    def orders(self, norm="l1"):
        return self._orders(getattr(self, norm))

    def to_dict(self):
        d = asdict(self)
        for norm in ("l1", "l1_unweighted", "l2", "linf"):
            d[norm + "_order"] = self.orders(norm)
        return d


def _field(model, state, name):
    phi, k, v = model.primitive_from_conserved(*state.U)
    return {"phi": phi, "k": k, "v": v, "J": state.U[2]}[name]


def convergence_study(name, ns=(20, 40, 80, 160), n_ref=2560, fld="k", limiter=True,
                      mode="local", cfl=DEFAULT_CFL, t_end=None, use_numba=None):
    """Errors of ``fld`` at the final physical node positions against a fine run.

    L1 and L2 weight each node by its physical cell width J d_xi; the raw sum
    over nodes is reported as ``l1_unweighted``.
    """
    case = get_case(name)
    period = case.xi_right - case.xi_left if case.bc == "periodic" else None
    ref, sref = run_case(name, n_ref, limiter, mode, cfl=cfl, t_end=t_end, use_numba=use_numba)
    if not sref.completed:
        raise RuntimeError(f"reference run failed: {sref.error}")
    f_ref = _field(case.model, ref, fld)
    rep = ErrorReport(fld, list(ns))
    for n in ns:
        st, sm = run_case(name, n, limiter, mode, cfl=cfl, t_end=t_end, use_numba=use_numba)
        if not sm.completed:
            raise RuntimeError(f"run at N={n} failed: {sm.error}")
        diff = np.abs(lagrange_at(ref.x, f_ref, st.x, period=period) - _field(case.model, st, fld))
        dx = st.U[2] * (case.xi_right - case.xi_left) / n
        rep.l1.append(float(np.sum(diff * dx)))
        rep.l1_unweighted.append(float(np.sum(diff)))
        rep.l2.append(float(np.sqrt(np.sum(diff ** 2 * dx))))
        rep.linf.append(float(diff.max()))
    return rep


# ---------------------------------------------------------------------------
# first-order runs and the fixed-mesh demonstration
# ---------------------------------------------------------------------------


def run_first_order(name, n=None, cfl=DEFAULT_CFL, t_end=None, max_steps=10**7):
    """The first-order moving-mesh scheme alone, with local boxes."""
    case = get_case(name)
    grid, state = case.initial(n)
    bc = Boundary(case.bc)
    t_end = case.t_end if t_end is None else t_end
    model = case.model
    while t_end - state.tau > 1e-14 * max(1.0, t_end) and state.step < max_steps:
        Up, xp = pad(state.U, state.x, bc, grid)
        phi, k, v = node_primitives(model, Up)
        boxes = local_boxes(xp, v, k, bc.periodic)
        lam1, lam2 = model.eigen_speeds(phi, k)
        speed = float((np.maximum(np.abs(lam1), np.abs(lam2)) + np.abs(v)).max())
        limit = min(cfl * grid.d_xi / max(speed, SPEED_FLOOR),
                    bp_max_dtau(model, Up, boxes, grid.d_xi))
        d_tau = min(SAFETY * limit, t_end - state.tau)
        state = fo_step(model, state, d_tau, grid, bc, boxes)
    return state


def impossibility_demo(model=None, phi_left=0.8, phi_right=0.1, v=0.4, n=100, steps=10,
                       cfl=0.5):
    """Velocity overshoot of a fixed-mesh first-order LLF scheme vs the moving-mesh scheme.

    Both start from a Riemann problem with equal speeds on each side, so the
    exact solution is a contact moving at speed ``v`` and v_max = v.
    """
    model = model or Model.arz(2.0, 1.0)
    grid = Grid(-1.0, 1.0, n)
    xi = grid.nodes
    state = initial_state(model, grid, np.where(xi < 0, phi_left, phi_right), float(v))
    phi, k, vv = model.primitive_from_conserved(*state.U)
    y = phi * k
    # measured against the speeds the discrete initial data actually carry
    v_max = float(vv.max())
    lam1, lam2 = model.eigen_speeds(phi, y / phi)
    d_t = cfl * grid.d_xi / float(np.maximum(np.abs(lam1), np.abs(lam2)).max())
    fixed = []
    for _ in range(steps):
        phi, y = fixed_mesh_llf_step(model, phi, y, d_t, grid.d_xi)
        fixed.append(float(np.max(model.velocity(phi, y / phi)) - v_max))
    bc = Boundary("outflow")
    moving = []
    for _ in range(steps):
        state = fo_step(model, state, d_t, grid, bc)
        moving.append(float(np.max(model.primitive_from_conserved(*state.U).v) - v_max))
    return {"fixed_mesh_overshoot": max(fixed), "moving_mesh_overshoot": max(moving),
            "fixed_per_step": fixed, "moving_per_step": moving, "v_max": v_max}

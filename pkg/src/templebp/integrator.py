"""Third-order SSP Runge-Kutta stepping of the moving-mesh system."""
from dataclasses import dataclass, field

import numpy as np

from .boxes import edge_boxes, local_boxes
from .bp import LimiterStats, limited_flux, select_theta
from .fo_scheme import EPS_J, SAFETY, fo_bounds
from .mesh import NGHOST, Boundary, State, node_primitives, pad
from .model import DomainError, _velocity
from .weno import weno5_fluxes

DEFAULT_CFL = 0.6
SPEED_FLOOR = 1e-14


@dataclass
class StepPlan:
    d_tau: float
    cfl_limit: float
    fo_limit: float


@dataclass
class StepInfo:
    d_tau: float
    boxes: object
    stats: LimiterStats
    theta: np.ndarray = field(default=None, repr=False)
    # time-integrated fluxes through the first and last interface
    edge_flux: tuple = field(default=None, repr=False)


class Solver:
    """Advance one road (a 1-D grid) in time.

    Parameters
    ----------
    model : Model
    grid : Grid
    bc : Boundary
    limiter : bool
        Apply the bound-preserving limiter.  Without it the step is the plain
        RK3-WENO update and an inadmissible state raises DomainError.
    mode : {"local", "global"}
        Per-cell boxes or one growing box for the whole road.
    mesh : {"moving", "fixed"}
        ``fixed`` runs the same WENO scheme with zero mesh speed (limiter off only).
    position_update : {"rk3", "euler"}
        How node positions follow the flow.
    """

    def __init__(self, model, grid, bc=None, limiter=True, mode="local", cfl=DEFAULT_CFL,
                 mesh="moving", eps_j=EPS_J, position_update="rk3", use_numba=None):
        if mode not in ("local", "global"):
            raise ValueError("mode must be 'local' or 'global'")
        if mesh not in ("moving", "fixed"):
            raise ValueError("mesh must be 'moving' or 'fixed'")
        if mesh == "fixed" and limiter:
            raise ValueError("the limiter needs the moving mesh")
        if position_update not in ("rk3", "euler"):
            raise ValueError("position_update must be 'rk3' or 'euler'")
        self.model = model
        self.grid = grid
        self.bc = bc if bc is not None else Boundary("outflow")
        self.limiter = limiter
        self.mode = mode
        self.cfl = cfl
        self.moving = mesh == "moving"
        self.eps_j = eps_j
        self.position_update = position_update
        self.use_numba = use_numba
        self.global_box = None

    # -- pieces ----------------------------------------------------------------

    def _speeds(self, phi, k, v):
        lam1, lam2 = self.model.eigen_speeds(phi, k)
        c = v if self.moving else 0.0
        return np.maximum(np.abs(lam1), np.abs(lam2)), np.abs(c) * np.ones_like(v)

    def cfl_speed(self, phi, k, v):
        """Per-node speed in the step-size bound: the largest |lambda| plus |c|."""
        lam_abs, c_abs = self._speeds(phi, k, v)
        return lam_abs + c_abs

    def rhs_fluxes(self, Up, k_range=None):
        """Interface fluxes and node speeds for a padded (possibly stage) state.

        ``k_range`` clips k in the returned node speeds only; the fluxes always
        use the stage's own k.
        """
        phi, k, v = node_primitives(self.model, Up, clamp=True)
        lam_abs, c_abs = self._speeds(phi, k, v)
        c = v if self.moving else np.zeros_like(v)
        G = self.model.curvilinear_flux(phi, phi * k, v, c)
        F = weno5_fluxes(Up, G, np.maximum(lam_abs, c_abs), self.use_numba)
        if k_range is not None:
            v = _velocity(*self.model.params, phi, np.clip(k, *k_range))
        return F, v

    def boxes_for(self, Up, xp):
        _, k, v = node_primitives(self.model, Up)
        if self.mode == "local":
            return local_boxes(xp, v, k, self.bc.periodic)
        if self.global_box is None:
            self.global_box = local_boxes(xp, v, k, self.bc.periodic).hull()
        self.global_box = self.global_box.union(edge_boxes(xp, v, k))
        return self.global_box.broadcast(Up.shape[1] - 2 * NGHOST)

    def plan(self, Up, boxes, t_remaining):
        g = NGHOST
        n = Up.shape[1] - 2 * g
        phi, k, v = node_primitives(self.model, Up)
        speed = float(self.cfl_speed(phi[g:g + n], k[g:g + n], v[g:g + n]).max())
        cfl_limit = self.cfl * self.grid.d_xi / max(speed, SPEED_FLOOR)
        fo_limit = np.inf
        if self.limiter:
            ds, dss = fo_bounds(self.model, Up, boxes, self.grid.d_xi, self.eps_j)
            fo_limit = float(min(ds.min(), dss.min()))
        d_tau = SAFETY * min(cfl_limit, fo_limit)
        if d_tau <= 0 or not np.isfinite(d_tau):
            raise DomainError(f"no admissible time step (d_tau={d_tau})")
        if d_tau >= t_remaining:
            d_tau = t_remaining
        return StepPlan(d_tau, cfl_limit, fo_limit)

    def prepare(self, state, bc=None):
        """Padded data, boxes for the coming step and the admissible step size."""
        if bc is not None:
            self.bc = bc
        Up, xp = pad(state.U, state.x, self.bc, self.grid)
        boxes = self.boxes_for(Up, xp) if self.limiter or self.mode == "global" else None
        return Up, xp, boxes

    def advance(self, state, Up, boxes, d_tau):
        """One RK3 step of size ``d_tau`` from prepared data."""
        g = NGHOST
        n = state.n
        lam = d_tau / self.grid.d_xi

        def L(F):
            return -(F[:, 1:] - F[:, :-1]) / self.grid.d_xi

        # near vacuum a stage's k = Jy / J phi is a ratio of round-off sized
        # numbers; the node speeds that move the mesh hold it within the base
        # range widened by its own width so nodes cannot overtake each other
        k_base = Up[1] / Up[0]
        lo, hi = float(k_base.min()), float(k_base.max())
        k_range = (lo - (hi - lo), hi + (hi - lo))
        F0, v0 = self.rhs_fluxes(Up)
        U1 = state.U + d_tau * L(F0)
        F1, v1 = self.rhs_fluxes(pad(U1, state.x, self.bc, self.grid)[0], k_range)
        U2 = state.U + 0.25 * d_tau * (L(F0) + L(F1))
        F2, v2 = self.rhs_fluxes(pad(U2, state.x, self.bc, self.grid)[0], k_range)
        F_high = (F0 + F1 + 4.0 * F2) / 6.0

        stats = LimiterStats(n_interfaces=n if self.bc.periodic else n + 1)
        theta = None
        if self.limiter:
            _, _, v = node_primitives(self.model, Up)
            g_low = np.zeros_like(F_high)
            g_low[2] = -v[g:g + n + 1]
            A = state.U.copy()
            A[2] = state.U[2] + lam * (v[g + 1:g + n + 1] - v[g:g + n])
            theta, stats = select_theta(self.model, A, F_high - g_low, lam, boxes,
                                        self.eps_j, self.bc.periodic)
            F = limited_flux(theta, F_high, g_low)
        else:
            F = F_high
        U = state.U - lam * (F[:, 1:] - F[:, :-1])

        if self.moving:
            vc = [w[g:g + n] for w in (v0, v1, v2)]
            if self.position_update == "rk3":
                x = state.x + d_tau / 6.0 * (vc[0] + vc[1] + 4.0 * vc[2])
            else:
                x = state.x + d_tau * vc[0]
        else:
            x = state.x.copy()
        new = State(U, x, state.tau + d_tau, state.step + 1)
        self.model.primitive_from_conserved(*U)  # raises DomainError if inadmissible
        return new, StepInfo(d_tau, boxes, stats, theta, (d_tau * F[:, 0], d_tau * F[:, -1]))

    def step(self, state, t_end):
        Up, xp, boxes = self.prepare(state)
        plan = self.plan(Up, boxes, t_end - state.tau)
        return self.advance(state, Up, boxes, plan.d_tau)

    def run(self, state, t_end, monitor=None, max_steps=10**7):
        """Step until ``t_end``; ``monitor(old, new, info)`` is called after each step."""
        steps = 0
        while state.tau < t_end * (1.0 - 1e-14) and t_end - state.tau > 1e-15:
            new, info = self.step(state, t_end)
            if monitor is not None:
                monitor(state, new, info)
            state = new
            steps += 1
            if steps > max_steps:
                raise RuntimeError("too many steps")
        return state


def rk3_step(model, state, grid, bc, d_tau, limiter=True, mode="local"):
    """Single limited RK3 step of prescribed size (boxes computed from ``state``)."""
    solver = Solver(model, grid, bc, limiter=limiter, mode=mode)
    Up, xp, boxes = solver.prepare(state)
    return solver.advance(state, Up, boxes, d_tau)

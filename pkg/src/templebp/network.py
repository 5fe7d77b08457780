"""ARZ road networks: per-road moving-mesh solvers joined at junctions.

Every road owns a fixed physical interval [x_entry, x_exit].  Its nodes move
with the traffic, so after each step nodes that have drifted past the exit are
dropped and, when the first node has left the entry, a node carrying the
coupled ghost state is inserted in front of it.  Inflow thus enters a road as
ghost nodes moving into the physical interval.
"""
import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .boxes import box_excess, local_boxes
from .integrator import DEFAULT_CFL, Solver
from .mesh import Boundary, Grid, State, initial_state, node_primitives, pad
from .model import DomainError, Model

TRACE_FLOOR = 1e-10
TRACE_POINTS = 5
ROW_SUM_TOL = 1e-12


class NetworkConfigError(ValueError):
    pass


class InsufficientNodesError(ValueError):
    pass


class RoadError(RuntimeError):
    """A road-level failure with the road id attached."""

    def __init__(self, road_id, err):
        super().__init__(f"road {road_id}: {err}")
        self.road_id = road_id
        self.cause = err


@dataclass
class Trace:
    phi: float
    v: float
    jac: float
    k: float


@dataclass
class Road:
    id: int
    grid: Grid
    state: State
    periodic: bool = False
    x_entry: float = field(init=False)
    x_exit: float = field(init=False)
    inserted_mass: float = 0.0
    removed_mass: float = 0.0
    boundary_mass: float = 0.0

    def __post_init__(self):
        self.x_entry = self.grid.xi_left
        self.x_exit = self.grid.xi_right

    def mass(self):
        return float(self.state.U[0].sum() * self.grid.d_xi)

    def inside(self):
        """Indices of nodes lying in the physical interval."""
        x = self.state.x
        return np.flatnonzero((x >= self.x_entry) & (x <= self.x_exit))


@dataclass
class Junction:
    """Roads meeting at a point.

    ``distribution[a][b]`` is the fraction of the demand of ``incoming[b]``
    routed into ``outgoing[a]``; every column sums to one.
    """

    id: int
    incoming: List[int]
    outgoing: List[int]
    distribution: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.incoming or not self.outgoing:
            raise NetworkConfigError(f"junction {self.id} needs incoming and outgoing roads")
        if self.distribution is None:
            self.distribution = np.full((len(self.outgoing), len(self.incoming)),
                                        1.0 / len(self.outgoing))
        a = np.asarray(self.distribution, dtype=float)
        if a.shape != (len(self.outgoing), len(self.incoming)):
            raise NetworkConfigError(f"junction {self.id}: distribution must be "
                                     f"{len(self.outgoing)} x {len(self.incoming)}")
        if np.any(a < 0) or np.any(a > 1) or np.any(np.abs(a.sum(axis=0) - 1.0) > ROW_SUM_TOL):
            raise NetworkConfigError(f"junction {self.id}: fractions must lie in [0, 1] "
                                     "and sum to 1 per incoming road")
        self.distribution = a


def boundary_trace(model, road, end, floor=TRACE_FLOOR):
    """phi, v and J at a road end from a degree-4 fit of the five closest inside nodes.

    Values are floored at ``floor``; J is also kept within the sampled range.
    """
    idx = road.inside()
    if idx.size < TRACE_POINTS:
        raise InsufficientNodesError(f"road {road.id} has {idx.size} nodes inside its interval")
    x_end = road.x_entry if end == "entry" else road.x_exit
    x = road.state.x[idx]
    pick = idx[np.argsort(np.abs(x - x_end), kind="stable")[:TRACE_POINTS]]
    pick.sort()
    xs = road.state.x[pick]
    phi, _, v = model.primitive_from_conserved(*road.state.U[:, pick])
    jac = road.state.U[2, pick]

    def at_end(vals):
        # interpolation in coordinates centred on the end point
        coef = np.polynomial.polynomial.polyfit(xs - x_end, vals, TRACE_POINTS - 1)
        return float(coef[0])

    phi_e = max(at_end(phi), floor)
    v_e = max(at_end(v), floor)
    # J is a mesh quantity: extrapolating it lets inserted nodes feed their own
    # growth back into the next trace, so it is held to the sampled range
    jac_e = max(min(max(at_end(jac), jac.min()), jac.max()), floor)
    phi_e = min(phi_e, 1.0 - floor)
    k_e = float(model.k_from_v(phi_e, v_e))
    return Trace(phi_e, v_e, jac_e, k_e)


def free_flow_density(model, k, q, iters=200):
    """Density on the uncongested branch carrying flux ``q`` with marker ``k``.

    Demands above the capacity max_phi phi v(phi, k) are capped at it.
    """
    flux = lambda phi: phi * float(model.velocity(phi, k))
    phi_top = min(float(model.bound_inverse_density(k, 0.0)), 1.0)
    lo, hi = 0.0, phi_top
    # the flux is concave in phi for the ARZ closures; locate its maximiser
    for _ in range(iters):
        a = lo + (hi - lo) / 3.0
        b = hi - (hi - lo) / 3.0
        if flux(max(a, TRACE_FLOOR)) < flux(b):
            lo = a
        else:
            hi = b
    phi_crit = 0.5 * (lo + hi)
    if q >= flux(phi_crit):
        return phi_crit
    lo, hi = 0.0, phi_crit
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid > 0 and flux(mid) < q:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class DemandSplitCoupling:
    """Routes each incoming road's demand phi v to the outgoing roads by fixed fractions.

    Outgoing roads receive a ghost state carrying the summed flux, with the
    flux-weighted marker k on the free-flow branch; incoming roads see their
    own exit trace as ghost (free outflow into the junction).
    """

    def fluxes(self, junction, traces_in):
        demand = np.array([t.phi * t.v for t in traces_in])
        return junction.distribution * demand[None, :]

    def __call__(self, model, junction, traces_in, traces_out):
        q = self.fluxes(junction, traces_in)
        ghosts = {}
        for b, rid in enumerate(junction.incoming):
            t = traces_in[b]
            ghosts[(rid, "exit")] = _conserved(model, t.phi, t.v, t.jac)
        k_in = np.array([t.k for t in traces_in])
        for a, rid in enumerate(junction.outgoing):
            own = traces_out[a]
            q_tot = float(q[a].sum())
            if q_tot <= 0.0:
                ghosts[(rid, "entry")] = _conserved(model, own.phi, own.v, own.jac)
                continue
            k = float((q[a] * k_in).sum() / q_tot)
            phi = max(free_flow_density(model, k, q_tot), TRACE_FLOOR)
            v = float(model.velocity(phi, k))
            ghosts[(rid, "entry")] = _conserved(model, phi, v, own.jac)
        return ghosts


def _conserved(model, phi, v, jac):
    return model.conserved_from_primitive(np.array([phi]), np.array([v]), jac)[:, 0]


@dataclass
class RoadReport:
    min_phi: float = np.inf
    max_phi: float = -np.inf
    min_v: float = np.inf
    max_v: float = -np.inf
    min_k: float = np.inf
    max_k: float = -np.inf
    max_box_excess: float = -np.inf
    theta_lt1: int = 0
    interfaces: int = 0
    fallbacks: int = 0

    def update(self, phi, v, k, excess, stats):
        self.min_phi = min(self.min_phi, float(phi.min()))
        self.max_phi = max(self.max_phi, float(phi.max()))
        self.min_v = min(self.min_v, float(v.min()))
        self.max_v = max(self.max_v, float(v.max()))
        self.min_k = min(self.min_k, float(k.min()))
        self.max_k = max(self.max_k, float(k.max()))
        self.max_box_excess = max(self.max_box_excess, excess)
        self.theta_lt1 += stats.theta_lt1
        self.interfaces += stats.n_interfaces
        self.fallbacks += stats.fallbacks


class Network:
    """A set of roads stepped with one shared time step."""

    def __init__(self, model, roads, junctions=(), mode="local", limiter=True,
                 cfl=DEFAULT_CFL, coupling=None, use_numba=None):
        self.model = model
        self.roads: Dict[int, Road] = {r.id: r for r in roads}
        self.junctions = list(junctions)
        self.coupling = coupling if coupling is not None else DemandSplitCoupling()
        self.tau = 0.0
        self.steps = 0
        self._ends = {}
        for jn in self.junctions:
            for rid in jn.incoming:
                self._claim(rid, "exit", jn)
            for rid in jn.outgoing:
                self._claim(rid, "entry", jn)
        self.solvers = {rid: Solver(model, r.grid, Boundary("periodic" if r.periodic else "outflow"),
                                    limiter=limiter, mode=mode, cfl=cfl, use_numba=use_numba)
                        for rid, r in self.roads.items()}
        self.reports = {rid: RoadReport() for rid in self.roads}
        self.initial_mass = {rid: r.mass() for rid, r in self.roads.items()}

    def _claim(self, rid, end, jn):
        if rid not in self.roads:
            raise NetworkConfigError(f"junction {jn.id} refers to unknown road {rid}")
        if self.roads[rid].periodic:
            raise NetworkConfigError(f"periodic road {rid} cannot join a junction")
        if (rid, end) in self._ends:
            raise NetworkConfigError(f"road {rid} {end} is attached to two junctions")
        self._ends[(rid, end)] = jn.id

    def ghost_states(self):
        ghosts = {}
        for jn in self.junctions:
            tin = [boundary_trace(self.model, self.roads[r], "exit") for r in jn.incoming]
            tout = [boundary_trace(self.model, self.roads[r], "entry") for r in jn.outgoing]
            ghosts.update(self.coupling(self.model, jn, tin, tout))
        return ghosts

    def step(self, t_end):
        ghosts = self.ghost_states()
        prepared = {}
        d_tau = np.inf
        for rid, road in self.roads.items():
            solver = self.solvers[rid]
            bc = solver.bc if road.periodic else Boundary(
                "fixed", ghosts.get((rid, "entry")), ghosts.get((rid, "exit")))
            try:
                Up, xp, boxes = solver.prepare(road.state, bc)
                d_tau = min(d_tau, solver.plan(Up, boxes, t_end - self.tau).d_tau)
            except (DomainError, ValueError) as err:
                raise RoadError(rid, err) from err
            prepared[rid] = (Up, boxes)
        infos = {}
        for rid, road in self.roads.items():
            Up, boxes = prepared[rid]
            try:
                new, info = self.solvers[rid].advance(road.state, Up, boxes, d_tau)
            except (DomainError, ValueError) as err:
                raise RoadError(rid, err) from err
            phi, k, v = node_primitives(self.model, new.U)
            excess = box_excess(boxes, v, k) if boxes is not None else -np.inf
            self.reports[rid].update(phi, v, k, excess, info.stats)
            left, right = info.edge_flux
            road.boundary_mass += float(left[0] - right[0])
            road.state = new
            if not road.periodic:
                self._remesh(road, Up)
            infos[rid] = info
        self.tau += d_tau
        self.steps += 1
        return d_tau, infos

    def _remesh(self, road, Up):
        """Drop nodes beyond the exit and feed ghost nodes in at the entry."""
        st = road.state
        d_xi = road.grid.d_xi
        keep = st.x.size
        while keep > 1 and st.x[keep - 2] > road.x_exit:
            keep -= 1
        if keep < st.x.size:
            road.removed_mass += float(st.U[0, keep:].sum() * d_xi)
        U, x = st.U[:, :keep], st.x[:keep]
        ghost = Up[:, 2]
        new_x, new_U = [], []
        front = x[0]
        while front > road.x_entry:
            front = front - d_xi * ghost[2]
            new_x.append(front)
            new_U.append(ghost)
        if new_x:
            road.inserted_mass += float(ghost[0] * d_xi * len(new_x))
            U = np.concatenate([np.array(new_U[::-1]).T, U], axis=1)
            x = np.concatenate([new_x[::-1], x])
        road.state = State(np.ascontiguousarray(U), np.ascontiguousarray(x), st.tau, st.step)

    def run(self, t_end, monitor=None, max_steps=10**7):
        while t_end - self.tau > 1e-14 * max(1.0, t_end):
            d_tau, infos = self.step(t_end)
            if monitor is not None:
                monitor(self, d_tau, infos)
            if self.steps > max_steps:
                raise RuntimeError("too many steps")
        return self

    def mass_ledger(self):
        """Per-road mass balance: final - initial - inserted + removed - boundary flux."""
        out = {}
        for rid, r in self.roads.items():
            m0 = self.initial_mass[rid]
            m1 = r.mass()
            out[rid] = {"initial": m0, "final": m1, "inserted": r.inserted_mass,
                        "removed": r.removed_mass, "boundary_flux": r.boundary_mass,
                        "residual": m1 - m0 - r.inserted_mass + r.removed_mass - r.boundary_mass}
        return out

    def summary(self):
        return {"t": self.tau, "steps": self.steps,
                "roads": {str(rid): vars(rep) for rid, rep in self.reports.items()},
                "mass": {str(rid): led for rid, led in self.mass_ledger().items()}}

    def local_boxes(self, rid):
        """Per-cell local boxes of one road's current state, ghosts included."""
        road = self.roads[rid]
        ghosts = self.ghost_states()
        bc = Boundary("periodic") if road.periodic else Boundary(
            "fixed", ghosts.get((rid, "entry")), ghosts.get((rid, "exit")))
        Up, xp = pad(road.state.U, road.state.x, bc, road.grid)
        _, k, v = node_primitives(self.model, Up)
        return local_boxes(xp, v, k, road.periodic)

    def road_profile(self, rid, inside_only=True):
        """Primitive fields on one road, by default only inside its interval."""
        road = self.roads[rid]
        idx = road.inside() if inside_only else np.arange(road.state.n)
        phi, k, v = self.model.primitive_from_conserved(*road.state.U[:, idx])
        return {"x": road.state.x[idx], "phi": np.asarray(phi), "v": np.asarray(v),
                "k": np.asarray(k), "J": road.state.U[2, idx]}


# ---------------------------------------------------------------------------
# initial-data profiles and configuration files
# ---------------------------------------------------------------------------


def profile(desc):
    """Callable of xi from a small description.

    ``{"const": c}``, ``{"sine": [mean, amplitude]}`` (period 1), or
    ``{"intervals": [[a, b, value], ...], "default": d}``.  A bare number is a
    constant.
    """
    if isinstance(desc, (int, float)):
        desc = {"const": desc}
    if "const" in desc:
        c = float(desc["const"])
        return lambda xi: np.full_like(xi, c, dtype=float)
    if "sine" in desc:
        mean, amp = map(float, desc["sine"])
        return lambda xi: mean + amp * np.sin(2.0 * np.pi * xi)
    if "intervals" in desc:
        pieces = [(float(a), float(b), float(val)) for a, b, val in desc["intervals"]]
        default = float(desc["default"])

        def f(xi):
            out = np.full_like(xi, default, dtype=float)
            for a, b, val in pieces:
                out[(xi >= a) & (xi <= b)] = val
            return out
        return f
    raise NetworkConfigError(f"unknown profile {desc!r}")


def _velocity_profile(desc, phi):
    if desc == "one_minus_phi":
        return lambda xi: 1.0 - phi(xi)
    return profile(desc)


def build_road(model, rid, n, phi_desc, v_desc, length=1.0, periodic=False):
    grid = Grid(0.0, float(length), int(n))
    phi = profile(phi_desc)
    state = initial_state(model, grid, phi, _velocity_profile(v_desc, phi))
    return Road(rid, grid, state, periodic=periodic)


def network_from_config(cfg, n_override=None, mode=None, limiter=None, use_numba=None):
    """Network and end time from a configuration dict (see :func:`load_config`)."""
    m = cfg.get("model", {})
    model = Model.from_name(m.get("name", "arz"), m.get("gamma", 1.0), m.get("vref", 1.0))
    roads = []
    for r in cfg["roads"]:
        n = n_override if n_override is not None else r.get("N", 200)
        roads.append(build_road(model, int(r["id"]), n, r["phi"], r["v"],
                                r.get("length", 1.0), r.get("periodic", False)))
    junctions = [Junction(int(j["id"]), [int(i) for i in j["incoming"]],
                          [int(o) for o in j["outgoing"]],
                          None if j.get("distribution") is None else np.asarray(j["distribution"], float))
                 for j in cfg.get("junctions", [])]
    net = Network(model, roads, junctions,
                  mode=mode or cfg.get("mode", "local"),
                  limiter=cfg.get("limiter", True) if limiter is None else limiter,
                  cfl=cfg.get("cfl", DEFAULT_CFL), use_numba=use_numba)
    return net, float(cfg.get("t_end", 0.2))


def load_config(path):
    with open(path) as fh:
        return json.load(fh)


def diverging_config(n=700):
    """One road splitting evenly into two (gamma = 1)."""
    return {
        "model": {"name": "arz", "gamma": 1.0, "vref": 1.0}, "t_end": 0.2,
        "roads": [
            {"id": 1, "N": n, "phi": 0.5, "v": 0.5},
            {"id": 2, "N": n, "phi": {"intervals": [[0.5, 1.0, 0.1]], "default": 0.5}, "v": 0.5},
            {"id": 3, "N": n, "phi": {"intervals": [[0.2, 0.4, 0.6], [0.6, 0.8, 0.6]], "default": 0.5},
             "v": "one_minus_phi"},
        ],
        "junctions": [{"id": 1, "incoming": [1], "outgoing": [2, 3], "distribution": [[0.5], [0.5]]}],
    }


def merging_config(n=700, vacuum=1e-10):
    """Two roads merging into one whose downstream half is nearly empty."""
    return {
        "model": {"name": "arz", "gamma": 1.0, "vref": 1.0}, "t_end": 0.5,
        "roads": [
            {"id": 1, "N": n, "phi": 0.4, "v": 0.4},
            {"id": 2, "N": n, "phi": 0.4, "v": 0.4},
            {"id": 3, "N": n, "phi": {"intervals": [[0.5, 1.0, vacuum]], "default": 0.4}, "v": 0.4},
        ],
        "junctions": [{"id": 1, "incoming": [1, 2], "outgoing": [3], "distribution": [[1.0, 1.0]]}],
    }


_GRID_PROFILES = [
    {"intervals": [[0.4, 0.6, 0.05]], "default": 0.1},
    {"intervals": [[0.1, 0.5, 1e-10]], "default": 0.1},
    0.1,
    {"sine": [0.1, 0.05]},
    {"intervals": [[0.4, 0.6, 0.2]], "default": 0.1},
]


def grid_network_config(n=100):
    """30 roads and 24 junctions laid out as 6 lanes by 4 layers.

    Lanes run between consecutive layers; sources feed lanes 0, 2, 3, 5 and
    sinks leave them.  Lanes 1 and 4 are fed by a diverge on layer 0 and drain
    through a merge on layer 3; lanes 1 and 2 cross between layers 1 and 2.
    """
    jid = lambda lane, layer: 1 + layer * 6 + lane
    edges = []  # (from junction or None, to junction or None)
    for lane in (0, 2, 3, 5):
        edges.append((None, jid(lane, 0)))
        edges.append((jid(lane, 3), None))
    for layer in range(3):
        for lane in range(6):
            dst = lane
            if layer == 1 and lane in (1, 2):
                dst = 3 - lane
            edges.append((jid(lane, layer), jid(dst, layer + 1)))
    edges += [(jid(0, 0), jid(1, 0)), (jid(5, 0), jid(4, 0)),
              (jid(1, 3), jid(2, 3)), (jid(4, 3), jid(3, 3))]
    roads, inc, out = [], {}, {}
    for rid, (src, dst) in enumerate(edges, start=1):
        roads.append({"id": rid, "N": n, "phi": _GRID_PROFILES[(rid - 1) % 5], "v": 0.5})
        if src is not None:
            inc.setdefault(src, []).append(rid)
        if dst is not None:
            out.setdefault(dst, []).append(rid)
    junctions = [{"id": j, "incoming": out[j], "outgoing": inc[j]} for j in sorted(inc)]
    return {"model": {"name": "arz", "gamma": 2.0, "vref": 1.0}, "t_end": 0.5,
            "roads": roads, "junctions": junctions}


PRESETS = {"diverging": diverging_config, "merging": merging_config, "grid": grid_network_config}

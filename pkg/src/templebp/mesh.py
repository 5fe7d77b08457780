"""Computational grid, moving-mesh state and ghost-node padding."""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import DomainError, _velocity

NGHOST = 3
PHI_CLAMP = 1e-14


@dataclass(frozen=True)
class Grid:
    """Uniform computational grid on [xi_left, xi_right] with ``n`` nodes."""

    xi_left: float
    xi_right: float
    n: int

    def __post_init__(self):
        if self.n < 5:
            raise ValueError("need at least 5 nodes")
        if not self.xi_right > self.xi_left:
            raise ValueError("empty computational interval")

    @property
    def d_xi(self):
        return (self.xi_right - self.xi_left) / self.n

    @property
    def length(self):
        return self.xi_right - self.xi_left

    @property
    def nodes(self):
        return self.xi_left + (np.arange(self.n) + 0.5) * self.d_xi


@dataclass
class State:
    """Conserved curvilinear variables U = (J phi, J y, J) and node positions."""

    U: np.ndarray
    x: np.ndarray
    tau: float = 0.0
    step: int = 0

    def copy(self):
        return State(self.U.copy(), self.x.copy(), self.tau, self.step)

    @property
    def n(self):
        return self.U.shape[1]


@dataclass
class Boundary:
    """Ghost-node policy.

    ``periodic`` wraps, ``outflow`` copies the end node, ``fixed`` uses the
    supplied ghost states (length-3 conserved vectors, constant extension).
    Ends of a ``fixed`` boundary left as ``None`` fall back to outflow.
    """

    kind: str = "outflow"
    left: Optional[np.ndarray] = field(default=None)
    right: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        if self.kind not in ("periodic", "outflow", "fixed"):
            raise ValueError(f"unknown boundary kind {self.kind!r}")

    @property
    def periodic(self):
        return self.kind == "periodic"


def initial_state(model, grid, phi0, v0):
    """Build the moving-mesh state at tau = 0 (J = 1, x = xi)."""
    xi = grid.nodes
    phi = np.broadcast_to(np.asarray(phi0(xi) if callable(phi0) else phi0, dtype=float), xi.shape)
    v = np.broadcast_to(np.asarray(v0(xi) if callable(v0) else v0, dtype=float), xi.shape)
    U = model.conserved_from_primitive(phi, v, 1.0)
    return State(U, xi.copy())


def pad(U, x, bc, grid):
    """Return U and x extended by NGHOST ghost nodes on each side."""
    g = NGHOST
    n = U.shape[1]
    Up = np.empty((3, n + 2 * g))
    xp = np.empty(n + 2 * g)
    Up[:, g:g + n] = U
    xp[g:g + n] = x
    if bc.periodic:
        Up[:, :g] = U[:, n - g:]
        Up[:, g + n:] = U[:, :g]
        xp[:g] = x[n - g:] - grid.length
        xp[g + n:] = x[:g] + grid.length
        return Up, xp
    left = U[:, 0] if bc.left is None else np.asarray(bc.left, dtype=float)
    right = U[:, -1] if bc.right is None else np.asarray(bc.right, dtype=float)
    Up[:, :g] = left[:, None]
    Up[:, g + n:] = right[:, None]
    steps = np.arange(1, g + 1) * grid.d_xi
    xp[:g] = x[0] - steps[::-1] * left[2]
    xp[g + n:] = x[-1] + steps * right[2]
    return Up, xp


def node_primitives(model, Up, clamp=False):
    """phi, k, v at every (padded) node.

    With ``clamp`` the density is forced into [1e-14, 1 - 1e-14] so that
    intermediate Runge-Kutta stages can always be evaluated; otherwise an
    inadmissible node raises DomainError.
    """
    jphi, jy, jac = Up
    if not clamp:
        phi, k, v = model.primitive_from_conserved(jphi, jy, jac)
        return phi, k, v
    with np.errstate(divide="ignore", invalid="ignore"):
        safe_j = np.where(jac > PHI_CLAMP, jac, PHI_CLAMP)
        phi = np.clip(jphi / safe_j, PHI_CLAMP, 1.0 - PHI_CLAMP)
        k = np.where(np.abs(jphi) > 1e-300, jy / jphi, 0.0)
    v = _velocity(*model.params, phi, k)
    if not np.all(np.isfinite(v)):
        raise DomainError("non-finite velocity in intermediate stage")
    return phi, k, v


def snapshot(model, state):
    """Primitive fields at the nodes as a dict of arrays."""
    phi, k, v = model.primitive_from_conserved(*state.U)
    return {"x": state.x.copy(), "phi": np.asarray(phi), "v": np.asarray(v),
            "k": np.asarray(k), "J": state.U[2].copy()}


def write_csv(path, model, state):
    snap = snapshot(model, state)
    cols = ["x", "phi", "v", "k", "J"]
    data = np.column_stack([snap[c] for c in cols])
    np.savetxt(path, data, delimiter=",", header=",".join(cols), comments="", fmt="%.17g")

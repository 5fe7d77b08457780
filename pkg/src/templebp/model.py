"""Closures for the Temple-class two-equation models.

Three closures are supported:

* ``arz``: v = k - p(phi), p = (v_ref/gamma) phi**gamma
* ``arz_log``: v = k - p(phi), p = v_ref log(phi)
* ``sedimentation``: v = k p(phi), p = (1 - phi)**2

The elementwise formulas are written once as plain functions of a model
``kind`` code so that they can be used on numpy arrays and also compiled
into the numba limiter kernels.
"""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._accel import kernel

ARZ = 0
ARZ_LOG = 1
SEDIMENTATION = 2

_KIND_NAMES = {ARZ: "arz", ARZ_LOG: "arz_log", SEDIMENTATION: "sedimentation"}


class DomainError(ValueError):
    """A state left the admissible set (phi outside (0, 1), J <= 0, ...)."""


# ---------------------------------------------------------------------------
# elementwise formulas (work on floats and numpy arrays)
# ---------------------------------------------------------------------------


def _pressure(kind, gamma, vref, phi):
    if kind == ARZ:
        return vref / gamma * phi**gamma
    if kind == ARZ_LOG:
        return vref * np.log(phi)
    return (1.0 - phi) * (1.0 - phi)


def _dpressure(kind, gamma, vref, phi):
    if kind == ARZ:
        return vref * phi ** (gamma - 1.0)
    if kind == ARZ_LOG:
        return vref / phi
    return -2.0 * (1.0 - phi)


def _build(pressure, dpressure, wrap):
    """Formulas that depend on the pressure, bound to a given implementation."""

    def velocity(kind, gamma, vref, phi, k):
        if kind == SEDIMENTATION:
            return k * pressure(kind, gamma, vref, phi)
        return k - pressure(kind, gamma, vref, phi)

    def h(kind, gamma, vref, jphi, jy, jac, s):
        # sign(h) == sign(v - s) whenever jphi > 0 and jac > 0
        p = pressure(kind, gamma, vref, jphi / jac)
        if kind == SEDIMENTATION:
            return jy * p - jphi * s
        return jy - jphi * (s + p)

    def grad_h(kind, gamma, vref, jphi, jy, jac):
        """Gradient of h + s*jphi with respect to (Jphi, Jy, J)."""
        phi = jphi / jac
        p = pressure(kind, gamma, vref, phi)
        dp = dpressure(kind, gamma, vref, phi)
        if kind == SEDIMENTATION:
            y = jy / jac
            return y * dp, p, -y * phi * dp
        return -p - phi * dp, 1.0 + 0.0 * phi, phi * phi * dp

    return wrap(velocity), wrap(h), wrap(grad_h)


_velocity, _h, _grad_h = _build(_pressure, _dpressure, lambda f: f)
_velocity_nb, _h_nb, _grad_h_nb = _build(kernel(_pressure), kernel(_dpressure), kernel)


@kernel
def _h_theta_nb(kind, gamma, vref, a, bm, bp, tm, tp, s):
    """h at U = a + tm*bm + tp*bp (each argument a length-3 array)."""
    return _h_nb(kind, gamma, vref,
                 a[0] + tm * bm[0] + tp * bp[0],
                 a[1] + tm * bm[1] + tp * bp[1],
                 a[2] + tm * bm[2] + tp * bp[2], s)


class Primitive(NamedTuple):
    phi: float
    k: float
    v: float


@dataclass(frozen=True)
class Model:
    """A closure of the Temple-class system.

    Use the constructors :meth:`arz`, :meth:`arz_log` and
    :meth:`sedimentation` rather than instantiating directly.
    """

    kind: int
    gamma: float = 0.0
    vref: float = 1.0

    def __post_init__(self):
        if self.kind not in _KIND_NAMES:
            raise ValueError(f"unknown model kind {self.kind}")
        if self.kind == ARZ and not self.gamma > 0:
            raise ValueError("arz needs gamma > 0; use arz_log for gamma = 0")
        if self.kind in (ARZ, ARZ_LOG) and not self.vref > 0:
            raise ValueError("vref must be positive")

    @classmethod
    def arz(cls, gamma, vref=1.0):
        if gamma == 0:
            return cls.arz_log(vref)
        return cls(ARZ, float(gamma), float(vref))

    @classmethod
    def arz_log(cls, vref=1.0):
        return cls(ARZ_LOG, 0.0, float(vref))

    @classmethod
    def sedimentation(cls):
        return cls(SEDIMENTATION, 0.0, 1.0)

    @classmethod
    def from_name(cls, name, gamma=2.0, vref=1.0):
        name = name.lower()
        if name == "arz":
            return cls.arz(gamma, vref)
        if name in ("arz_log", "arz-log"):
            return cls.arz_log(vref)
        if name in ("sedimentation", "sed"):
            return cls.sedimentation()
        raise ValueError(f"unknown model {name!r}")

    @property
    def name(self):
        return _KIND_NAMES[self.kind]

    @property
    def params(self):
        """(kind, gamma, vref) as plain scalars for the compiled kernels."""
        return self.kind, float(self.gamma), float(self.vref)

    # -- pointwise closure -------------------------------------------------

    def _check_phi(self, phi):
        phi = np.asarray(phi, dtype=float)
        if np.any(~(phi > 0.0)) or np.any(phi > 1.0):
            raise DomainError("phi must lie in (0, 1]")
        return phi

    def pressure(self, phi):
        phi = self._check_phi(phi)
        return _pressure(*self.params, phi)

    def dpressure(self, phi):
        phi = self._check_phi(phi)
        return _dpressure(*self.params, phi)

    def velocity(self, phi, k):
        return _velocity(*self.params, self._check_phi(phi), np.asarray(k, dtype=float))

    def k_from_v(self, phi, v):
        p = self.pressure(phi)
        if self.kind == SEDIMENTATION:
            return np.asarray(v, dtype=float) / p
        return np.asarray(v, dtype=float) + p

    def eta(self, phi, s):
        """The value y = phi k of a state with density ``phi`` and speed ``s``."""
        return np.asarray(phi, dtype=float) * self.k_from_v(phi, s)

    def eigen_speeds(self, phi, k):
        """Characteristic speeds (lambda_1, lambda_2) of the Eulerian system."""
        phi = self._check_phi(phi)
        k = np.asarray(k, dtype=float)
        v = _velocity(*self.params, phi, k)
        dp = _dpressure(*self.params, phi)
        if self.kind == SEDIMENTATION:
            lam1 = v + phi * k * dp
        else:
            lam1 = v - phi * dp
        return lam1, v

    def bound_inverse_density(self, k, s):
        """Density phi at which a state with Lagrangian marker ``k`` has speed ``s``."""
        k = np.asarray(k, dtype=float)
        s = np.asarray(s, dtype=float)
        if self.kind == ARZ:
            arg = self.gamma / self.vref * (k - s)
            if np.any(arg < 0):
                raise DomainError("no density reaches this speed (k < s)")
            return arg ** (1.0 / self.gamma)
        if self.kind == ARZ_LOG:
            return np.exp((k - s) / self.vref)
        if np.any(k <= 0) or np.any(s < 0) or np.any(s > k):
            raise DomainError("sedimentation inverse needs 0 <= s <= k")
        return 1.0 - np.sqrt(s / k)

    # -- conserved/curvilinear variables -------------------------------------

    def primitive_from_conserved(self, jphi, jy, jac):
        """Return (phi, k, v) for conserved (J phi, J y, J)."""
        jphi = np.asarray(jphi, dtype=float)
        jac = np.asarray(jac, dtype=float)
        if np.any(~(jac > 0)):
            raise DomainError("J must be positive")
        if np.any(~(jphi > 0)):
            raise DomainError("negative or zero density (J phi <= 0)")
        phi = jphi / jac
        if np.any(phi >= 1.0):
            raise DomainError("density reached 1 (J phi >= J)")
        k = np.asarray(jy, dtype=float) / jphi
        v = _velocity(*self.params, phi, k)
        if np.ndim(phi) == 0:
            return Primitive(float(phi), float(k), float(v))
        return Primitive(phi, k, v)

    def conserved_from_primitive(self, phi, v, jac=1.0):
        phi = self._check_phi(phi)
        k = self.k_from_v(phi, v)
        jac = np.broadcast_to(np.asarray(jac, dtype=float), phi.shape)
        return np.stack([jac * phi, jac * phi * k, jac.copy()])

    def h_constraint(self, jphi, jy, jac, s):
        """Scalar whose sign equals sign(v - s); concave in U for ARZ closures."""
        return _h(*self.params, np.asarray(jphi, dtype=float), np.asarray(jy, dtype=float),
                  np.asarray(jac, dtype=float), s)

    def grad_h(self, jphi, jy, jac, s):
        g0, g1, g2 = _grad_h(*self.params, np.asarray(jphi, dtype=float),
                             np.asarray(jy, dtype=float), np.asarray(jac, dtype=float))
        return g0 - s, g1, g2

    def curvilinear_flux(self, phi, y, v, c):
        """Node flux ((v - c) phi, (v - c) y, -c) in the computational frame."""
        return np.stack([(v - c) * phi, (v - c) * y, -c * np.ones_like(v)])

"""Fifth-order WENO interface fluxes with local Lax-Friedrichs splitting.

Each reconstruction is written as "centre value + weighted differences", so
on constant data every correction is exactly zero and the numerical flux
equals the node flux bit for bit.
"""
import numpy as np

from ._accel import HAS_NUMBA, kernel
from .mesh import NGHOST

WENO_EPS = 1e-6
LINEAR_WEIGHTS = (0.1, 0.6, 0.3)


def _weno5_correction(um2, um1, u0, up1, up2):
    """Left-biased WENO5 value at i+1/2 minus u_i, from u_{i-2..i+2}."""
    b0 = 13.0 / 12.0 * (um2 - 2.0 * um1 + u0) ** 2 + 0.25 * (um2 - 4.0 * um1 + 3.0 * u0) ** 2
    b1 = 13.0 / 12.0 * (um1 - 2.0 * u0 + up1) ** 2 + 0.25 * (um1 - up1) ** 2
    b2 = 13.0 / 12.0 * (u0 - 2.0 * up1 + up2) ** 2 + 0.25 * (3.0 * u0 - 4.0 * up1 + up2) ** 2
    a0 = 0.1 / (WENO_EPS + b0) ** 2
    a1 = 0.6 / (WENO_EPS + b1) ** 2
    a2 = 0.3 / (WENO_EPS + b2) ** 2
    dm2 = um2 - um1
    dm1 = um1 - u0
    dp1 = up1 - u0
    dp2 = up2 - u0
    q0 = (2.0 * dm2 - 5.0 * dm1) / 6.0
    q1 = (2.0 * dp1 - dm1) / 6.0
    q2 = (5.0 * dp1 - dp2) / 6.0
    return (a0 * q0 + a1 * q1 + a2 * q2) / (a0 + a1 + a2)


_weno5_correction_nb = kernel(_weno5_correction)


def interface_speeds(speed):
    """Splitting speed per interface: max over the six-node stencil."""
    n_if = speed.size - 2 * NGHOST + 1
    out = speed[0:n_if].copy()
    for s in range(1, 6):
        np.maximum(out, speed[s:s + n_if], out=out)
    return out


def _fluxes_numpy(Up, Gp, speed):
    n_if = Up.shape[1] - 2 * NGHOST + 1
    alpha = interface_speeds(speed)
    F = np.empty((Up.shape[0], n_if))
    for c in range(Up.shape[0]):
        u, f = Up[c], Gp[c]
        sl = [slice(s, s + n_if) for s in range(6)]  # stencil i-2 .. i+3
        fp = [0.5 * (f[q] + alpha * u[q]) for q in sl[:5]]
        fm = [0.5 * (f[q] - alpha * u[q]) for q in sl[1:]]
        base = 0.5 * (f[sl[2]] + f[sl[3]]) - 0.5 * alpha * (u[sl[3]] - u[sl[2]])
        corr_p = _weno5_correction(fp[0], fp[1], fp[2], fp[3], fp[4])
        corr_m = _weno5_correction(fm[4], fm[3], fm[2], fm[1], fm[0])
        F[c] = base + corr_p + corr_m
    return F


@kernel
def _fluxes_loop(Up, Gp, speed):
    ncomp, npad = Up.shape
    n_if = npad - 2 * NGHOST + 1
    F = np.empty((ncomp, n_if))
    for i in range(n_if):
        a = speed[i]
        for s in range(1, 6):
            if speed[i + s] > a:
                a = speed[i + s]
        for c in range(ncomp):
            u = Up[c]
            f = Gp[c]
            p0 = 0.5 * (f[i] + a * u[i])
            p1 = 0.5 * (f[i + 1] + a * u[i + 1])
            p2 = 0.5 * (f[i + 2] + a * u[i + 2])
            p3 = 0.5 * (f[i + 3] + a * u[i + 3])
            p4 = 0.5 * (f[i + 4] + a * u[i + 4])
            m1 = 0.5 * (f[i + 1] - a * u[i + 1])
            m2 = 0.5 * (f[i + 2] - a * u[i + 2])
            m3 = 0.5 * (f[i + 3] - a * u[i + 3])
            m4 = 0.5 * (f[i + 4] - a * u[i + 4])
            m5 = 0.5 * (f[i + 5] - a * u[i + 5])
            base = 0.5 * (f[i + 2] + f[i + 3]) - 0.5 * a * (u[i + 3] - u[i + 2])
            F[c, i] = (base + _weno5_correction_nb(p0, p1, p2, p3, p4)
                       + _weno5_correction_nb(m5, m4, m3, m2, m1))
    return F


def weno5_fluxes(Up, Gp, speed, use_numba=None):
    """Numerical fluxes at the N+1 interfaces of the padded arrays.

    ``Up`` and ``Gp`` are (ncomp, N + 6) conserved values and node fluxes,
    ``speed`` the (N + 6) node splitting speeds.
    """
    if use_numba is None:
        use_numba = HAS_NUMBA
    if use_numba:
        return _fluxes_loop(np.ascontiguousarray(Up), np.ascontiguousarray(Gp),
                            np.ascontiguousarray(speed))
    return _fluxes_numpy(Up, Gp, speed)


def weno5_reconstruct(values):
    """Left-biased WENO5 reconstruction at the right face of each interior node."""
    values = np.asarray(values, dtype=float)
    u = [values[s:values.size - 4 + s] for s in range(5)]
    return u[2] + _weno5_correction(*u)

import numpy as np
import pytest

from templebp import weno
from templebp._accel import HAS_NUMBA
from templebp.boxes import (BOX_PAD, Boxes, DegenerateStencilError, GlobalBox, box_excess,
                            local_boxes, quad_extrema)
from templebp.integrator import Solver
from templebp.mesh import NGHOST, Boundary, Grid, initial_state, pad
from templebp.model import Model

ARZ2 = Model.arz(2.0, 1.0)


def _fluxes(model, state, grid, bc, use_numba):
    s = Solver(model, grid, bc, use_numba=use_numba)
    Up, _ = pad(state.U, state.x, bc, grid)
    return s.rhs_fluxes(Up)[0]


@pytest.mark.parametrize("use_numba", [False, True])
def test_constant_state_fluxes_are_exact(use_numba):
    g = Grid(0.0, 1.0, 30)
    st = initial_state(ARZ2, g, 0.6, 0.35)
    F = _fluxes(ARZ2, st, g, Boundary("periodic"), use_numba)
    v = ARZ2.primitive_from_conserved(*st.U[:, :1]).v[0]
    np.testing.assert_array_equal(F[0], 0.0)
    np.testing.assert_array_equal(F[1], 0.0)
    np.testing.assert_array_equal(F[2], -v)
    assert v == pytest.approx(0.35, abs=1e-15)


def test_reconstruction_is_fifth_order_on_smooth_data():
    errs = []
    for n in (40, 80, 160):
        h = 1.0 / n
        faces = np.arange(n) * h
        # cell averages of sin(2 pi x) over [x - h/2, x + h/2]
        centres = faces + 0.5 * h
        avg = (np.cos(2 * np.pi * (centres - h / 2)) - np.cos(2 * np.pi * (centres + h / 2))) / (
            2 * np.pi * h)
        ext = np.concatenate([avg[-2:], avg, avg[:2]])
        rec = weno.weno5_reconstruct(ext)
        errs.append(np.abs(rec - np.sin(2 * np.pi * (centres + h / 2))).max())
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all(ratios >= 2 ** 4.5)


def test_jump_reconstruction_stays_near_stencil_range():
    vals = np.where(np.arange(20) < 10, 1.0, 0.0)
    rec = weno.weno5_reconstruct(vals)
    assert rec.min() >= -1e-3 and rec.max() <= 1.0 + 1e-3


def test_interface_speeds_take_stencil_max():
    speed = np.zeros(12)
    speed[5] = 2.0
    a = weno.interface_speeds(speed)
    assert a.size == 12 - 2 * NGHOST + 1
    np.testing.assert_array_equal(a, [2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 0.0])


@pytest.mark.skipif(not HAS_NUMBA, reason="numba not available")
def test_compiled_and_numpy_fluxes_agree():
    rng = np.random.default_rng(3)
    Up = rng.uniform(0.1, 1.0, (3, 50))
    Gp = rng.uniform(-1.0, 1.0, (3, 50))
    speed = rng.uniform(0.0, 2.0, 50)
    np.testing.assert_allclose(weno.weno5_fluxes(Up, Gp, speed, True),
                               weno.weno5_fluxes(Up, Gp, speed, False), rtol=1e-13, atol=1e-15)


def test_periodic_update_telescopes():
    g = Grid(0.0, 1.0, 64)
    m = Model.arz_log(0.4)
    st = initial_state(m, g, 0.5, lambda x: 0.1 + 0.4 * np.cos(2 * np.pi * x))
    F = _fluxes(m, st, g, Boundary("periodic"), None)
    assert abs(np.sum(np.diff(F, axis=1), axis=1)).max() < 1e-15


def test_quadratic_box_vertex():
    lo, hi = quad_extrema(0.0, 1.0, 2.0, 0.1, 0.3, 0.2)
    xs = np.linspace(0.0, 2.0, 10001)
    # parabola through the three points: 0.1 + 0.35 x - 0.15 x^2, vertex at 7/6
    dense = 0.1 + 0.35 * xs - 0.15 * xs ** 2
    assert hi == pytest.approx(0.1 + 0.35 * 7 / 6 - 0.15 * (7 / 6) ** 2, abs=1e-15)
    assert hi == pytest.approx(0.3041666666666667, abs=1e-15)
    assert hi >= dense.max() and lo == pytest.approx(dense.min(), abs=1e-15)


def _padded(values, x=None):
    n = len(values)
    x = np.arange(n, dtype=float) if x is None else x
    return np.asarray(x, dtype=float), np.asarray(values, dtype=float)


def test_local_boxes_pad_and_clamp():
    # the first cell of a periodic padded array uses padded nodes 2, 3, 4
    xp, vp = _padded([0.2, 0.2, 0.1, 0.3, 0.2, 0.2, 0.2, 0.2, 0.2])
    b = local_boxes(xp, vp, np.ones_like(vp), periodic=True)
    assert b.vmax[0] == pytest.approx(0.3041666666666667 + BOX_PAD, abs=1e-15)
    xp, vp = _padded([0.4] * 9)
    b = local_boxes(xp, vp, vp, periodic=True)
    np.testing.assert_allclose(b.vmin, 0.4 - BOX_PAD, rtol=0, atol=1e-16)
    np.testing.assert_allclose(b.vmax, 0.4 + BOX_PAD, rtol=0, atol=1e-16)
    xp, vp = _padded([0.0] * 9)
    b = local_boxes(xp, vp, vp, periodic=True)
    np.testing.assert_array_equal(b.vmin, 0.0)


def test_degenerate_stencil_raises():
    with pytest.raises(DegenerateStencilError):
        quad_extrema(0.0, 0.0, 1.0, 0.1, 0.2, 0.3)


def test_global_box_union_and_hull():
    a = GlobalBox(0.1, 0.5, 0.2, 0.6)
    u = a.union(GlobalBox(0.05, 0.45, 0.3, 0.5))
    assert (u.vmin, u.vmax, u.kmin, u.kmax) == (0.05, 0.5, 0.2, 0.6)
    assert a.union(GlobalBox(0.2, 0.4, 0.3, 0.5)) == a
    assert a.union(GlobalBox(0.2, 0.7, 0.3, 0.5)).vmax == 0.7
    b = Boxes(np.array([0.1, 0.05]), np.array([0.5, 0.45]), np.array([0.2, 0.3]),
              np.array([0.6, 0.5]))
    assert b.hull() == GlobalBox(0.05, 0.5, 0.2, 0.6)
    assert box_excess(b, np.array([0.3, 0.3]), np.array([0.4, 0.4])) < 0
    assert box_excess(b, np.array([0.3, 0.47]), np.array([0.4, 0.4])) == pytest.approx(0.02)

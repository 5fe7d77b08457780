import json

import numpy as np
import pytest

from templebp import network
from templebp.mesh import Grid, initial_state
from templebp.model import Model

ARZ1 = Model.arz(1.0, 1.0)


def _road(phi, v, n=20, rid=1):
    g = Grid(0.0, 1.0, n)
    return network.Road(rid, g, initial_state(ARZ1, g, phi, v))


def test_trace_reproduces_quartic_data_at_the_ends():
    poly = lambda x: 0.3 + 0.1 * x - 0.05 * x ** 2 + 0.02 * x ** 3 - 0.03 * x ** 4
    road = _road(poly, 0.4)
    for end, x in (("entry", 0.0), ("exit", 1.0)):
        t = network.boundary_trace(ARZ1, road, end)
        assert t.phi == pytest.approx(poly(x), abs=1e-12)
        assert t.v == pytest.approx(0.4, abs=1e-12)
        assert t.jac == pytest.approx(1.0, abs=1e-12)


def test_trace_of_constant_state():
    t = network.boundary_trace(ARZ1, _road(0.35, 0.5), "exit")
    assert (t.phi, t.v, t.jac) == (pytest.approx(0.35, abs=1e-14), pytest.approx(0.5, abs=1e-14),
                                   pytest.approx(1.0, abs=1e-14))


def test_trace_floors_negative_extrapolation():
    # the linear fit reaches -1e-4 at the exit
    road = _road(lambda x: -1e-4 + 0.5 * (1.0 - x), 0.4)
    assert network.boundary_trace(ARZ1, road, "exit").phi == network.TRACE_FLOOR


def test_trace_needs_five_inside_nodes():
    road = _road(0.3, 0.4, n=5)
    road.state.x[0] = -1.0
    with pytest.raises(network.InsufficientNodesError):
        network.boundary_trace(ARZ1, road, "entry")


def test_free_flow_density_inverts_flux_and_caps_at_capacity():
    k = 1.2
    phi = network.free_flow_density(ARZ1, k, 0.2)
    assert phi * float(ARZ1.velocity(phi, k)) == pytest.approx(0.2, abs=1e-12)
    # capacity of phi (k - phi) is k^2 / 4 at phi = k / 2
    cap = network.free_flow_density(ARZ1, k, 1.0)
    assert cap * float(ARZ1.velocity(cap, k)) == pytest.approx(k * k / 4, abs=1e-14)
    assert cap == pytest.approx(0.6, abs=1e-7)


def _trace(phi, v):
    return network.Trace(phi, v, 1.0, float(ARZ1.k_from_v(phi, v)))


def test_diverging_split_halves_the_demand():
    jn = network.Junction(1, [1], [2, 3])
    traces_in = [_trace(0.5, 0.5)]
    q = network.DemandSplitCoupling().fluxes(jn, traces_in)
    np.testing.assert_allclose(q[:, 0], [0.125, 0.125])
    ghosts = network.DemandSplitCoupling()(ARZ1, jn, traces_in, [_trace(0.5, 0.5)] * 2)
    for rid in (2, 3):
        phi, k, v = ARZ1.primitive_from_conserved(*ghosts[(rid, "entry")])
        assert phi * v == pytest.approx(0.125, abs=1e-12)
        assert k == pytest.approx(1.0, abs=1e-12)


def test_merging_sums_demands_and_keeps_the_marker():
    jn = network.Junction(1, [1, 2], [3], np.array([[1.0, 1.0]]))
    coupling = network.DemandSplitCoupling()
    t = _trace(0.1, 0.9)
    assert coupling.fluxes(jn, [t, t]).sum() == pytest.approx(0.18, abs=1e-15)
    ghosts = coupling(ARZ1, jn, [t, t], [_trace(0.4, 0.4)])
    phi, k, v = ARZ1.primitive_from_conserved(*ghosts[(3, "entry")])
    assert phi * v == pytest.approx(0.18, abs=1e-12)
    assert k == pytest.approx(t.k, abs=1e-14)
    np.testing.assert_allclose(ghosts[(1, "exit")], ARZ1.conserved_from_primitive(
        np.array([0.1]), np.array([0.9]))[:, 0])


def test_merging_demand_above_capacity_is_capped():
    jn = network.Junction(1, [1, 2], [3], np.array([[1.0, 1.0]]))
    t = _trace(0.4, 0.4)
    assert network.DemandSplitCoupling().fluxes(jn, [t, t]).sum() == pytest.approx(0.32)
    ghosts = network.DemandSplitCoupling()(ARZ1, jn, [t, t], [t])
    phi, k, v = ARZ1.primitive_from_conserved(*ghosts[(3, "entry")])
    assert phi * v == pytest.approx(t.k ** 2 / 4, abs=1e-14)


@pytest.mark.parametrize("dist", [[[0.5], [0.4]], [[1.2], [-0.2]], [[1.0, 1.0]]])
def test_junction_rejects_bad_distribution(dist):
    with pytest.raises(network.NetworkConfigError):
        network.Junction(1, [1], [2, 3], np.array(dist))


def test_network_rejects_inconsistent_topology():
    roads = [_road(0.3, 0.4, rid=i) for i in (1, 2)]
    with pytest.raises(network.NetworkConfigError):
        network.Network(ARZ1, roads, [network.Junction(1, [1], [9])])
    with pytest.raises(network.NetworkConfigError):
        network.Network(ARZ1, roads, [network.Junction(1, [1], [2]), network.Junction(2, [1], [2])])


def test_profiles():
    xi = np.array([0.1, 0.6, 0.9])
    np.testing.assert_array_equal(network.profile(0.3)(xi), 0.3)
    np.testing.assert_array_equal(
        network.profile({"intervals": [[0.5, 0.7, 0.1]], "default": 0.4})(xi), [0.4, 0.1, 0.4])
    with pytest.raises(network.NetworkConfigError):
        network.profile({"bogus": 1})


def test_small_diverging_run_balances_mass(tmp_path):
    path = tmp_path / "net.json"
    path.write_text(json.dumps(network.diverging_config(60)))
    net, t_end = network.network_from_config(network.load_config(path))
    net.run(0.05)
    assert net.tau == pytest.approx(0.05)
    for rid, led in net.mass_ledger().items():
        assert abs(led["residual"]) < 1e-12
    for rep in net.reports.values():
        assert rep.min_phi > 0 and rep.max_phi < 1 and rep.max_box_excess <= 1e-10

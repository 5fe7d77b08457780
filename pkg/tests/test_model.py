import numpy as np
import pytest

from templebp.model import DomainError, Model

ARZ2 = Model.arz(2.0, 1.0)
LOG04 = Model.arz_log(0.4)
SED = Model.sedimentation()


def test_pressure_values():
    assert ARZ2.pressure(0.8) == pytest.approx(0.32, abs=1e-15)
    assert LOG04.pressure(1.0) == 0.0
    assert SED.pressure(0.4) == pytest.approx(0.36, abs=1e-15)


def test_pressure_rejects_out_of_range_density():
    with pytest.raises(DomainError):
        ARZ2.pressure(0.0)
    with pytest.raises(DomainError):
        SED.pressure(1.2)


def test_primitive_from_conserved():
    p = ARZ2.primitive_from_conserved(0.8, 0.576, 1.0)
    assert p.phi == pytest.approx(0.8, abs=1e-15)
    assert p.k == pytest.approx(0.72, abs=1e-15)
    assert p.v == pytest.approx(0.4, abs=1e-15)


@pytest.mark.parametrize("model", [ARZ2, LOG04, SED])
def test_primitive_is_scale_invariant(model):
    U = model.conserved_from_primitive(np.array([0.3, 0.7]), np.array([0.2, 0.1]))
    a = model.primitive_from_conserved(*U)
    b = model.primitive_from_conserved(*(2.0 * U))
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, rtol=1e-15)


def test_primitive_rejects_inadmissible_states():
    with pytest.raises(DomainError):
        ARZ2.primitive_from_conserved(-0.1, 0.1, 1.0)
    with pytest.raises(DomainError):
        ARZ2.primitive_from_conserved(1.0, 0.5, 1.0)
    with pytest.raises(DomainError):
        ARZ2.primitive_from_conserved(0.5, 0.5, 0.0)


def test_eta():
    assert ARZ2.eta(0.8, 0.4) == pytest.approx(0.576, abs=1e-15)
    assert ARZ2.eta(1e-12, 0.7) == pytest.approx(0.0, abs=1e-11)


def test_h_constraint_sign_and_value():
    assert ARZ2.h_constraint(0.8, 0.576, 1.0, 0.3) == pytest.approx(0.080, abs=1e-14)
    assert ARZ2.h_constraint(0.8, 0.576, 1.0, 0.4) == pytest.approx(0.0, abs=1e-15)
    rng = np.random.default_rng(0)
    for model in (ARZ2, LOG04, SED):
        phi = rng.uniform(0.05, 0.95, 200)
        v = rng.uniform(0.05, 0.5, 200)
        s = rng.uniform(0.0, 0.6, 200)
        U = model.conserved_from_primitive(phi, v, rng.uniform(0.5, 2.0, 200))
        h = model.h_constraint(*U, s)
        assert np.all(np.sign(h) == np.sign(v - s))


@pytest.mark.parametrize("model", [ARZ2, LOG04, SED])
def test_grad_h_matches_finite_differences(model):
    U = model.conserved_from_primitive(np.array([0.45]), np.array([0.3]), 1.3)[:, 0]
    s = 0.25
    grad = np.array(model.grad_h(*U, s)).ravel()
    step = 1e-7
    for i in range(3):
        e = np.zeros(3)
        e[i] = step
        fd = (model.h_constraint(*(U + e), s) - model.h_constraint(*(U - e), s)) / (2 * step)
        assert grad[i] == pytest.approx(float(fd), rel=1e-6, abs=1e-8)


def _jacobian_eigs(model, phi, k):
    """Eigenvalues of d(vU)/dU by central differences in U = (phi, y)."""
    def flux(u):
        v = model.velocity(u[0], u[1] / u[0])
        return np.array([v * u[0], v * u[1]])
    u = np.array([phi, phi * k])
    jac = np.empty((2, 2))
    for i in range(2):
        e = np.zeros(2)
        e[i] = 1e-7
        jac[:, i] = (flux(u + e) - flux(u - e)) / 2e-7
    return np.sort(np.linalg.eigvals(jac).real)


def test_eigen_speeds():
    l1, l2 = ARZ2.eigen_speeds(0.8, 0.72)
    assert (l1, l2) == (pytest.approx(-0.24, abs=1e-14), pytest.approx(0.4, abs=1e-14))
    np.testing.assert_allclose(_jacobian_eigs(ARZ2, 0.8, 0.72), [-0.24, 0.4], atol=1e-7)
    l1, l2 = SED.eigen_speeds(0.5, 1.0)
    assert (l1, l2) == (pytest.approx(-0.25, abs=1e-14), pytest.approx(0.25, abs=1e-14))
    np.testing.assert_allclose(_jacobian_eigs(SED, 0.5, 1.0), [-0.25, 0.25], atol=1e-7)
    k = LOG04.k_from_v(0.3, 0.2)
    np.testing.assert_allclose(_jacobian_eigs(LOG04, 0.3, k), np.sort(LOG04.eigen_speeds(0.3, k)),
                               atol=1e-7)


def test_bound_inverse_density():
    assert ARZ2.bound_inverse_density(0.72, 0.4) == pytest.approx(0.8, abs=1e-15)
    k = LOG04.k_from_v(0.5, 0.1)
    assert LOG04.bound_inverse_density(k, 0.1) == pytest.approx(0.5, abs=1e-15)
    assert SED.bound_inverse_density(1.0, 0.36) == pytest.approx(0.4, abs=1e-15)
    with pytest.raises(DomainError):
        ARZ2.bound_inverse_density(0.3, 0.4)


def test_curvilinear_flux():
    f = ARZ2.curvilinear_flux(np.array([0.5]), np.array([0.3]), np.array([0.4]), np.array([0.4]))
    np.testing.assert_allclose(f[:, 0], [0.0, 0.0, -0.4])
    f = ARZ2.curvilinear_flux(np.array([0.5]), np.array([0.3]), np.array([0.4]), np.array([0.0]))
    np.testing.assert_allclose(f[:, 0], [0.2, 0.12, 0.0])


def test_constructor_validation():
    with pytest.raises(ValueError):
        Model.arz(-1.0)
    with pytest.raises(ValueError):
        Model.from_name("euler")
    assert Model.arz(0.0) == Model.arz_log(1.0)
    assert Model.from_name("sed").name == "sedimentation"

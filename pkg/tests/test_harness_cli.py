import json

import numpy as np
import pytest

from templebp import cli, harness


def test_lagrange_reproduces_quintics():
    x_ref = np.sort(np.random.default_rng(0).uniform(0.0, 1.0, 60))
    f = lambda x: 1 - 2 * x + 3 * x ** 2 - x ** 3 + 0.5 * x ** 4 - 0.2 * x ** 5
    x = np.linspace(0.1, 0.9, 17)
    np.testing.assert_allclose(harness.lagrange_at(x_ref, f(x_ref), x), f(x), atol=1e-11)


def test_lagrange_wraps_periodic_data():
    x_ref = (np.arange(40) + 0.5) / 40
    f = np.cos(2 * np.pi * x_ref)
    x = np.array([0.001, 0.999])
    np.testing.assert_allclose(harness.lagrange_at(x_ref, f, x, period=1.0),
                               np.cos(2 * np.pi * x), atol=1e-6)


def test_conservation_report_zero_steps():
    U = np.random.default_rng(1).uniform(0.1, 0.9, (3, 20))
    assert harness.conservation_report(U, U, 0.1) == {"Jphi": 0.0, "Jy": 0.0,
                                                      "Jphi_unweighted": 0.0}


def test_unknown_case():
    with pytest.raises(ValueError):
        harness.get_case("T9")


def test_limiter_is_dormant_on_smooth_early_data():
    _, sm = harness.run_case("ex51", 160, t_end=0.02)
    assert sm.completed and sm.bounds_ok
    assert sm.theta_lt1_fraction <= 0.01


def test_summary_and_csv_outputs_are_deterministic(tmp_path):
    outs = []
    for sub in ("a", "b"):
        _, sm = harness.run_case("T4", 60, t_end=0.2, out_dir=tmp_path / sub)
        outs.append((tmp_path / sub / "T4_N60.csv").read_bytes())
        summary = json.loads((tmp_path / sub / "T4_N60_summary.json").read_text())
    assert outs[0] == outs[1]
    for key in ("max_v_violation", "min_phi", "max_phi", "err_Jphi", "theta_lt1_fraction",
                "step3_fallbacks"):
        assert key in summary
    assert summary["passed"]


def test_failed_run_is_reported_not_raised():
    _, sm = harness.run_case("T2", 100, limiter=False)
    assert not sm.completed and "negative" in sm.error


def test_first_order_run_stays_admissible():
    st = harness.run_first_order("T1", 100, t_end=0.2)
    phi, _, v = harness.get_case("T1").model.primitive_from_conserved(*st.U)
    assert phi.min() > 0 and phi.max() < 1
    assert v.min() >= 0.4 - 1e-12 and v.max() <= 0.4 + 1e-12


def test_cli_run_and_exit_code(capsys, tmp_path):
    assert cli.main(["run", "T4", "--N", "60", "--tfinal", "0.2", "--out", str(tmp_path)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["passed"] and out["case"] == "T4"
    assert cli.main(["run", "T2", "--N", "60", "--limiter", "off"]) == 1


def test_cli_conserve_and_demo(capsys):
    assert cli.main(["conserve", "ex52", "--N", "100", "--tfinal", "0.1"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["err_Jphi"] <= 1e-13
    assert cli.main(["demo-impossibility"]) == 0


def test_cli_network_preset(capsys, tmp_path):
    code = cli.main(["network", "--preset", "diverging", "--N", "60", "--tfinal", "0.05",
                     "--out", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "road2.csv").exists()

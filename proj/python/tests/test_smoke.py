import math

import pytest

import secondclass as sc


def test_models_build_and_check():
    assert "tasep" in sc.model_names()
    m = sc.Model("two_type", {"c": 0.25})
    assert m.p(1, -1) == 1.0
    checks = m.check()
    assert all(v[0] for v in checks.values())
    with pytest.raises(sc.Error):
        sc.Model("asep")


def test_geometric_marginal_and_coupling():
    m = sc.Model("zr_const")
    d = sc.marginal(m, 1.0)
    assert d["pmf"][0] == pytest.approx(0.5)
    exists, witness = sc.coupling_exists(m, 2.0, 1.5)
    assert not exists and witness is not None
    hat = sc.hat_nu(m, 1.0, 0.5)
    assert sum(hat["diag"]) + sum(hat["shifted"]) == pytest.approx(1.0)


def test_tasep_fan():
    m = sc.Model("tasep")
    assert sc.flux(m, 0.3) == pytest.approx(0.21)
    assert sc.scp_limit_cdf(m, 1.0, 0.0, 0.5) == pytest.approx(0.75, abs=1e-3)
    prof = sc.riemann(m, 1.0, 0.0)
    assert prof["shocks"] == []


def test_simulation_is_reproducible():
    m = sc.Model("tasep")
    a = sc.simulate_scp(m, 1.0, 0.0, 2.0, replicas=200, seed=3)
    b = sc.simulate_scp(m, 1.0, 0.0, 2.0, replicas=200, seed=3)
    assert a["histogram"] == b["histogram"]
    assert sum(a["histogram"].values()) + a["aborted"] == 200


def test_symmetric_closed_form():
    m = sc.Model("sym_zr_const")
    prof = sc.parabolic(m, 3.0, 0.0)
    cdf, _ = sc.closed_form_sym_zr(3.0, 0.0, 0.0)
    i = min(range(len(prof["xi"])), key=lambda k: abs(prof["xi"][k]))
    assert (3.0 - prof["u"][i]) / 3.0 == pytest.approx(cdf, abs=2e-3)


def test_run_experiment():
    report = sc.run_experiment(
        {"experiment": "identity", "model": "tasep", "rho": 1, "lambda": 0, "t": 1,
         "replicas": 500, "seed": 2, "n_range": [-2, 2]}
    )
    assert report["experiment"] == "identity"
    assert math.isfinite(report["summary"]["max_abs_z"])

import json

import numpy as np
import pytest

from adobs import matkit
from adobs.example_system import (
    D_ETA,
    L_AB,
    L_ETA,
    L_GAMMA,
    ConfigError,
    ExampleConfig,
    build_realization,
    control_law,
    example_model,
    f_psi_guarded,
    f_theta_guarded,
    structural_identifiability_report,
    true_eta,
    true_kappa,
    true_o_gamma,
    true_psi,
    true_t_inv,
)

CFG = ExampleConfig()


def test_config_defaults_are_valid():
    assert CFG.validate() == []


def test_config_rejects_degenerate_theta():
    assert ExampleConfig(theta=(1.0, 0.0, -1.0)).validate() != []
    assert ExampleConfig(theta=(1.0, 1.0, 0.0)).validate() != []
    with pytest.raises(ConfigError):
        ExampleConfig(theta=(1.0, 0.0, -1.0)).require_valid()


def test_config_roundtrip(tmp_path):
    path = tmp_path / "cfg.json"
    cfg = ExampleConfig(seed=3, sigma=1.0, t_end=40.0)
    cfg.save(path)
    again = ExampleConfig.load(path)
    assert again == cfg
    with pytest.raises(ConfigError):
        ExampleConfig.from_dict({"nope": 1})
    # file is plain JSON with symbol-named keys
    raw = json.loads(path.read_text())
    assert raw["theta"] == [1.0, 1.0, -1.0] and "t_eps" in raw and "gamma" in raw


def test_example_model_matrices():
    model, exo = example_model(CFG)
    a, b, d = model.matrices()
    np.testing.assert_allclose(a, [[0, 2, 0], [-1, 0, 1], [0, 1, 0]])
    assert exo.n_delta == 2
    np.testing.assert_allclose(exo.matrix(), [[0, 1], [-10, 0]])


def test_true_psi_values():
    np.testing.assert_allclose(true_psi(CFG), [0, -1, 0, -1, 0, -2, 0, -10, 0])


def test_true_eta_values():
    np.testing.assert_allclose(true_eta(CFG), [-11, -1, -12, -10, -20])


def test_true_kappa_frozen_vector():
    kappa = true_kappa(CFG)
    assert kappa.shape == (27,)
    np.testing.assert_allclose(kappa[:9], true_psi(CFG))
    np.testing.assert_allclose(kappa[9:18], matkit.vec(true_o_gamma(CFG)))
    np.testing.assert_allclose(kappa[18:], matkit.vec(true_t_inv(CFG)))
    np.testing.assert_allclose(
        true_o_gamma(CFG), [[125, 65, 15], [0, -25, 65], [0, -650, -25]]
    )
    np.testing.assert_allclose(true_t_inv(CFG), [[2, 0, -1], [0, 1, 0], [1, 0, 0]])


def test_inverse_map_round_trip():
    """eta -> psi -> theta recovers the configured parameters exactly."""
    psi, events = f_psi_guarded(true_eta(CFG), 1e-8)
    assert events == []
    np.testing.assert_allclose(psi, true_psi(CFG), atol=1e-12)
    theta, events = f_theta_guarded(L_AB @ psi, 1e-8)
    assert events == []
    np.testing.assert_allclose(theta, CFG.theta, atol=1e-12)


def test_selector_matrices():
    psi = true_psi(CFG)
    np.testing.assert_allclose(L_GAMMA @ psi, psi[6:9])
    np.testing.assert_allclose(L_AB @ psi, [psi[1], psi[3], psi[5]])
    assert D_ETA.shape == (27, 5) and L_ETA.shape == (5, 27)
    # each regressor pick is a single unit entry
    assert np.all(D_ETA.sum(axis=0) == 1.0)


def test_control_law_cases():
    cfg = CFG
    assert control_law(cfg.t_eps - 1.0, 100.0, cfg) == 0.0
    expected = -75.0 * 2.5 * np.sin(10.0 * cfg.t_eps)
    assert control_law(cfg.t_eps, 100.0, cfg) == pytest.approx(expected)
    # excitation gone, pure regulation toward y = 100
    late = control_law(1e6, 40.0, cfg)
    assert late == pytest.approx(-75.0 * (100.0 - 40.0), rel=1e-6)


def test_control_law_injection_toggle():
    cfg = ExampleConfig(injection=False)
    assert control_law(cfg.t_eps, 100.0, cfg) == 0.0


def test_realization_builds_and_checks():
    real = build_realization(CFG)
    np.testing.assert_allclose(real.canon.psi_a, [0, -1, 0], atol=1e-12)
    np.testing.assert_allclose(real.kappa, true_kappa(CFG))
    assert real.control(0.0, 100.0) == 0.0


def test_structural_identifiability_report():
    rep = structural_identifiability_report(CFG)
    assert rep["ok"]
    assert rep["psi_ab_jacobian_det"] == pytest.approx(-1.0, rel=1e-4)


def test_reduction_consistency_under_coincidences():
    """Random extended regressors with the two structural coincidences
    enforced satisfy phibar_e . eta_e == (D^T phibar_e) . (L eta_e)."""
    from adobs.filters import true_eta_e

    psi = true_psi(CFG)
    eta_e = true_eta_e(psi[:3], psi[3:6], psi[6:9])
    rng = np.random.default_rng(0)
    for _ in range(100):
        phie = rng.normal(size=27)
        phie[7] = phie[1]
        phie[19] = phie[5]
        lhs = phie @ eta_e
        rhs = (phie @ D_ETA) @ (L_ETA @ eta_e)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_bundle_ground_truth_factorizations():
    """Each mapping pair factors its target on the configured truth:
    S_psi = G_psi psi, S_theta = G_theta theta, Q = P TI, with nonsingular
    regressor-side matrices."""
    from adobs.example_system import example_bundle

    bundle, _ = example_bundle(CFG)
    eta = true_eta(CFG)
    psi = true_psi(CFG)
    theta = np.asarray(CFG.theta, dtype=float)
    g_psi = bundle.g_psi.ref_fun(eta)
    np.testing.assert_allclose(bundle.s_psi.ref_fun(eta), g_psi @ psi, atol=1e-12)
    assert abs(matkit.determinant(g_psi)) > 0
    psi_ab = L_AB @ psi
    g_th = bundle.g_theta.ref_fun(psi_ab)
    np.testing.assert_allclose(bundle.s_theta.ref_fun(psi_ab), g_th @ theta, atol=1e-12)
    assert abs(matkit.determinant(g_th)) > 0
    p_mat = bundle.p_map.ref_fun(theta)
    np.testing.assert_allclose(
        bundle.q_map.ref_fun(theta), p_mat @ true_t_inv(CFG), atol=1e-12
    )
    assert abs(matkit.determinant(p_mat)) > 0
    np.testing.assert_allclose(
        bundle.o_gamma.ref_fun(psi[6:9]), true_o_gamma(CFG), atol=1e-12
    )

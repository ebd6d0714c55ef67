import numpy as np
import pytest

from adobs import matkit
from adobs.cascade import (
    run_cascade,
    stack_kappa,
    stage_ogamma,
    stage_psi,
    stage_theta,
    stage_ti,
    verify_scaling_identity,
)
from adobs.example_system import (
    ExampleConfig,
    example_bundle,
    true_eta,
    true_kappa,
    true_o_gamma,
    true_psi,
    true_t_inv,
)

CFG = ExampleConfig()
ETA = true_eta(CFG)
PSI = true_psi(CFG)


@pytest.fixture(scope="module")
def bundle():
    b, _ = example_bundle(CFG)
    return b


def kappa_ratio(stages):
    """Y_kappa / M_kappa evaluated block-wise (valid wherever all block
    regressors are nonzero and finite)."""
    m_psi, m_og, m_ti = stages["m_psi"], stages["m_og"], stages["m_ti"]
    ms = [np.asarray(m) for m in (m_psi, m_og, m_ti)]
    valid = np.all([np.isfinite(m) & (m != 0.0) for m in ms], axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = _stack_ratio(stages, m_psi, m_og, m_ti)
    return ratio, valid


def _stack_ratio(stages, m_psi, m_og, m_ti):
    return np.concatenate(
        [
            np.asarray(stages["y_psi"]) / np.asarray(m_psi)[..., None],
            np.asarray(stages["y_og"]).swapaxes(-1, -2).reshape(
                np.shape(np.asarray(m_og)) + (9,)
            )
            / np.asarray(m_og)[..., None],
            np.asarray(stages["y_ti"]).swapaxes(-1, -2).reshape(
                np.shape(np.asarray(m_ti)) + (9,)
            )
            / np.asarray(m_ti)[..., None],
        ],
        axis=-1,
    )


def test_scaling_identity_all_pairs(bundle):
    rng = np.random.default_rng(0)
    for mapping, partner in bundle.mapping_pairs():
        verify_scaling_identity(mapping, rng, samples=200)
        if partner is not None:
            verify_scaling_identity(partner, rng, samples=200)


def test_g_psi_diag_frozen_value(bundle):
    diag = bundle.g_psi.t_diag_fun(1.0, ETA)
    np.testing.assert_allclose(diag, [1, -10, 1, 1, 1, -100, 1, 10, 1], atol=1e-12)


def test_stage_psi_recovers_psi(bundle):
    y_psi, m_psi = stage_psi(ETA, 1.0, bundle)
    assert m_psi == pytest.approx(1.0e4)
    np.testing.assert_allclose(y_psi / m_psi, PSI, atol=1e-12)


def test_stage_psi_zero_data_flags_zero(bundle):
    y_psi, m_psi = stage_psi(np.zeros(5), 0.0, bundle)
    assert m_psi == 0.0


def test_stage_psi_homogeneity(bundle):
    y1, m1 = stage_psi(ETA, 1.0, bundle)
    for c in (0.5, 2.0, 10.0):
        yc, mc = stage_psi(c * ETA, c, bundle)
        assert mc == pytest.approx(c**14 * m1, rel=1e-12)
        np.testing.assert_allclose(yc, c**14 * y1, rtol=1e-12)


def test_stage_ogamma_frozen_value(bundle):
    # feed psi directly (unit regressor)
    y_og, m_og = stage_ogamma(PSI, 1.0, bundle)
    assert m_og == pytest.approx(1.0)
    np.testing.assert_allclose(
        y_og, [[125, 65, 15], [0, -25, 65], [0, -650, -25]], atol=1e-12
    )
    np.testing.assert_allclose(y_og, true_o_gamma(CFG), atol=1e-12)


def test_stage_ogamma_cross_checked_against_row_stack(bundle):
    # reference rows (Gamma - f)^T A_Gamma^k
    gam = PSI[6:9]
    a_gam = matkit.companion_bottom(gam)
    ref = matkit.observability(gam - np.asarray(CFG.f), a_gam, 3)
    y_og, m_og = stage_ogamma(PSI, 1.0, bundle)
    np.testing.assert_allclose(y_og / m_og, ref, atol=1e-12)


def test_stage_ogamma_zero_regressor(bundle):
    _, m_og = stage_ogamma(np.zeros(9), 0.0, bundle)
    assert m_og == 0.0


def test_pi_ogamma_structure(bundle):
    np.testing.assert_allclose(bundle.o_gamma.pi_fun(2.0), np.diag([2.0, 2.0, 4.0]))
    assert matkit.determinant(bundle.o_gamma.pi_fun(2.0)) == pytest.approx(16.0)


def test_stage_theta_recovers_theta(bundle):
    y_th, m_th = stage_theta(PSI, 1.0, bundle)
    assert m_th == pytest.approx(-1.0)
    np.testing.assert_allclose(y_th, [-1.0, -1.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(y_th / m_th, CFG.theta, atol=1e-12)


def test_stage_theta_zero_input(bundle):
    _, m_th = stage_theta(np.zeros(9), 1.0, bundle)
    assert m_th == 0.0


def test_stage_theta_homogeneity(bundle):
    y1, m1 = stage_theta(PSI, 1.0, bundle)
    for c in (0.5, 2.0, 10.0):
        yc, mc = stage_theta(c * PSI, c, bundle)
        assert mc == pytest.approx(c**9 * m1, rel=1e-12)
        np.testing.assert_allclose(yc, c**9 * y1, rtol=1e-12)


def test_stage_ti_recovers_transform(bundle):
    theta = np.asarray(CFG.theta, dtype=float)
    y_ti, m_ti = stage_ti(theta, 1.0, bundle)
    assert m_ti == pytest.approx(1.0)
    np.testing.assert_allclose(y_ti, [[2, 0, -1], [0, 1, 0], [1, 0, 0]], atol=1e-12)
    np.testing.assert_allclose(y_ti, true_t_inv(CFG), atol=1e-12)


def test_stage_ti_zero_estimate(bundle):
    y_ti, m_ti = stage_ti(np.zeros(3), 1.0, bundle)
    assert m_ti == 0.0
    np.testing.assert_allclose(
        bundle.q_map.t_fun(1.0, np.zeros(3)),
        [[0, 0, 1], [0, -1, 0], [1, 0, 0]],
        atol=1e-12,
    )


def test_stage_ti_zero_regressor(bundle):
    _, m_ti = stage_ti(np.asarray(CFG.theta, dtype=float), 0.0, bundle)
    assert m_ti == 0.0


def test_stack_kappa_unit_regressors(bundle):
    y_psi = PSI.copy()
    y_og = true_o_gamma(CFG)
    y_ti = true_t_inv(CFG)
    reg = stack_kappa(y_psi, 1.0, y_og, 1.0, y_ti, 1.0, n=3)
    assert reg.m == pytest.approx(1.0)
    np.testing.assert_allclose(
        reg.y,
        np.concatenate([y_psi, matkit.vec(y_og), matkit.vec(y_ti)]),
        atol=1e-12,
    )


def test_stack_kappa_zero_stage_kills_regressor(bundle):
    reg = stack_kappa(PSI, 0.0, true_o_gamma(CFG), 1.0, true_t_inv(CFG), 1.0, n=3)
    assert reg.m == 0.0
    assert reg.sign == 0.0
    assert reg.log_abs == -np.inf


def test_stack_kappa_sign_tracking():
    rng = np.random.default_rng(1)
    y = rng.normal(size=9)
    og = rng.normal(size=(3, 3))
    ti = rng.normal(size=(3, 3))
    reg = stack_kappa(y, -2.0, og, 3.0, ti, -0.5, n=3)
    # M = (-2)^9 * 3^9 * (-0.5)^9 = (+) (2*3*0.5)^9 = 3^9
    assert reg.sign == pytest.approx(1.0)
    assert reg.log_abs == pytest.approx(9 * np.log(2.0 * 3.0 * 0.5), rel=1e-12)
    assert reg.m == pytest.approx(1.0)  # |M| > 1 so normalized to sign


def test_full_cascade_ground_truth(bundle):
    reg, stages = run_cascade(ETA, 1.0, bundle)
    kappa = true_kappa(CFG)
    np.testing.assert_allclose(reg.y / reg.m, kappa, rtol=1e-10, atol=1e-10)
    ratio, valid = kappa_ratio(stages)
    assert valid
    np.testing.assert_allclose(ratio, kappa, rtol=1e-10, atol=1e-10)


def test_cascade_consistency_random_scalings(bundle):
    """Feeding (c*eta, c) for random c recovers kappa wherever the stacked
    regressor survives in double precision."""
    rng = np.random.default_rng(2)
    kappa = true_kappa(CFG)
    checked = 0
    for _ in range(100):
        c = rng.uniform(0.0, 2.0)
        if c == 0.0:
            continue
        reg, stages = run_cascade(c * ETA, c, bundle)
        ratio, valid = kappa_ratio(stages)
        if not valid:
            continue
        checked += 1
        scale = np.abs(kappa)
        np.testing.assert_allclose(ratio, kappa, rtol=1e-8, atol=1e-8 * scale.max())
    assert checked >= 80


def test_stage_m_two_way_sign_consistency(bundle):
    """Determinants of the assembled dense stage matrices agree with the
    diagonal-factor products the stages use."""
    rng = np.random.default_rng(3)
    for _ in range(20):
        y = rng.normal(size=5) * 5
        d = rng.uniform(0.1, 2.0)
        _, m_psi = stage_psi(y, d, bundle)
        dense = bundle.g_psi.t_fun(d, y)
        assert np.sign(m_psi) == np.sign(matkit.determinant(dense))
        y_psi, _ = stage_psi(y, d, bundle)
        _, m_th = stage_theta(y_psi, m_psi, bundle)
        dense_th = bundle.g_theta.t_fun(m_psi, y_psi @ bundle.l_ab.T)
        assert m_th == pytest.approx(matkit.determinant(dense_th), rel=1e-9)
        _, m_og = stage_ogamma(y_psi, m_psi, bundle)
        assert m_og == pytest.approx(
            matkit.determinant(bundle.o_gamma.pi_fun(m_psi)), rel=1e-9
        )


def test_batched_cascade_matches_scalar(bundle):
    rng = np.random.default_rng(4)
    ys = rng.normal(size=(7, 5)) * 3
    ds = rng.uniform(0.2, 1.5, size=7)
    reg_b, stages_b = run_cascade(ys, ds, bundle)
    for i in range(7):
        reg_i, stages_i = run_cascade(ys[i], ds[i], bundle)
        np.testing.assert_allclose(reg_b.y[i], reg_i.y, rtol=1e-12, atol=1e-300)
        assert reg_b.m[i] == pytest.approx(reg_i.m, rel=1e-12, abs=1e-300)
        assert stages_b["m_theta"][i] == pytest.approx(
            stages_i["m_theta"], rel=1e-12
        )

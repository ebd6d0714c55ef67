import numpy as np
import pytest

from adobs import matkit
from adobs.example_system import ExampleConfig
from adobs.filters import (
    FilterGains,
    FilterState,
    GainError,
    extended_regressor,
    gamma_spectrum_reference,
    step_filters,
    true_eta_e,
)
from adobs.plant import Exosystem

CFG = ExampleConfig()


@pytest.fixture(scope="module")
def gains():
    return FilterGains.from_gains(CFG.K, CFG.f)


def test_gain_matrices(gains):
    np.testing.assert_allclose(gains.A_K, [[-3, 1, 0], [-3, 0, 1], [-1, 0, 0]])
    np.testing.assert_allclose(
        gains.A_f, [[0, 1, 0], [0, 0, 1], [-125, -75, -15]]
    )
    np.testing.assert_allclose(gains.O_e, [[1, 0, 0], [-3, 1, 0], [6, -3, 1]])
    np.testing.assert_allclose(gains.O_e_inv @ gains.O_e, np.eye(3), atol=1e-12)


def test_gains_must_be_hurwitz():
    with pytest.raises(GainError):
        FilterGains.from_gains([-1.0, 0.0, 0.0], CFG.f)


def test_zero_inputs_keep_zero_state(gains):
    st = FilterState.zeros(3)
    for _ in range(50):
        st = step_filters(st, gains, u=0.0, y=0.0, dt=1e-2)
    assert np.all(st.as_vector() == 0.0)


def test_z_steady_state_matches_linear_oracle(gains):
    # constant y drives z toward -A_K^{-1} K
    st = FilterState.zeros(3)
    dt = 1e-3
    for _ in range(int(20.0 / dt)):
        st = step_filters(st, gains, u=0.0, y=1.0, dt=dt)
    target = -matkit.inverse_exact(gains.A_K) @ gains.K
    np.testing.assert_allclose(st.z, target, atol=1e-6)


def test_p_columns_steady_state(gains):
    st = FilterState.zeros(3)
    dt = 1e-3
    for _ in range(int(20.0 / dt)):
        st = step_filters(st, gains, u=1.0, y=0.0, dt=dt)
    target = -matkit.inverse_exact(gains.A_K)
    np.testing.assert_allclose(st.P, target, atol=1e-6)


def test_filter_linearity_superposition(gains):
    st1 = FilterState.zeros(3)
    st2 = FilterState.zeros(3)
    rng = np.random.default_rng(0)
    for _ in range(200):
        u, y = rng.normal(size=2)
        st1 = step_filters(st1, gains, u, y, dt=1e-2)
        st2 = step_filters(st2, gains, 2 * u, 2 * y, dt=1e-2)
    np.testing.assert_allclose(st2.as_vector(), 2 * st1.as_vector(), rtol=1e-9)


def test_extended_regressor_zero_state(gains):
    qbar, phie = extended_regressor(FilterState.zeros(3), gains, y=0.0)
    assert qbar == 0.0
    assert phie.shape == (27,)
    assert np.all(phie == 0.0)


def test_extended_regressor_output_only(gains):
    qbar, phie = extended_regressor(FilterState.zeros(3), gains, y=3.0)
    assert qbar == 3.0
    assert np.all(phie == 0.0)


def test_extended_regressor_block_layout(gains):
    st = FilterState.zeros(3)
    st.Omega = np.arange(9.0).reshape(3, 3)
    st.N = np.arange(9.0, 18.0).reshape(3, 3)
    st.P = -np.eye(3)
    st.H = np.eye(3)
    st.F = np.array([1.0, 2.0, 3.0])
    qbar, phie = extended_regressor(st, gains, y=0.5)
    f = gains.f
    np.testing.assert_allclose(phie[0:3], st.Omega[0] + st.N.T @ f)
    np.testing.assert_allclose(phie[3:6], st.P[0] + st.H.T @ f)
    np.testing.assert_allclose(phie[6:9], st.F)
    np.testing.assert_allclose(phie[9:18], matkit.vec(st.N))
    np.testing.assert_allclose(phie[18:27], matkit.vec(st.H))
    assert qbar == pytest.approx(f @ st.F + 0.5 - st.z[0])


def test_true_eta_e_zero():
    assert np.all(true_eta_e(np.zeros(3), np.zeros(3), np.zeros(3)) == 0.0)


def test_true_eta_e_example_values():
    eta_e = true_eta_e([0, -1, 0], [-1, 0, -2], [0, -10, 0])
    # -psi_a (x) gamma puts -(-1)(-10) = -10 at block position (2-1)*3+2
    block = eta_e[9:18]
    assert block[4] == pytest.approx(-10.0)
    assert np.count_nonzero(block) == 1
    # full stack: nonzeros at 1-based 2,4,6,8,14,20,26
    nonzero = np.nonzero(eta_e)[0] + 1
    np.testing.assert_array_equal(nonzero, [2, 4, 6, 8, 14, 20, 26])


def test_true_eta_e_no_disturbance():
    psi_a = np.array([1.0, 2.0, 3.0])
    psi_b = np.array([4.0, 5.0, 6.0])
    eta_e = true_eta_e(psi_a, psi_b, np.zeros(3))
    np.testing.assert_allclose(eta_e[:6], np.concatenate([psi_a, psi_b]))
    assert np.all(eta_e[6:] == 0.0)


def _exo(rho):
    return Exosystem(
        n_delta=2,
        rho=rho,
        A_delta=lambda r: np.array([[0.0, 1.0], [float(np.atleast_1d(r)[0]), 0.0]]),
        h_delta=[1.0, 0.0],
        x_delta0=[1.0, 0.0],
    )


def test_gamma_spectrum_example():
    np.testing.assert_allclose(gamma_spectrum_reference(_exo(-10.0), 3), [0, -10, 0])


def test_gamma_spectrum_other_frequency():
    # characteristic polynomial s (s^2 + 4)
    np.testing.assert_allclose(gamma_spectrum_reference(_exo(-4.0), 3), [0, -4, 0])


def test_gamma_spectrum_full_dimension_passthrough():
    g = np.array([0.5, -2.0, 1.5])
    exo = Exosystem(
        n_delta=3,
        rho=[0.0],
        A_delta=lambda r: matkit.companion_bottom(g),
        h_delta=[1.0, 0.0, 0.0],
        x_delta0=[1.0, 0.0, 0.0],
    )
    np.testing.assert_allclose(gamma_spectrum_reference(exo, 3), g, atol=1e-12)


def test_gamma_spectrum_dimension_error():
    with pytest.raises(matkit.DimensionError):
        gamma_spectrum_reference(_exo(-10.0), 1)


def test_gamma_companion_eigenvalues():
    gam = gamma_spectrum_reference(_exo(-10.0), 3)
    eig = np.linalg.eigvals(matkit.companion_bottom(gam))
    got = sorted(eig, key=lambda z: (round(z.imag, 6), round(z.real, 6)))
    np.testing.assert_allclose(
        got, [-1j * np.sqrt(10), 0, 1j * np.sqrt(10)], atol=1e-8
    )

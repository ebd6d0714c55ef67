import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from adobs import matkit

A_K_331 = np.array([[-3.0, 1.0, 0.0], [-3.0, 0.0, 1.0], [-1.0, 0.0, 0.0]])


def test_determinant_identity():
    assert matkit.determinant(np.eye(3)) == 1.0


def test_determinant_left_companion_331():
    # hand cofactor expansion of [[-3,1,0],[-3,0,1],[-1,0,0]] along last row
    assert matkit.determinant(matkit.companion_left([3, 3, 1])) == pytest.approx(-1.0)


def test_determinant_zero_matrix():
    assert matkit.determinant(np.zeros((3, 3))) == 0.0


def test_determinant_rejects_non_square():
    with pytest.raises(matkit.DimensionError):
        matkit.determinant(np.zeros((2, 3)))


def test_determinant_matches_lu_for_larger_sizes():
    rng = np.random.default_rng(7)
    for n in (4, 5, 6, 7, 8):
        m = rng.normal(size=(n, n))
        assert matkit.determinant(m) == pytest.approx(np.linalg.det(m), rel=1e-9)


def test_adjugate_identity():
    np.testing.assert_allclose(matkit.adjugate(np.eye(3)), np.eye(3))


def test_adjugate_diagonal():
    # cofactor oracle: adj(diag(2,3,4)) = diag(3*4, 2*4, 2*3)
    np.testing.assert_allclose(
        matkit.adjugate(np.diag([2.0, 3.0, 4.0])), np.diag([12.0, 8.0, 6.0])
    )


def test_adjugate_singular_rank2():
    m = np.outer([1.0, 2.0, 3.0], [1.0, 0.0, 1.0]) + np.outer(
        [0.0, 1.0, 1.0], [2.0, 1.0, 0.0]
    )
    assert np.linalg.matrix_rank(m) == 2
    adj = matkit.adjugate(m)
    assert np.any(adj != 0.0)
    np.testing.assert_allclose(adj @ m, np.zeros((3, 3)), atol=1e-9)


@settings(max_examples=150, deadline=None)
@given(
    arrays(
        np.float64,
        st.sampled_from([(2, 2), (3, 3), (4, 4), (5, 5)]),
        elements=st.floats(min_value=-10, max_value=10),
    )
)
def test_adjugate_times_matrix_is_det_identity(m):
    n = m.shape[0]
    d = matkit.determinant(m)
    lhs = matkit.adjugate(m) @ m
    np.testing.assert_allclose(lhs, d * np.eye(n), atol=1e-9 * (1.0 + abs(d)) * 100)


def test_adjugate_one_by_one():
    np.testing.assert_allclose(matkit.adjugate([[5.0]]), [[1.0]])


def test_kron_identity_vector():
    v = np.array([[1.0], [2.0], [3.0]])
    np.testing.assert_allclose(matkit.kron(np.eye(1), v), v)


def test_kron_definition_oracle():
    out = matkit.kron([1.0, 2.0], [0.0, -10.0, 0.0])
    np.testing.assert_allclose(out, [0.0, -10.0, 0.0, 0.0, -20.0, 0.0])


def test_kron_zero():
    assert np.all(matkit.kron([[1.0, 2.0]], np.zeros((2, 2))) == 0.0)


@settings(max_examples=50, deadline=None)
@given(
    st.floats(min_value=-5, max_value=5),
    arrays(np.float64, (2, 3), elements=st.floats(min_value=-3, max_value=3)),
    arrays(np.float64, (3, 2), elements=st.floats(min_value=-3, max_value=3)),
)
def test_kron_is_bilinear(alpha, a, b):
    np.testing.assert_allclose(
        matkit.kron(alpha * a, b), alpha * matkit.kron(a, b), atol=1e-9
    )


def test_vec_kron_pairing():
    a = np.array([1.0, 2.0, 3.0])
    b = np.array([4.0, 5.0])
    np.testing.assert_allclose(matkit.vec(np.outer(a, b)), matkit.kron(b, a))


def test_unvec_roundtrip():
    m = np.arange(9.0).reshape(3, 3)
    np.testing.assert_allclose(matkit.unvec(matkit.vec(m), 3), m)


def test_unvec_batch_matches_unvec():
    rng = np.random.default_rng(3)
    v = rng.normal(size=(4, 9))
    batch = matkit.unvec_batch(v, 3)
    for i in range(4):
        np.testing.assert_allclose(batch[i], matkit.unvec(v[i], 3))


def test_companion_left_structure():
    np.testing.assert_allclose(matkit.companion_left([3, 3, 1]), A_K_331)


def test_companion_bottom_structure():
    np.testing.assert_allclose(
        matkit.companion_bottom([-125, -75, -15]),
        [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [-125.0, -75.0, -15.0]],
    )


def test_companion_bottom_oscillator_row():
    np.testing.assert_allclose(
        matkit.companion_bottom([0, -10, 0]),
        [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, -10.0, 0.0]],
    )


def test_companion_rejects_empty():
    with pytest.raises(matkit.DimensionError):
        matkit.companion_left([])
    with pytest.raises(matkit.DimensionError):
        matkit.companion_bottom(np.array([]))


@pytest.mark.parametrize("n", [2, 3, 4])
def test_companion_bottom_determinant_sign(n):
    rng = np.random.default_rng(n)
    g = rng.normal(size=n)
    m = matkit.companion_bottom(g)
    # brute-force cofactor oracle via permutation expansion
    import itertools

    brute = 0.0
    for perm in itertools.permutations(range(n)):
        sign = 1.0
        seen = list(perm)
        for i in range(n):
            for j in range(i + 1, n):
                if seen[i] > seen[j]:
                    sign = -sign
        term = sign
        for i, p in enumerate(perm):
            term *= m[i, p]
        brute += term
    assert matkit.determinant(m) == pytest.approx(brute, abs=1e-12)
    assert matkit.determinant(m) == pytest.approx((-1.0) ** n * (-g[0]), abs=1e-12)


def test_observability_left_companion():
    got = matkit.observability([1, 0, 0], A_K_331, 3)
    np.testing.assert_allclose(got, [[1, 0, 0], [-3, 1, 0], [6, -3, 1]])


def test_observability_identity_rows():
    got = matkit.observability([1, 0, 0], np.eye(3), 3)
    np.testing.assert_allclose(got, np.tile([1.0, 0.0, 0.0], (3, 1)))


def test_observability_row_recursion():
    rng = np.random.default_rng(11)
    a = rng.normal(size=(4, 4))
    c = rng.normal(size=4)
    obs = matkit.observability(c, a, 4)
    for k in range(1, 4):
        np.testing.assert_allclose(obs[k], obs[k - 1] @ a, atol=1e-12)


def test_observability_dimension_mismatch():
    with pytest.raises(matkit.DimensionError):
        matkit.observability([1, 0], np.eye(3), 3)


def test_inverse_exact():
    m = np.array([[2.0, 0.0, -1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]])
    np.testing.assert_allclose(matkit.inverse_exact(m) @ m, np.eye(3), atol=1e-12)


def test_inverse_exact_singular_raises():
    with pytest.raises(matkit.SingularMatrixError):
        matkit.inverse_exact(np.zeros((2, 2)))


def test_batched_determinant_and_adjugate():
    rng = np.random.default_rng(5)
    batch = rng.normal(size=(20, 5, 5))
    dets = matkit.determinant(batch)
    adjs = matkit.adjugate(batch)
    for i in range(20):
        assert dets[i] == pytest.approx(np.linalg.det(batch[i]), rel=1e-9)
        np.testing.assert_allclose(
            adjs[i] @ batch[i], dets[i] * np.eye(5), atol=1e-9 * (1 + abs(dets[i]))
        )

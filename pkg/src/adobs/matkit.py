"""Dense small-matrix primitives shared by the whole pipeline.

Determinants and adjugates of matrices up to 6x6 are computed by exact
cofactor expansion so that signs survive near-singular inputs (the mixing
and cascade stages depend on that); larger matrices fall back to LU-based
routines.  All routines accept batched input with leading axes where noted.
"""

from __future__ import annotations

import numpy as np

COFACTOR_MAX = 6


class DimensionError(ValueError):
    """An operand has an incompatible or non-square shape."""


class SingularMatrixError(ValueError):
    """Exact inversion was requested for a singular matrix."""


def _as_square(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    return m


def _det_cofactor(m: np.ndarray) -> np.ndarray:
    n = m.shape[-1]
    if n == 1:
        return m[..., 0, 0]
    if n == 2:
        return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    if n == 3:
        return (
            m[..., 0, 0] * (m[..., 1, 1] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 1])
            - m[..., 0, 1] * (m[..., 1, 0] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 0])
            + m[..., 0, 2] * (m[..., 1, 0] * m[..., 2, 1] - m[..., 1, 1] * m[..., 2, 0])
        )
    # Laplace expansion along the first row.
    rows = np.arange(1, n)
    acc = np.zeros(m.shape[:-2])
    for j in range(n):
        cols = np.array([c for c in range(n) if c != j])
        minor = m[..., rows[:, None], cols[None, :]]
        term = m[..., 0, j] * _det_cofactor(minor)
        acc = acc + term if j % 2 == 0 else acc - term
    return acc


def _adj_cofactor(m: np.ndarray) -> np.ndarray:
    n = m.shape[-1]
    out = np.empty_like(m)
    idx = np.arange(n)
    for i in range(n):
        ri = idx[idx != i]
        for j in range(n):
            cj = idx[idx != j]
            minor = m[..., ri[:, None], cj[None, :]]
            out[..., j, i] = (-1.0) ** (i + j) * _det_cofactor(minor)
    return out


def determinant(m) -> float | np.ndarray:
    """det(m), batched over leading axes.

    Exact cofactor expansion for n <= 6, LU with partial pivoting above.
    """
    m = _as_square(m)
    n = m.shape[-1]
    d = _det_cofactor(m) if n <= COFACTOR_MAX else np.linalg.det(m)
    d = np.asarray(d)
    return float(d) if d.ndim == 0 else d


def adjugate(m) -> np.ndarray:
    """Classical adjugate: adj(m) @ m == det(m) * I, singular m included."""
    m = _as_square(m)
    n = m.shape[-1]
    if n == 1:
        return np.ones_like(m)
    if n <= COFACTOR_MAX:
        return _adj_cofactor(m)
    # Large well-conditioned matrices: adj = det * inv; cofactor fallback
    # keeps the singular case correct at O(n^2) determinant calls.
    d = np.asarray(determinant(m))
    try:
        inv = np.linalg.inv(m)
    except np.linalg.LinAlgError:
        return _adj_cofactor(m)
    if not np.all(np.isfinite(inv)):
        return _adj_cofactor(m)
    return d[..., None, None] * inv


def inverse_exact(m) -> np.ndarray:
    """Inverse via adjugate/determinant (single matrix, not batched)."""
    m = _as_square(m)
    if m.ndim != 2:
        raise DimensionError("inverse_exact expects a single matrix")
    d = determinant(m)
    if d == 0.0 or not np.isfinite(d):
        raise SingularMatrixError(f"matrix is singular (det={d!r})")
    return adjugate(m) / d


def kron(a, b) -> np.ndarray:
    """Kronecker product (thin wrapper; kept as the single choke point so the
    vec/kron pairing convention lives in one module)."""
    return np.kron(np.asarray(a, dtype=float), np.asarray(b, dtype=float))


def vec(m) -> np.ndarray:
    """Column-major stacking.  Pairs with kron via vec(a bᵀ) == kron(b, a)."""
    m = np.asarray(m, dtype=float)
    return m.flatten(order="F")


def unvec(v, n: int) -> np.ndarray:
    """Inverse of :func:`vec` for an n-by-n matrix."""
    v = np.asarray(v, dtype=float)
    if v.size != n * n:
        raise DimensionError(f"cannot reshape {v.size} entries into {n}x{n}")
    return v.reshape((n, n), order="F")


def unvec_batch(v: np.ndarray, n: int) -> np.ndarray:
    """Batched unvec: (..., n*n) -> (..., n, n), column-major per sample."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != n * n:
        raise DimensionError(f"cannot reshape {v.shape[-1]} entries into {n}x{n}")
    return v.reshape(v.shape[:-1] + (n, n)).swapaxes(-1, -2)


def companion_left(k) -> np.ndarray:
    """Companion matrix with -k as first column and a shifted identity right
    block: [[-k | I_{n-1}; 0]]."""
    k = np.asarray(k, dtype=float).ravel()
    n = k.size
    if n < 1:
        raise DimensionError("companion_left needs a non-empty gain vector")
    m = np.zeros((n, n))
    m[:, 0] = -k
    m[: n - 1, 1:] = np.eye(n - 1)
    return m


def companion_bottom(g) -> np.ndarray:
    """Companion matrix with g as bottom row: [[0 I_{n-1}]; gᵀ]."""
    g = np.asarray(g, dtype=float).ravel()
    n = g.size
    if n < 1:
        raise DimensionError("companion_bottom needs a non-empty coefficient vector")
    m = np.zeros((n, n))
    m[: n - 1, 1:] = np.eye(n - 1)
    m[n - 1, :] = g
    return m


def observability(c_row, a, n: int) -> np.ndarray:
    """Stack the rows c_row @ a^k for k = 0..n-1."""
    c_row = np.asarray(c_row, dtype=float).ravel()
    a = _as_square(a)
    if a.ndim != 2 or a.shape[0] != n or c_row.size != n:
        raise DimensionError(
            f"observability needs a length-{n} row and an {n}x{n} matrix, "
            f"got {c_row.size} and {a.shape}"
        )
    rows = np.empty((n, n))
    r = c_row
    for k in range(n):
        rows[k] = r
        r = r @ a
    return rows

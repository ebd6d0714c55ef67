"""Measurable filter bank of the observer canonical form.

Six linear filters driven only by the plant input/output (u, y) generate
the scalar signal ``qbar`` and the extended regressor ``phibar_e`` whose
inner product with the stacked unknown parameters reproduces qbar once
initial-condition transients have died out:

    z'     = A_K z + K y
    P'     = A_K P + I u
    Omega' = A_K Omega + I y
    F'     = A_f F + e_n (y - C0^T z)
    H'     = A_f H + e_n C0^T P
    N'     = A_f N + e_n C0^T Omega

    qbar      = f^T F + y - C0^T z
    phibar_e  = [Omega^T C0 + N^T f;  P^T C0 + H^T f;  F;  vec(N);  vec(H)]

All vec() operations are column-major; this pairing is what makes
``qbar == phibar_e . eta_e`` hold (see :func:`true_eta_e`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import matkit
from .plant import rk4_step


class GainError(ValueError):
    """Filter gains fail the stability/invertibility requirements."""


@dataclass
class FilterGains:
    """Companion-form filter matrices derived from the gain vectors K and f."""

    K: np.ndarray
    f: np.ndarray
    A_K: np.ndarray
    A_f: np.ndarray
    O_e: np.ndarray
    O_e_inv: np.ndarray

    @property
    def n(self) -> int:
        return self.K.size

    @classmethod
    def from_gains(cls, K, f, check_hurwitz: bool = True) -> "FilterGains":
        K = np.asarray(K, dtype=float).ravel()
        f = np.asarray(f, dtype=float).ravel()
        if K.size != f.size or K.size < 1:
            raise GainError("K and f must be non-empty vectors of equal length")
        a_k = matkit.companion_left(K)
        a_f = matkit.companion_bottom(f)
        if check_hurwitz:
            for name, m in (("A_K", a_k), ("A_f", a_f)):
                worst = float(np.linalg.eigvals(m).real.max())
                if worst >= -1e-9:
                    raise GainError(f"{name} is not Hurwitz (max Re eig = {worst:.3e})")
        n = K.size
        c0 = np.zeros(n)
        c0[0] = 1.0
        o_e = matkit.observability(c0, a_k, n)
        return cls(K=K, f=f, A_K=a_k, A_f=a_f, O_e=o_e, O_e_inv=matkit.inverse_exact(o_e))


@dataclass
class FilterState:
    """Value object holding the six filter states; all zero at start time."""

    z: np.ndarray
    P: np.ndarray
    Omega: np.ndarray
    F: np.ndarray
    H: np.ndarray
    N: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "FilterState":
        return cls(
            z=np.zeros(n),
            P=np.zeros((n, n)),
            Omega=np.zeros((n, n)),
            F=np.zeros(n),
            H=np.zeros((n, n)),
            N=np.zeros((n, n)),
        )

    def as_vector(self) -> np.ndarray:
        """Flat layout [z, vec(P), vec(Omega), F, vec(H), vec(N)] (column-major
        vecs); the combined scenario integrator uses the same layout."""
        return np.concatenate(
            [
                self.z,
                matkit.vec(self.P),
                matkit.vec(self.Omega),
                self.F,
                matkit.vec(self.H),
                matkit.vec(self.N),
            ]
        )

    @classmethod
    def from_vector(cls, v: np.ndarray, n: int) -> "FilterState":
        v = np.asarray(v, dtype=float)
        nn = n * n
        if v.size != 2 * n + 4 * nn:
            raise matkit.DimensionError(
                f"filter vector must have {2 * n + 4 * nn} entries, got {v.size}"
            )
        o = 0

        def take(k):
            nonlocal o
            out = v[o : o + k]
            o += k
            return out

        return cls(
            z=take(n).copy(),
            P=matkit.unvec(take(nn), n),
            Omega=matkit.unvec(take(nn), n),
            F=take(n).copy(),
            H=matkit.unvec(take(nn), n),
            N=matkit.unvec(take(nn), n),
        )


def filter_derivs(state: FilterState, gains: FilterGains, u: float, y: float) -> FilterState:
    """Time derivatives of all six filters for frozen (u, y)."""
    a_k, a_f, K = gains.A_K, gains.A_f, gains.K
    n = gains.n
    e_n = np.zeros(n)
    e_n[-1] = 1.0
    dz = a_k @ state.z + K * y
    dP = a_k @ state.P + np.eye(n) * u
    dOmega = a_k @ state.Omega + np.eye(n) * y
    dF = a_f @ state.F + e_n * (y - state.z[0])
    dH = a_f @ state.H + np.outer(e_n, state.P[0])
    dN = a_f @ state.N + np.outer(e_n, state.Omega[0])
    return FilterState(z=dz, P=dP, Omega=dOmega, F=dF, H=dH, N=dN)


def step_filters(
    state: FilterState, gains: FilterGains, u: float, y: float, dt: float
) -> FilterState:
    """One RK4 step of the filter bank with zero-order-hold (u, y)."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    n = gains.n

    def deriv(v):
        return filter_derivs(FilterState.from_vector(v, n), gains, u, y).as_vector()

    v = rk4_step(deriv, state.as_vector(), dt)
    if not np.all(np.isfinite(v)):
        raise RuntimeError("filter state diverged")
    return FilterState.from_vector(v, n)


def extended_regressor(state: FilterState, gains: FilterGains, y: float):
    """Assemble (qbar, phibar_e) from the current filter states and output.

    phibar_e has 3n + 2n^2 entries in the fixed block order
    [Omega^T C0 + N^T f, P^T C0 + H^T f, F, vec(N), vec(H)].
    """
    f = gains.f
    block_a = state.Omega[0] + state.N.T @ f
    block_b = state.P[0] + state.H.T @ f
    phibar_e = np.concatenate(
        [block_a, block_b, state.F, matkit.vec(state.N), matkit.vec(state.H)]
    )
    qbar = float(f @ state.F + y - state.z[0])
    return qbar, phibar_e


def true_eta_e(psi_a, psi_b, gamma) -> np.ndarray:
    """Stacked parameter vector paired with the extended regressor
    (test oracle): [psi_a, psi_b, gamma, -psi_a x gamma, -psi_b x gamma]."""
    psi_a = np.asarray(psi_a, dtype=float).ravel()
    psi_b = np.asarray(psi_b, dtype=float).ravel()
    gamma = np.asarray(gamma, dtype=float).ravel()
    if not (psi_a.size == psi_b.size == gamma.size):
        raise matkit.DimensionError("psi_a, psi_b and gamma must share a length")
    return np.concatenate(
        [psi_a, psi_b, gamma, -matkit.kron(psi_a, gamma), -matkit.kron(psi_b, gamma)]
    )


def _char_poly(a: np.ndarray) -> np.ndarray:
    """Monic characteristic polynomial coefficients [1, c_{m-1}, ..., c_0]
    via the Faddeev-LeVerrier recursion (division-free up to the k divide)."""
    m = a.shape[0]
    coeffs = [1.0]
    mk = np.zeros_like(a)
    for k in range(1, m + 1):
        mk = a @ mk + coeffs[-1] * np.eye(m)
        coeffs.append(float(-np.trace(a @ mk) / k))
    return np.array(coeffs)


def gamma_spectrum_reference(exo, n: int) -> np.ndarray:
    """Bottom-row vector whose companion matrix carries the exosystem's
    eigenvalues padded with n - n_delta zeros (test oracle).

    The exosystem characteristic polynomial is multiplied by s^(n - n_delta)
    and the coefficients are negated into companion bottom-row form.
    """
    a_d = exo.matrix()
    m = a_d.shape[0]
    if n < m:
        raise matkit.DimensionError(f"need n >= n_delta, got n={n} < {m}")
    coeffs = _char_poly(a_d)  # [1, c_{m-1}, ..., c_0]
    # multiply by s^(n-m): coefficient of s^j in the padded monic polynomial
    padded = np.concatenate([coeffs, np.zeros(n - m)])  # degree n, index i -> s^(n-i)
    gamma = np.empty(n)
    for i in range(1, n + 1):  # bottom-row entry i multiplies s^(i-1)
        gamma[i - 1] = -padded[n - (i - 1)]
    return gamma

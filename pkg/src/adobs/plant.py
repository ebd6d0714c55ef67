"""Ground-truth simulation of the uncertain plant and its disturbance
generator, plus the observer-canonical-form bookkeeping used by tests and
by the certainty-equivalence baseline.

The plant is ``x' = A(theta) x + B(theta) u + D(theta) delta``,
``y = C^T x`` with the scalar disturbance ``delta`` produced by an
autonomous marginally stable exosystem ``x_d' = A_d(rho) x_d``,
``delta = h_d^T x_d``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import matkit


class ModelValidationError(ValueError):
    """A plant/exosystem invariant does not hold at the configured parameters."""


class NotObservableError(ModelValidationError):
    """The output map loses rank at the configured parameters."""


class SimulationDiverged(RuntimeError):
    """A state left the finite range during integration."""


@dataclass
class PlantModel:
    """Uncertain LTI plant supplied as parameter-to-matrix callables.

    A model plug-in provides (n, n_theta, A, B, D, C); the configured true
    parameter vector and initial state ride along for simulation.
    """

    n: int
    n_theta: int
    theta: np.ndarray
    A: Callable[[np.ndarray], np.ndarray]
    B: Callable[[np.ndarray], np.ndarray]
    D: Callable[[np.ndarray], np.ndarray]
    C: np.ndarray
    x0: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float).ravel()
        self.C = np.asarray(self.C, dtype=float).ravel()
        self.x0 = np.asarray(self.x0, dtype=float).ravel()

    def matrices(self):
        return (
            np.asarray(self.A(self.theta), dtype=float),
            np.asarray(self.B(self.theta), dtype=float).ravel(),
            np.asarray(self.D(self.theta), dtype=float).ravel(),
        )

    def validate(self, tol: float = 1e-9) -> None:
        """Check observability and the full-relative-degree disturbance path."""
        a, _, d = self.matrices()
        obs = matkit.observability(self.C, a, self.n)
        if abs(matkit.determinant(obs)) <= tol:
            raise NotObservableError(f"not observable at theta={self.theta.tolist()}")
        scale = 1.0 + float(np.abs(d).max()) * max(float(np.abs(a).max()), 1.0) ** self.n
        row = self.C.copy()
        for k in range(self.n - 1):
            if abs(row @ d) > tol * scale:
                raise ModelValidationError(
                    f"disturbance relative degree breaks: C^T A^{k} D != 0"
                )
            row = row @ a
        if abs(row @ d) <= tol * scale:
            raise ModelValidationError("C^T A^(n-1) D vanishes; relative degree < n")


@dataclass
class Exosystem:
    """Autonomous disturbance generator with purely imaginary spectrum."""

    n_delta: int
    rho: np.ndarray
    A_delta: Callable[[np.ndarray], np.ndarray]
    h_delta: np.ndarray
    x_delta0: np.ndarray

    def __post_init__(self):
        self.rho = np.atleast_1d(np.asarray(self.rho, dtype=float))
        self.h_delta = np.asarray(self.h_delta, dtype=float).ravel()
        self.x_delta0 = np.asarray(self.x_delta0, dtype=float).ravel()

    def matrix(self) -> np.ndarray:
        return np.asarray(self.A_delta(self.rho), dtype=float)

    def validate(self, tol: float = 1e-6) -> None:
        eig = np.linalg.eigvals(self.matrix())
        worst = float(np.abs(eig.real).max())
        if worst >= tol:
            raise ModelValidationError(
                f"exosystem eigenvalues must sit on the imaginary axis "
                f"(max |Re| = {worst:.3e})"
            )


@dataclass
class CanonicalForm:
    """Similarity transform data for the observer canonical form.

    ``xi = to_canonical @ x`` satisfies
    ``xi' = A0 xi + psi_a y + psi_b u + e_n psi_d delta``, ``y = C0^T xi``.
    """

    n: int
    A0: np.ndarray
    C0: np.ndarray
    psi_a: np.ndarray
    psi_b: np.ndarray
    psi_d: float
    to_canonical: np.ndarray
    from_canonical: np.ndarray
    obs_last_col: np.ndarray = field(repr=False)


def build_canonical(model: PlantModel) -> CanonicalForm:
    """Construct the canonical transform from the observability matrix.

    The inverse transform is assembled column-wise as
    [A^{n-1} o_n, ..., A o_n, o_n] where o_n is the last column of the
    inverse observability matrix; small-size inverses go through the exact
    adjugate/determinant route.
    """
    n = model.n
    a, b, d = model.matrices()
    obs = matkit.observability(model.C, a, n)
    det = matkit.determinant(obs)
    if det == 0.0 or not np.isfinite(det):
        raise NotObservableError(f"not observable at theta={model.theta.tolist()}")
    o_n = matkit.inverse_exact(obs)[:, -1]

    cols = []
    v = o_n
    for _ in range(n):
        cols.append(v)
        v = a @ v
    from_canonical = np.column_stack(cols[::-1])
    to_canonical = matkit.inverse_exact(from_canonical)

    a0 = np.eye(n, k=1)
    c0 = np.zeros(n)
    c0[0] = 1.0
    psi_a = to_canonical @ a @ from_canonical[:, 0]
    psi_b = to_canonical @ b
    td = to_canonical @ d
    if n > 1 and np.abs(td[:-1]).max() > 1e-8 * (1.0 + abs(td[-1])):
        raise ModelValidationError(
            "transformed disturbance direction is not aligned with e_n; "
            "relative degree assumption violated"
        )
    return CanonicalForm(
        n=n,
        A0=a0,
        C0=c0,
        psi_a=psi_a,
        psi_b=psi_b,
        psi_d=float(td[-1]),
        to_canonical=to_canonical,
        from_canonical=from_canonical,
        obs_last_col=o_n,
    )


def virtual_state(canon: CanonicalForm, x) -> np.ndarray:
    """Map a physical state (or a batch with trailing state axis) to the
    canonical state; ground-truth oracle for tests."""
    x = np.asarray(x, dtype=float)
    return x @ canon.to_canonical.T


def rk4_step(f: Callable[[np.ndarray], np.ndarray], s: np.ndarray, dt: float) -> np.ndarray:
    """One classic fixed-step RK4 update of an autonomous derivative ``f``."""
    k1 = f(s)
    k2 = f(s + 0.5 * dt * k1)
    k3 = f(s + 0.5 * dt * k2)
    k4 = f(s + dt * k3)
    return s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_plant(
    model: PlantModel,
    exo: Exosystem,
    x: np.ndarray,
    x_delta: np.ndarray,
    u: float,
    dt: float,
    t: float | None = None,
):
    """Advance plant and exosystem one RK4 step with u held constant.

    The disturbance feeds the plant continuously inside the step because the
    exosystem state is part of the joint integration vector.

    Returns (x, x_delta, y, delta) evaluated at the end of the step.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    a, b, d = model.matrices()
    a_d = exo.matrix()
    h_d = exo.h_delta
    n = model.n

    s = np.concatenate([np.asarray(x, dtype=float), np.asarray(x_delta, dtype=float)])

    def deriv(sv):
        xs, xds = sv[:n], sv[n:]
        return np.concatenate([a @ xs + b * u + d * (h_d @ xds), a_d @ xds])

    s = rk4_step(deriv, s, dt)
    if not np.all(np.isfinite(s)):
        when = "" if t is None else f" at t={t + dt:.6g}"
        raise SimulationDiverged(f"plant state diverged{when}")
    x_new, xd_new = s[:n], s[n:]
    return x_new, xd_new, float(model.C @ x_new), float(h_d @ xd_new)

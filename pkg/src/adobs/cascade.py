"""Division-free regression cascade.

Nonlinear functions of the unknowns are handled through scale-consistent
mapping pairs: a mapping F admits a multiplier Pi(w) and an evaluation
T_F such that Pi(w) F(x) == T_F(w, w*x) for every scalar w, so measurable
(w, w*x) data yields Pi(w) F(x) without ever forming x = (w*x)/w.

Chaining four such pairs converts the mixed scalar regression
(Y, Delta) with Y = Delta * eta into regressions for

    psi   (canonical-form parameters),        Y_psi  = M_psi  * psi
    OG    (disturbance observability block),  Y_og   = M_og   * OG
    theta (physical parameters, auxiliary),   Y_th   = M_th   * theta
    TI    (inverse similarity transform),     Y_ti   = M_ti   * TI

and finally one scalar-regressor equation for the stacked unknown
kappa = [psi, vec(OG), vec(TI)].  The stacked regressor is the product
M_psi^(3n) * M_og^(n^2) * M_ti^(n^2), which overflows doubles long before
the signals misbehave, so the stack is carried in sign/log-magnitude form
and exposed normalized by max(1, |M_kappa|); the normalization cancels in
the ratio and only rescales the adaptation speed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import matkit


@dataclass
class HeteroMapping:
    """One scale-consistent mapping.

    t_fun(w, yvec) evaluates the scaled image T_F; pi_fun(w) builds the
    multiplier; ref_fun(x) is the plain mapping F used only to verify the
    scaling identity. degree is the exact power in det Pi(w) == w^degree.
    diag funs, when provided, return the diagonals of t_fun/pi_fun and let
    the stages use exact complementary-product adjugates/determinants.
    """

    name: str
    t_fun: Callable[[np.ndarray, np.ndarray], np.ndarray]
    pi_fun: Callable[[np.ndarray], np.ndarray]
    ref_fun: Callable[[np.ndarray], np.ndarray]
    degree: int
    arg_dim: int
    t_diag_fun: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    pi_diag_fun: Callable[[np.ndarray], np.ndarray] | None = None


def verify_scaling_identity(
    mapping: HeteroMapping,
    rng: np.random.Generator,
    samples: int = 1000,
    omega_range: tuple[float, float] = (0.5, 2.0),
    x_scale: float = 2.0,
    rtol: float = 1e-9,
) -> float:
    """Check Pi(w) F(x) == T_F(w, w x) on random draws; returns the worst
    relative deviation.  Also checks det Pi(w) >= w^degree for w > 0."""
    worst = 0.0
    lo, hi = omega_range
    for _ in range(samples):
        w = float(rng.uniform(lo, hi))
        x = rng.uniform(-x_scale, x_scale, size=mapping.arg_dim)
        lhs = np.atleast_2d(mapping.pi_fun(w) @ np.atleast_1d(mapping.ref_fun(x)))
        rhs = np.atleast_2d(mapping.t_fun(w, w * x))
        scale = max(float(np.abs(lhs).max()), float(np.abs(rhs).max()), 1e-30)
        dev = float(np.abs(lhs - rhs).max()) / scale
        worst = max(worst, dev)
        if dev > rtol:
            raise AssertionError(
                f"scaling identity broken for {mapping.name}: deviation {dev:.3e} "
                f"at w={w}, x={x}"
            )
        det_pi = matkit.determinant(mapping.pi_fun(w))
        if det_pi < w**mapping.degree * (1.0 - 1e-12):
            raise AssertionError(
                f"det Pi < w^degree for {mapping.name}: {det_pi} < {w**mapping.degree}"
            )
    return worst


@dataclass
class CascadeBundle:
    """Model-specific mapping pairs plus the selector matrices the stages use.

    Invariants checked by tests: s_psi.ref(eta) == g_psi.ref(eta) @ psi,
    s_theta.ref(psi_ab) == g_theta.ref(psi_ab) @ theta and
    q_map.ref(theta) == p_map.ref(theta) @ TI(theta) at the true parameters,
    with nonsingular g/p there.
    """

    n: int
    g_psi: HeteroMapping
    s_psi: HeteroMapping
    g_theta: HeteroMapping
    s_theta: HeteroMapping
    p_map: HeteroMapping
    q_map: HeteroMapping
    o_gamma: HeteroMapping
    l_gamma: np.ndarray
    l_ab: np.ndarray

    def __post_init__(self):
        self.l_gamma = np.asarray(self.l_gamma, dtype=float)
        self.l_ab = np.asarray(self.l_ab, dtype=float)

    def mapping_pairs(self):
        """The four scale-consistent pairs in cascade order (the disturbance
        block shares its multiplier with no partner)."""
        return [
            (self.g_psi, self.s_psi),
            (self.g_theta, self.s_theta),
            (self.p_map, self.q_map),
            (self.o_gamma, None),
        ]


def _diag_adj_det(diag: np.ndarray):
    """Exact adjugate diagonal and determinant of a diagonal matrix via
    complementary prefix/suffix products (no division, signs exact)."""
    diag = np.asarray(diag, dtype=float)
    m = diag.shape[-1]
    pre = np.ones_like(diag)
    suf = np.ones_like(diag)
    for i in range(1, m):
        pre[..., i] = pre[..., i - 1] * diag[..., i - 1]
        suf[..., m - 1 - i] = suf[..., m - i] * diag[..., m - i]
    det = pre[..., -1] * diag[..., -1]
    return pre * suf, det


def _adj_det(mapping: HeteroMapping, omega, yvec):
    """(adjugate, determinant) of mapping.t_fun(omega, yvec), taking the
    exact diagonal route when the mapping declares one."""
    if mapping.t_diag_fun is not None:
        adj_diag, det = _diag_adj_det(mapping.t_diag_fun(omega, yvec))
        return adj_diag, det, True
    m = mapping.t_fun(omega, yvec)
    return matkit.adjugate(m), matkit.determinant(m), False


def stage_psi(y: np.ndarray, delta, bundle: CascadeBundle):
    """Regression for psi: Y_psi = adj(T_G) T_S, M_psi = det(T_G), with both
    matrices evaluated from the measurable pair (Delta, Y)."""
    y = np.asarray(y, dtype=float)
    s_val = bundle.s_psi.t_fun(delta, y)
    adj, det, diag = _adj_det(bundle.g_psi, delta, y)
    y_psi = adj * s_val if diag else np.einsum("...ij,...j->...i", adj, s_val)
    return y_psi, det


def stage_ogamma(y_psi: np.ndarray, m_psi, bundle: CascadeBundle):
    """Regression for the disturbance observability block, built from the
    selector image Y_gamma = l_gamma Y_psi."""
    y_gamma = np.asarray(y_psi, dtype=float) @ bundle.l_gamma.T
    t_val = bundle.o_gamma.t_fun(m_psi, y_gamma)
    if bundle.o_gamma.pi_diag_fun is not None:
        adj_diag, det = _diag_adj_det(bundle.o_gamma.pi_diag_fun(m_psi))
        y_og = adj_diag[..., :, None] * t_val
    else:
        pi = bundle.o_gamma.pi_fun(m_psi)
        y_og = np.einsum("...ij,...jk->...ik", matkit.adjugate(pi), t_val)
        det = matkit.determinant(pi)
    return y_og, det


def stage_theta(y_psi: np.ndarray, m_psi, bundle: CascadeBundle):
    """Auxiliary regression for the physical parameters from
    Y_ab = l_ab Y_psi."""
    y_ab = np.asarray(y_psi, dtype=float) @ bundle.l_ab.T
    s_val = bundle.s_theta.t_fun(m_psi, y_ab)
    adj, det, diag = _adj_det(bundle.g_theta, m_psi, y_ab)
    y_theta = adj * s_val if diag else np.einsum("...ij,...j->...i", adj, s_val)
    return y_theta, det


def stage_ti(y_theta: np.ndarray, m_theta, bundle: CascadeBundle):
    """Regression for the inverse similarity transform."""
    t_q = bundle.q_map.t_fun(m_theta, y_theta)
    adj, det, diag = _adj_det(bundle.p_map, m_theta, y_theta)
    if diag:
        y_ti = adj[..., :, None] * t_q
    else:
        y_ti = np.einsum("...ij,...jk->...ik", adj, t_q)
    return y_ti, det


@dataclass
class KappaRegression:
    """Stacked scalar regression, normalized so |m| <= 1.

    y == m * kappa on exact data; (sign, log_abs) carry the raw stacked
    regressor M_kappa = M_psi^(3n) M_og^(n^2) M_ti^(n^2) without overflow.
    """

    y: np.ndarray
    m: np.ndarray | float
    sign: np.ndarray | float
    log_abs: np.ndarray | float
    field_order: str = field(default="psi, vec(OG), vec(TI)", repr=False)

    def raw_saturated(self) -> np.ndarray | float:
        """M_kappa as a plain double, saturating instead of overflowing."""
        return self.sign * np.exp(np.clip(self.log_abs, -745.0, 709.0))


def _log_sign(v):
    v = np.asarray(v, dtype=float)
    with np.errstate(divide="ignore"):
        return np.log(np.abs(v)), np.sign(v)


def stack_kappa(y_psi, m_psi, y_og, m_og, y_ti, m_ti, n: int = 3) -> KappaRegression:
    """Stack the three block regressions into one scalar regression for
    kappa = [psi, vec(OG), vec(TI)] (column-major vecs).

    The block-diagonal adjugate multiplies block i by the product of the
    other blocks' determinant powers; everything is evaluated in sign /
    log-magnitude space and divided by max(1, |M_kappa|) so the result fits
    doubles.  Batched over leading axes.
    """
    y_psi = np.asarray(y_psi, dtype=float)
    y_og = np.asarray(y_og, dtype=float)
    y_ti = np.asarray(y_ti, dtype=float)
    nn = n * n
    lp, sp = _log_sign(m_psi)
    lo, so = _log_sign(m_og)
    lt, st = _log_sign(m_ti)
    with np.errstate(invalid="ignore"):
        log_mk = 3 * n * lp + nn * lo + nn * lt
        sign_mk = sp ** (3 * n) * so**nn * st**nn
        log_norm = np.maximum(0.0, log_mk)  # ln max(1, |M_kappa|)
        # per-block coefficients M_kappa / (n_k * M_block), signs via integer
        # powers of +-1/0, magnitudes via logs
        coef_psi = (
            sp ** (3 * n - 1)
            * so**nn
            * st**nn
            * np.exp((3 * n - 1) * lp + nn * lo + nn * lt - log_norm)
        )
        coef_og = (
            sp ** (3 * n)
            * so ** (nn - 1)
            * st**nn
            * np.exp(3 * n * lp + (nn - 1) * lo + nn * lt - log_norm)
        )
        coef_ti = (
            sp ** (3 * n)
            * so**nn
            * st ** (nn - 1)
            * np.exp(3 * n * lp + nn * lo + (nn - 1) * lt - log_norm)
        )
        m_norm = sign_mk * np.exp(log_mk - log_norm)
    coef_psi = np.where(np.isfinite(coef_psi), coef_psi, 0.0)
    coef_og = np.where(np.isfinite(coef_og), coef_og, 0.0)
    coef_ti = np.where(np.isfinite(coef_ti), coef_ti, 0.0)
    m_norm = np.where(np.isfinite(m_norm), m_norm, 0.0)

    vec_og = y_og.swapaxes(-1, -2).reshape(y_og.shape[:-2] + (nn,))
    vec_ti = y_ti.swapaxes(-1, -2).reshape(y_ti.shape[:-2] + (nn,))
    y = np.concatenate(
        [
            np.asarray(coef_psi)[..., None] * y_psi,
            np.asarray(coef_og)[..., None] * vec_og,
            np.asarray(coef_ti)[..., None] * vec_ti,
        ],
        axis=-1,
    )
    scalar = np.asarray(m_norm).ndim == 0
    if scalar:
        return KappaRegression(
            y=y, m=float(m_norm), sign=float(sign_mk), log_abs=float(log_mk)
        )
    return KappaRegression(y=y, m=m_norm, sign=sign_mk, log_abs=log_mk)


def run_cascade(y: np.ndarray, delta, bundle: CascadeBundle):
    """Convenience wrapper: all four stages plus the stack.

    Returns (KappaRegression, stage dict) so traces can record the
    intermediate regressors.
    """
    y_psi, m_psi = stage_psi(y, delta, bundle)
    y_og, m_og = stage_ogamma(y_psi, m_psi, bundle)
    y_th, m_th = stage_theta(y_psi, m_psi, bundle)
    y_ti, m_ti = stage_ti(y_th, m_th, bundle)
    reg = stack_kappa(y_psi, m_psi, y_og, m_og, y_ti, m_ti, n=bundle.n)
    stages = {
        "y_psi": y_psi,
        "m_psi": m_psi,
        "y_og": y_og,
        "m_og": m_og,
        "y_theta": y_th,
        "m_theta": m_th,
        "y_ti": y_ti,
        "m_ti": m_ti,
    }
    return reg, stages

"""Regressor dimensionality reduction, extension and mixing, and the
finite-excitation monitor.

The reduction replaces the 3n + 2n^2 extended regressor with a short one
using model-supplied selector matrices (built offline from observed
regressor coincidences and known zero parameters).  Extension accumulates
exponentially weighted Gram integrals of the reduced regression from the
engagement time onward; mixing multiplies by the adjugate to produce one
scalar-regressor equation per unknown:

    q(t)   = int_{t_eps}^{t} w(tau) phibar(tau) qbar(tau) dtau
    phi(t) = int_{t_eps}^{t} w(tau) phibar(tau) phibar(tau)^T dtau
    w(tau) = exp(-sigma (tau - t_eps))

    Y = k(t) adj(phi) q,   Delta = k(t) det(phi),   so   Y = Delta * eta.

k(t) = 1 / (det(phi) + eps_k), clamped to [k_min, k_max]; the Y/Delta ratio
is invariant to any positive k schedule.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import matkit


class SequencingError(RuntimeError):
    """Extension stepped before the engagement time."""


class WindowError(ValueError):
    """An excitation window does not fit inside the supplied trace."""


@dataclass
class Reduction:
    """Selector matrices tying the extended regression to the reduced one.

    d_eta:   (3n + 2n^2) x n_eta,  phibar = d_eta^T phibar_e
    l_eta:   n_eta x (3n + 2n^2),  eta = l_eta eta_e
    l_psi:   3n x n_eta, marks which psi slots the reduced parameters inform
    l_ab:    n_theta x 3n, selects psi_ab from psi
    l_gamma: n x 3n, selects the disturbance rows of psi
    """

    d_eta: np.ndarray
    l_eta: np.ndarray
    l_psi: np.ndarray
    l_ab: np.ndarray
    l_gamma: np.ndarray

    def __post_init__(self):
        self.d_eta = np.asarray(self.d_eta, dtype=float)
        self.l_eta = np.asarray(self.l_eta, dtype=float)
        self.l_psi = np.asarray(self.l_psi, dtype=float)
        self.l_ab = np.asarray(self.l_ab, dtype=float)
        self.l_gamma = np.asarray(self.l_gamma, dtype=float)
        full, n_eta = self.d_eta.shape
        if self.l_eta.shape != (n_eta, full):
            raise matkit.DimensionError(
                f"l_eta shape {self.l_eta.shape} clashes with d_eta {self.d_eta.shape}"
            )
        if n_eta >= full:
            raise matkit.DimensionError("reduction must shrink the regressor")

    @property
    def n_eta(self) -> int:
        return self.d_eta.shape[1]


def reduce_regressor(phibar_e, qbar, reduction: Reduction):
    """Project the extended regressor; qbar passes through unchanged.

    Accepts a single regressor (length 3n + 2n^2) or a batch (..., 3n + 2n^2).
    """
    phibar_e = np.asarray(phibar_e, dtype=float)
    if phibar_e.shape[-1] != reduction.d_eta.shape[0]:
        raise matkit.DimensionError(
            f"regressor length {phibar_e.shape[-1]} does not match reduction "
            f"({reduction.d_eta.shape[0]})"
        )
    return phibar_e @ reduction.d_eta, qbar


@dataclass
class DremState:
    """Accumulated extension integrals plus the previous weighted integrand
    endpoint (trapezoidal rule needs both ends of each sampling interval)."""

    t_eps: float
    sigma: float
    n_eta: int
    eps_k: float = 1e-19
    k_min: float = 1e-6
    k_max: float = 1e25
    t: float = None  # type: ignore[assignment]
    q: np.ndarray = None  # type: ignore[assignment]
    phi: np.ndarray = None  # type: ignore[assignment]
    _fq_prev: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]
    _fphi_prev: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]

    def __post_init__(self):
        if self.t is None:
            self.t = self.t_eps
        if self.q is None:
            self.q = np.zeros(self.n_eta)
        if self.phi is None:
            self.phi = np.zeros((self.n_eta, self.n_eta))

    @classmethod
    def start(cls, t_eps, sigma, phibar0, qbar0, **kw) -> "DremState":
        """State at the engagement time, seeded with the first sample."""
        phibar0 = np.asarray(phibar0, dtype=float).ravel()
        st = cls(t_eps=float(t_eps), sigma=float(sigma), n_eta=phibar0.size, **kw)
        st._fq_prev = phibar0 * qbar0
        st._fphi_prev = np.outer(phibar0, phibar0)
        return st


def step_extension(state: DremState, phibar, qbar: float, dt: float) -> DremState:
    """Trapezoidal accumulation over [state.t, state.t + dt] using the new
    sample (phibar, qbar) taken at the end of the interval."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if state.t < state.t_eps - 1e-12:
        raise SequencingError(
            f"extension stepped at t={state.t} before engagement time {state.t_eps}"
        )
    phibar = np.asarray(phibar, dtype=float).ravel()
    t_new = state.t + dt
    w_new = float(np.exp(-state.sigma * (t_new - state.t_eps)))
    fq_new = w_new * phibar * qbar
    fphi_new = w_new * np.outer(phibar, phibar)
    if state._fq_prev is None:
        # no stored left endpoint: treat the previous integrand as zero
        fq_prev = np.zeros_like(fq_new)
        fphi_prev = np.zeros_like(fphi_new)
    else:
        fq_prev, fphi_prev = state._fq_prev, state._fphi_prev
    q = state.q + 0.5 * dt * (fq_prev + fq_new)
    phi = state.phi + 0.5 * dt * (fphi_prev + fphi_new)
    return DremState(
        t_eps=state.t_eps,
        sigma=state.sigma,
        n_eta=state.n_eta,
        eps_k=state.eps_k,
        k_min=state.k_min,
        k_max=state.k_max,
        t=t_new,
        q=q,
        phi=phi,
        _fq_prev=fq_new,
        _fphi_prev=fphi_new,
    )


@dataclass
class MixedRegression:
    """Scalar-regressor equation Y = Delta * eta plus the gain actually used."""

    Y: np.ndarray
    Delta: float
    k: float

    def excited(self, floor: float = 0.0) -> bool:
        return abs(self.Delta) > floor


def mix(state: DremState) -> MixedRegression:
    """Adjugate mixing of the accumulated Gram integrals."""
    det = matkit.determinant(state.phi)
    k = 1.0 / (det + state.eps_k)
    k = float(np.clip(k, state.k_min, state.k_max))
    y = k * (matkit.adjugate(state.phi) @ state.q)
    return MixedRegression(Y=y, Delta=float(k * det), k=k)


def mix_arrays(
    phi: np.ndarray,
    q: np.ndarray,
    eps_k: float = 1e-19,
    k_min: float = 1e-6,
    k_max: float = 1e25,
):
    """Vectorized mixing for batched (phi, q) with leading time axes.

    Returns (Y, Delta) arrays; non-finite determinants freeze to zero so a
    blown-up integral surfaces as "no update" rather than NaN downstream.
    """
    det = np.asarray(matkit.determinant(phi))
    det = np.where(np.isfinite(det), det, 0.0)
    k = np.clip(1.0 / (det + eps_k), k_min, k_max)
    adj = matkit.adjugate(phi)
    y = k[..., None] * np.einsum("...ij,...j->...i", adj, q)
    return y, k * det


def cumulative_extension(
    times: np.ndarray,
    phibar: np.ndarray,
    qbar: np.ndarray,
    t_eps: float,
    sigma: float,
    q0: np.ndarray | None = None,
    phi0: np.ndarray | None = None,
    t_freeze: float | None = None,
):
    """Vectorized cumulative trapezoid of the extension integrals over a
    uniformly or non-uniformly sampled trace segment.

    Samples with t < t_eps contribute nothing; with a freeze time set,
    samples past it contribute nothing either, so the integrals (and the
    mixed regression built from them) hold their values once the
    excitation-capture window closes.  Returns (q, phi) arrays with leading
    time axis; the last entries seed the next segment.
    """
    times = np.asarray(times, dtype=float)
    phibar = np.asarray(phibar, dtype=float)
    qbar = np.asarray(qbar, dtype=float)
    s, m = phibar.shape
    active = times >= t_eps
    if t_freeze is not None:
        active &= times <= t_freeze
    with np.errstate(over="ignore"):
        w = np.where(active, np.exp(-sigma * np.minimum(times - t_eps, 7.0e2)), 0.0)
    fq = w[:, None] * phibar * qbar[:, None]
    fphi = w[:, None, None] * (phibar[:, :, None] * phibar[:, None, :])
    dt2 = 0.5 * np.diff(times)
    q = np.empty((s, m))
    phi = np.empty((s, m, m))
    q[0] = 0.0 if q0 is None else q0
    phi[0] = 0.0 if phi0 is None else phi0
    inc_q = dt2[:, None] * (fq[:-1] + fq[1:])
    inc_phi = dt2[:, None, None] * (fphi[:-1] + fphi[1:])
    np.cumsum(inc_q, axis=0, out=inc_q)
    np.cumsum(inc_phi, axis=0, out=inc_phi)
    q[1:] = q[0] + inc_q
    phi[1:] = phi[0] + inc_phi
    return q, phi


def excitation_series(times: np.ndarray, phibar: np.ndarray, window: float):
    """Sliding-window minimum eigenvalue of the unweighted Gram integral
    int_t^{t+T} phibar phibar^T.

    Returns (window start times, lambda_min values).  Trapezoidal rule on the
    supplied sampling; windows are snapped to whole samples.
    """
    times = np.asarray(times, dtype=float)
    phibar = np.asarray(phibar, dtype=float)
    if window <= 0:
        raise WindowError("window must be positive")
    if times.size < 2:
        raise WindowError("trace too short")
    span = times[-1] - times[0]
    if window > span + 1e-12:
        raise WindowError(f"window {window} exceeds trace span {span}")
    dt2 = 0.5 * np.diff(times)
    outer = phibar[:, :, None] * phibar[:, None, :]
    inc = dt2[:, None, None] * (outer[:-1] + outer[1:])
    prefix = np.concatenate([np.zeros((1,) + outer.shape[1:]), np.cumsum(inc, axis=0)])
    step = float(np.median(np.diff(times)))
    k = max(1, int(round(window / step)))
    if k >= times.size:
        raise WindowError(f"window {window} exceeds trace span {span}")
    gram = prefix[k:] - prefix[:-k]
    lam = np.linalg.eigvalsh(gram)[:, 0]
    return times[: times.size - k], lam


def regressor_coincidence_report(
    phibar_e: np.ndarray, rtol: float = 1e-6, atol: float = 1e-9
) -> list[tuple[int, int, float]]:
    """Diagnostic: pairs of extended-regressor components that coincide over
    the supplied trace window.

    Helps construct a reduction by hand; this is deliberately not an
    automatic selector-matrix synthesizer.  Returns (i, j, max_gap) with
    0-based component indices, smallest gaps first.
    """
    phibar_e = np.asarray(phibar_e, dtype=float)
    s, m = phibar_e.shape
    scale = np.abs(phibar_e).max(axis=0)
    pairs = []
    for i in range(m):
        for j in range(i + 1, m):
            gap = float(np.abs(phibar_e[:, i] - phibar_e[:, j]).max())
            if gap <= atol + rtol * max(scale[i], scale[j]):
                pairs.append((i, j, gap))
    pairs.sort(key=lambda p: p[2])
    return pairs


def first_excitation_time(
    times: np.ndarray, phibar: np.ndarray, t_eps: float, alpha: float
) -> float | None:
    """Earliest time at which the cumulative (unweighted) Gram integral from
    t_eps reaches excitation level alpha; None if it never does."""
    times = np.asarray(times, dtype=float)
    phibar = np.asarray(phibar, dtype=float)
    mask = times >= t_eps
    if mask.sum() < 2:
        return None
    t = times[mask]
    p = phibar[mask]
    outer = p[:, :, None] * p[:, None, :]
    inc = 0.5 * np.diff(t)[:, None, None] * (outer[:-1] + outer[1:])
    gram = np.cumsum(inc, axis=0)
    lam = np.linalg.eigvalsh(gram)[:, 0]
    hits = np.nonzero(lam >= alpha)[0]
    if hits.size == 0:
        return None
    return float(t[hits[0] + 1])

"""State observers.

The proposed observer integrates the scalar-regressor gradient flow

    kappa_hat' = -gamma * M * (M * kappa_hat - Y)

with the exact per-step solution for frozen (Y, M), which is stable for any
gamma * M^2 * dt and leaves the estimate untouched when M == 0.  States are
then rebuilt from the estimate blocks and the filter states alone; no
entry of the reconstruction divides by an estimated quantity.

The certainty-equivalence baseline drives the reduced parameter estimate
with the same gradient flow and pushes it through the model's inverse maps,
which do divide; every denominator is guarded and each guard hit is logged
as a singularity event while the affected output holds its last valid value.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from . import matkit
from .filters import FilterGains, FilterState


class ObserverDiverged(RuntimeError):
    pass


def exact_gradient_step(est: np.ndarray, y: np.ndarray, m: float, gamma: float, dt: float):
    """Advance est' = -gamma*m*(m*est - y) by dt with (y, m) frozen.

    Closed-form linear-ODE solution: est <- e^(-x) est + phi1(x) dt gamma m y
    with x = gamma m^2 dt and phi1(x) = (1 - e^(-x))/x.  Unconditionally
    stable; for constant m the error contracts by exactly e^(-gamma m^2 t).
    """
    x = gamma * m * m * dt
    if x == 0.0:
        return np.array(est, dtype=float, copy=True)
    if x > 700.0:
        # one step fully converges; m is large enough for a safe division
        return np.asarray(y, dtype=float) / m
    decay = np.exp(-x)
    phi1 = -np.expm1(-x) / x
    return decay * np.asarray(est, dtype=float) + (phi1 * gamma * m * dt) * np.asarray(
        y, dtype=float
    )


@dataclass
class ObserverState:
    """Estimate of the stacked unknown kappa = [psi, vec(OG), vec(TI)]."""

    kappa_hat: np.ndarray
    gamma: float
    n: int = 3

    def __post_init__(self):
        self.kappa_hat = np.asarray(self.kappa_hat, dtype=float).ravel()
        expected = 3 * self.n + 2 * self.n**2
        if self.kappa_hat.size != expected:
            raise matkit.DimensionError(
                f"kappa_hat needs {expected} entries for n={self.n}, "
                f"got {self.kappa_hat.size}"
            )
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")

    # unpacking is pure reindexing of kappa_hat
    @property
    def psi_a_hat(self) -> np.ndarray:
        return self.kappa_hat[0 : self.n]

    @property
    def psi_b_hat(self) -> np.ndarray:
        return self.kappa_hat[self.n : 2 * self.n]

    @property
    def gamma_vec_hat(self) -> np.ndarray:
        return self.kappa_hat[2 * self.n : 3 * self.n]

    @property
    def o_gamma_hat(self) -> np.ndarray:
        n = self.n
        return matkit.unvec(self.kappa_hat[3 * n : 3 * n + n * n], n)

    @property
    def t_inv_hat(self) -> np.ndarray:
        n = self.n
        return matkit.unvec(self.kappa_hat[3 * n + n * n :], n)


def step_adaptive(obs: ObserverState, y_kappa, m_kappa: float, dt: float) -> ObserverState:
    """One exact gradient-flow step on the stacked regression."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    new = exact_gradient_step(obs.kappa_hat, y_kappa, m_kappa, obs.gamma, dt)
    if not np.all(np.isfinite(new)):
        raise ObserverDiverged(
            f"kappa_hat diverged (gamma*M^2*dt = {obs.gamma * m_kappa**2 * dt:.3e})"
        )
    return replace(obs, kappa_hat=new)


def reconstruct(obs: ObserverState, filt: FilterState, gains: FilterGains):
    """Rebuild (xi_hat, x_hat) from estimate blocks and filter states.

    xi_hat = Oe^-1 OG_hat (F - N psi_a_hat - H psi_b_hat)
             + z + Omega psi_a_hat + P psi_b_hat
    x_hat  = TI_hat xi_hat

    No inversion or division of estimated quantities anywhere.
    """
    pa, pb = obs.psi_a_hat, obs.psi_b_hat
    w = filt.F - filt.N @ pa - filt.H @ pb
    xi_hat = gains.O_e_inv @ (obs.o_gamma_hat @ w) + filt.z + filt.Omega @ pa + filt.P @ pb
    return xi_hat, obs.t_inv_hat @ xi_hat


@dataclass
class GuardedMaps:
    """Model-supplied inverse maps for the baseline, with named denominators.

    Each callable returns (value, events) where events is a list of
    (denominator_name, denominator_value) guard hits at |den| < eps_div.
    """

    f_psi: Callable[[np.ndarray, float], tuple]
    f_theta: Callable[[np.ndarray, float], tuple]
    t_inv_of_theta: Callable[[np.ndarray, float], tuple]
    o_gamma_of_gamma: Callable[[np.ndarray], np.ndarray]
    eps_div: float = 1e-8


@dataclass
class BaselineState:
    """Certainty-equivalence observer state: reduced-parameter estimate plus
    the last valid images of the guarded maps (held across guard hits)."""

    eta_hat: np.ndarray
    gamma: float
    psi_hat: np.ndarray = None  # type: ignore[assignment]
    theta_hat: np.ndarray = None  # type: ignore[assignment]
    t_inv: np.ndarray = None  # type: ignore[assignment]
    event_count: int = 0

    def __post_init__(self):
        self.eta_hat = np.asarray(self.eta_hat, dtype=float).ravel()
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")


def step_baseline(
    bl: BaselineState,
    y: np.ndarray,
    delta: float,
    filt: FilterState,
    gains: FilterGains,
    maps: GuardedMaps,
    l_ab: np.ndarray,
    dt: float,
):
    """Gradient step on eta_hat, then certainty-equivalence reconstruction.

    The (Y, Delta) pair is normalized by max(1, |Delta|) before the step;
    the ratio (and hence the flow's equilibrium) is unchanged and the
    effective rate stays representable when the mixing determinant grows.

    Returns (new state, x_hat, events) with events a list of
    (denominator_name, value) guard hits from this evaluation.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    norm = max(1.0, abs(delta))
    eta_new = exact_gradient_step(bl.eta_hat, np.asarray(y) / norm, delta / norm, bl.gamma, dt)
    if not np.all(np.isfinite(eta_new)):
        raise ObserverDiverged("eta_hat diverged")

    events: list[tuple[str, float]] = []
    psi, ev = maps.f_psi(eta_new, maps.eps_div)
    events += ev
    psi = bl.psi_hat if psi is None else psi
    theta = t_inv = None
    if psi is not None:
        theta, ev = maps.f_theta(l_ab @ psi, maps.eps_div)
        events += ev
    theta = bl.theta_hat if theta is None else theta
    if theta is not None:
        t_inv, ev = maps.t_inv_of_theta(theta, maps.eps_div)
        events += ev
    t_inv = bl.t_inv if t_inv is None else t_inv

    x_hat = np.full(gains.n, np.nan)
    if psi is not None and t_inv is not None:
        n = gains.n
        pa, pb, gv = psi[:n], psi[n : 2 * n], psi[2 * n :]
        og = maps.o_gamma_of_gamma(gv)
        w = filt.F - filt.N @ pa - filt.H @ pb
        xi = gains.O_e_inv @ (og @ w) + filt.z + filt.Omega @ pa + filt.P @ pb
        x_hat = t_inv @ xi

    new = BaselineState(
        eta_hat=eta_new,
        gamma=bl.gamma,
        psi_hat=psi,
        theta_hat=theta,
        t_inv=t_inv,
        event_count=bl.event_count + len(events),
    )
    return new, x_hat, events


def fit_decay(t: np.ndarray, err_norm: np.ndarray, window: tuple[float, float]):
    """Least-squares slope of log(err_norm) over the window.

    When the error reaches its numerical floor inside the window, the fit
    uses the pre-floor prefix (the floor is taken as twice the window
    minimum).  Returns (rate, intercept, r_squared).
    """
    t = np.asarray(t, dtype=float)
    err = np.asarray(err_norm, dtype=float)
    lo, hi = window
    mask = (t >= lo) & (t <= hi) & np.isfinite(err) & (err > 0.0)
    if mask.sum() < 3:
        raise ValueError("window holds fewer than 3 usable samples")
    ts, es = t[mask], err[mask]
    floor = 2.0 * float(es.min())
    above = es > floor
    if above.sum() >= 3 and not above.all():
        cut = int(np.argmin(above))  # first sample at/below the floor
        if cut >= 3:
            ts, es = ts[:cut], es[:cut]
    loge = np.log(es)
    a = np.column_stack([ts, np.ones_like(ts)])
    coef, *_ = np.linalg.lstsq(a, loge, rcond=None)
    fitted = a @ coef
    ss_res = float(np.sum((loge - fitted) ** 2))
    ss_tot = float(np.sum((loge - loge.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(coef[0]), float(coef[1]), r2

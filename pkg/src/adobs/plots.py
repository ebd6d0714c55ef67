"""Figure emission for completed runs: renders the three standard panels
(regression identity + excitation level, parameter-error norms, state
reconstruction error) as SVG files next to the trace."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .example_system import ExampleConfig, true_kappa
from .scenario import ConfigError, Scenario, read_trace

PLOT_FILES = ("identity_excitation.svg", "parameter_errors.svg", "state_error.svg")


def _require(tr: dict, cols: list[str]):
    missing = [c for c in cols if c not in tr]
    if missing:
        raise ConfigError(f"trace is missing columns {missing}")


def emit_plots(run_dir: str | Path) -> list[Path]:
    """Render the three standard figures from a persisted run directory."""
    run_dir = Path(run_dir)
    import json

    scenario = Scenario.from_dict(json.loads((run_dir / "config.json").read_text()))
    cfg: ExampleConfig = scenario.params
    tr = read_trace(run_dir)
    _require(tr, ["t", "qbar", "phibar_eta_true", "lambda_min", "xtilde_norm"])
    t = tr["t"]
    out = []

    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    ax1.plot(t, tr["qbar"], label="measured combination", lw=0.8)
    ax1.plot(t, tr["phibar_eta_true"], "--", label="regressor x true parameters", lw=0.8)
    ax1.set_ylabel("filtered output combination")
    ax1.legend(loc="best", fontsize=8)
    ax2.semilogy(t, np.abs(tr["lambda_min"]) + 1e-300, lw=0.8)
    ax2.set_ylabel("sliding-window min eigenvalue")
    ax2.set_xlabel("time [s]")
    ax2.axvline(cfg.t_eps, color="k", ls=":", lw=0.8)
    fig.tight_layout()
    path = run_dir / PLOT_FILES[0]
    fig.savefig(path)
    plt.close(fig)
    out.append(path)

    fig, ax = plt.subplots(figsize=(7, 4))
    if np.isfinite(tr["kappahat_01"]).any():
        kappa = true_kappa(cfg)
        khat = np.column_stack([tr[f"kappahat_{j + 1:02d}"] for j in range(27)])
        err = khat - kappa
        blocks = {
            "psi_a": slice(0, 3),
            "psi_b": slice(3, 6),
            "disturbance block": slice(9, 18),
            "inverse transform": slice(18, 27),
        }
        for name, block in blocks.items():
            ax.semilogy(t, np.linalg.norm(err[:, block], axis=1) + 1e-300, label=name, lw=0.9)
        ax.legend(fontsize=8)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("parameter error norm")
    fig.tight_layout()
    path = run_dir / PLOT_FILES[1]
    fig.savefig(path)
    plt.close(fig)
    out.append(path)

    fig, ax = plt.subplots(figsize=(7, 4))
    if np.isfinite(tr["xtilde_norm"]).any():
        ax.semilogy(t, tr["xtilde_norm"] + 1e-300, label="proposed observer", lw=0.9)
    if "xtilde_ce_norm" in tr and np.isfinite(tr["xtilde_ce_norm"]).any():
        ax.semilogy(
            t, tr["xtilde_ce_norm"] + 1e-300, label="certainty-equivalence baseline", lw=0.9
        )
    ax.set_xlabel("time [s]")
    ax.set_ylabel("state reconstruction error norm")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = run_dir / PLOT_FILES[2]
    fig.savefig(path)
    plt.close(fig)
    out.append(path)
    return out

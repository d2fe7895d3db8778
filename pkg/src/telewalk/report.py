"""Episode reports: delimited per-tick series and rendered figures.

Consumes the JSON-lines telemetry produced by the loop and writes artifacts
next to it: a flat CSV of the main time series (for spreadsheets / external
plotting) and a set of PNG figures summarizing tracking quality, the
reference phase portrait, and contact/force diagnostics.
"""

from __future__ import annotations

import csv
import os
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

# Columns exported to the delimited series file, in order.  Scalar tick
# fields only; vector fields (grfs, torques) get derived scalars below.
SERIES_COLUMNS = (
    "t",
    "domain",
    "step_k",
    "pilot_com_x",
    "pilot_com_y",
    "pilot_contact_l",
    "pilot_contact_r",
    "hwr_x",
    "hwr_xdot",
    "hwr_u",
    "com_x",
    "com_y",
    "com_z",
    "vel_x",
    "vel_y",
    "roll",
    "pitch",
    "com_des_x",
    "com_des_y",
    "vel_des_x",
    "vel_des_y",
    "dcm_h_norm",
    "dcm_r_norm",
    "dcm_err_norm",
    "cop_x",
    "cop_y",
    "fz_total",
    "qp_iters",
    "qp_fallback",
    "t_ssp_est",
    "t_dsp_est",
    "haptic_x",
    "haptic_y",
)


def _fz_total(rec: dict) -> float:
    return sum(f[2] for f in rec.get("grfs", {}).values())


def write_series_csv(ticks: list, path) -> None:
    """Flatten tick records into a delimited per-tick table."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SERIES_COLUMNS)
        for rec in ticks:
            if rec.get("type") != "tick" or "com_x" not in rec:
                continue
            row = []
            for col in SERIES_COLUMNS:
                if col == "fz_total":
                    row.append(f"{_fz_total(rec):.9g}")
                    continue
                v = rec.get(col)
                if v is None:
                    row.append("")
                elif isinstance(v, bool):
                    row.append(int(v))
                elif isinstance(v, float):
                    row.append(f"{v:.9g}")
                else:
                    row.append(v)
            w.writerow(row)


def _series(ticks: list, key: str) -> np.ndarray:
    return np.array(
        [rec.get(key) if rec.get(key) is not None else np.nan for rec in ticks],
        dtype=float,
    )


def _full_ticks(ticks: list) -> list:
    return [r for r in ticks if r.get("type") == "tick" and "com_x" in r]


def render_figures(header: Optional[dict], ticks: list, outdir) -> list:
    """Render the standard figure set to ``outdir``; returns written paths."""
    ticks = _full_ticks(ticks)
    os.makedirs(outdir, exist_ok=True)
    if not ticks:
        return []
    t = _series(ticks, "t")
    written = []

    def _save(fig, name):
        path = os.path.join(outdir, name)
        fig.savefig(path, dpi=110)
        plt.close(fig)
        written.append(path)

    # --- CoM tracking -----------------------------------------------------
    fig, axes = plt.subplots(2, 1, figsize=(9, 6), sharex=True)
    axes[0].plot(t, _series(ticks, "com_des_x"), "k--", lw=1.0, label="reference")
    axes[0].plot(t, _series(ticks, "com_x"), "C0", lw=1.2, label="robot")
    axes[0].plot(t, np.array([r["foot_l"][0] for r in ticks]), "C2", lw=0.8,
                 alpha=0.6, label="left foot")
    axes[0].plot(t, np.array([r["foot_r"][0] for r in ticks]), "C3", lw=0.8,
                 alpha=0.6, label="right foot")
    axes[0].set_ylabel("x [m]")
    axes[0].legend(loc="upper left", fontsize=8)
    axes[1].plot(t, _series(ticks, "vel_des_x"), "k--", lw=1.0, label="reference")
    axes[1].plot(t, _series(ticks, "vel_x"), "C0", lw=1.2, label="robot")
    axes[1].set_ylabel("xdot [m/s]")
    axes[1].set_xlabel("t [s]")
    axes[1].legend(loc="upper left", fontsize=8)
    fig.suptitle("CoM tracking")
    fig.tight_layout()
    _save(fig, "com_tracking.png")

    # --- Normalized DCM pair ----------------------------------------------
    fig, axes = plt.subplots(2, 1, figsize=(9, 6), sharex=True)
    axes[0].plot(t, _series(ticks, "dcm_h_norm"), "k--", lw=1.0, label="reference")
    axes[0].plot(t, _series(ticks, "dcm_r_norm"), "C0", lw=1.2, label="robot")
    axes[0].set_ylabel("DCM / height [-]")
    axes[0].legend(loc="upper left", fontsize=8)
    err = _series(ticks, "dcm_err_norm")
    axes[1].plot(t, err, "C1", lw=1.0)
    axes[1].set_ylabel("error [-]")
    axes[1].set_xlabel("t [s]")
    env = (header or {}).get("config", {}).get("dcm_envelope")
    if env:
        axes[1].axhline(env, color="r", lw=0.8, ls=":")
        axes[1].axhline(-env, color="r", lw=0.8, ls=":")
    fig.suptitle("Normalized divergent-component tracking")
    fig.tight_layout()
    _save(fig, "dcm_tracking.png")

    # --- Reference phase portrait, colored by step ------------------------
    fig, ax = plt.subplots(figsize=(7, 6))
    x = _series(ticks, "hwr_x")
    xd = _series(ticks, "hwr_xdot")
    step = _series(ticks, "step_k")
    ax.scatter(x, xd, c=step, cmap="viridis", s=2, lw=0)
    sm = plt.cm.ScalarMappable(
        cmap="viridis",
        norm=plt.Normalize(np.nanmin(step), max(np.nanmax(step), 1.0)),
    )
    fig.colorbar(sm, ax=ax, label="step index")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("xdot [m/s]")
    ax.set_title("Walking-reference phase portrait")
    fig.tight_layout()
    _save(fig, "phase_portrait.png")

    # --- Contact / force diagnostics --------------------------------------
    fig, axes = plt.subplots(3, 1, figsize=(9, 7), sharex=True)
    axes[0].plot(t, _series(ticks, "cop_x"), "C0", lw=0.8, label="CoP x")
    axes[0].plot(t, _series(ticks, "cop_y"), "C1", lw=0.8, label="CoP y")
    axes[0].set_ylabel("CoP [m]")
    axes[0].legend(loc="upper left", fontsize=8)
    axes[1].plot(t, np.array([_fz_total(r) for r in ticks]), "C2", lw=0.8)
    axes[1].set_ylabel("sum fz [N]")
    axes[2].plot(t, _series(ticks, "qp_iters"), "C4", lw=0.8, label="QP iters")
    fb = np.array([bool(r.get("qp_fallback")) for r in ticks])
    if fb.any():
        axes[2].plot(t[fb], np.zeros(int(fb.sum())), "rx", ms=5, label="fallback")
    axes[2].set_ylabel("iterations")
    axes[2].set_xlabel("t [s]")
    axes[2].legend(loc="upper left", fontsize=8)
    fig.suptitle("Contact and force-distribution diagnostics")
    fig.tight_layout()
    _save(fig, "forces.png")

    return written


def write_report(telemetry_path, outdir) -> dict:
    """Series CSV + figures for one telemetry file; returns written paths."""
    from .telemetry import load_telemetry

    header, ticks = load_telemetry(telemetry_path)
    os.makedirs(outdir, exist_ok=True)
    series_path = os.path.join(outdir, "series.csv")
    write_series_csv(ticks, series_path)
    figures = render_figures(header, ticks, os.path.join(outdir, "figures"))
    return {"series": series_path, "figures": figures}

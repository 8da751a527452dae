"""Static SVG plots from an episode CSV."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from .engine import CSV_COLUMNS  # noqa: E402

PLOT_FILES = (
    "trajectories_3d.svg",
    "attitude.svg",
    "position.svg",
    "disturbance_gp.svg",
    "lyapunov.svg",
    "min_distance.svg",
)


def load_episode_csv(path) -> pd.DataFrame:
    df = pd.read_csv(path)
    missing = [c for c in CSV_COLUMNS if c not in df.columns]
    if missing:
        raise ValueError(f"episode CSV is missing column '{missing[0]}'")
    if len(df) == 0:
        raise ValueError("episode CSV has no data rows")
    return df


def _disturbed_agent(df) -> int:
    cols = [f"d_{a}{c}" for a in "tf" for c in "xyz"]
    mags = df.groupby("agent")[cols].apply(lambda g: np.abs(g.to_numpy()).sum())
    return int(mags.idxmax())


def render_plots(csv_path, out_dir) -> dict:
    """Write the six standard SVGs; returns plotted arrays for inspection."""
    df = load_episode_csv(csv_path)
    os.makedirs(out_dir, exist_ok=True)
    agents = sorted(df["agent"].unique())
    artifacts = {}

    fig = plt.figure(figsize=(7, 6))
    ax = fig.add_subplot(projection="3d")
    for a in agents:
        sub = df[df["agent"] == a]
        ax.plot(sub["qx"], sub["qy"], sub["qz"], lw=0.8, label=f"agent {a}")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_zlabel("z [m]")
    ax.legend(fontsize=7, loc="upper left")
    fig.savefig(os.path.join(out_dir, "trajectories_3d.svg"))
    plt.close(fig)

    def per_agent_series(cols, ylabel, fname):
        n = len(agents)
        fig, axes = plt.subplots(n, 1, figsize=(7, 1.6 * n), sharex=True, squeeze=False)
        for row, a in enumerate(agents):
            sub = df[df["agent"] == a]
            for c in cols:
                axes[row, 0].plot(sub["t"], sub[c], lw=0.7, label=c)
            axes[row, 0].set_ylabel(f"{a}", fontsize=8)
            if row == 0:
                axes[row, 0].legend(fontsize=6, ncol=len(cols), loc="upper right")
        axes[-1, 0].set_xlabel("t [s]")
        fig.suptitle(ylabel)
        fig.savefig(os.path.join(out_dir, fname))
        plt.close(fig)

    # attitude as body rates is uninformative; derive the rotation log would
    # need the full R: plot the first column of R (camera axis direction)
    per_agent_series(["R11", "R21", "R31"], "camera-axis direction cosines", "attitude.svg")
    per_agent_series(["qx", "qy", "qz"], "position [m]", "position.svg")

    star = _disturbed_agent(df)
    sub = df[df["agent"] == star]
    t = sub["t"].to_numpy()
    fig, axes = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    band = {}
    for ax_i, (part, cols) in enumerate(
        (("torque [N m]", ["d_tx", "gp_tx"]), ("force [N]", ["d_fx", "gp_fx"]))
    ):
        true = sub[cols[0]].to_numpy()
        est = sub[cols[1]].to_numpy()
        delta = sub["delta_bar"].to_numpy()
        axes[ax_i].fill_between(t, est - delta, est + delta, color="0.8", label="bound")
        axes[ax_i].plot(t, true, "r-", lw=0.8, label="disturbance")
        axes[ax_i].plot(t, est, "b--", lw=0.8, label="estimate")
        axes[ax_i].set_ylabel(part)
        axes[ax_i].legend(fontsize=7)
        band[part] = (est - delta, est + delta)
    axes[1].set_xlabel("t [s]")
    fig.suptitle(f"disturbance vs estimate (agent {star})")
    fig.savefig(os.path.join(out_dir, "disturbance_gp.svg"))
    plt.close(fig)
    artifacts["band"] = band
    artifacts["band_agent"] = star
    artifacts["band_t"] = t

    one = df[df["agent"] == agents[0]]
    for col, fname, ylabel in (
        ("V", "lyapunov.svg", "Lyapunov value"),
        ("min_dist", "min_distance.svg", "min pairwise distance [m]"),
    ):
        fig, ax = plt.subplots(figsize=(7, 3))
        ax.plot(one["t"], one[col], lw=0.8)
        ax.set_xlabel("t [s]")
        ax.set_ylabel(ylabel)
        fig.savefig(os.path.join(out_dir, fname))
        plt.close(fig)

    return artifacts

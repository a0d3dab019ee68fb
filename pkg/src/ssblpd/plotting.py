"""Figure rendering for ``ssblpd report``. matplotlib is imported on first use."""
from __future__ import annotations

from pathlib import Path

_LABELS = {"ue": "UE", "eve_energy": "eve energy", "eve_corr": "eve correlator"}
_STYLE = {"baseline": "-", "proposed": "--"}


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def plot_rocs(curves: dict, path, pfa_marker: float | None = None) -> Path:
    """``curves`` maps (arm, detector) to (pfa, pd) arrays."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for (arm, det), (pfa, pd) in sorted(curves.items()):
        ax.plot(pfa, pd, _STYLE.get(arm, "-"), label=f"{arm}: {_LABELS.get(det, det)}", drawstyle="steps-post")
    ax.plot([0, 1], [0, 1], ":", color="0.6", lw=0.8)
    if pfa_marker is not None:
        ax.axvline(pfa_marker, color="0.4", lw=0.8, ls="-.")
    ax.set(xlabel="probability of false alarm", ylabel="probability of detection", xlim=(0, 1), ylim=(0, 1.02))
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8, loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_distance(rows_by_arm: dict, path, pfa: float) -> Path:
    """Binned eavesdropper pd against distance; low-confidence bins drawn hollow."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for arm, rows in sorted(rows_by_arm.items()):
        for det, marker in (("eve_corr", "o"), ("eve_energy", "s")):
            pts = [((r["lo_m"] + r["hi_m"]) / 2, r[det], r["low_confidence"]) for r in rows if r[det] is not None]
            if not pts:
                continue
            x, y, _ = zip(*pts)
            line, = ax.plot(x, y, _STYLE.get(arm, "-"), label=f"{arm}: {_LABELS[det]}")
            for xi, yi, lo in pts:
                ax.plot(xi, yi, marker, color=line.get_color(), mfc="none" if lo else line.get_color())
    ax.set(xlabel="eavesdropper distance to gNB (m)", ylabel=f"probability of detection at pfa={pfa:g}",
           ylim=(0, 1.02))
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)

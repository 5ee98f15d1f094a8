"""Figure rendering for compilation reports.

Figures are drawn from the serialized report document rather than live
objects, so they always show exactly what was written to disk.  The Agg
backend keeps rendering headless.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_DPI = 120


def _tag(entry: dict) -> str:
    t = entry["target_fps"]
    return "estimate" if t is None else f"{t:g}fps"


def _aggregate_layers(entry: dict) -> tuple[list[str], list[int]]:
    """Sum per-layer cycles over repeated encoder blocks by short name."""
    totals: dict[str, int] = {}
    for row in entry["layers"]:
        key = row["name"].rsplit(".", 1)[-1]
        totals[key] = totals.get(key, 0) + row["total_cycles"]
    names = list(totals)
    return names, [totals[n] for n in names]


def plot_layer_latency(entry: dict, path: str) -> None:
    names, cycles = _aggregate_layers(entry)
    fig, ax = plt.subplots(figsize=(7, 0.4 * len(names) + 1.5))
    ax.barh(range(len(names)), cycles, color="#3b6ea5")
    ax.set_yticks(range(len(names)), names)
    ax.invert_yaxis()
    ax.set_xlabel("cycles per frame (all occurrences)")
    ax.set_title(
        f"Per-layer cycles at {entry['act_bits']}-bit activations "
        f"({entry['performance']['fps']:.2f} FPS)"
    )
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def plot_resources(entry: dict, fpga: dict, path: str) -> None:
    res = entry["resources"]
    names = ["DSP", "LUT (MAC)", "BRAM 18k"]
    used = [res["dsp"], res["lut_mac"], res["bram_18k"]]
    budget = [
        fpga["dsp"] * fpga["dsp_ratio"],
        fpga["lut"] * fpga["lut_ratio"],
        fpga["bram_18k"],
    ]
    total = [fpga["dsp"], fpga["lut"], fpga["bram_18k"]]
    fig, axes = plt.subplots(1, 3, figsize=(9, 3.2))
    for ax, name, u, b, t in zip(axes, names, used, budget, total):
        ax.bar([0], [u], width=0.5, color="#3b6ea5", label="used")
        ax.axhline(b, color="#c0392b", linestyle="--", label="budget")
        ax.axhline(t, color="#7f8c8d", linestyle=":", label="device")
        ax.set_xticks([])
        ax.set_title(name)
        ax.set_ylim(0, t * 1.08)
    axes[0].legend(loc="lower right", fontsize=8)
    fig.suptitle(f"Resource usage at {entry['act_bits']}-bit activations")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def plot_precision_sweep(results: list[dict], path: str) -> None:
    """Frame rate of every evaluated precision, with the target lines."""
    fig, ax = plt.subplots(figsize=(7, 4))
    points: dict[int, float] = {}
    for entry in results:
        for ev in entry["search_trace"]:
            if ev["feasible"]:
                points[ev["act_bits"]] = ev["fps"]
    bits = sorted(points)
    ax.plot(bits, [points[b] for b in bits], "o-", color="#3b6ea5",
            label="evaluated designs")
    for entry in results:
        if entry["target_fps"] is None:
            continue
        color = "#27ae60" if entry["feasible"] else "#c0392b"
        ax.axhline(entry["target_fps"], color=color, linestyle="--",
                   label=f"target {entry['target_fps']:g} FPS")
        if entry["feasible"]:
            ax.axvline(entry["act_bits"], color=color, linestyle=":",
                       alpha=0.6)
    ax.set_xlabel("activation precision (bits)")
    ax.set_ylabel("estimated frame rate (FPS)")
    ax.set_title("Frame rate vs activation precision")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def render_figures(report: dict, out_dir: str) -> list[str]:
    """Render every figure for a report; returns the written paths."""
    paths = []
    for entry in report["results"]:
        if not entry["feasible"]:
            continue
        tag = _tag(entry)
        lat = os.path.join(out_dir, f"latency_{tag}.png")
        plot_layer_latency(entry, lat)
        paths.append(lat)
        res = os.path.join(out_dir, f"resources_{tag}.png")
        plot_resources(entry, report["fpga"], res)
        paths.append(res)
    if any(e["search_trace"] for e in report["results"]):
        sweep = os.path.join(out_dir, "fps_vs_precision.png")
        plot_precision_sweep(report["results"], sweep)
        paths.append(sweep)
    return paths

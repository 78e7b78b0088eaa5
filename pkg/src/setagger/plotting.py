"""PNG figures drawn next to the experiment CSVs, one per table layout.

Rendering uses the Agg backend and strips the software tag from the PNG
metadata so repeated runs write identical files.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .experiment import CellKey, RunRecord  # noqa: E402

__all__ = ["render_figures"]

_PNG_META = {"Software": None}


def _lookup(record: RunRecord):
    by_key = {c.key: c for c in record.cells}

    def err(key: CellKey, side: str) -> float:
        cell = by_key.get(key)
        if cell is None or not cell.ok:
            return np.nan
        return cell.train_error if side == "train" else cell.test_error

    return err


def _save(fig, path: str) -> str:
    fig.savefig(path, format="png", dpi=100, metadata=_PNG_META)
    plt.close(fig)
    return path


def _iterations_figure(record: RunRecord, err, path: str) -> str:
    cfg = record.config
    fig, ax = plt.subplots(figsize=(6, 4))
    its = list(cfg["iterations"])
    for c in cfg["c_values"]:
        for side, style in (("train", "-o"), ("test", "--s")):
            ys = [err(CellKey("iterations", cfg["sweep_kernel"], c, it, "hinge", "ovr"), side) for it in its]
            ax.plot(its, ys, style, label=f"C={c:g} {side}")
    ax.set_xlabel("iteration budget")
    ax.set_ylabel("error (%)")
    ax.set_title(f"{cfg['sweep_kernel']} kernel: error by iteration budget")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def _grouped_bars(ax, groups: list[str], series: dict[str, list[float]]) -> None:
    x = np.arange(len(groups))
    width = 0.8 / max(len(series), 1)
    for i, (name, values) in enumerate(series.items()):
        ax.bar(x + (i - (len(series) - 1) / 2) * width, values, width, label=name)
    ax.set_xticks(x)
    ax.set_xticklabels(groups)
    ax.set_ylabel("error (%)")
    ax.legend(fontsize=8)


def _kernels_figure(record: RunRecord, err, path: str) -> str:
    cfg = record.config
    fig, ax = plt.subplots(figsize=(7, 4))
    kernels = list(cfg["kernels"])
    series = {}
    for c in cfg["c_values"]:
        for side in ("train", "test"):
            series[f"C={c:g} {side}"] = [
                err(CellKey("kernels", k, c, cfg["fixed_iterations"], "hinge", "ovr"), side) for k in kernels
            ]
    _grouped_bars(ax, kernels, series)
    ax.set_title("error by kernel and penalty")
    fig.tight_layout()
    return _save(fig, path)


def _linear_figure(record: RunRecord, err, path: str) -> str:
    cfg = record.config
    fig, ax = plt.subplots(figsize=(6, 4))
    techniques = list(cfg["techniques"])
    series = {}
    for loss in cfg["losses"]:
        for side in ("train", "test"):
            series[f"{loss} {side}"] = [
                err(CellKey("linear", "linear", cfg["linear_c"], cfg["fixed_iterations"], loss, t), side)
                for t in techniques
            ]
    _grouped_bars(ax, techniques, series)
    ax.set_title(f"linear SVC, C={cfg['linear_c']:g}")
    fig.tight_layout()
    return _save(fig, path)


def render_figures(record: RunRecord, output_dir: str) -> list[str]:
    """Draw a figure for each non-empty table family; return the paths."""
    os.makedirs(output_dir, exist_ok=True)
    cfg = record.config
    err = _lookup(record)
    paths = []
    with plt.rc_context({"svg.hashsalt": "setagger", "font.family": "DejaVu Sans"}):
        if cfg["iterations"]:
            paths.append(_iterations_figure(record, err, os.path.join(output_dir, "iterations.png")))
        if cfg["kernels"]:
            paths.append(_kernels_figure(record, err, os.path.join(output_dir, "kernels.png")))
        if cfg["techniques"] and cfg["losses"]:
            paths.append(_linear_figure(record, err, os.path.join(output_dir, "linear.png")))
    return paths

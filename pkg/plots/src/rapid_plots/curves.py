"""Aggregate per-seed metric CSVs into mean curves with a std band.

Consumes the training harness CSV schema verbatim (header row naming the
columns, one row per iteration).  Rendering is a pure function of the CSV
contents and the plot config: no training state is read or written.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

FRAMES_COLUMN = "frames"


class MissingColumnError(KeyError):
    def __init__(self, column: str, path: str):
        self.column = column
        self.path = path
        super().__init__(f"column {column!r} not found in {path}")


@dataclass
class CurveSpec:
    label: str
    csv_paths: list[str]
    color_index: int | None = None
    smoothing: int = 1

    def __post_init__(self):
        if not self.csv_paths:
            raise ValueError(f"curve {self.label!r} needs at least one CSV")
        if self.smoothing < 1:
            raise ValueError("smoothing window must be >= 1")


@dataclass
class PanelSpec:
    title: str
    curves: list[CurveSpec]
    metric: str = "mean_return_100"
    filename: str | None = None


@dataclass
class CurveData:
    """One aggregated curve: the common frame grid, the mean and the band."""

    frames: np.ndarray
    mean: np.ndarray
    std: np.ndarray | None  # None when only a single seed was given
    n_seeds: int


def read_metric(path: str, metric: str) -> tuple[np.ndarray, np.ndarray]:
    with open(path) as fh:
        header = fh.readline().rstrip("\n").split(",")
        if FRAMES_COLUMN not in header:
            raise MissingColumnError(FRAMES_COLUMN, path)
        if metric not in header:
            raise MissingColumnError(metric, path)
        fi, mi = header.index(FRAMES_COLUMN), header.index(metric)
        frames, values = [], []
        for line in fh:
            if not line.strip():
                continue
            parts = line.split(",")
            v = float(parts[mi])
            if np.isnan(v):
                continue
            frames.append(float(parts[fi]))
            values.append(v)
    return np.array(frames), np.array(values)


def smooth(values: np.ndarray, window: int) -> np.ndarray:
    """Trailing moving average; the first window-1 points use what exists."""
    if window <= 1:
        return values
    out = np.empty_like(values, dtype=float)
    csum = np.cumsum(np.insert(values, 0, 0.0))
    for i in range(len(values)):
        lo = max(0, i - window + 1)
        out[i] = (csum[i + 1] - csum[lo]) / (i + 1 - lo)
    return out


def aggregate_curve(spec: CurveSpec, metric: str) -> CurveData:
    series = []
    for path in spec.csv_paths:
        frames, values = read_metric(path, metric)
        if len(frames) == 0:
            raise ValueError(f"{path} holds no rows for metric {metric!r}")
        series.append((frames, smooth(values, spec.smoothing)))

    grids = [s[0] for s in series]
    if all(np.array_equal(g, grids[0]) for g in grids):
        grid = grids[0]
        mat = np.stack([v for _, v in series])
    else:
        # seeds logged on different frame axes: interpolate to their union
        grid = np.unique(np.concatenate(grids))
        lo = max(g[0] for g in grids)
        hi = min(g[-1] for g in grids)
        grid = grid[(grid >= lo) & (grid <= hi)]
        mat = np.stack([np.interp(grid, f, v) for f, v in series])

    if len(series) == 1:
        warnings.warn(f"curve {spec.label!r} has a single seed; band omitted")
        return CurveData(grid, mat[0], None, 1)
    return CurveData(grid, mat.mean(axis=0), mat.std(axis=0), len(series))


def panel_from_dict(data: dict) -> PanelSpec:
    curves = [CurveSpec(**c) for c in data.get("curves", [])]
    if not curves:
        raise ValueError(f"panel {data.get('title')!r} has no curves")
    return PanelSpec(
        title=data.get("title", "untitled"),
        curves=curves,
        metric=data.get("metric", "mean_return_100"),
        filename=data.get("filename"),
    )


def load_plot_config(path: str) -> list[PanelSpec]:
    with open(path) as fh:
        data = json.load(fh)
    panels = data.get("panels")
    if not panels:
        raise ValueError(f"{path}: plot config has no panels")
    return [panel_from_dict(p) for p in panels]


def render_panel(panel: PanelSpec, out_dir: str) -> tuple[str, dict[str, CurveData]]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5.0, 3.4), dpi=140)
    cycle = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    aggregated: dict[str, CurveData] = {}
    for i, spec in enumerate(panel.curves):
        data = aggregate_curve(spec, panel.metric)
        aggregated[spec.label] = data
        color = cycle[(spec.color_index if spec.color_index is not None else i) % len(cycle)]
        ax.plot(data.frames, data.mean, label=spec.label, color=color, linewidth=1.4)
        if data.std is not None:
            ax.fill_between(
                data.frames, data.mean - data.std, data.mean + data.std, color=color, alpha=0.25, linewidth=0
            )
    ax.set_xlabel("frames")
    ax.set_ylabel(panel.metric)
    ax.set_title(panel.title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    import os

    name = panel.filename or f"{panel.title.lower().replace(' ', '_')}.png"
    path = os.path.join(out_dir, name)
    fig.savefig(path)
    plt.close(fig)
    return path, aggregated


def render(config_path: str, out_dir: str) -> dict[str, tuple[str, dict[str, CurveData]]]:
    import os

    os.makedirs(out_dir, exist_ok=True)
    results = {}
    for panel in load_plot_config(config_path):
        results[panel.title] = render_panel(panel, out_dir)
    return results

"""Learning-curve figures (mean and std band across seeds) from CSV logs."""

from .curves import (
    CurveData,
    CurveSpec,
    MissingColumnError,
    PanelSpec,
    aggregate_curve,
    load_plot_config,
    read_metric,
    render,
    render_panel,
    smooth,
)

__all__ = [
    "CurveData",
    "CurveSpec",
    "MissingColumnError",
    "PanelSpec",
    "aggregate_curve",
    "load_plot_config",
    "read_metric",
    "render",
    "render_panel",
    "smooth",
]

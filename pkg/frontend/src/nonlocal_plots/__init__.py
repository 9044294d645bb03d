"""Figure rendering for solver CSV artifacts."""

from .render import (PANEL_KINDS, PanelSpec, RenderResult, discover_panels,
                     fit_loglog_slope, main, render)

__version__ = "0.1.0"

__all__ = ["PANEL_KINDS", "PanelSpec", "RenderResult", "discover_panels",
           "fit_loglog_slope", "main", "render", "__version__"]

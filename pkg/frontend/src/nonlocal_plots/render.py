"""Render figure panels from solver artifact directories.

A completed run directory contains ``manifest.json`` plus CSV artifacts
(``eta_<tag>_optimal_q0.csv``, ``eta_<tag>_terminal.csv``, ...,
``sweep_summary.csv``). This module is a pure artifact-to-image transform:
it never recomputes simulation data, it only reads the CSV files named by
the manifest and draws them. Each requested panel is emitted as both PNG
and SVG.

Panel kinds
-----------
control
    Optimal initial datum against the tracking target, one column per
    kernel reach.
terminal
    Terminal density and its convolution overlaid, one column per kernel
    reach.
objective-decay
    Objective value per accepted iteration on a log scale.
convergence
    Log-log plot of the summary distances against the kernel reach with
    the least-squares slope annotated.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

__all__ = ["PanelSpec", "RenderResult", "PANEL_KINDS", "discover_panels",
           "fit_loglog_slope", "render", "main"]

PANEL_KINDS = ("control", "terminal", "convergence", "objective-decay")

# deterministic SVG output: fixed hash salt, no embedded creation date
matplotlib.rcParams["svg.hashsalt"] = "nonlocal-plots"
_SAVEFIG_KW = {"dpi": 150, "metadata": {"Date": None}}


class PanelError(RuntimeError):
    """A panel could not be rendered from the available artifacts."""


@dataclass(frozen=True)
class PanelSpec:
    """One figure to draw: input CSVs, kind, labels, and the output stem."""

    kind: str
    inputs: tuple[Path, ...]
    xlabel: str
    ylabel: str
    output_stem: Path
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in PANEL_KINDS:
            raise ValueError(f"unknown panel kind {self.kind!r}")
        missing = [str(p) for p in self.inputs if not p.exists()]
        if missing:
            raise PanelError(f"{self.kind}: missing artifacts {missing}")


@dataclass
class RenderResult:
    written: list[Path] = field(default_factory=list)
    skipped: dict[str, str] = field(default_factory=dict)
    annotations: dict[str, float] = field(default_factory=dict)


def _read_csv(path: Path) -> dict[str, np.ndarray]:
    data = np.genfromtxt(path, delimiter=",", names=True)
    if data.dtype.names is None:
        raise PanelError(f"{path}: no header row")
    return {name: np.atleast_1d(data[name]) for name in data.dtype.names}


def _require(cols: dict[str, np.ndarray], names: tuple[str, ...], path: Path):
    missing = [n for n in names if n not in cols]
    if missing:
        raise PanelError(f"{path}: missing columns {missing}, "
                         f"have {sorted(cols)}")


def load_manifest(manifest_path: str | Path) -> tuple[Path, dict]:
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / "manifest.json"
    try:
        data = json.loads(manifest_path.read_text())
    except FileNotFoundError:
        raise PanelError(f"manifest not found: {manifest_path}") from None
    if data.get("status") not in ("complete", "partial"):
        raise PanelError(f"manifest status is {data.get('status')!r}, "
                         "need a completed run")
    return manifest_path.parent, data


def _eta_tags(root: Path, manifest: dict, suffix: str) -> list[str]:
    tags = []
    for name in manifest.get("artifacts", []):
        if name.startswith("eta_") and name.endswith(suffix):
            tag = name[: -len(suffix) - 1]
            if (root / name).exists():
                tags.append(tag)
    return sorted(set(tags), key=lambda t: float(t[4:].replace("p", ".")))


def _tag_label(tag: str) -> str:
    return f"eta = {tag[4:].replace('p', '.')}"


def discover_panels(root: Path, manifest: dict, kinds: list[str],
                    output_dir: Path) -> list[PanelSpec]:
    """Build one PanelSpec per requested kind from the manifest's artifacts."""
    specs = []
    for kind in kinds:
        if kind == "control":
            tags = _eta_tags(root, manifest, "optimal_q0.csv")
            inputs = tuple(root / f"{t}_{n}.csv" for t in tags
                           for n in ("optimal_q0", "target"))
            if not tags:
                raise PanelError("control: no optimal_q0 artifacts in manifest")
            specs.append(PanelSpec(kind, inputs, "x", "q",
                                   output_dir / "control",
                                   tuple(_tag_label(t) for t in tags)))
        elif kind == "terminal":
            tags = _eta_tags(root, manifest, "terminal.csv")
            inputs = tuple(root / f"{t}_{n}.csv" for t in tags
                           for n in ("terminal", "terminal_W"))
            if not tags:
                raise PanelError("terminal: no terminal artifacts in manifest")
            specs.append(PanelSpec(kind, inputs, "x", "q, W",
                                   output_dir / "terminal",
                                   tuple(_tag_label(t) for t in tags)))
        elif kind == "objective-decay":
            tags = _eta_tags(root, manifest, "iterations.csv")
            inputs = tuple(root / f"{t}_iterations.csv" for t in tags)
            if not tags:
                raise PanelError("objective-decay: no iteration logs in manifest")
            specs.append(PanelSpec(kind, inputs, "iteration", "objective",
                                   output_dir / "objective_decay",
                                   tuple(_tag_label(t) for t in tags)))
        elif kind == "convergence":
            specs.append(PanelSpec(kind, (root / "sweep_summary.csv",),
                                   "eta", "L1 distance to local solution",
                                   output_dir / "convergence"))
        else:
            raise PanelError(f"unknown panel kind {kind!r}")
    return specs


def fit_loglog_slope(eta: np.ndarray, dist: np.ndarray) -> float:
    """Least-squares slope of log(dist) against log(eta)."""
    return float(np.polyfit(np.log(eta), np.log(dist), 1)[0])


def _save(fig, stem: Path, result: RenderResult):
    stem.parent.mkdir(parents=True, exist_ok=True)
    for ext in ("png", "svg"):
        out = stem.with_suffix(f".{ext}")
        fig.savefig(out, **_SAVEFIG_KW)
        result.written.append(out)
    plt.close(fig)


def _render_per_eta(spec: PanelSpec, result: RenderResult):
    pairs = 2 if spec.kind in ("control", "terminal") else 1
    n = len(spec.inputs) // pairs
    fig, axes = plt.subplots(1, n, figsize=(3.2 * n, 2.8), squeeze=False,
                             sharey=True)
    for i, ax in enumerate(axes[0]):
        if spec.kind == "control":
            q0 = _read_csv(spec.inputs[2 * i])
            qd = _read_csv(spec.inputs[2 * i + 1])
            _require(q0, ("x", "q0"), spec.inputs[2 * i])
            _require(qd, ("x", "q_d"), spec.inputs[2 * i + 1])
            ax.plot(q0["x"], q0["q0"], label="optimal q0")
            ax.plot(qd["x"], qd["q_d"], "--", label="target")
        elif spec.kind == "terminal":
            q = _read_csv(spec.inputs[2 * i])
            w = _read_csv(spec.inputs[2 * i + 1])
            _require(q, ("x", "q"), spec.inputs[2 * i])
            _require(w, ("x", "W"), spec.inputs[2 * i + 1])
            ax.plot(q["x"], q["q"], label="q(T)")
            ax.plot(w["x"], w["W"], "--", label="W(T)")
        else:  # objective-decay
            log = _read_csv(spec.inputs[i])
            _require(log, ("iter", "objective"), spec.inputs[i])
            ax.semilogy(log["iter"], log["objective"])
        ax.set_title(spec.labels[i] if i < len(spec.labels) else "")
        ax.set_xlabel(spec.xlabel)
    axes[0][0].set_ylabel(spec.ylabel)
    if spec.kind in ("control", "terminal"):
        axes[0][-1].legend(loc="best", fontsize=8)
    fig.tight_layout()
    _save(fig, spec.output_stem, result)


def _render_convergence(spec: PanelSpec, result: RenderResult):
    cols = _read_csv(spec.inputs[0])
    _require(cols, ("eta", "l1_W_vs_local"), spec.inputs[0])
    eta, dist = cols["eta"], cols["l1_W_vs_local"]
    if len(eta) < 2:
        raise PanelError(f"{spec.inputs[0]}: need at least two rows for a fit")
    slope = fit_loglog_slope(eta, dist)
    result.annotations["convergence_slope"] = slope
    fig, ax = plt.subplots(figsize=(4.0, 3.0))
    ax.loglog(eta, dist, "o-")
    fit = np.exp(np.polyval(np.polyfit(np.log(eta), np.log(dist), 1),
                            np.log(eta)))
    ax.loglog(eta, fit, "--", label=f"slope = {slope:.17g}")
    ax.set_xlabel(spec.xlabel)
    ax.set_ylabel(spec.ylabel)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    _save(fig, spec.output_stem, result)


def render(manifest_path: str | Path, panels: list[str] | None = None,
           output_dir: str | Path | None = None) -> RenderResult:
    """Render the requested panels for one completed run directory.

    Parameters
    ----------
    manifest_path : path to manifest.json or to the run directory.
    panels : panel kinds to draw (subset of PANEL_KINDS); an empty list is a
        no-op. None draws every kind.
    output_dir : where images go; defaults to ``<run dir>/figures``.

    Returns
    -------
    RenderResult with the written image paths, per-panel skip reasons, and
    numeric annotations (the convergence panel records its fitted slope
    under ``"convergence_slope"``).
    """
    root, manifest = load_manifest(manifest_path)
    kinds = list(PANEL_KINDS) if panels is None else list(panels)
    out = Path(output_dir) if output_dir is not None else root / "figures"
    result = RenderResult()
    for kind in kinds:
        try:
            (spec,) = discover_panels(root, manifest, [kind], out)
            if kind == "convergence":
                _render_convergence(spec, result)
            else:
                _render_per_eta(spec, result)
        except (PanelError, ValueError, OSError) as e:
            result.skipped[kind] = str(e)
            warnings.warn(f"skipping panel {kind!r}: {e}", stacklevel=2)
    return result


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(
        prog="nonlocal-plots",
        description="Render figure panels from a completed run directory.")
    ap.add_argument("manifest", help="manifest.json or run directory")
    ap.add_argument("--panels", nargs="*", default=None, choices=PANEL_KINDS,
                    help="panel kinds to draw (default: all)")
    ap.add_argument("--output-dir", default=None)
    args = ap.parse_args(argv)
    if args.panels is not None and len(args.panels) == 0:
        return 0
    try:
        result = render(args.manifest, args.panels, args.output_dir)
    except PanelError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    for p in result.written:
        print(p)
    for kind, why in result.skipped.items():
        print(f"skipped {kind}: {why}", file=sys.stderr)
    return 0 if result.written or not result.skipped else 1


if __name__ == "__main__":
    raise SystemExit(main())

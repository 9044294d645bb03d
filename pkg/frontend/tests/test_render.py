import json
import subprocess
import sys

import numpy as np
import pytest

from nonlocal_plots import PANEL_KINDS, fit_loglog_slope, main, render
from nonlocal_plots.render import PanelError, load_manifest


def write_csv(path, header, cols):
    rows = np.column_stack(cols)
    lines = [header] + [",".join(f"{v:.17g}" for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


@pytest.fixture
def run_dir(tmp_path):
    """Hand-built artifact directory mimicking a completed eta sweep."""
    root = tmp_path / "abc123"
    root.mkdir()
    x = np.linspace(-0.6, 1.6, 23)
    artifacts = []
    for tag in ("eta_0p1", "eta_0p4"):
        for name, col in (("optimal_q0", "q0"), ("target", "q_d"),
                          ("terminal", "q"), ("terminal_W", "W")):
            f = root / f"{tag}_{name}.csv"
            write_csv(f, f"x,{col}", [x, np.abs(np.sin(x + len(name)))])
            artifacts.append(f.name)
        it = np.arange(6)
        f = root / f"{tag}_iterations.csv"
        write_csv(f, "iter,objective,step,backtracks",
                  [it, np.exp(-it), np.ones(6), np.zeros(6)])
        artifacts.append(f.name)
    eta = np.array([0.4, 0.2, 0.1, 0.05])
    dist = 0.7 * eta ** 0.8 * (1 + 0.05 * np.sin(eta * 40))
    f = root / "sweep_summary.csv"
    write_csv(f, "eta,final_objective,l1_q0_vs_smallest_eta,l1_W_vs_local",
              [eta, dist ** 2, np.abs(eta - eta[-1]), dist])
    artifacts.append(f.name)
    (root / "manifest.json").write_text(json.dumps(
        {"status": "complete", "command": "sweep-eta", "artifacts": artifacts}))
    return root


def test_render_all_panels_writes_png_and_svg(run_dir):
    res = render(run_dir)
    assert not res.skipped
    stems = {p.stem for p in res.written}
    assert stems == {"control", "terminal", "convergence", "objective_decay"}
    exts = {p.suffix for p in res.written}
    assert exts == {".png", ".svg"}
    assert len(res.written) == 2 * len(PANEL_KINDS)
    for p in res.written:
        assert p.stat().st_size > 0


def test_convergence_slope_matches_summary_fit(run_dir):
    # acceptance: annotated slope equals an independent fit of the summary CSV
    res = render(run_dir, ["convergence"])
    rows = np.genfromtxt(run_dir / "sweep_summary.csv", delimiter=",",
                         names=True)
    expect = float(np.polyfit(np.log(rows["eta"]),
                              np.log(rows["l1_W_vs_local"]), 1)[0])
    got = res.annotations["convergence_slope"]
    ok = abs(got - expect) <= 1e-12
    print(f"\n[{'PASS' if ok else 'FAIL'}] criterion 8 (plot pipeline): "
          f"annotated slope {got!r} vs summary fit {expect!r}, "
          f"|diff| <= 1e-12")
    assert ok
    # the slope is embedded verbatim in the vector output
    svg = next(p for p in res.written if p.suffix == ".svg")
    assert f"{got:.17g}"[:12] in svg.read_text()


def test_no_recomputation_inputs_untouched(run_dir):
    before = {f.name: f.read_bytes() for f in run_dir.glob("*.csv")}
    render(run_dir)
    after = {f.name: f.read_bytes() for f in run_dir.glob("*.csv")}
    assert before == after


def test_empty_panel_selection_is_noop(run_dir, capsys):
    assert main([str(run_dir), "--panels"]) == 0
    assert not (run_dir / "figures").exists()


def test_missing_artifact_skips_that_panel_only(run_dir):
    (run_dir / "sweep_summary.csv").unlink()
    with pytest.warns(UserWarning, match="convergence"):
        res = render(run_dir)
    assert set(res.skipped) == {"convergence"}
    assert {p.stem for p in res.written} == {"control", "terminal",
                                             "objective_decay"}


def test_all_panels_failing_gives_nonzero_exit(tmp_path, capsys):
    root = tmp_path / "empty"
    root.mkdir()
    (root / "manifest.json").write_text(json.dumps(
        {"status": "complete", "artifacts": []}))
    with pytest.warns(UserWarning):
        code = main([str(root)])
    assert code == 1


def test_incomplete_manifest_rejected(tmp_path):
    root = tmp_path / "r"
    root.mkdir()
    (root / "manifest.json").write_text(json.dumps({"status": "incomplete"}))
    with pytest.raises(PanelError):
        load_manifest(root)
    assert main([str(root)]) == 1


def test_missing_column_reported(run_dir):
    bad = run_dir / "sweep_summary.csv"
    bad.write_text("eta,final_objective\n0.4,1\n0.1,0.5\n")
    with pytest.warns(UserWarning, match="l1_W_vs_local"):
        res = render(run_dir, ["convergence"])
    assert "convergence" in res.skipped


def test_svg_output_deterministic(run_dir, tmp_path):
    a = render(run_dir, ["terminal"], tmp_path / "a")
    b = render(run_dir, ["terminal"], tmp_path / "b")
    sa = next(p for p in a.written if p.suffix == ".svg")
    sb = next(p for p in b.written if p.suffix == ".svg")
    assert sa.read_bytes() == sb.read_bytes()


def test_fit_loglog_slope_exact_power_law():
    eta = np.array([0.4, 0.2, 0.1, 0.05])
    assert fit_loglog_slope(eta, 3.0 * eta ** 0.75) == pytest.approx(
        0.75, abs=1e-12)


def test_end_to_end_with_solver_cli(tmp_path):
    """Full pipeline: solver sweep via its CLI, then render the artifacts."""
    pytest.importorskip("nonlocal_control")
    cfg = tmp_path / "exp.ini"
    cfg.write_text(f"""
[experiment]
scenario = track_qd3
objective = J_q
eta_list = 0.4 0.1
q_max = 1
seed = 3
output_dir = {tmp_path / 'runs'}
initial_datum = indicator

[grid]
x_lo = -0.6
x_hi = 1.6
dx = {2.2 / 111}
T = 0.05
dt_hint = 0.002

[optimizer]
max_iters = 10
""")
    proc = subprocess.run(
        [sys.executable, "-m", "nonlocal_control.cli", "sweep-eta", str(cfg)],
        capture_output=True, text=True, check=True)
    root = proc.stdout.strip().splitlines()[-1]
    res = render(root)
    assert not res.skipped
    assert len(res.written) == 2 * len(PANEL_KINDS)
    assert "convergence_slope" in res.annotations

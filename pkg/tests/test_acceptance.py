"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Criterion 6 runs at two resolutions; the full-resolution variant carries the
`slow` marker so it can be deselected with `-m "not slow"` when iterating.
"""

import numpy as np
import pytest

from nonlocal_control import (Control, ObjectiveSpec, OptimizerConfig, Target,
                              build_grid, build_kernel, gradient,
                              indicator_datum, linear_velocity, make_target,
                              mass, nonlocal_direct, nonlocal_fast, optimize,
                              project, scheme_params, solve_forward,
                              solve_local, step)

V = linear_velocity()


def report(name, ok, detail=""):
    print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


def setup(dx, T, eta, q_max):
    g0 = build_grid(-0.6, 1.6, dx, T, 1e-3)
    kernel = build_kernel(g0, eta)
    params, grid = scheme_params(g0, kernel, V, q_max)
    return grid, kernel, params


def test_criterion_1_adjoint_exactness():
    rng = np.random.default_rng(100)
    worst = 0.0
    for kind in ("J_W", "J_q"):
        for eta in (0.5, 0.1, 0.01):
            for q_max in (1.0, 4.0):
                grid, kernel, params = setup(2.2 / 121, 0.1, eta, q_max)
                target = make_target("ramp", grid)
                spec = ObjectiveSpec(kind, target, kernel)
                q0 = rng.uniform(0.1, 0.9, grid.n_cells) * q_max
                idx = rng.choice(grid.n_cells, 25, replace=False)
                rep = gradient(Control(q0=q0, lower=0, upper=q_max), spec,
                               grid, kernel, params, V, fd_indices=idx)
                worst = max(worst, rep.max_rel_err)
    report("criterion 1 (adjoint vs finite differences, 12 combos)",
           worst <= 1e-5, f"max rel err {worst:.3e} <= 1e-5")


def test_criterion_2_max_principle():
    rng = np.random.default_rng(200)
    grid, kernel, params = setup(2.2 / 111, 0.1, 0.05, 1.0)
    lo, hi = 0.0, 0.0
    for _ in range(100):
        q0 = rng.uniform(0, 1, grid.n_cells)
        traj = solve_forward(Control(q0=q0, lower=0, upper=1), grid, kernel,
                             params, V, validate=False)
        lo = min(lo, float(traj.q.min()))
        hi = max(hi, float(traj.q.max()))
    ok = lo >= -1e-9 and hi <= 1.0 + 1e-9
    report("criterion 2 (discrete max principle, 100 random data)", ok,
           f"range [{lo:.3e}, {hi:.17g}]")


def test_criterion_3_kernel_and_operator_identities():
    rng = np.random.default_rng(300)
    grid = build_grid(-0.6, 1.6, 2.2 / 121, 0.1)
    worst_sum, worst_op = 0.0, 0.0
    for eta in (0.5, 0.1, 0.05, 0.01):
        kernel = build_kernel(grid, eta)
        m = np.arange(grid.n_cells)
        closed = 1 - np.exp(-(m + 1) * grid.dx / eta)
        worst_sum = max(worst_sum,
                        float(np.max(np.abs(np.cumsum(kernel.gamma) - closed))))
        for _ in range(250):
            q = rng.uniform(0, 1, grid.n_cells)
            Wd = nonlocal_direct(q, kernel)
            Wf = nonlocal_fast(q, kernel)
            rel = np.max(np.abs(Wf - Wd)) / max(np.max(np.abs(Wd)), 1e-300)
            worst_op = max(worst_op, float(rel))
    ok = worst_sum <= 1e-12 and worst_op <= 1e-11
    report("criterion 3 (kernel/operator identities, 1000 rows)", ok,
           f"partial-sum err {worst_sum:.3e} <= 1e-12, "
           f"fast-vs-direct {worst_op:.3e} <= 1e-11")


def test_criterion_4_interior_mass_conservation():
    rng = np.random.default_rng(400)
    grid, kernel, params = setup(2.2 / 121, 0.02, 0.1, 1.0)
    q = np.zeros(grid.n_cells)
    q[40:80] = rng.uniform(0, 1, 40)
    worst = 0.0
    for _ in range(grid.N):
        q_next = step(q, kernel, params, grid, V)
        if max(q[1], q[-2], q_next[1], q_next[-2]) == 0.0:
            drift = abs(mass(q_next, grid) - mass(q, grid)) / abs(mass(q, grid))
            worst = max(worst, drift)
        q = q_next
    report("criterion 4 (interior mass conservation)", worst <= 1e-12,
           f"max per-step relative drift {worst:.3e} <= 1e-12")


def test_criterion_5_singular_limit_trend():
    etas = [0.4, 0.2, 0.1, 0.05, 0.025]
    dists = []
    for eta in etas:
        grid, kernel, params = setup(0.005, 0.25, eta, 1.0)
        q0 = indicator_datum(grid)
        traj = solve_forward(Control(q0=q0, lower=0, upper=1), grid, kernel,
                             params, V)
        W = nonlocal_fast(traj.terminal, kernel)
        local = solve_local(q0, grid, V, q_max=1.0, T=0.25)
        dists.append(grid.dx * float(np.sum(np.abs(W - local.terminal))))
    decreasing = all(a > b for a, b in zip(dists, dists[1:]))
    slope = float(np.polyfit(np.log(etas), np.log(dists), 1)[0])
    ok = decreasing and 0.35 <= slope <= 1.2
    report("criterion 5 (singular-limit trend)", ok,
           f"L1 distances {[f'{d:.4f}' for d in dists]}, "
           f"log-log slope {slope:.3f} in [0.35, 1.2]")


def _tracking_runs(dx, max_iters):
    grid, kernel, params = setup(dx, 0.5, 0.01, 1.0)
    finals = {}
    for scen in ("nonlocal_solution", "indicator"):
        target = make_target(scen, grid, kernel, params, V)
        spec = ObjectiveSpec("J_q", target, kernel)
        _, log = optimize(spec, OptimizerConfig(max_iters=max_iters), grid,
                          kernel, params, V)
        finals[scen] = (log.objectives[0], log.objectives[-1])
    return finals


def _check_criterion_6(finals, label):
    init2, final2 = finals["nonlocal_solution"]
    init1, final1 = finals["indicator"]
    reachable = final2 <= 1e-3 * init2
    separated = final1 >= 10 * final2
    report(f"criterion 6 (tracking reachability, {label})",
           reachable and separated,
           f"reachable ratio {final2 / init2:.3e} <= 1e-3, "
           f"unreachable/reachable {final1 / final2:.3e} >= 10")


def test_criterion_6_tracking_half_resolution():
    _check_criterion_6(_tracking_runs(0.005, 500), "dx=0.005")


@pytest.mark.slow
def test_criterion_6_tracking_full_resolution():
    _check_criterion_6(_tracking_runs(0.0025, 500), "dx=0.0025")


def test_criterion_7_optimizer_contract():
    rng = np.random.default_rng(700)
    grid, kernel, params = setup(2.2 / 41, 0.05, 0.2, 1.0)
    q_d = rng.uniform(-0.5, 1.5, grid.n_cells)
    spec = ObjectiveSpec("J_q",
                         Target("custom_csv", project(q_d, 0, 1)), kernel)
    seen = []

    def obj(x):
        seen.append(x.copy())
        return 0.5 * grid.dx * float(np.sum((x - q_d) ** 2))

    best, log = optimize(spec, OptimizerConfig(max_iters=200, grad_tol=1e-12,
                                               obj_tol=0.0), grid, kernel,
                         params, V, objective_fn=obj,
                         gradient_fn=lambda x: grid.dx * (x - q_d))
    feasible = all(np.all(x >= -1e-15) and np.all(x <= 1 + 1e-15) for x in seen)
    objs = log.objectives
    monotone = all(b < a for a, b in zip(objs, objs[1:]))
    err = float(np.max(np.abs(best.q0 - project(q_d, 0.0, 1.0))))
    ok = feasible and monotone and err <= 1e-8
    report("criterion 7 (optimizer contract + quadratic harness)", ok,
           f"feasible={feasible}, monotone={monotone}, "
           f"distance to projected target {err:.3e} <= 1e-8")

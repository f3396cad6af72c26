import os
import time

import numpy as np
import pytest

from polyreach import reach, sim
from polyreach.cli import load_system
from polyreach.conic import Settings
from polyreach.poly import Polynomial
from polyreach.synth import (ControllerPoly, build_synthesis_sdp,
                             extract_controller, solve_synthesis)

SYSTEMS_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)),
                           os.pardir, "systems")

# acceptance tests append their CRITERION lines here; echoed after the run
CRITERION_LINES = []


def pytest_terminal_summary(terminalreporter):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)


def system_path(name: str) -> str:
    return os.path.join(SYSTEMS_DIR, name + ".json")


@pytest.fixture(scope="session")
def di_assets():
    """Double-integrator pipeline shared by module and acceptance tests:
    order-2 synthesis, degree-1 controller, 20x20 controllability grid,
    and the order-4 closed-loop reach certificate."""
    spec = load_system(system_path("double_integrator"))
    t0 = time.time()
    sprob = build_synthesis_sdp(spec, 2)
    sres = solve_synthesis(sprob)
    ctrl = extract_controller(sres.z, spec.n, spec.m, 1,
                              input_scaling=spec.input_scaling)
    synth_seconds = time.time() - t0

    t0 = time.time()
    grid = sim.grid_verify(spec, ctrl, [20, 20], 10_000)
    grid_seconds = time.time() - t0

    t0 = time.time()
    closed = reach.compose_closed_loop(spec, ctrl)
    rprob = reach.build_reach_sdp(closed, 4)
    rres = reach.solve_reach(rprob)
    reach_seconds = time.time() - t0

    return {"spec": spec, "synth_problem": sprob, "synth_result": sres,
            "controller": ctrl, "grid": grid, "closed": closed,
            "reach_problem": rprob, "reach_result": rres,
            "synth_seconds": synth_seconds, "grid_seconds": grid_seconds,
            "reach_seconds": reach_seconds}


@pytest.fixture(scope="session")
def brockett_extended_assets():
    """Order-4 synthesis with a degree-4 controller for the nonholonomic
    integrator. Expensive; only the extended benchmarks consume it."""
    spec = load_system(system_path("brockett"))
    t0 = time.time()
    prob = build_synthesis_sdp(spec, 4)
    res = solve_synthesis(prob, Settings(time_budget=3000.0))
    ctrl = extract_controller(res.z, spec.n, spec.m, 4,
                              input_scaling=spec.input_scaling)
    return {"spec": spec, "problem": prob, "result": res, "controller": ctrl,
            "synth_seconds": time.time() - t0}


@pytest.fixture(scope="session")
def vdp_assets():
    """Reversed-time Van der Pol hierarchy at orders 5..7 under fixed time
    budgets, plus the 40x40 simulated controllability grid."""
    spec = load_system(system_path("vanderpol"))
    aspec = reach.AutonomousSpec(spec.n, spec.f, spec.X, spec.Z,
                                 name=spec.name)
    budgets = {5: 110.0, 6: 75.0, 7: 70.0}
    t0 = time.time()
    problems, results = {}, {}
    for r, budget in budgets.items():
        problems[r] = reach.build_reach_sdp(aspec, r)
        results[r] = reach.solve_reach(problems[r],
                                       Settings(time_budget=budget))
    zero_ctrl = ControllerPoly(2, 1, 0, [Polynomial(2, {})],
                               {"scale": [1.0], "shift": [0.0]})
    grid = sim.grid_verify(spec, zero_ctrl, [40, 40], 10_000)
    wall_seconds = time.time() - t0
    reached_mask = np.array([o == "reached" for o in grid.outcomes])
    return {"spec": spec, "aspec": aspec, "problems": problems,
            "results": results, "budgets": budgets, "grid": grid,
            "reached_mask": reached_mask, "wall_seconds": wall_seconds}

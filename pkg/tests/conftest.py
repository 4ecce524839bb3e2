import dataclasses
import time
from pathlib import Path

import numpy as np
import pytest

from batchdist.integrator import simulate
from batchdist.reference import reference_scenario
from batchdist.workflow.config import load_config, parse_property_xml

DATA = Path(__file__).resolve().parents[1] / "src" / "batchdist" / "data"
PLANT_XML = DATA / "benchmark_scenarios.xml"
PROPERTY_XML = DATA / "properties_butanol_propanol_water.xml"

_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def mixture():
    return parse_property_xml(PROPERTY_XML)


@pytest.fixture(scope="session")
def bundle():
    return load_config(PLANT_XML, PROPERTY_XML)


@pytest.fixture(scope="session")
def scenarios(bundle):
    return {sc.id: sc for sc in bundle.scenarios}


@pytest.fixture(scope="session")
def scenario_runs(scenarios):
    """All bundled scenarios simulated once, with warm (compiled) kernels."""
    simulate(reference_scenario(horizon=10.0))
    runs = {}
    for sid, sc in scenarios.items():
        t0 = time.perf_counter()
        result = simulate(sc)
        runs[sid] = (result, time.perf_counter() - t0)
    return runs


def state_matrix(records):
    """Temperatures, stage compositions and buffer composition per record."""
    return np.array([np.concatenate([r.T, r.x.ravel(), r.x_B]) for r in records])


@pytest.fixture(scope="session")
def reference_refinement():
    """Reference problem at dt_max, dt_max/2 and dt_max/100 (the oracle)."""
    dt = reference_scenario().integrator.dt_max
    out = {}
    for label, step in (("coarse", dt), ("half", dt / 2), ("oracle", dt / 100)):
        out[label] = simulate(reference_scenario(dt_max=step))
    return out


def relative_defect(a, b):
    """Max deviation per signal, normalised by the signal's peak magnitude."""
    return float(np.max(np.abs(a - b) / np.max(np.abs(b), axis=0)))


@pytest.fixture
def criterion(request):
    """Record an acceptance verdict: prints one line and asserts it."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number, title, passed, detail=""):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title}"
        if detail:
            line += f" ({detail})"
        lines.append(line)
        print(line)
        assert passed, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


def with_integrator(scenario, **changes):
    return dataclasses.replace(scenario, integrator=dataclasses.replace(scenario.integrator, **changes))

import numpy as np
import pytest

from paraexp import fitwave
from paraexp.steppers import estimate_omega_max


def random_cavity_state(sys, seed=0):
    """Random ``[h; e]`` with the PEC-masked e entries set to zero."""
    ops = sys.structure
    u = np.random.default_rng(seed).standard_normal(sys.n)
    u[ops.n_h:][ops.pec_mask] = 0.0
    return u


@pytest.fixture(scope="session")
def cavity_5x5():
    sys = fitwave.build_wave_system(fitwave.FitGrid(5, 5, 2)).homogeneous()
    omega = estimate_omega_max(sys.a, sys.structure.mass(), iters=200)
    return sys, random_cavity_state(sys, 1), omega


# -- acceptance bookkeeping --------------------------------------------------

CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion check")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when != "call" and not report.failed:
        return
    n, title = mark.args
    entry = CRITERIA.setdefault(n, {"title": title, "ok": True, "notes": []})
    entry["ok"] &= report.passed
    entry["notes"] += [f"{k}={v}" for k, v in item.user_properties]
    if report.failed:
        entry["notes"].append(f"FAILED {item.name}")


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        c = CRITERIA[n]
        status = "PASS" if c["ok"] else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {n}: {c['title']}")
        for note in c["notes"]:
            terminalreporter.write_line(f"         {note}")

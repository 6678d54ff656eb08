import numpy as np
import pytest
from hypothesis import settings

from narxsoc.data import build_regressors, fit_normalizer
from narxsoc.ecm import CellParams, NoiseSpec, generate_profile, simulate_cycle

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


@pytest.fixture(scope="session")
def urban_log():
    return simulate_cycle(CellParams(), generate_profile("urban", 400, 11), NoiseSpec(seed=11), 0.9, "urban-11")


@pytest.fixture(scope="session")
def highway_log():
    return simulate_cycle(CellParams(), generate_profile("highway", 300, 12), NoiseSpec(seed=12), 0.8, "highway-12")


@pytest.fixture(scope="session")
def small_dataset(urban_log, highway_log):
    norm = fit_normalizer([urban_log, highway_log])
    return build_regressors([urban_log, highway_log], 3, norm), norm


@pytest.fixture(scope="session")
def acceptance(request):
    """Record one pass/fail line per acceptance criterion; printed at the end of the run."""
    lines = request.config.__dict__.setdefault("_acceptance_lines", [])

    def record(number, ok, detail):
        status = ok if isinstance(ok, str) else ("PASS" if ok else "FAIL")
        lines.append(f"criterion {number:>2}: {status}  {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.__dict__.get("_acceptance_lines")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)

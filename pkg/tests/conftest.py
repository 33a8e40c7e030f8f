import pytest

from optomech_noise import budget
from optomech_noise.params import FrequencyGrid, load_config
from optomech_noise.scenario import builtin_path

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def baseline_path():
    return builtin_path("baseline")


@pytest.fixture(scope="session")
def scenario_path():
    return builtin_path("baseline_scenario")


@pytest.fixture(scope="session")
def baseline(baseline_path):
    cfg, model, noise, ops = load_config(baseline_path)
    return cfg, model, noise, ops[0]


@pytest.fixture(scope="session")
def grid():
    return FrequencyGrid.logspace()


@pytest.fixture(scope="session")
def baseline_budget(baseline, grid):
    cfg, model, noise, op = baseline
    return budget.model_budget(cfg, model, noise, op, grid)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

import numpy as np
import pytest

from hybriddefense.config import config_from_dict
from hybriddefense.pipeline import run_stage

# a quick configuration: real stage code end to end, small budgets everywhere
SMALL = {
    "seed": 3,
    "data": {"synthetic": {"samples_per_class": 200}},
    "cnn": {"epochs": 1, "feature_dim": 32},
    "nnmf": {"k": 8, "iters": 30, "project_iters": 30},
    "classifier": {"epochs": 3, "hidden": 32},
    "denoiser": {"epochs": 2, "hidden": 64},
    "schedule": {"m_passes": 2},
    "attack": {"n_iters": 8},
}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_cfg():
    return config_from_dict(SMALL)


@pytest.fixture(scope="session")
def small_run(small_cfg, tmp_path_factory):
    """Output directory of one full small pipeline run plus its report."""
    out = tmp_path_factory.mktemp("small_run")
    report = run_stage("all", small_cfg, out)
    return out, report


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE = []


def report_criterion(number, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
    ACCEPTANCE.append((number, line))
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)

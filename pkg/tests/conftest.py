import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("repro", derandomize=True, print_blob=True)
settings.load_profile("repro")

from togl.data import SINC, gen_samples
from togl.dictionary import build_rbf_dictionary, packing_centers

# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


def rbf_setup(m=200, n=40, sigma=0.1, seed=0, eta=1.0, normalize=False):
    z = gen_samples(SINC, m, sigma, seed)
    d = build_rbf_dictionary(packing_centers(n, -np.pi, np.pi), eta, z.xs, normalize)
    return z, d


@pytest.fixture
def small_rbf():
    return rbf_setup()

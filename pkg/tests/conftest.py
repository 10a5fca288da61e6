import numpy as np
import pytest

from da_detect.synthdata import DatasetSpec, ShiftSpec, generate


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def tiny_source():
    return generate(DatasetSpec(num_images=8, seed=11))


@pytest.fixture(scope="session")
def tiny_target():
    return generate(DatasetSpec(num_images=8, seed=12, domain=1, shift=ShiftSpec("style", 0.8)))


# criterion number -> (verdict, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        verdict, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {verdict}  {detail}")

import numpy as np
import pytest

from buqo.operators import StructureMask


def pytest_runtest_logreport(report):
    # one visible pass/fail line per acceptance criterion
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        print(f"\nACCEPTANCE {name}: {report.outcome.upper()}", flush=True)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def disc_mask(n, center, radius):
    gi, gj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    inside = (gi - center[0]) ** 2 + (gj - center[1]) ** 2 <= radius ** 2
    return StructureMask.from_pixels(inside.astype(np.uint8))


@pytest.fixture
def small_disc_mask():
    return disc_mask(16, (8, 8), 3.2)

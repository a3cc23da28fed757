import pytest


def pytest_runtest_logreport(report):
    """One visible pass/fail line per acceptance criterion."""
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    status = "PASS" if report.passed else "FAIL"
    print(f"\n[{status}] {name}", flush=True)


@pytest.fixture
def rng_factory():
    import numpy as np

    def make(seed: int) -> "np.random.Generator":
        return np.random.default_rng(seed)

    return make

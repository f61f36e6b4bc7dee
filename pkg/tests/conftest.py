import numpy as np
import pytest

from damex import DamexParams, FeatureSubset, LogisticSpec, fit_damex, sample_asymmetric_logistic


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def planted_2d():
    """Bivariate sample whose extremes live on the two axes."""
    spec = LogisticSpec(2, (FeatureSubset((0,)), FeatureSubset((1,))), seed=7)
    return sample_asymmetric_logistic(spec, 10_000)


@pytest.fixture(scope="session")
def small_model():
    spec = LogisticSpec(4, (FeatureSubset((0, 1)), FeatureSubset((2, 3)), FeatureSubset((1, 2))), seed=3)
    data = sample_asymmetric_logistic(spec, 2_000)
    return data, fit_damex(data, DamexParams(k=40, epsilon=0.1, mu_min="auto"))


_ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record and print one PASS/FAIL line for an acceptance criterion."""

    def record(label, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {label}  {detail}".rstrip()
        print(line)
        _ACCEPTANCE_LINES.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

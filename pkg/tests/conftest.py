import numpy as np
import pytest

APPENDIX_B_SCORES = (-0.3, 0.0, 0.03, 0.3, 0.4, 0.5)


@pytest.fixture(scope="session")
def bench_scores():
    return APPENDIX_B_SCORES


@pytest.fixture()
def rng():
    return np.random.default_rng(42)

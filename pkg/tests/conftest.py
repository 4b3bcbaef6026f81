import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
)
settings.load_profile("default")


def heavy_mix(rng: np.random.Generator, shape) -> np.ndarray:
    """Entries drawn entrywise from normal, Student t3, Laplace and a 20x contaminated normal."""
    pool = np.stack(
        [
            rng.standard_normal(shape),
            rng.standard_t(3, shape),
            rng.laplace(size=shape),
            20.0 * rng.standard_normal(shape),
        ]
    )
    pick = rng.choice(4, size=shape, p=[0.4, 0.25, 0.25, 0.1])
    return np.take_along_axis(pool, pick[None], 0)[0] * 10.0 ** rng.uniform(-3, 3)


def within_se(values, target, k=4.0) -> bool:
    values = np.asarray(values, dtype=float)
    se = values.std(ddof=1) / np.sqrt(values.size)
    return abs(values.mean() - target) <= k * se


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)

import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from data import TimeSeriesDataset  # noqa: E402
from sampler import GibbsConfig  # noqa: E402

SAMPLE_DIR = ROOT / "sample_data"


@pytest.fixture
def water_table_csv() -> Path:
    return SAMPLE_DIR / "water_table_sample.csv"


@pytest.fixture
def stock_csv() -> Path:
    return SAMPLE_DIR / "stock_sample.csv"


@pytest.fixture
def fast_gibbs() -> GibbsConfig:
    return GibbsConfig(iterations=600, burn_in=100, seed=11)


@pytest.fixture
def tiny_csv(tmp_path) -> Path:
    path = tmp_path / "tiny.csv"
    path.write_text("t,y,x1\n1,0.5,1\n2,1.5,2\n3,2.0,3\n", encoding="utf-8")
    return path


@pytest.fixture
def sparse_dataset() -> TimeSeriesDataset:
    """N=200, p0=6, y = 2 x1 - 1.5 x3 + noise."""
    rng = np.random.default_rng(2024)
    X = rng.standard_normal((200, 6))
    y = 2.0 * X[:, 0] - 1.5 * X[:, 2] + 0.5 * rng.standard_normal(200)
    return TimeSeriesDataset(y=y, X=X, feature_names=tuple(f"x{k + 1}" for k in range(6)))

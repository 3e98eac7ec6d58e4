import numpy as np
import pytest

from poselift import data


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def tiny_dataset(tmp_path):
    """Small meter-scale dataset on disk: 2 records x 8 frames, 3 joints."""
    skel = data.default_skeleton(3)
    records = data.make_dataset(skel, seed=7, num_records=2, length=8, pose_scale=0.01)
    path = tmp_path / "tiny.jsonl"
    data.save_records(path, records)
    return str(path)

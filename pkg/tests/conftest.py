import json

import numpy as np
import pytest

from fblbounds import Channel, Prior, load_channel, ml_metric


@pytest.fixture
def bsc1():
    ch = load_channel([[0.9, 0.1], [0.1, 0.9]], ["0", "1"], ["0", "1"])
    return Prior.uniform(2), ch, ml_metric(ch)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def write_json(tmp_path):
    def _write(name, obj):
        path = tmp_path / name
        path.write_text(obj if isinstance(obj, str) else json.dumps(obj))
        return path
    return _write


def single_input_channel(ny=3):
    return Channel(["a"], list(range(ny)), np.full((1, ny), 1.0 / ny))

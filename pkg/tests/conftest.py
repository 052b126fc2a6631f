"""Shared fixtures for the toolkit tests."""

import os

os.environ.setdefault('CPKIT_ENV', 'testing')

import numpy as np
import pytest

from models import KruskalModel
from utils.kruskal import reconstruct


def random_model(rng, shape, rank, positive=False):
    draw = rng.random if positive else rng.standard_normal
    factors = [draw((extent, rank)) for extent in shape]
    return KruskalModel(np.ones(rank), factors)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture
def make_model(rng):
    def _make(shape, rank, positive=False):
        return random_model(rng, shape, rank, positive)
    return _make


@pytest.fixture
def low_rank_tensor(make_model):
    def _make(shape, rank, positive=False):
        model = make_model(shape, rank, positive)
        return reconstruct(model, shape), model
    return _make

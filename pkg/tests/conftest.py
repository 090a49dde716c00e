"""Shared fixtures: a tiny on-disk image corpus and seeded RNG helpers."""
import numpy as np
import pytest

from cxrpipe.dataset import ClassLabel
from cxrpipe.synthetic import make_corpus


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    """A 4-class stripe corpus, 6 images per class, 64x64."""
    root = tmp_path_factory.mktemp("corpus")
    make_corpus(root, {label: 6 for label in ClassLabel}, side=64, seed=11)
    return root


@pytest.fixture
def rng():
    return np.random.default_rng(np.random.PCG64(42))


def random_gray(rng, h, w, lo=0.0, hi=255.0):
    return rng.uniform(lo, hi, size=(h, w))

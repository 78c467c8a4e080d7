import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def toy_corpus(tmp_path_factory):
    pytest.importorskip("skimage")
    from srkit.corpus import build_toy_corpus

    return build_toy_corpus(tmp_path_factory.mktemp("toy"))


def random_image(rng, h, w, c=1, dtype=np.float64):
    return rng.random((c, h, w)).astype(dtype)

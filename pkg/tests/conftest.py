import numpy as np
import pytest

from provmark.corpus import CorpusSpec, gen_cover
from provmark import latent, spatial

CANON = 256


@pytest.fixture(scope="session")
def corpus_spec():
    return CorpusSpec(count=80, size=CANON, master_seed=4242)


@pytest.fixture(scope="session")
def covers(corpus_spec):
    return [gen_cover(corpus_spec, i) for i in range(corpus_spec.count)]


@pytest.fixture(scope="session")
def ring_key(covers):
    # sigma calibrated on the shared covers; protocol-equivalent to the runner's
    return latent.make_ring_key(seed=11, covers=covers[:60])


@pytest.fixture(scope="session")
def spread_key(covers):
    raw = spatial.make_spread_key(seed=23)
    alpha, _ = spatial.calibrate_alpha(raw, covers, margin=1.15)
    from dataclasses import replace
    return replace(raw, alpha=alpha)


@pytest.fixture(scope="session")
def gray():
    return np.full((CANON, CANON, 3), 0.5)

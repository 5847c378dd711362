import numpy as np
import pytest

from provmark.corpus import CorpusSpec, gen_cover, load_images
from provmark.errors import DataError, ParameterError
from provmark.imageops import save_png


def test_gen_cover_deterministic():
    spec = CorpusSpec(count=4, size=128, master_seed=7)
    a = gen_cover(spec, 0)
    b = gen_cover(spec, 0)
    assert a.tobytes() == b.tobytes()


def test_gen_cover_indices_differ():
    spec = CorpusSpec(count=4, size=128, master_seed=7)
    a, b = gen_cover(spec, 0), gen_cover(spec, 1)
    frac = np.mean(np.any(a != b, axis=2))
    assert frac >= 0.01


def test_gen_cover_range_and_shape():
    spec = CorpusSpec(count=2, size=64, master_seed=1)
    img = gen_cover(spec, 1)
    assert img.shape == (64, 64, 3)
    assert img.min() >= 0.0 and img.max() <= 1.0


def test_gen_cover_channel_std_floor(covers):
    # non-degenerate texture so correlation detectors have signal to hide in
    for img in covers[:20]:
        assert img.reshape(-1, 3).std(axis=0).min() >= 0.05


def test_gen_cover_bounds():
    spec = CorpusSpec(count=2, size=64, master_seed=1)
    with pytest.raises(ParameterError):
        gen_cover(spec, 2)
    with pytest.raises(ParameterError):
        gen_cover(spec, -1)


def test_corpus_spec_validation():
    with pytest.raises(ParameterError):
        CorpusSpec(count=0, size=256)
    with pytest.raises(ParameterError):
        CorpusSpec(count=1, size=100)  # not a power of two
    with pytest.raises(ParameterError):
        CorpusSpec(count=1, size=32)  # below minimum


def test_load_images_identity_and_endpoints(tmp_path):
    img = np.zeros((256, 256, 3))
    img[0, 0] = 1.0  # 255 -> 1.0, elsewhere 0 -> 0.0
    save_png(img, tmp_path / "a.png")
    out = load_images(tmp_path, 256)
    assert len(out) == 1
    assert out[0].shape == (256, 256, 3)
    assert out[0][0, 0, 0] == 1.0
    assert out[0][5, 5, 0] == 0.0


def test_load_images_resamples(tmp_path):
    save_png(np.full((512, 512, 3), 0.5), tmp_path / "big.png")
    out = load_images(tmp_path, 256)
    assert out[0].shape == (256, 256, 3)


def test_load_images_lexicographic(tmp_path):
    # write out of order; read order must be by name
    save_png(np.full((64, 64, 3), 0.8), tmp_path / "b.png")
    save_png(np.full((64, 64, 3), 0.2), tmp_path / "a.png")
    out = load_images(tmp_path, 64)
    assert out[0].mean() < out[1].mean()


def test_load_images_empty_dir(tmp_path):
    with pytest.raises(DataError):
        load_images(tmp_path, 256)


def test_load_images_undecodable(tmp_path):
    (tmp_path / "junk.png").write_bytes(b"not a png")
    with pytest.raises(DataError, match="junk.png"):
        load_images(tmp_path, 256)

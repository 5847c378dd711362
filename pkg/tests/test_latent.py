import numpy as np
import pytest

from provmark import latent
from provmark.attacks import attack_brightness, attack_crop
from provmark.corpus import CorpusSpec, gen_cover
from provmark.errors import ParameterError
from provmark.imageops import child_seed, gaussian_blur

CANON = 256


def brute_force_mask_count(side, r_min, r_max):
    c = side // 2
    count = 0
    for y in range(side):
        for x in range(side):
            r = ((y - c) ** 2 + (x - c) ** 2) ** 0.5
            if r_min <= r < r_max and (y > c or (y == c and x > c)):
                count += 1
    return count


def test_mask_size_matches_brute_force():
    mask, _ = latent.ring_mask(64, 4, 12)
    assert mask.sum() == brute_force_mask_count(64, 4, 12)


def test_key_deterministic(ring_key):
    again = latent.make_ring_key(seed=11, sigma_sq=ring_key.sigma_sq)
    assert np.array_equal(again.ring_values, ring_key.ring_values)
    assert np.array_equal(again.mask_yx[0], ring_key.mask_yx[0])


def test_key_invalid_radii():
    with pytest.raises(ParameterError):
        latent.make_ring_key(seed=1, side=64, r_min=12, r_max=4, sigma_sq=1.0)
    with pytest.raises(ParameterError):
        latent.make_ring_key(seed=1, side=64, r_min=0, r_max=12, sigma_sq=1.0)
    with pytest.raises(ParameterError):
        latent.make_ring_key(seed=1, side=64, r_min=4, r_max=40, sigma_sq=1.0)


def test_ring_values_shared_within_ring(ring_key):
    mask, ring_index = latent.ring_mask(ring_key.side, ring_key.r_min, ring_key.r_max)
    idx = ring_index[mask]
    for ring in range(ring_key.r_max - ring_key.r_min):
        vals = ring_key.ring_values[idx == ring]
        assert len(np.unique(vals)) == 1


def test_embed_masked_bins_equal_key(ring_key):
    lat = latent.embed(ring_key, 999)
    spec = np.fft.fftshift(np.fft.fft2(lat))
    got = spec[ring_key.mask_yx]
    rel = np.abs(got - ring_key.ring_values) / np.abs(ring_key.ring_values)
    assert rel.max() < 1e-6


def test_embed_seeds_differ_but_mask_identical(ring_key):
    a = latent.embed(ring_key, 1)
    b = latent.embed(ring_key, 2)
    assert not np.array_equal(a, b)
    sa = np.fft.fftshift(np.fft.fft2(a))[ring_key.mask_yx]
    sb = np.fft.fftshift(np.fft.fft2(b))[ring_key.mask_yx]
    assert np.allclose(sa, sb, rtol=1e-9, atol=1e-9)


def test_embed_variance_near_unit(ring_key):
    vars_ = [latent.embed(ring_key, s).var() for s in range(5)]
    assert all(0.5 <= v <= 2.0 for v in vars_)


def test_embed_hermitian_residue(ring_key):
    g = np.random.default_rng(3).standard_normal((64, 64))
    spec = np.fft.fftshift(np.fft.fft2(g))
    spec[ring_key.mask_yx] = ring_key.ring_values
    spec[ring_key.mirror_yx] = np.conj(ring_key.ring_values)
    back = np.fft.ifft2(np.fft.ifftshift(spec))
    assert np.abs(back.imag).max() <= 1e-9


def test_render_zero_latent_is_gray():
    img = latent.render(np.zeros((64, 64)), 256)
    assert np.all(img == 0.5)
    assert img.shape == (256, 256, 3)


def test_render_clamps():
    img = latent.render(np.full((64, 64), 4.0), 64)
    assert np.all(img == 1.0)
    img = latent.render(np.full((64, 64), 6.0), 64)
    assert np.all(img == 1.0)


def test_render_size_validation():
    with pytest.raises(ParameterError):
        latent.render(np.zeros((64, 64)), 32)
    with pytest.raises(ParameterError):
        latent.render(np.zeros((64, 64)), 100)


def test_render_invert_roundtrip_correlation(ring_key):
    # Monte-Carlo oracle over 100 standard-normal latents. The bilinear-up /
    # box-down chain has an effective kernel [1/8, 3/4, 1/8] per axis, which
    # puts the expected Pearson r at 0.947; assert the measured floor.
    rs = []
    for i in range(100):
        lat = np.random.default_rng(i).standard_normal((64, 64))
        rec = latent.invert(latent.render(lat, 256), 64)
        rs.append(np.corrcoef(lat.ravel(), rec.ravel())[0, 1])
    assert np.mean(rs) >= 0.94


def test_invert_uniform_gray_is_zero():
    img = np.full((256, 256, 3), 0.5)
    assert np.allclose(latent.invert(img, 64), 0.0)


def test_invert_lossy_roundtrip(ring_key):
    img = latent.render(latent.embed(ring_key, 5), 256)
    mse = latent.masked_spectrum_mse(ring_key, latent.invert(img, ring_key.side))
    assert mse > 0.0


def test_invert_size_validation():
    with pytest.raises(ParameterError):
        latent.invert(np.zeros((255, 255, 3)), 64)
    with pytest.raises(ParameterError):
        latent.invert(np.zeros((256, 128, 3)), 64)


def test_detect_clean_floor(ring_key):
    scores = [latent.detect(latent.render(latent.embed(ring_key, child_seed("clean", i)), CANON),
                            ring_key)
              for i in range(30)]
    assert np.mean(scores) >= 0.90


def test_detect_unwatermarked_ceiling(ring_key):
    # Monte-Carlo over 200 fresh covers not used in sigma calibration
    spec = CorpusSpec(count=200, size=CANON, master_seed=9911)
    scores = [latent.detect(gen_cover(spec, i), ring_key) for i in range(200)]
    assert np.mean(scores) <= 0.35


def test_detect_range(ring_key, covers):
    for img in covers[:10]:
        assert 0.0 <= latent.detect(img, ring_key) <= 1.0


def test_detect_brightness_invariance(ring_key):
    img = latent.render(latent.embed(ring_key, 77), CANON)
    base = latent.detect(img, ring_key)
    scaled = attack_brightness(img, 1.5)
    assert abs(latent.detect(scaled, ring_key) - base) <= 0.10


def test_detect_crop_sensitivity(ring_key):
    # the geometric desynchronization mechanism, 40 percent area removed
    drops = []
    for i in range(40):
        img = latent.render(latent.embed(ring_key, child_seed("crop-sens", i)), CANON)
        drops.append(latent.detect(img, ring_key) - latent.detect(attack_crop(img, 0.40), ring_key))
    assert np.mean(drops) >= 0.30


def test_detect_blur_robustness(ring_key):
    # rings live at low and mid frequency; a radius-2 blur barely moves them
    deltas = []
    for i in range(30):
        img = latent.render(latent.embed(ring_key, child_seed("blur-rob", i)), CANON)
        deltas.append(abs(latent.detect(gaussian_blur(img, 2.0), ring_key)
                          - latent.detect(img, ring_key)))
    assert np.mean(deltas) <= 0.15


def test_detect_separation_auc(ring_key):
    n = 60
    wm = [latent.detect(latent.render(latent.embed(ring_key, child_seed("auc", i)), CANON),
                        ring_key) for i in range(n)]
    spec = CorpusSpec(count=n, size=CANON, master_seed=318)
    un = [latent.detect(gen_cover(spec, i), ring_key) for i in range(n)]
    scores = np.array(wm + un)
    order = scores.argsort(kind="mergesort")
    ranks = np.empty(2 * n)
    ranks[order] = np.arange(1, 2 * n + 1)
    auc = (ranks[:n].sum() - n * (n + 1) / 2) / (n * n)
    assert auc >= 0.99


def test_detect_size_validation(ring_key):
    with pytest.raises(ParameterError):
        latent.detect(np.zeros((100, 100, 3)), ring_key)


def test_key_serialization_roundtrip(ring_key, tmp_path):
    path = tmp_path / "key.json"
    latent.save_key(ring_key, path)
    loaded = latent.load_key(path)
    assert loaded.sigma_sq == ring_key.sigma_sq
    assert loaded.ref_var == pytest.approx(ring_key.ref_var, rel=1e-12)
    assert np.array_equal(loaded.ring_values, ring_key.ring_values)
    img = latent.render(latent.embed(ring_key, 4), CANON)
    assert latent.detect(img, loaded) == latent.detect(img, ring_key)

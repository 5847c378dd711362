import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from provmark import attacks
from provmark.attacks import (AttackTuning, attack_brightness, attack_crop, attack_inpaint,
                              attack_regen, ingest_external, make_spec, schedule)
from provmark.errors import DataError, ParameterError
from provmark.imageops import save_png


def test_schedule_endpoints_exact():
    assert schedule("crop", 1) == 0.05
    assert schedule("crop", 30) == 0.90
    assert schedule("brightness", 1) == 1.0
    assert schedule("brightness", 30) == 3.0
    assert schedule("inpaint", 1) == 0.05
    assert schedule("inpaint", 30) == 0.60
    assert schedule("regen", 1) == 0.01
    assert schedule("regen", 30) == 0.95


def test_schedule_linear_interior():
    assert schedule("brightness", 2) == pytest.approx(1.0 + 2.0 / 29.0, abs=1e-12)


@given(st.sampled_from(["crop", "brightness", "inpaint", "regen"]),
       st.integers(min_value=2, max_value=29))
def test_schedule_affine(kind, interval):
    lo, hi = attacks.SCHEDULE_RANGES[kind]
    step = (hi - lo) / 29.0
    assert schedule(kind, interval) == pytest.approx(lo + (interval - 1) * step, abs=1e-12)
    # equal spacing
    d1 = schedule(kind, interval) - schedule(kind, interval - 1)
    d2 = schedule(kind, interval + 1) - schedule(kind, interval)
    assert d1 == pytest.approx(d2, abs=1e-12)


def test_schedule_validation():
    with pytest.raises(ParameterError):
        schedule("jpeg", 1)
    with pytest.raises(ParameterError):
        schedule("crop", 0)
    with pytest.raises(ParameterError):
        schedule("crop", 31)


def test_crop_identity():
    img = np.random.default_rng(0).uniform(size=(256, 256, 3))
    out = attack_crop(img, 0.0)
    assert out.tobytes() == img.tobytes()


def test_crop_kept_side_arithmetic(gray):
    # round(256 * sqrt(0.25)) = 128 and round(256 * sqrt(0.10)) = 81
    assert int(np.rint(256 * np.sqrt(1 - 0.75))) == 128
    assert int(np.rint(256 * np.sqrt(1 - 0.90))) == 81
    out = attack_crop(gray, 0.75)
    assert out.shape == (256, 256, 3)
    out = attack_crop(gray, 0.90)
    assert out.shape == (256, 256, 3)


def test_crop_validation(gray):
    with pytest.raises(ParameterError):
        attack_crop(gray, 1.0)


def test_brightness_arithmetic():
    img = np.full((64, 64, 3), 0.4)
    assert np.allclose(attack_brightness(img, 2.0), 0.8)
    img = np.full((64, 64, 3), 0.6)
    assert np.all(attack_brightness(img, 2.0) == 1.0)


def test_brightness_identity_and_validation(gray):
    assert attack_brightness(gray, 1.0).tobytes() == gray.tobytes()
    with pytest.raises(ParameterError):
        attack_brightness(gray, 0.5)


def test_regen_coefficients():
    t = AttackTuning()
    s = 0.95
    assert t.regen_blur_base + t.regen_blur_span * s == pytest.approx(7.65)
    assert t.regen_noise_base + t.regen_noise_span * s == pytest.approx(0.115)


def test_regen_deterministic(gray):
    a = attack_regen(gray, 0.5, trial_seed=42)
    b = attack_regen(gray, 0.5, trial_seed=42)
    assert a.tobytes() == b.tobytes()
    c = attack_regen(gray, 0.5, trial_seed=43)
    assert a.tobytes() != c.tobytes()


def test_regen_low_strength_limit(gray):
    out = attack_regen(gray, 1e-6, trial_seed=1)
    # at vanishing strength the output is the image plus ~N(0, 0.02) noise
    assert np.abs(out - gray).std() == pytest.approx(0.02, rel=0.05)


def test_regen_validation(gray):
    for bad in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ParameterError):
            attack_regen(gray, bad, trial_seed=1)


def test_inpaint_box_side(covers):
    # round(256 * sqrt(0.25)) = 128
    img = covers[0]
    out = attack_inpaint(img, 0.25, trial_seed=7)
    assert out.shape == img.shape
    assert out.min() >= 0.0 and out.max() <= 1.0


def test_inpaint_interior_rewritten(covers):
    img = covers[1]
    tuning = AttackTuning(inpaint_global_strength=0.07)
    out = attack_inpaint(img, 0.25, trial_seed=3, tuning=tuning)
    box = 128
    lo = (256 - box) // 2
    inner = slice(lo, lo + box)
    differs = np.mean(np.any(out[inner, inner] != img[inner, inner], axis=2))
    assert differs >= 0.95


def test_inpaint_deterministic(covers):
    a = attack_inpaint(covers[2], 0.3, trial_seed=11)
    b = attack_inpaint(covers[2], 0.3, trial_seed=11)
    assert a.tobytes() == b.tobytes()


def test_inpaint_validation(gray):
    with pytest.raises(ParameterError):
        attack_inpaint(gray, 0.0, trial_seed=1)
    with pytest.raises(ParameterError):
        attack_inpaint(gray, 0.7, trial_seed=1)


def test_apply_control_identity(covers):
    spec = make_spec("control", 17, trial_seed=5)
    out = attacks.apply(covers[3], spec)
    assert out.tobytes() == covers[3].tobytes()


def test_apply_dispatch_and_size(covers):
    img = covers[4]
    for kind in ("control", "crop", "brightness", "inpaint", "regen"):
        spec = make_spec(kind, 30, trial_seed=9)
        out = attacks.apply(img, spec)
        assert out.shape == img.shape
        assert out.min() >= 0.0 and out.max() <= 1.0


def test_apply_crop_30_param(covers):
    spec = make_spec("crop", 30, trial_seed=1)
    assert spec.param == 0.90
    direct = attack_crop(covers[5], 0.90)
    assert attacks.apply(covers[5], spec).tobytes() == direct.tobytes()


def _write_manifest(tmp_path, lines):
    path = tmp_path / "manifest.jsonl"
    path.write_text("\n".join(json.dumps(l) for l in lines) + "\n", encoding="utf-8")
    return path


def test_ingest_external_empty(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("", encoding="utf-8")
    assert ingest_external(path, 256) == []


def test_ingest_external_entries(tmp_path, covers):
    save_png(covers[0], tmp_path / "orig.png")
    save_png(np.clip(covers[0] * 0.9, 0, 1), tmp_path / "att.png")
    big = np.zeros((512, 512, 3))
    save_png(big, tmp_path / "big.png")
    path = _write_manifest(tmp_path, [
        {"original": "orig.png", "attacked": "att.png", "codec": "spatial",
         "attack": "regen", "interval": 3, "fidelity_external": 82.5},
        {"original": "orig.png", "attacked": "big.png", "codec": "latent",
         "attack": "crop", "interval": 1},
    ])
    entries = ingest_external(path, 256)
    assert len(entries) == 2
    assert entries[0].fidelity_override == 82.5
    assert entries[1].fidelity_override is None
    assert entries[1].attacked.shape == (256, 256, 3)


def test_ingest_external_missing_file(tmp_path, covers):
    save_png(covers[0], tmp_path / "orig.png")
    path = _write_manifest(tmp_path, [
        {"original": "orig.png", "attacked": "nope.png", "codec": "latent",
         "attack": "crop", "interval": 1}])
    with pytest.raises(DataError, match=":1:"):
        ingest_external(path, 256)


def test_ingest_external_malformed_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"original": "x.png"}\n', encoding="utf-8")
    with pytest.raises(DataError, match=":1:"):
        ingest_external(path, 256)

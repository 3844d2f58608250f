import numpy as np
import pytest

from binsep.audio import AudioClip
from binsep.em import EmConfig, run_em
from binsep.errors import DataError, DimensionError, MaskFileError
from binsep.ild import (ideal_binary_masks, ild_masks_from_em, ild_to_unit,
                        load_mask_file, provider_masks, unit_to_ild,
                        write_mask_file)
from binsep.masks import SoftMask
from binsep.stft import StftConfig, stft

from conftest import talker


def random_masks(rng, n=2, k=33, m=12):
    return [SoftMask(rng.uniform(0, 1, (k, m)).astype(np.float32)
                     .astype(np.float64), f"source_{i+1}")
            for i in range(n)]


def test_roundtrip_bit_exact(tmp_path, rng):
    masks = random_masks(rng)
    path = tmp_path / "m.bsmk"
    write_mask_file(masks, path)
    back = load_mask_file(path, 33, 12)
    for a, b in zip(masks, back):
        assert np.array_equal(a.values, b.values)


def test_header_layout(tmp_path, rng):
    masks = random_masks(rng, n=3, k=5, m=7)
    path = tmp_path / "m.bsmk"
    write_mask_file(masks, path)
    blob = path.read_bytes()
    assert blob[:4] == b"BSMK"
    assert len(blob) == 16 + 3 * 5 * 7 * 4


def test_bad_magic(tmp_path, rng):
    path = tmp_path / "m.bsmk"
    write_mask_file(random_masks(rng), path)
    blob = bytearray(path.read_bytes())
    blob[:4] = b"XXXX"
    path.write_bytes(bytes(blob))
    with pytest.raises(MaskFileError):
        load_mask_file(path)


def test_truncated_payload(tmp_path, rng):
    path = tmp_path / "m.bsmk"
    write_mask_file(random_masks(rng), path)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(MaskFileError):
        load_mask_file(path)


def test_extra_frames_truncated_with_warning(tmp_path, rng, caplog):
    masks = random_masks(rng, k=9, m=13)
    path = tmp_path / "m.bsmk"
    write_mask_file(masks, path)
    back = load_mask_file(path, 9, 12)
    assert back[0].shape == (9, 12)
    assert np.array_equal(back[0].values, masks[0].values[:, :12])


def test_missing_frames_rejected(tmp_path, rng):
    path = tmp_path / "m.bsmk"
    write_mask_file(random_masks(rng, k=9, m=11), path)
    with pytest.raises(MaskFileError):
        load_mask_file(path, 9, 12)


def test_bin_count_mismatch_names_both(tmp_path, rng):
    path = tmp_path / "m.bsmk"
    write_mask_file(random_masks(rng, k=9, m=11), path)
    with pytest.raises(MaskFileError) as err:
        load_mask_file(path, 513, 11)
    assert "9" in str(err.value) and "513" in str(err.value)


def test_out_of_range_slack(tmp_path):
    # within 1e-6 of the range: clamped; beyond: rejected
    near = np.full((4, 4), 1.0 + 5e-7, dtype=np.float64)
    path = tmp_path / "near.bsmk"
    # bypass write-side validation by crafting the payload directly
    import struct
    blob = struct.pack("<4sHHII", b"BSMK", 1, 1, 4, 4)
    blob += near.astype("<f4").tobytes()
    path.write_bytes(blob)
    back = load_mask_file(path)
    assert np.all(back[0].values <= 1.0)

    far = np.full((4, 4), 1.5, dtype=np.float64)
    blob = struct.pack("<4sHHII", b"BSMK", 1, 1, 4, 4)
    blob += far.astype("<f4").tobytes()
    path.write_bytes(blob)
    with pytest.raises(MaskFileError):
        load_mask_file(path)


def test_write_rejects_empty_and_nan(tmp_path):
    with pytest.raises(DataError):
        write_mask_file([], tmp_path / "x.bsmk")
    bad = SoftMask(np.full((3, 3), np.nan))
    with pytest.raises(DataError):
        write_mask_file([bad], tmp_path / "x.bsmk")


def test_write_rejects_mismatched_shapes(tmp_path):
    a = SoftMask(np.zeros((3, 3)))
    b = SoftMask(np.zeros((3, 4)))
    with pytest.raises(DimensionError):
        write_mask_file([a, b], tmp_path / "x.bsmk")


def test_ild_grayscale_mapping_roundtrip():
    db = np.array([-30.0, -20.0, -5.0, 0.0, 5.0, 20.0, 30.0])
    gray = ild_to_unit(db)
    assert np.all(gray >= 0) and np.all(gray <= 1)
    assert gray[3] == 0.5
    back = unit_to_ild(gray)
    assert np.allclose(back, np.clip(db, -20, 20))


def mixture_with_level_gap(seed_a=61, seed_b=62, gap_db=20.0):
    g = 10.0 ** (gap_db / 40.0)
    s1 = talker(seed_a)
    s2 = talker(seed_b)
    img1 = np.stack([s1.samples * g, s1.samples / g], axis=1)
    img2 = np.stack([s2.samples / g, s2.samples * g], axis=1)
    mix = AudioClip(img1 + img2, 16000)
    return mix, [AudioClip(img1, 16000), AudioClip(img2, 16000)]


def test_em_provider_requires_level_term():
    mix, _ = mixture_with_level_gap()
    res = run_em(mix, EmConfig(iterations=2, use_ild=False))
    with pytest.raises(DataError):
        ild_masks_from_em(res)


def test_em_provider_masks_normalize():
    mix, _ = mixture_with_level_gap()
    res = run_em(mix, EmConfig(iterations=4, use_ild=True, use_garbage=True))
    masks = ild_masks_from_em(res)
    total = sum(m.values for m in masks) + res.garbage_mask.values
    assert np.max(np.abs(total - 1.0)) <= 1e-6
    pair_sum = masks[0].values + masks[1].values
    assert np.max(pair_sum) <= 1.0 + 1e-6


def test_em_provider_separates_level_gap():
    # oracle: ideal-binary-mask comparison on the constructed mixture;
    # sources distinguishable only by a 20 dB level gap, so the fit uses
    # the level-seeded start
    mix, images = mixture_with_level_gap()
    res = run_em(mix, EmConfig(iterations=16, use_ild=True,
                               init_mode="level"))
    masks = ild_masks_from_em(res)
    ibms = ideal_binary_masks(images, StftConfig())
    left_dom = ibms[0].values > 0.5
    best = max(masks, key=lambda m: float(m.values[left_dom].mean()))
    assert float(best.values[left_dom].mean()) >= 0.9


def test_export_training_pairs_silent_source(tmp_path):
    s2 = talker(63)
    img2 = np.stack([s2.samples, 0.8 * s2.samples], axis=1)
    silent = AudioClip(np.zeros_like(img2), 16000)
    mixture = AudioClip(img2.copy(), 16000)
    from binsep.ild import export_training_pairs
    feat, lab = export_training_pairs(
        mixture, [silent, AudioClip(img2, 16000)], tmp_path, "t0")
    labels = load_mask_file(lab)
    assert np.all(labels[0].values == 0.0)
    assert np.all(labels[1].values == 1.0)


def test_export_training_pairs_length_mismatch(tmp_path):
    s = talker(64)
    stereo = AudioClip(np.stack([s.samples, s.samples], axis=1), 16000)
    short = AudioClip(s.samples[:-100], 16000)
    from binsep.ild import export_training_pairs
    with pytest.raises(DimensionError):
        export_training_pairs(stereo, [short, short], tmp_path, "t1")


def test_ibm_disjoint_bands_match_direct_comparison():
    # oracle: direct per-bin magnitude comparison of the two references
    t = np.arange(16800) / 16000
    low = AudioClip(0.9 * np.sin(2 * np.pi * 500.0 * t), 16000)
    high = AudioClip(0.9 * np.sin(2 * np.pi * 6000.0 * t), 16000)
    cfg = StftConfig()
    labels = ideal_binary_masks([low, high], cfg)
    mag_low = np.abs(stft(low.samples, cfg).values)
    mag_high = np.abs(stft(high.samples, cfg).values)
    want_low = (mag_low > mag_high).astype(float)
    assert np.array_equal(labels[0].values, want_low)
    # one-hot everywhere
    assert np.array_equal(labels[0].values + labels[1].values,
                          np.ones_like(want_low))
    # energy rows split around the band boundary
    low_bin = round(500 * 1024 / 16000)
    high_bin = round(6000 * 1024 / 16000)
    assert labels[0].values[low_bin].mean() > 0.9
    assert labels[1].values[high_bin].mean() > 0.9


def test_provider_masks_dispatch(tmp_path, rng):
    masks = random_masks(rng, k=5, m=6)
    path = tmp_path / "m.bsmk"
    write_mask_file(masks, path)
    loaded = provider_masks(f"file:{path}", None, 5, 6)
    assert np.array_equal(loaded[0].values, masks[0].values)
    ones = provider_masks("none", None, 5, 6)
    assert np.all(ones[0].values == 1.0)
    with pytest.raises(DataError):
        provider_masks("em", None, 5, 6)
    with pytest.raises(DataError):
        provider_masks("bogus", None, 5, 6)

"""
Tests for NIfTI I/O, preprocessing, sequence samples, TPS views, splits and synthetic cases.
"""

import gzip
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meshcast.data import (
    MODALITIES,
    VolumeRecord,
    crop_background,
    decode,
    decode_case,
    encode,
    encode_case,
    load_case,
    load_case_cached,
    load_cached_case,
    load_dataset,
    make_sequences,
    nifti_read,
    nifti_write,
    preprocess,
    save_case,
    split_cases,
    synth_generate,
    tps_views,
    write_case,
    zscore_foreground,
)
from meshcast.data.nifti import HEADER_DTYPE
from meshcast.utils.errors import (
    ConfigError,
    DataError,
    GeometryError,
    NiftiDatatypeError,
    NiftiMagicError,
    NiftiTruncatedError,
    PreprocessingError,
    SplitError,
)


def _record(case_id="case", shape=(6, 8, 8), seed=0):
    rng = np.random.default_rng(seed)
    modalities = rng.uniform(0.5, 2.0, size=(4,) + shape).astype(np.float32)
    labels = rng.choice(np.array([0, 1, 2, 4], dtype=np.uint8), size=shape)
    return VolumeRecord(case_id=case_id, modalities=modalities, labels=labels)


# NIfTI


@pytest.mark.parametrize("kind", ["f4", "i2", "u1"])
@pytest.mark.parametrize("endian", ["<", ">"])
@pytest.mark.parametrize("suffix", [".nii", ".nii.gz"])
def test_nifti_round_trip(tmp_path, kind, endian, suffix):
    data = (np.arange(60).reshape(3, 4, 5) % 50).astype(kind)
    path = nifti_write(tmp_path / f"vol{suffix}", data, spacing=(3.0, 1.0, 0.5), endian=endian)
    image = nifti_read(path)
    np.testing.assert_array_equal(image.data, data)
    assert image.data.dtype == np.dtype(kind)
    assert image.spacing == (3.0, 1.0, 0.5)
    assert image.endian == endian
    assert list(image.header["dim"][:4]) == [3, 5, 4, 3]


def test_gzip_output_is_compressed(tmp_path):
    path = nifti_write(tmp_path / "vol.nii.gz", np.zeros((2, 2, 2), dtype=np.float32))
    assert path.read_bytes()[:2] == b"\x1f\x8b"
    assert len(gzip.decompress(path.read_bytes())) == 352 + 8 * 4


def test_template_keeps_description():
    first = decode(encode(np.zeros((2, 2, 2), dtype=np.uint8)))
    header = np.array(first.header)
    header["descrip"] = b"scanner A"
    again = decode(encode(np.ones((3, 2, 2), dtype=np.float32), spacing=(2.0, 1.0, 1.0), template=header))
    assert bytes(again.header["descrip"]).rstrip(b"\x00") == b"scanner A"
    assert again.data.shape == (3, 2, 2)
    assert again.spacing == (2.0, 1.0, 1.0)


def _offset(name):
    return HEADER_DTYPE.fields[name][1]


def test_scaling_slope_and_intercept_are_applied():
    data = np.arange(8, dtype=np.int16).reshape(2, 2, 2)
    blob = bytearray(encode(data))
    blob[_offset("scl_slope"):_offset("scl_slope") + 8] = struct.pack("<ff", 2.0, 1.0)
    image = decode(bytes(blob))
    assert image.data.dtype == np.float32
    np.testing.assert_array_equal(image.data, data * 2.0 + 1.0)
    blob[_offset("scl_slope"):_offset("scl_slope") + 8] = struct.pack("<ff", 0.0, 5.0)
    np.testing.assert_array_equal(decode(bytes(blob)).data, data)


def test_writes_ignore_template_scaling():
    header = np.array(decode(encode(np.zeros((2, 2, 2), dtype=np.float32))).header)
    header["scl_slope"], header["scl_inter"] = 3.0, -1.0
    values = np.full((2, 2, 2), 4.0, dtype=np.float32)
    np.testing.assert_array_equal(decode(encode(values, template=header)).data, values)


def test_nifti_truncated_payload():
    blob = encode(np.zeros((2, 3, 4), dtype=np.float32))
    with pytest.raises(NiftiTruncatedError):
        decode(blob[:-4])
    with pytest.raises(NiftiTruncatedError):
        decode(blob[:100])


def test_nifti_bad_magic():
    blob = bytearray(encode(np.zeros((2, 2, 2), dtype=np.float32)))
    blob[_offset("magic"):_offset("magic") + 4] = b"xyz\x00"
    with pytest.raises(NiftiMagicError):
        decode(bytes(blob))
    blob = bytearray(encode(np.zeros((2, 2, 2), dtype=np.float32)))
    blob[0:4] = struct.pack("<i", 540)
    with pytest.raises(NiftiMagicError):
        decode(bytes(blob))


def test_nifti_unsupported_datatype():
    blob = bytearray(encode(np.zeros((2, 2, 2), dtype=np.float32)))
    blob[_offset("datatype"):_offset("datatype") + 2] = struct.pack("<h", 64)
    with pytest.raises(NiftiDatatypeError):
        decode(bytes(blob))
    with pytest.raises(NiftiDatatypeError):
        encode(np.zeros(3, dtype=np.float64))


def test_damaged_gzip(tmp_path):
    path = nifti_write(tmp_path / "vol.nii.gz", np.zeros((4, 4, 4), dtype=np.float32))
    path.write_bytes(path.read_bytes()[:30])
    with pytest.raises(NiftiTruncatedError):
        nifti_read(path)


# preprocessing


def test_crop_centers_the_slice():
    depth = 2
    modalities = np.zeros((4, depth, 240, 240), dtype=np.float32)
    modalities[:, :, :, :] = np.arange(240, dtype=np.float32)[None, None, :, None]
    labels = np.zeros((depth, 240, 240), dtype=np.uint8)
    labels[:, 120, 120] = 4
    cropped = crop_background(VolumeRecord("c", modalities, labels))
    assert cropped.shape == (depth, 160, 160)
    assert cropped.cropped
    assert cropped.modalities[0, 0, 0, 0] == 40 and cropped.modalities[0, 0, -1, 0] == 199
    assert cropped.labels[0, 80, 80] == 4
    assert int((cropped.labels == 4).sum()) == depth


def test_crop_rejects_small_inputs():
    with pytest.raises(PreprocessingError):
        crop_background(_record(shape=(2, 8, 8)), (16, 16))


def test_zscore_normalizes_foreground():
    record = _record(shape=(4, 16, 16))
    modalities = record.modalities.copy()
    modalities[:, :, :4, :] = 0.0
    out = zscore_foreground(record.with_arrays(modalities=modalities))
    assert out.normalized and out.degenerate == ()
    for index in range(len(MODALITIES)):
        foreground = out.modalities[index][modalities[index] > 0]
        assert foreground.mean() == pytest.approx(0.0, abs=1e-5)
        assert foreground.std() == pytest.approx(1.0, abs=1e-4)
        assert (out.modalities[index][modalities[index] == 0] == 0).all()


def test_zscore_flags_degenerate_modality():
    record = _record()
    modalities = record.modalities.copy()
    modalities[2] = 1.0
    out = zscore_foreground(record.with_arrays(modalities=modalities))
    assert out.degenerate == ("t2",)
    assert (out.modalities[2] == 0).all()


def test_zscore_refuses_a_second_pass():
    with pytest.raises(PreprocessingError):
        zscore_foreground(zscore_foreground(_record()))


def test_preprocess_is_idempotent():
    once = preprocess(_record(shape=(3, 10, 10)), (8, 8))
    twice = preprocess(once, (8, 8))
    assert twice is once
    assert once.shape == (3, 8, 8)


# sequences and views


@pytest.mark.parametrize("slices,frames,count", [(155, 15, 10), (155, 1, 155), (30, 15, 2), (29, 15, 1)])
def test_make_sequences_count(slices, frames, count):
    samples = make_sequences(_record(shape=(slices, 2, 2)), frames)
    assert len(samples) == count
    assert all(s.frames.shape == (frames, 4, 2, 2) for s in samples)
    assert [s.origin[1] for s in samples] == list(range(0, count * frames, frames))


def test_make_sequences_keeps_frames_aligned():
    record = _record(shape=(6, 3, 3))
    sample = make_sequences(record, 3)[1]
    np.testing.assert_array_equal(sample.frames[0], record.modalities[:, 3])
    np.testing.assert_array_equal(sample.targets.et, record.labels[3:6] == 4)
    assert sample.frame_origins == (("case", 3), ("case", 4), ("case", 5))


def test_make_sequences_errors():
    with pytest.raises(DataError):
        make_sequences(_record(shape=(4, 2, 2)), 5)
    with pytest.raises(ConfigError):
        make_sequences(_record(shape=(4, 2, 2)), 0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 1000), st.integers(1, 4))
def test_tps_views_share_one_frame_multiset(seed, frames):
    records = [_record(f"c{i}", shape=(8, 2, 2), seed=i) for i in range(3)]
    samples = [s for r in records for s in make_sequences(r, frames)]
    phase1, phase2 = tps_views(samples, seed)
    assert phase1.mode == "phase1_shuffled" and phase2.mode == "phase2_ordered"
    assert phase1.frame_origins() == phase2.frame_origins()
    assert len(phase1) == len(phase2)
    assert all(s.order_tag == "shuffled" for s in phase1)
    lookup = {(r.case_id, z): r.modalities[:, z] for r in records for z in range(r.slices)}
    for sample in phase1:
        for frame, origin in zip(sample.frames, sample.frame_origins):
            np.testing.assert_array_equal(frame, lookup[origin])


def test_tps_views_are_seeded():
    samples = make_sequences(_record(shape=(12, 2, 2)), 3)
    first, _ = tps_views(samples, 5)
    again, _ = tps_views(samples, 5)
    other, _ = tps_views(samples, 6)
    assert [s.frame_origins for s in first] == [s.frame_origins for s in again]
    assert [s.frame_origins for s in first] != [s.frame_origins for s in other]
    assert [len(b) for b in first.batches(3, epoch=0)] == [3, 1]


def test_tps_views_need_samples():
    with pytest.raises(DataError):
        tps_views([], 0)


# splits


@pytest.mark.parametrize("n,train,val,test", [(10, 7, 1, 2), (335, 241, 27, 67), (5, 3, 1, 1)])
def test_split_sizes(n, train, val, test):
    split = split_cases([f"case{i:03d}" for i in range(n)], seed=3)
    assert (len(split.train), len(split.val), len(split.test)) == (train, val, test)
    assert len(split.train) + len(split.val) == int(n * 0.8)
    assert sorted(split.all_ids()) == sorted(f"case{i:03d}" for i in range(n))
    assert not set(split.train) & set(split.val)
    assert not set(split.train) & set(split.test)
    assert not set(split.val) & set(split.test)


def test_split_is_seeded():
    ids = [f"c{i}" for i in range(20)]
    assert split_cases(ids, 1) == split_cases(list(reversed(ids)), 1)
    assert split_cases(ids, 1) != split_cases(ids, 2)


def test_split_errors():
    with pytest.raises(SplitError):
        split_cases(["a", "b", "c", "d"], 0)
    with pytest.raises(SplitError):
        split_cases(["a", "a", "b", "c", "d", "e"], 0)


# synthetic cases


def test_synthetic_cases():
    records = synth_generate(3, (20, 48, 48), seed=7)
    assert [r.case_id for r in records] == ["synth_0000", "synth_0001", "synth_0002"]
    for record in records:
        assert record.modalities.shape == (4, 20, 48, 48)
        assert set(np.unique(record.labels)) <= {0, 1, 2, 4}
        assert (record.labels == 4).any()
        background = record.modalities[0] == 0
        assert (record.labels[background] == 0).all()
        assert (record.modalities >= 0).all()


def test_synthetic_lesion_drifts_slowly():
    record = synth_generate(1, (30, 64, 64), seed=2)[0]
    centers = []
    for z in range(record.slices):
        points = np.argwhere(record.labels[z] > 0)
        centers.append(points.mean(axis=0) if len(points) >= 20 else None)
    steps = [np.linalg.norm(b - a) for a, b in zip(centers, centers[1:]) if a is not None and b is not None]
    assert steps and max(steps) < 1.5


def test_synthetic_cases_are_seeded_per_case():
    a = synth_generate(3, (6, 24, 24), seed=1)
    b = synth_generate(2, (6, 24, 24), seed=1)
    np.testing.assert_array_equal(a[1].modalities, b[1].modalities)
    c = synth_generate(2, (6, 24, 24), seed=2)
    assert not np.array_equal(a[0].modalities, c[0].modalities)


# case directories and cache


@pytest.mark.parametrize("compress", [True, False])
def test_case_directory_round_trip(tmp_path, compress):
    record = _record("case_a").with_arrays(spacing=(2.0, 1.0, 1.0))
    case_dir = write_case(record, tmp_path, compress=compress)
    loaded = load_case(case_dir)
    assert loaded.case_id == "case_a"
    np.testing.assert_array_equal(loaded.modalities, record.modalities)
    np.testing.assert_array_equal(loaded.labels, record.labels)
    assert loaded.spacing == (2.0, 1.0, 1.0)


def test_load_dataset_orders_cases(tmp_path):
    for name in ("b", "a", "c"):
        write_case(_record(name), tmp_path)
    assert [r.case_id for r in load_dataset(tmp_path, workers=2)] == ["a", "b", "c"]


def test_load_case_errors(tmp_path):
    case_dir = write_case(_record("broken"), tmp_path)
    nifti_write(case_dir / "broken_t2.nii.gz", np.zeros((6, 8, 7), dtype=np.float32))
    with pytest.raises(GeometryError):
        load_case(case_dir)
    (case_dir / "broken_seg.nii.gz").unlink()
    with pytest.raises(DataError):
        load_case(case_dir)
    with pytest.raises(DataError):
        load_dataset(tmp_path / "missing")


def test_label_remap(tmp_path):
    record = _record("remap")
    case_dir = write_case(record, tmp_path)
    labels = record.labels.copy()
    labels[labels == 4] = 3
    nifti_write(case_dir / "remap_seg.nii.gz", labels)
    with pytest.raises(DataError):
        load_case(case_dir)
    np.testing.assert_array_equal(load_case(case_dir, {3: 4}).labels, record.labels)


def test_case_cache_round_trip(tmp_path):
    record = preprocess(_record(shape=(3, 10, 10)), (8, 8))
    path = save_case(record, tmp_path)
    assert path.suffix == ".mcvc"
    loaded = load_cached_case(tmp_path, record.case_id)
    np.testing.assert_array_equal(loaded.modalities, record.modalities)
    np.testing.assert_array_equal(loaded.labels, record.labels)
    assert (loaded.cropped, loaded.normalized, loaded.degenerate) == (True, True, record.degenerate)
    assert encode_case(loaded) == encode_case(record)


def test_load_dataset_serves_repeat_reads_from_cache(tmp_path):
    data_dir, cache_dir = tmp_path / "cases", tmp_path / "cache"
    for name in ("a", "b"):
        write_case(_record(name), data_dir)
    first = load_dataset(data_dir, cache_dir=cache_dir)
    assert sorted(p.name for p in cache_dir.iterdir()) == ["a.mcvc", "b.mcvc"]
    for volume in (data_dir / "a").iterdir():
        volume.unlink()
    second = load_dataset(data_dir, cache_dir=cache_dir)
    for before, after in zip(first, second):
        assert after.case_id == before.case_id
        np.testing.assert_array_equal(after.modalities, before.modalities)
        np.testing.assert_array_equal(after.labels, before.labels)
        assert after.header is not None
        assert int(after.header["dim"][1]) == int(before.header["dim"][1])
    with pytest.raises(DataError):
        load_dataset(data_dir, label_remap={3: 4}, cache_dir=cache_dir)


def test_unreadable_cache_entry_is_rebuilt(tmp_path):
    case_dir = write_case(_record("c"), tmp_path / "cases")
    cache_dir = tmp_path / "cache"
    cache_dir.mkdir()
    (cache_dir / "c.mcvc").write_bytes(b"garbage")
    record = load_case_cached(case_dir, cache_dir)
    np.testing.assert_array_equal(load_cached_case(cache_dir, "c").labels, record.labels)


def test_case_cache_errors(tmp_path):
    blob = encode_case(_record())
    with pytest.raises(DataError):
        decode_case(blob[:-1])
    with pytest.raises(DataError):
        decode_case(b"NOPE" + blob[4:])
    with pytest.raises(DataError):
        load_cached_case(tmp_path, "absent")

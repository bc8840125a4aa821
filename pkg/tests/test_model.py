"""
Tests for cross-scan, Mesh-Cast, the M-Net encoder-decoder, checkpoints and FLOP counts.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pydantic import ValidationError

from meshcast import tensor as tt
from meshcast.model import (
    LayerAttention,
    MeshCastLayer,
    MeshCastStack,
    MNet,
    MNetConfig,
    build_model,
    channel_to_space,
    cross_merge,
    cross_scan,
    decode_checkpoint,
    encode_checkpoint,
    flops_estimate,
    layer_attention_aggregate,
    load_checkpoint,
    matmul_flops,
    merge_frames,
    mesh_cast_backward,
    mesh_cast_forward,
    mesh_cast_layer_forward,
    mnet_forward,
    save_checkpoint,
    scan_frames,
    space_to_channel,
)
from meshcast.tensor import Tensor
from meshcast.utils.errors import ConfigError, DataError, ShapeError

from .conftest import small_kind, tiny_config

TAGS = ["lstm", "convlstm", "xlstm", "transformer", "mamba"]


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(1, 5), st.integers(1, 5))
def test_cross_merge_of_cross_scan_is_four_times_input(channels, height, width):
    x = np.random.default_rng(channels * 100 + height * 10 + width).normal(size=(channels, height, width))
    x = x.astype(np.float32)
    merged = cross_merge(cross_scan(Tensor(x)), (height, width))
    np.testing.assert_array_equal(merged.data, 4 * x)


def test_cross_scan_orders():
    x = Tensor(np.arange(6, dtype=np.float32).reshape(1, 2, 3))
    scans = cross_scan(x)
    assert scans.lr.data[:, 0].tolist() == [0, 1, 2, 3, 4, 5]
    assert scans.rl.data[:, 0].tolist() == [5, 4, 3, 2, 1, 0]
    assert scans.tb.data[:, 0].tolist() == [0, 3, 1, 4, 2, 5]
    assert scans.bt.data[:, 0].tolist() == [5, 2, 4, 1, 3, 0]


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 4), st.integers(1, 4))
def test_merge_frames_of_scan_frames_is_four_times_input(frames, channels, height, width):
    x = np.random.default_rng(frames).normal(size=(frames, channels, height, width)).astype(np.float32)
    seq = scan_frames(Tensor(x))
    assert seq.shape == (height * width, 4 * frames, channels)
    np.testing.assert_array_equal(merge_frames(seq, (height, width)).data, 4 * x)


def test_scan_frames_lanes_match_per_frame_cross_scan(rng):
    x = rng.normal(size=(2, 3, 2, 4)).astype(np.float32)
    seq = scan_frames(Tensor(x)).data
    for t in range(2):
        for k, direction in enumerate(cross_scan(Tensor(x[t]))):
            np.testing.assert_array_equal(seq[:, k * 2 + t], direction.data)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(1, 6))
def test_mesh_cast_round_trip_is_exact(frames, channels, dim):
    x = np.random.default_rng(dim).normal(size=(frames, channels, dim)).astype(np.float32)
    cast = mesh_cast_forward(Tensor(x))
    assert cast.shape == (channels, frames, dim)
    np.testing.assert_array_equal(mesh_cast_backward(cast).data, x)


def test_mesh_cast_layer_with_identity_axes_is_identity(rng):
    x = Tensor(rng.normal(size=(3, 2, 2, 3)).astype(np.float32))
    layer = MeshCastLayer(None, None, (2, 3))
    np.testing.assert_array_equal(mesh_cast_layer_forward(layer, x).data, x.data)


@pytest.mark.parametrize("tag", TAGS)
def test_mesh_cast_layer_shape(tag, rng):
    layer = MeshCastLayer(small_kind(tag), small_kind(tag), (2, 2)).initialize(0)
    x = Tensor(rng.normal(size=(3, 4, 2, 2)).astype(np.float32))
    assert mesh_cast_layer_forward(layer, x).shape == (3, 4, 2, 2)


def test_layer_attention_gates_and_aggregate(rng):
    attention = LayerAttention(3, (0.5, 0.25)).initialize(0)
    outputs = [Tensor(rng.normal(size=(2, 3)).astype(np.float32)) for _ in range(3)]
    x = Tensor(rng.normal(size=(2, 3)).astype(np.float32))
    alpha = attention.gates(outputs).data
    assert alpha.shape == (3,)
    np.testing.assert_allclose(alpha.sum(), 1.0, rtol=1e-6)
    balanced = sum(a * y.data for a, y in zip(alpha, outputs))
    expected = x.data * balanced + 0.5 * outputs[1].data + 0.25 * outputs[2].data
    np.testing.assert_allclose(layer_attention_aggregate(outputs, x, attention).data, expected, rtol=1e-5)


def test_layer_attention_validation():
    with pytest.raises(ConfigError):
        LayerAttention(2, (1.5,))
    attention = LayerAttention(2)
    y = Tensor(np.zeros((2, 2), dtype=np.float32))
    with pytest.raises(ConfigError):
        layer_attention_aggregate([y], y, attention)
    with pytest.raises(ShapeError):
        layer_attention_aggregate([y, y], Tensor(np.zeros((3, 2), dtype=np.float32)), attention)


def test_mesh_cast_stack_engages_attention_from_two_layers(rng):
    assert MeshCastStack(small_kind(), small_kind(), (2, 2), 4, layers=1).attention is None
    stack = MeshCastStack(small_kind(), small_kind(), (2, 2), 4, layers=2).initialize(0)
    assert stack.attention is not None
    x = Tensor(rng.normal(size=(2, 4, 2, 2)).astype(np.float32))
    assert stack(x).shape == (2, 4, 2, 2)


def test_mesh_cast_stack_output_is_independent_of_input_scale(rng):
    stack = MeshCastStack(small_kind(), small_kind(), (2, 2), 4, layers=2).initialize(0)
    x = rng.normal(size=(2, 4, 2, 2))
    with tt.default_dtype(np.float64):
        small = stack(Tensor(x)).data
        large = stack(Tensor(x * 1e4)).data
    assert np.isfinite(large).all()
    np.testing.assert_allclose(large, small, rtol=1e-3, atol=1e-5)


@pytest.mark.parametrize("tag", TAGS)
def test_mnet_shape_law(tag, rng):
    model = build_model(tiny_config(tag), seed=0)
    x = Tensor(rng.normal(size=(2, 4, 8, 8)).astype(np.float32))
    out = mnet_forward(model, x)
    assert out.shape == (2, 3, 8, 8)
    assert np.isfinite(out.data).all()


@pytest.mark.parametrize("axes", ["temporal", "none"])
def test_mnet_axis_variants(axes, rng):
    model = build_model(tiny_config(mesh_axes=axes), seed=0)
    out = mnet_forward(model, Tensor(rng.normal(size=(3, 4, 8, 8)).astype(np.float32)))
    assert out.shape == (3, 3, 8, 8)
    if axes == "none":
        assert not any(".mesh." in path for path, _ in model.network.named_parameters())


def test_backbone_ignores_mesh_kind(rng):
    x = Tensor(rng.normal(size=(2, 4, 8, 8)).astype(np.float32))
    a = mnet_forward(build_model(tiny_config("lstm", mesh_axes="none"), seed=3), x).data
    b = mnet_forward(build_model(tiny_config("xlstm", mesh_axes="none"), seed=3), x).data
    np.testing.assert_array_equal(a, b)


def test_mnet_accepts_other_sequence_lengths(rng):
    model = build_model(tiny_config(), seed=0)
    for frames in (1, 5):
        assert mnet_forward(model, Tensor(rng.normal(size=(frames, 4, 8, 8)).astype(np.float32))).shape[0] == frames


def test_mnet_rejects_bad_inputs_and_geometry(rng):
    model = build_model(tiny_config(), seed=0)
    with pytest.raises(ShapeError):
        mnet_forward(model, Tensor(np.zeros((2, 3, 8, 8), dtype=np.float32)))
    with pytest.raises(ShapeError):
        mnet_forward(model, Tensor(np.zeros((9, 4, 8, 8), dtype=np.float32)))
    with pytest.raises(ConfigError):
        tiny_config(image_size=(10, 10))
    with pytest.raises(ValidationError):
        tiny_config(frames_T=9)


def test_space_channel_folds_are_inverse(rng):
    x = Tensor(rng.normal(size=(2, 3, 4, 6)).astype(np.float32))
    folded = space_to_channel(x, 2)
    assert folded.shape == (2, 12, 2, 3)
    np.testing.assert_array_equal(channel_to_space(folded, 2).data, x.data)


def test_build_model_is_deterministic():
    a = build_model(tiny_config(), seed=11).parameters()
    b = build_model(tiny_config(), seed=11).parameters()
    assert a.keys() == b.keys()
    for path in a:
        np.testing.assert_array_equal(a[path], b[path])


def test_tiny_mnet_parameter_gradients(module_gradcheck, rng):
    with tt.default_dtype(np.float64):
        network = MNet(tiny_config()).initialize(0)
        x = Tensor(rng.normal(size=(2, 4, 8, 8)))
        module_gradcheck(network, lambda: network(x), samples=1)


def test_checkpoint_round_trip(tmp_path, rng):
    model = build_model(tiny_config("xlstm", mesh_layers=2), seed=4)
    model.step = 17
    path = save_checkpoint(model, tmp_path / "model.mckp")
    restored = load_checkpoint(path)
    assert restored.config == model.config
    assert restored.step == 17
    x = Tensor(rng.normal(size=(2, 4, 8, 8)).astype(np.float32))
    np.testing.assert_array_equal(mnet_forward(restored, x).data, mnet_forward(model, x).data)


def test_checkpoint_bytes_are_stable():
    model = build_model(tiny_config(), seed=1)
    assert encode_checkpoint(model) == encode_checkpoint(build_model(tiny_config(), seed=1))


def test_checkpoint_errors(tmp_path):
    blob = encode_checkpoint(build_model(tiny_config(), seed=0))
    with pytest.raises(DataError):
        decode_checkpoint(b"XXXX" + blob[4:])
    with pytest.raises(DataError):
        decode_checkpoint(blob[:-10])
    with pytest.raises(DataError):
        load_checkpoint(tmp_path / "missing.mckp")


def test_flop_counts():
    assert matmul_flops(2, 3, 4) == 48
    backbone = flops_estimate(tiny_config(mesh_axes="none")).total
    temporal = flops_estimate(tiny_config(mesh_axes="temporal")).total
    both = flops_estimate(tiny_config()).total
    assert 0 < backbone < temporal < both


def test_flops_scale_linearly_in_frames_for_mamba():
    cfg = tiny_config()
    one = flops_estimate(cfg, (2, 4, 8, 8))
    two = flops_estimate(cfg, (4, 4, 8, 8))
    assert two.total == 2 * one.total
    assert set(one.by_kind) == {"conv", "sequence"}
    assert sum(one.by_module.values()) == one.total


def test_flops_reject_indivisible_shapes():
    with pytest.raises(ConfigError):
        flops_estimate(tiny_config(), (2, 4, 6, 6))

import os
import subprocess

import numpy as np
import pytest

import bnn_engine as bnn


def random_signs(shape, seed):
    rng = np.random.default_rng(seed)
    return np.where(rng.integers(0, 2, size=shape) == 1, 1, -1).astype(np.int8)


def test_pack_roundtrip_and_bits():
    signs = random_signs((2, 3, 4, 70), 1)
    packed = bnn.pack_channels(signs)
    assert packed.shape == (2, 3, 4, 70)
    assert packed.words_per_pixel == 2
    assert packed.bit(0, 0, 0, 0) == (signs[0, 0, 0, 0] == 1)
    np.testing.assert_array_equal(bnn.unpack_channels(packed), signs)


def test_pack_rejects_non_sign_values():
    with pytest.raises(bnn.InvalidValueError):
        bnn.pack_channels(np.zeros((1, 1, 1, 3), dtype=np.int8))
    with pytest.raises(bnn.BnnError):
        bnn.pack_channels(np.zeros((1, 1, 3), dtype=np.int8))


def test_binary_dot_matches_numpy():
    a = random_signs((1, 1, 1, 100), 2)
    b = random_signs((1, 1, 1, 100), 3)
    wa = bnn.pack_channels(a).words
    wb = bnn.pack_channels(b).words
    assert bnn.binary_dot(wa, wb, 100) == int(np.dot(a.ravel().astype(int), b.ravel().astype(int)))
    with pytest.raises(bnn.DimensionError):
        bnn.binary_dot(wa, wb[:1], 100)


def test_bitplanes_reassemble_image():
    rng = np.random.default_rng(4)
    img = rng.integers(0, 256, size=(1, 3, 3, 5), dtype=np.uint8)
    planes = bnn.split_bitplanes(img)
    assert len(planes) == 8
    total = np.zeros(img.shape, dtype=np.int64)
    for i, p in enumerate(planes):
        bits = (bnn.unpack_channels(p) + 1) // 2
        total += bits.astype(np.int64) << i
    np.testing.assert_array_equal(total, img)


def test_model_infer_save_load(tmp_path):
    model = bnn.Model.generate("tiny", seed=5)
    assert len(model) == len(model.layer_names) == len(model.layer_kinds)
    rng = np.random.default_rng(6)
    img = rng.integers(0, 256, size=model.input_shape, dtype=np.uint8)
    out = model.infer(img)
    assert out.dtype == np.float32
    assert out.shape == model.output_shape

    path = tmp_path / "tiny.pbit"
    model.save(path)
    loaded = bnn.Model.load(path)
    assert loaded.to_bytes() == model.to_bytes() == path.read_bytes()
    np.testing.assert_array_equal(loaded.infer(img, threads=2), out)


def test_corrupt_model_is_format_error():
    data = bytearray(bnn.Model.generate("tiny").to_bytes())
    data[-1] ^= 0x01
    with pytest.raises(bnn.FormatError):
        bnn.Model.from_bytes(bytes(data))


def test_wrong_input_shape_is_dimension_error():
    model = bnn.Model.generate("tiny")
    with pytest.raises(bnn.DimensionError):
        model.infer(np.zeros((1, 2, 2, 3), dtype=np.uint8))


def test_verify_and_bench():
    model = bnn.Model.generate("tiny", seed=2)
    ok, report = model.verify(trials=3, seed=1)
    assert ok, report
    rep = bnn.bench(model, repeats=3)
    assert [row["name"] for row in rep["layers"]] == model.layer_names
    assert rep["total_ms"] > 0
    with pytest.raises(bnn.InvalidParameterError):
        model.bench_json(repeats=2)


def test_cli_output_matches_binding(tmp_path):
    cli = os.environ.get("BNN_CLI")
    if not cli:
        pytest.skip("BNN_CLI not set")
    model = bnn.Model.generate("tiny", seed=9)
    model_path = tmp_path / "m.pbit"
    model.save(model_path)
    rng = np.random.default_rng(10)
    img = rng.integers(0, 256, size=model.input_shape, dtype=np.uint8)
    bnn.write_image(img, tmp_path / "x.pbim")
    subprocess.run(
        [cli, "run", "--model", str(model_path), "--input", str(tmp_path / "x.pbim"),
         "--output", str(tmp_path / "y.pbft")],
        check=True, capture_output=True)
    np.testing.assert_array_equal(bnn.read_float_tensor(tmp_path / "y.pbft"), model.infer(img))

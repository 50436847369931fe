"""Container format round trips and corruption handling."""

import json

import numpy as np
import pytest

from axmae.serialize import file_fingerprint, load_container, save_container


def test_round_trip_preserves_header_and_blobs(tmp_path):
    path = tmp_path / "box.axc"
    a = np.arange(6, dtype=np.float32).reshape(2, 3)
    b = np.array([[1.5], [-2.25]], dtype=np.float32)
    save_container(path, {"kind": "demo", "note": 7}, [("alpha", a), ("beta", b)])

    header, arrays = load_container(path)
    assert header["kind"] == "demo"
    assert header["note"] == 7
    assert [e["name"] for e in header["blobs"]] == ["alpha", "beta"]
    assert np.array_equal(arrays["alpha"], a)
    assert np.array_equal(arrays["beta"], b)
    assert arrays["alpha"].dtype == np.float32


def test_float64_input_is_stored_as_float32(tmp_path):
    path = tmp_path / "cast.axc"
    precise = np.array([1.0 / 3.0], dtype=np.float64)
    save_container(path, {}, [("x", precise)])
    _, arrays = load_container(path)
    assert arrays["x"].dtype == np.float32
    assert arrays["x"][0] == np.float32(1.0 / 3.0)


def test_scalar_shape_blob(tmp_path):
    path = tmp_path / "scalar.axc"
    save_container(path, {}, [("s", np.float32(4.5))])
    _, arrays = load_container(path)
    assert arrays["s"].shape == ()
    assert arrays["s"] == np.float32(4.5)


def test_on_disk_layout_is_exactly_as_documented(tmp_path):
    path = tmp_path / "layout.axc"
    blob = np.array([1.0, 2.0], dtype=np.float32)
    save_container(path, {"z": 1}, [("v", blob)])
    raw = path.read_bytes()
    assert raw[:4] == b"AXC1"
    hlen = int(np.frombuffer(raw[4:8], dtype="<u4")[0])
    header = json.loads(raw[8:8 + hlen])
    assert header == {"blobs": [{"name": "v", "shape": [2]}], "z": 1}
    assert raw[8 + hlen:] == blob.astype("<f4").tobytes()
    # keys are sorted so identical headers serialize identically
    assert raw[8:8 + hlen] == json.dumps(header, sort_keys=True).encode()


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad.axc"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(ValueError, match="magic"):
        load_container(path)


def test_truncated_blob_rejected(tmp_path):
    path = tmp_path / "short.axc"
    save_container(path, {}, [("v", np.ones(8, dtype=np.float32))])
    raw = path.read_bytes()
    path.write_bytes(raw[:-4])
    with pytest.raises(ValueError, match="truncated"):
        load_container(path)


def test_trailing_bytes_rejected(tmp_path):
    path = tmp_path / "extra.axc"
    save_container(path, {}, [("v", np.ones(2, dtype=np.float32))])
    path.write_bytes(path.read_bytes() + b"\x00\x00")
    with pytest.raises(ValueError, match="trailing"):
        load_container(path)


def test_fingerprint_tracks_content(tmp_path):
    p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
    p1.write_bytes(b"hello world")
    p2.write_bytes(b"hello world")
    assert file_fingerprint(p1) == file_fingerprint(p2)
    p2.write_bytes(b"hello worlD")
    assert file_fingerprint(p1) != file_fingerprint(p2)

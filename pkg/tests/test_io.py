import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memclass.core import Image, LabeledDataset
from memclass.io import (
    DatasetIOError,
    Manifest,
    decode_ppm,
    encode_ppm,
    load_dataset,
    load_manifest,
    read_ppm,
    save_dataset,
    save_manifest,
    write_ppm,
)


@settings(max_examples=40)
@given(st.integers(1, 9), st.integers(1, 9), st.integers(0, 2**32 - 1))
def test_ppm_round_trip(h, w, seed):
    px = np.random.default_rng(seed).integers(0, 256, size=(h, w, 3), dtype=np.uint8)
    buf = encode_ppm(Image(px))
    assert buf.startswith(f"P6\n{w} {h}\n255\n".encode())
    assert np.array_equal(decode_ppm(buf).pixels, px)


def test_ppm_header_comments_and_maxval():
    body = bytes([0, 1, 2, 3, 4, 5])
    img = decode_ppm(b"P6 # made by hand\n2 # width\n1\n255\n" + body)
    assert img.pixels.reshape(-1).tolist() == list(body)
    img = decode_ppm(b"P6\n1 1\n15\n" + bytes([15, 0, 5]))
    assert img.pixels[0, 0].tolist() == [255, 0, 85]


def test_ppm_errors():
    for bad in (b"P3\n1 1\n255\n\x00\x00\x00", b"P6\n1 1\n65535\n" + bytes(6), b"P6\n2 2\n255\n\x00",
                b"P6\n1", b"P6\nx 1\n255\n\x00\x00\x00"):
        with pytest.raises(ValueError):
            decode_ppm(bad)


def test_file_errors_name_the_path(tmp_path):
    missing = tmp_path / "nope.ppm"
    with pytest.raises(DatasetIOError, match="nope.ppm"):
        read_ppm(missing)
    bad = tmp_path / "bad.ppm"
    bad.write_bytes(b"P5\n1 1\n255\n\x00")
    with pytest.raises(DatasetIOError, match="bad.ppm"):
        read_ppm(bad)
    with pytest.raises(DatasetIOError, match="no_dir"):
        write_ppm(Image.blank(1, 1), tmp_path / "no_dir" / "x.ppm")


def test_manifest_round_trip(tmp_path):
    m = Manifest(("a", "b"), [("x/1.ppm", 1), ("2.ppm", 0)])
    path = tmp_path / "m.json"
    save_manifest(m, path)
    assert load_manifest(path) == m
    assert json.loads(path.read_text()) == {"classes": ["a", "b"], "items": [{"path": "x/1.ppm", "label": 1},
                                                                               {"path": "2.ppm", "label": 0}]}
    with pytest.raises(ValueError):
        Manifest(("a",), [("1.ppm", 3)])
    path.write_text('{"classes": ["a"]}')
    with pytest.raises(DatasetIOError, match="malformed"):
        load_manifest(path)
    path.write_text("{")
    with pytest.raises(DatasetIOError, match="m.json"):
        load_manifest(path)


def test_dataset_round_trip(tmp_path, rng):
    imgs = [Image(rng.integers(0, 256, size=(3, 4, 3), dtype=np.uint8)) for _ in range(6)]
    data = LabeledDataset(imgs, [0, 1, 2, 2, 1, 0], ("r", "g", "b"))
    m = save_dataset(data, tmp_path / "ds", threads=2)
    assert len(m.items) == 6
    back = load_dataset(tmp_path / "ds")
    assert back.classes == data.classes and back.labels.tolist() == data.labels.tolist()
    for a, b in zip(back.images, data.images):
        assert np.array_equal(a.pixels, b.pixels)
    assert load_dataset(tmp_path / "ds" / "manifest.json").n == 6
    (tmp_path / "ds" / m.items[3][0]).unlink()
    with pytest.raises(DatasetIOError, match="missing"):
        load_dataset(tmp_path / "ds")

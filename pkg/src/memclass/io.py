"""Binary PPM (P6) images and manifest-listed datasets on disk."""
from __future__ import annotations

import json
import os
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .core import Image, LabeledDataset

MANIFEST_NAME = "manifest.json"


class DatasetIOError(OSError):
    """An IO or format failure, with the offending path in the message."""


def encode_ppm(img: Image) -> bytes:
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + np.ascontiguousarray(img.pixels).tobytes()


def _header_tokens(buf):
    """Yield (token, end_offset) for the four header fields, skipping comments."""
    pos, n = 0, len(buf)
    found = 0
    while found < 4:
        while pos < n and (buf[pos:pos + 1].isspace() or buf[pos:pos + 1] == b"#"):
            if buf[pos:pos + 1] == b"#":
                while pos < n and buf[pos:pos + 1] not in (b"\n", b"\r"):
                    pos += 1
            else:
                pos += 1
        start = pos
        while pos < n and not buf[pos:pos + 1].isspace() and buf[pos:pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ValueError("truncated header")
        found += 1
        yield buf[start:pos], pos


def decode_ppm(buf: bytes) -> Image:
    tokens = list(_header_tokens(buf))
    magic, width, height, maxval = (t for t, _ in tokens)
    if magic != b"P6":
        raise ValueError(f"not a binary PPM (magic {magic!r})")
    try:
        w, h, mv = int(width), int(height), int(maxval)
    except ValueError:
        raise ValueError("malformed header") from None
    if w < 1 or h < 1:
        raise ValueError(f"bad image size {w}x{h}")
    if not 1 <= mv <= 255:
        raise ValueError(f"only 8-bit PPM is supported (maxval {mv})")
    start = tokens[-1][1] + 1  # exactly one whitespace byte after maxval
    need = w * h * 3
    data = buf[start:start + need]
    if len(data) != need:
        raise ValueError(f"expected {need} pixel bytes, found {len(data)}")
    px = np.frombuffer(data, dtype=np.uint8).reshape(h, w, 3)
    if mv != 255:
        px = np.round(px.astype(np.float64) * (255.0 / mv)).astype(np.uint8)
    return Image(px.copy())


def write_ppm(img: Image, path):
    try:
        with open(path, "wb") as fh:
            fh.write(encode_ppm(img))
    except OSError as e:
        raise DatasetIOError(f"{path}: {e.strerror or e}") from e


def read_ppm(path) -> Image:
    try:
        with open(path, "rb") as fh:
            buf = fh.read()
    except OSError as e:
        raise DatasetIOError(f"{path}: {e.strerror or e}") from e
    try:
        return decode_ppm(buf)
    except ValueError as e:
        raise DatasetIOError(f"{path}: {e}") from e


@dataclass(frozen=True)
class Manifest:
    classes: tuple
    items: tuple  # (relative path, label) pairs

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(str(c) for c in self.classes))
        items = tuple((str(p), int(k)) for p, k in self.items)
        for p, k in items:
            if not 0 <= k < len(self.classes):
                raise ValueError(f"label {k} of {p!r} is outside the class list")
        object.__setattr__(self, "items", items)

    def to_dict(self):
        return {"classes": list(self.classes), "items": [{"path": p, "label": k} for p, k in self.items]}

    @classmethod
    def from_dict(cls, d):
        return cls(d["classes"], [(it["path"], it["label"]) for it in d["items"]])


def save_manifest(manifest: Manifest, path):
    try:
        with open(path, "w") as fh:
            json.dump(manifest.to_dict(), fh, indent=2)
            fh.write("\n")
    except OSError as e:
        raise DatasetIOError(f"{path}: {e.strerror or e}") from e


def load_manifest(path) -> Manifest:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as e:
        raise DatasetIOError(f"{path}: {e.strerror or e}") from e
    except json.JSONDecodeError as e:
        raise DatasetIOError(f"{path}: invalid JSON ({e})") from e
    try:
        return Manifest.from_dict(doc)
    except (KeyError, TypeError, ValueError) as e:
        raise DatasetIOError(f"{path}: malformed manifest ({e})") from e


class PpmImages(Sequence):
    """Images read from disk on access."""

    def __init__(self, paths):
        self.paths = list(paths)

    def __len__(self):
        return len(self.paths)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        return read_ppm(self.paths[i])


def _manifest_path(path):
    return os.path.join(path, MANIFEST_NAME) if os.path.isdir(path) else path


def load_dataset(path) -> LabeledDataset:
    """Dataset from a directory holding ``manifest.json`` (or the manifest itself)."""
    mpath = _manifest_path(path)
    m = load_manifest(mpath)
    root = os.path.dirname(os.path.abspath(mpath))
    paths = [p if os.path.isabs(p) else os.path.join(root, p) for p, _ in m.items]
    missing = [p for p in paths if not os.path.isfile(p)]
    if missing:
        raise DatasetIOError(f"{mpath}: {len(missing)} listed image(s) missing, first {missing[0]}")
    return LabeledDataset(PpmImages(paths), [k for _, k in m.items], m.classes)


def save_dataset(data: LabeledDataset, directory, prefix="img", threads=None) -> Manifest:
    """Write every image as PPM plus a manifest; returns the manifest."""
    from .features.extractors import map_images

    try:
        os.makedirs(directory, exist_ok=True)
    except OSError as e:
        raise DatasetIOError(f"{directory}: {e.strerror or e}") from e
    width = max(5, len(str(max(data.n - 1, 0))))
    names = [f"{prefix}_{i:0{width}d}.ppm" for i in range(data.n)]

    def write(i):
        write_ppm(data.images[i], os.path.join(directory, names[i]))

    map_images(write, range(data.n), threads)
    m = Manifest(data.classes, list(zip(names, data.labels.tolist())))
    save_manifest(m, os.path.join(directory, MANIFEST_NAME))
    return m

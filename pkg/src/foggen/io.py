"""Raster file formats.

* color images: 8-bit (or 16-bit) RGB PNG, returned as float in [0, 1]
* disparity: 16-bit PNG, 0 = invalid, otherwise ``(p - 1) / 256`` pixels
* transmission: 16-bit PNG, ``round(t * 65535)``
* depth / distance: 16-bit PNG, ``round(meters * 256)``, saturating
"""
import io as _io
import json
import os
from pathlib import Path
import tempfile

import numpy as np
from PIL import Image

from .core import ScalarField

UINT16_MAX = 65535
METRIC_SCALE = 256.0


def atomic_write_bytes(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _png_bytes(arr):
    buf = _io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


def write_png(path, arr):
    atomic_write_bytes(path, _png_bytes(arr))


def write_json(path, obj):
    atomic_write_bytes(path, (json.dumps(obj, indent=2, sort_keys=True) + "\n").encode())


def read_png(path):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    with Image.open(path) as im:
        return np.array(im)


def read_image(path):
    arr = read_png(path)
    if arr.ndim == 2:
        arr = np.repeat(arr[..., None], 3, axis=2)
    arr = arr[..., :3]
    scale = UINT16_MAX if arr.dtype == np.uint16 or arr.max() > 255 else 255
    return arr.astype(np.float64) / scale


def write_image(path, image):
    img = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    write_png(path, np.floor(img * 255 + 0.5).astype(np.uint8))


def read_disparity(path):
    p = read_png(path).astype(np.float64)
    if p.ndim != 2:
        raise ValueError(f"{path}: disparity must be single-channel")
    valid = p > 0
    values = np.where(valid, (p - 1.0) / 256.0, 0.0)
    return ScalarField(values, valid)


def encode_disparity(disparity):
    values = disparity.values if isinstance(disparity, ScalarField) else np.asarray(disparity)
    valid = disparity.valid if isinstance(disparity, ScalarField) else np.isfinite(values)
    p = np.floor(np.where(valid, values, 0.0) * 256.0 + 0.5) + 1.0
    p = np.clip(p, 1, UINT16_MAX)
    return np.where(valid, p, 0).astype(np.uint16)


def write_disparity(path, disparity):
    write_png(path, encode_disparity(disparity))


def encode_transmission(t):
    t = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)
    return np.floor(t * UINT16_MAX + 0.5).astype(np.uint16)


def encode_metric(meters):
    values = getattr(meters, "values", meters)
    m = np.clip(np.asarray(values, dtype=np.float64) * METRIC_SCALE, 0, UINT16_MAX)
    return np.floor(m + 0.5).astype(np.uint16)


def decode_metric(arr):
    return np.asarray(arr, dtype=np.float64) / METRIC_SCALE


def write_transmission(path, t):
    write_png(path, encode_transmission(t))


def write_metric(path, meters):
    write_png(path, encode_metric(meters))


def read_metric(path):
    return decode_metric(read_png(path))


def read_labels(path):
    arr = read_png(path)
    if arr.ndim != 2:
        raise ValueError(f"{path}: label raster must be single-channel")
    return arr.astype(np.int64)


def write_labels(path, labels):
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() > UINT16_MAX:
        raise ValueError("labels do not fit in 16 bits")
    dtype = np.uint8 if labels.max() <= 255 else np.uint16
    write_png(path, labels.astype(dtype))

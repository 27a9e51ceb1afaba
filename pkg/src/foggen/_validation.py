"""Input validation helpers shared by the functional API and the estimators."""
import numpy as np


def check_image(image, name="image"):
    """Return ``image`` as a float64 (H, W, 3) array with values in [0, 1]."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"{name} must have shape (H, W, 3), got {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError(f"{name} values must lie in [0, 1]")
    return arr


def check_field(values, name="field"):
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def check_same_shape(*pairs):
    """``pairs`` are (name, array) tuples; compare their leading (H, W) dims."""
    shapes = [(name, np.shape(a)[:2]) for name, a in pairs]
    ref_name, ref = shapes[0]
    for name, shape in shapes[1:]:
        if shape != ref:
            raise ValueError(
                f"dimension mismatch: {ref_name} is {ref}, {name} is {shape}"
            )


def check_positive(value, name, strict=True):
    value = float(value)
    if not np.isfinite(value) or (value <= 0 if strict else value < 0):
        bound = "> 0" if strict else ">= 0"
        raise ValueError(f"{name} must be {bound}, got {value}")
    return value

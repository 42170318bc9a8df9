"""Input validation helpers shared by the estimators and the functional API."""
import numpy as np

from .exceptions import TopoEffectError


def check_point_cloud(points, name="points"):
    """Return ``points`` as a finite 2-D float array of shape (n, p), n >= 1.

    A 1-D input is read as n points on the line.
    """
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise TopoEffectError(f"{name} must be 1-D or 2-D, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise TopoEffectError(f"{name} must be nonempty")
    if not np.all(np.isfinite(arr)):
        raise TopoEffectError(f"{name} contains non-finite coordinates")
    return arr


def check_samples_1d(samples, minimum=2, name="samples"):
    arr = np.asarray(samples, dtype=float)
    if arr.ndim == 2 and arr.shape[1] == 1:
        arr = arr[:, 0]
    if arr.ndim != 1:
        raise TopoEffectError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size < minimum:
        raise TopoEffectError(f"{name} needs at least {minimum} values, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise TopoEffectError(f"{name} contains non-finite values")
    return arr


def check_treatment(t, n):
    t = np.asarray(t).ravel()
    if t.shape[0] != n:
        raise TopoEffectError(f"treatment has {t.shape[0]} entries, expected {n}")
    if not np.all(np.isin(t, (0, 1))):
        raise TopoEffectError("treatment must be binary (0/1)")
    return t.astype(np.int64)


def check_strata(z, n):
    if z is None:
        return np.zeros(n, dtype=np.int64)
    z = np.asarray(z).ravel()
    if z.shape[0] != n:
        raise TopoEffectError(f"strata have {z.shape[0]} entries, expected {n}")
    return z


def check_positive(value, name):
    if not value > 0:
        raise TopoEffectError(f"{name} must be > 0, got {value}")
    return value

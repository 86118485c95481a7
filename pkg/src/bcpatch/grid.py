"""Odd-odd symmetric fields on the torus, stored on the quarter [0, 1/2]^2.

A field in the symmetry class is determined by its values on the closed
quarter.  The nodes are (i*h, j*h) with h = 1/(2n); the four edges are
pinned to zero by the odd reflections through the axes and through the
lines x = 1/2, y = 1/2.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._transforms import cos_sin_synthesis, dst_analysis
from .errors import DomainError, FieldError, ShapeError

MAGIC = b"BCFIELD1"
FIELD_KINDS = ("psi0", "barrier", "phi", "ratio", "other")


@dataclass(frozen=True)
class QuarterGrid:
    n: int

    def __post_init__(self):
        n = self.n
        if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
            raise DomainError(f"grid size must be an integer, got {n!r}")
        if n < 8 or n & (n - 1):
            raise DomainError(f"grid size must be a power of two >= 8, got {n}")

    @property
    def h(self) -> float:
        return 1.0 / (2 * self.n)

    @property
    def shape(self):
        return (self.n + 1, self.n + 1)

    @property
    def coords(self) -> np.ndarray:
        return np.arange(self.n + 1) * self.h

    def mesh(self):
        x = self.coords
        return np.meshgrid(x, x, indexing="ij")

    def polar(self):
        x1, x2 = self.mesh()
        return np.hypot(x1, x2), np.arctan2(x2, x1)

    @classmethod
    def from_shape(cls, shape) -> "QuarterGrid":
        if len(shape) != 2 or shape[0] != shape[1]:
            raise ShapeError(f"expected a square node array, got shape {shape}")
        return cls(int(shape[0]) - 1)


@dataclass(frozen=True, eq=False)
class SymmetricField:
    """Quarter-domain values of an odd-odd periodic field.

    ``values[i, j]`` is the value at (i*h, j*h).  The array is copied and
    made read-only on construction.
    """
    grid: QuarterGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True)
        if v.shape != self.grid.shape:
            raise ShapeError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise FieldError("field has non-finite values")
        edges = np.concatenate([v[0], v[-1], v[:, 0], v[:, -1]])
        if np.any(edges != 0.0):
            raise FieldError("odd symmetry requires exact zeros on all four edges")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_interior(cls, grid: QuarterGrid, interior) -> "SymmetricField":
        v = np.zeros(grid.shape)
        v[1:-1, 1:-1] = interior
        return cls(grid, v)

    @classmethod
    def from_function(cls, grid: QuarterGrid, func) -> "SymmetricField":
        """Sample ``func(x1, x2)`` on the interior nodes; edges are pinned."""
        x1, x2 = grid.mesh()
        return cls.from_interior(grid, np.asarray(func(x1, x2), dtype=float)[1:-1, 1:-1])

    @classmethod
    def zeros(cls, grid: QuarterGrid) -> "SymmetricField":
        return cls(grid, np.zeros(grid.shape))

    @property
    def interior(self) -> np.ndarray:
        return self.values[1:-1, 1:-1]

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def transpose(self) -> "SymmetricField":
        return SymmetricField(self.grid, self.values.T)

    def _other(self, other):
        if isinstance(other, SymmetricField):
            if other.grid != self.grid:
                raise ShapeError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return SymmetricField(self.grid, self.values + self._other(other))

    def __sub__(self, other):
        return SymmetricField(self.grid, self.values - self._other(other))

    def __mul__(self, c):
        return SymmetricField(self.grid, self.values * float(c))

    __rmul__ = __mul__

    def __neg__(self):
        return SymmetricField(self.grid, -self.values)


def _values(f):
    return f.values if isinstance(f, SymmetricField) else np.asarray(f, dtype=float)


def extend_to_torus(f: SymmetricField) -> np.ndarray:
    """Odd-odd periodic extension on the (2n)x(2n) torus node array.

    Index k along either axis stands for x = k*h in [0, 1); nodes with
    k > n are the reflections of x = k*h - 1 in (-1/2, 0).
    """
    v = f.values
    n = f.grid.n
    left = np.concatenate([v, -v[n - 1:0:-1]], axis=0)
    return np.concatenate([left, -left[:, n - 1:0:-1]], axis=1)


def restrict(full) -> SymmetricField:
    """Inverse of :func:`extend_to_torus`."""
    full = np.asarray(full)
    if full.ndim != 2 or full.shape[0] != full.shape[1] or full.shape[0] % 2:
        raise ShapeError(f"torus array must be square with even side, got {full.shape}")
    n = full.shape[0] // 2
    return SymmetricField(QuarterGrid(n), full[: n + 1, : n + 1])


def _fold(k, n, parity):
    """Map integer node indices onto the quarter with the sign of the reflection."""
    k = np.mod(k, 2 * n)
    over = k > n
    idx = np.where(over, 2 * n - k, k)
    sign = np.where(over, float(parity), 1.0)
    return idx, sign


def _cubic_weights(t):
    return (
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    )


def interpolate(f, x1, x2, parity=(-1, -1)) -> np.ndarray:
    """Tensor cubic Lagrange interpolation of quarter-node data.

    Points may lie anywhere on the torus; the data are extended with the
    given reflection parity per axis (-1 odd, +1 even) and period 1.  NaN
    data inside a stencil propagate to the result.
    """
    v = _values(f)
    n = v.shape[0] - 1
    h = 1.0 / (2 * n)
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    x1, x2 = np.broadcast_arrays(x1, x2)
    s1 = x1 / h
    s2 = x2 / h
    b1 = np.floor(s1)
    b2 = np.floor(s2)
    w1 = _cubic_weights(s1 - b1)
    w2 = _cubic_weights(s2 - b2)
    b1 = b1.astype(np.int64)
    b2 = b2.astype(np.int64)
    out = np.zeros(x1.shape)
    for a in range(4):
        ia, sa = _fold(b1 + a - 1, n, parity[0])
        acc = np.zeros(x1.shape)
        for b in range(4):
            jb, sb = _fold(b2 + b - 1, n, parity[1])
            acc += w2[b] * sb * v[ia, jb]
        out += w1[a] * sa * acc
    return out


def sample_polar(f, r, theta):
    """Bicubic value of ``f`` at polar point (r, theta) of the quarter."""
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if np.any(r < 0) or np.any(theta < 0) or np.any(theta > np.pi / 2 + 1e-15):
        raise DomainError("polar sample outside the closed quarter")
    if np.any(r * np.maximum(np.cos(theta), np.sin(theta)) > 0.5 + 1e-15):
        raise DomainError("polar sample outside the closed quarter")
    x1 = np.clip(r * np.cos(theta), 0.0, 0.5)
    x2 = np.clip(r * np.sin(theta), 0.0, 0.5)
    out = interpolate(f, x1, x2)
    return float(out) if out.ndim == 0 else out


def gradient(f: SymmetricField):
    """Spectral gradient (d/dx1, d/dx2) on all quarter nodes.

    d/dx1 is even in x1 and odd in x2, d/dx2 the other way round, so the
    two arrays vanish on the rows j = 0, n and columns i = 0, n
    respectively.
    """
    n = f.grid.n
    a = dst_analysis(f.interior)
    k = 2.0 * np.pi * np.arange(1, n)
    d1 = cos_sin_synthesis(k[:, None] * a)
    d2 = cos_sin_synthesis((k[:, None] * a.T)).T
    return d1, d2


def trapezoid_weights(n: int) -> np.ndarray:
    w = np.full(n + 1, 1.0 / (2 * n))
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def weighted_integral(f, weight, p: float = 1.0) -> float:
    """Composite trapezoid rule for weight*|f|**p over the quarter."""
    fv = _values(f)
    wv = _values(weight)
    if isinstance(f, SymmetricField) and isinstance(weight, SymmetricField) and f.grid != weight.grid:
        raise ShapeError("fields live on different grids")
    if fv.shape != wv.shape:
        raise ShapeError(f"shape mismatch {fv.shape} vs {wv.shape}")
    grid = QuarterGrid.from_shape(fv.shape)
    w = trapezoid_weights(grid.n)
    integrand = wv * np.abs(fv) ** p
    return float(w @ integrand @ w)


def write_field(path, values, *, s=None, eps=None, kind="other", generator=None):
    """Write node values in the binary field format plus a JSON sidecar."""
    if kind not in FIELD_KINDS:
        raise DomainError(f"unknown field kind {kind!r}")
    v = _values(values)
    grid = QuarterGrid.from_shape(v.shape)
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", grid.n))
        # i fastest: column-major order of values[i, j]
        fh.write(np.asarray(v, dtype="<f8").tobytes(order="F"))
    meta = {"n": grid.n, "s": s, "eps": eps, "kind": kind, "generator": generator}
    sidecar = path.with_name(path.name + ".json")
    sidecar.write_text(json.dumps(meta, sort_keys=True, indent=1) + "\n")
    return path, sidecar


def read_field(path):
    """Return (values, meta) from a binary field file and its sidecar."""
    path = Path(path)
    raw = path.read_bytes()
    if raw[:8] != MAGIC:
        raise FieldError(f"{path}: bad magic")
    (n,) = struct.unpack("<I", raw[8:12])
    count = (n + 1) ** 2
    if len(raw) != 12 + 8 * count:
        raise FieldError(f"{path}: truncated field file")
    v = np.frombuffer(raw, dtype="<f8", offset=12, count=count).reshape((n + 1, n + 1), order="F")
    sidecar = path.with_name(path.name + ".json")
    meta = json.loads(sidecar.read_text()) if sidecar.exists() else {"n": n}
    return np.array(v, dtype=np.float64), meta


def load_symmetric(path) -> SymmetricField:
    v, _ = read_field(path)
    return SymmetricField(QuarterGrid.from_shape(v.shape), v)

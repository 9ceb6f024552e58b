"""Seeded random streams and small dense linear-algebra helpers.

Everything downstream (network weights, feedback projections, masks,
Fourier coefficients, noise) draws from an :class:`RngStream`, so a run is
fully determined by its integer seed.  Arrays are plain row-major
``numpy.ndarray`` in float64 (complex128 for the complex variants).
"""

from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    """Operands have incompatible shapes."""


class RngStream:
    """Deterministic random stream keyed by a 64-bit seed.

    Wraps numpy's PCG64 counter-based generator, whose output sequence for
    a given seed is stable across platforms and releases.  A stream is
    single-owner: give each logical component (weight init, noise source,
    sweep point) its own stream via :meth:`child` instead of sharing one.
    """

    def __init__(self, seed: int, _spawn_key: tuple = ()):
        self.seed = int(seed)
        self.spawn_key = _spawn_key
        seq = np.random.SeedSequence(self.seed, spawn_key=_spawn_key)
        self._gen = np.random.Generator(np.random.PCG64(seq))

    def child(self, index: int) -> "RngStream":
        """Derive an independent stream; (seed, index path) fixes it."""
        return RngStream(self.seed, self.spawn_key + (int(index),))

    def uniform(self, lo: float, hi: float, size=None) -> np.ndarray:
        return self._gen.uniform(lo, hi, size=size)

    def standard_normal(self, size=None) -> np.ndarray:
        return self._gen.standard_normal(size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def integers(self, lo: int, hi: int, size=None):
        return self._gen.integers(lo, hi, size=size)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, spawn_key={self.spawn_key})"


def uniform_matrix(rows: int, cols: int, lo: float, hi: float,
                   rng: RngStream) -> np.ndarray:
    """rows x cols matrix with i.i.d. entries uniform on [lo, hi)."""
    if rows < 1 or cols < 1:
        raise ValueError(f"matrix dimensions must be >= 1, got {rows}x{cols}")
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi})")
    return rng.uniform(lo, hi, size=(rows, cols))


def uniform_complex_matrix(rows: int, cols: int, lo: float, hi: float,
                           rng: RngStream) -> np.ndarray:
    """Complex matrix with real and imaginary parts i.i.d. uniform on [lo, hi)."""
    re = uniform_matrix(rows, cols, lo, hi, rng)
    im = uniform_matrix(rows, cols, lo, hi, rng)
    return re + 1j * im


def hadamard(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise product; shapes must match exactly (no broadcasting)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ShapeError(f"hadamard: shape mismatch {a.shape} vs {b.shape}")
    return a * b


def outer(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Outer product of two vectors: result[i, j] = u[i] * v[j]."""
    u = np.asarray(u)
    v = np.asarray(v)
    if u.ndim != 1 or v.ndim != 1:
        raise ShapeError(f"outer expects vectors, got {u.shape} and {v.shape}")
    if u.size == 0 or v.size == 0:
        raise ShapeError("outer: empty operand")
    return np.outer(u, v)


def assert_finite(arr: np.ndarray, what: str = "array") -> np.ndarray:
    """Raise FloatingPointError if any entry is NaN or infinite."""
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"{what} contains non-finite entries")
    return arr

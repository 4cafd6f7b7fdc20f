"""Seedable random directions.

Streams are Philox (counter-based) generators keyed through
``numpy.random.SeedSequence(seed, spawn_key=(stream_id, lane))``, so every
``(seed, stream_id)`` pair gives independent, reproducible draws regardless of
the order in which streams are consumed.  Each stream has two lanes: one for
directions and one for evaluation noise, so switching noise on or off never
shifts the direction sequence.

Gaussians come from numpy's ziggurat sampler (``Generator.standard_normal``)
on top of Philox; uniform unit vectors are normalised Gaussians.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

_DIRECTIONS = 0
_NOISE = 1


def _generator(seed: int, stream_id: int, lane: int) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(stream_id, lane))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class RngStream:
    """One independent random stream, owned by a single worker."""

    seed: int
    stream_id: int = 0
    directions: np.random.Generator = field(init=False, repr=False)
    noise: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        for name, value in (("seed", self.seed), ("stream_id", self.stream_id)):
            if not 0 <= int(value) < 2**64:
                raise ValueError(f"{name} must fit in an unsigned 64-bit integer")
        self.directions = _generator(self.seed, self.stream_id, _DIRECTIONS)
        self.noise = _generator(self.seed, self.stream_id, _NOISE)


def stream_id_for(*parts) -> int:
    """Stable 64-bit stream id for a tuple of labels (independent of PYTHONHASHSEED)."""
    text = "\x1f".join(repr(p) for p in parts).encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little")


def as_generator(rng) -> np.random.Generator:
    """Accept an :class:`RngStream` (its direction lane) or anything Generator-like."""
    if isinstance(rng, RngStream):
        return rng.directions
    if rng is None:
        raise ValueError("a random stream is required")
    return rng


def noise_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.noise
    if rng is None:
        raise ValueError("a random stream is required for noisy evaluations")
    return rng


def _check_dim(n) -> int:
    if int(n) != n or n < 1:
        raise ValueError(f"dimension must be a positive integer, got {n}")
    return int(n)


def sample_unit_sphere(rng, n: int, size: int | None = None) -> np.ndarray:
    """Uniform draw(s) from the unit sphere in R^n; shape ``(n,)`` or ``(size, n)``."""
    n = _check_dim(n)
    shape = (n,) if size is None else (size, n)
    g = as_generator(rng).standard_normal(shape)
    norm = np.linalg.norm(g, axis=-1, keepdims=True)
    # a zero Gaussian vector has probability zero; guard anyway
    while np.any(norm == 0):
        bad = (norm == 0)[..., 0]
        g[bad] = as_generator(rng).standard_normal((int(np.sum(bad)), n))
        norm = np.linalg.norm(g, axis=-1, keepdims=True)
    return g / norm


def sample_gaussian(rng, n: int, size: int | None = None) -> np.ndarray:
    """Standard normal draw(s) in R^n; shape ``(n,)`` or ``(size, n)``."""
    n = _check_dim(n)
    shape = (n,) if size is None else (size, n)
    return as_generator(rng).standard_normal(shape)


def stiefel_project(X: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """Orthogonal projection of ``Z`` onto the tangent space of St(n, k) at ``X``.

    ``P_X Z = (I - X X^T) Z + X (X^T Z - Z^T X) / 2``.
    """
    XtZ = X.T @ Z
    return Z - X @ XtZ + 0.5 * X @ (XtZ - XtZ.T)


def sample_stiefel_tangent(rng, X: np.ndarray) -> np.ndarray:
    """Uniform unit-Frobenius-norm tangent vector at ``X`` on the Stiefel manifold."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] > X.shape[0]:
        raise ValueError("X must be an n-by-k matrix with k <= n")
    if not np.allclose(X.T @ X, np.eye(X.shape[1]), rtol=0, atol=1e-10):
        raise ValueError("X must have orthonormal columns")
    n, k = X.shape
    if n * k - k * (k + 1) // 2 == 0:
        raise ValueError("St(1, 1) has a zero-dimensional tangent space")
    G = as_generator(rng).standard_normal(X.shape)
    Z = stiefel_project(X, G)
    return Z / np.linalg.norm(Z)

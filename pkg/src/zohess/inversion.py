"""Zeroth-order Hessian adjugate (Cramer's rule) and inverse (Neumann series).

Both algorithms work on Euclidean objectives and use the stabilized
four-point estimator as their inner sampler by default.  Indices are
0-based throughout.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .estimators import NOISELESS, NoiseModel, new_estimator_budget
from .manifold import euclidean
from .sampling import as_generator, noise_generator, sample_unit_sphere

# CHA draws m * n^4 direction pairs; the CLI refuses larger problems.
CHA_MAX_DIM = 12


@dataclass(frozen=True)
class ChaConfig:
    m: int
    delta: float
    backend: str = "stabilized"

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"CHA needs m >= 1, got {self.m}")
        if not self.delta > 0:
            raise ValueError(f"step size must be positive, got {self.delta}")
        if self.backend not in ("stabilized", "entrywise"):
            raise ValueError(f"unknown CHA backend {self.backend!r}")


@dataclass(frozen=True)
class NhiConfig:
    m1: int
    m2: int
    m3: int
    delta: float

    def __post_init__(self):
        for name in ("m1", "m2", "m3"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"NHI needs {name} >= 1, got {value}")
        if not self.delta > 0:
            raise ValueError(f"step size must be positive, got {self.delta}")


def _square(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    return M


def determinant(M) -> float:
    """Determinant via LU with partial pivoting (LAPACK ``getrf``)."""
    return float(np.linalg.det(_square(M)))


def submatrix(M, drop_row: int, drop_col: int) -> np.ndarray:
    """``M`` with row ``drop_row`` and column ``drop_col`` removed."""
    M = _square(M)
    n = M.shape[0]
    if not (0 <= drop_row < n and 0 <= drop_col < n):
        raise IndexError(f"indices ({drop_row}, {drop_col}) out of range for a {n}x{n} matrix")
    keep_r = np.arange(n) != drop_row
    keep_c = np.arange(n) != drop_col
    return M[np.ix_(keep_r, keep_c)]


def adjugate_reference(M) -> np.ndarray:
    """Exact adjugate ``[(-1)^(i+j) det(M without row j, column i)]``."""
    M = _square(M)
    n = M.shape[0]
    if n == 1:
        return np.ones((1, 1))
    adj = np.empty_like(M)
    for i in range(n):
        for j in range(n):
            adj[i, j] = (-1) ** (i + j) * determinant(submatrix(M, j, i))
    return adj


def neumann_truncated(H, m2: int) -> np.ndarray:
    """``sum_{j=0}^{m2} (I - H)^j`` by Horner accumulation."""
    H = _square(H)
    if int(m2) != m2 or m2 < 0:
        raise ValueError(f"series depth must be >= 0, got {m2}")
    eye = np.eye(H.shape[0])
    step = eye - H
    S = eye.copy()
    for _ in range(int(m2)):
        S = eye + step @ S
    return S


def _entry_index(n: int):
    """Broadcastable (i, j, a, b) grids and the Hessian row/column of entry (a, b)
    of the submatrix obtained by dropping row i and column j."""
    idx = np.arange(n)
    keep = np.stack([idx[idx != i] for i in range(n)])  # (n, n-1)
    i = idx[:, None, None, None]
    j = idx[None, :, None, None]
    a = np.arange(n - 1)[None, None, :, None]
    b = np.arange(n - 1)[None, None, None, :]
    return i, j, a, b, keep[i, a], keep[j, b]


def _submatrix_samples_stabilized(f, x, k, delta, noise, rng) -> tuple[np.ndarray, int]:
    """``k`` independent estimates of every (i, j)-submatrix, shape ``(k, n, n, n-1, n-1)``.

    Per (k, i, j) ``n^2`` direction pairs are drawn, one per entry index (a, b);
    entry (a, b) of the submatrix comes from its own pair, the rest are unused.
    """
    n = x.shape[0]
    gen = as_generator(rng)
    V = sample_unit_sphere(gen, n, k * n**4).reshape(k, n, n, n, n, n)[:, :, :, : n - 1, : n - 1]
    W = sample_unit_sphere(gen, n, k * n**4).reshape(k, n, n, n, n, n)[:, :, :, : n - 1, : n - 1]

    flat_v = V.reshape(-1, n)
    flat_w = W.reshape(-1, n)
    q = flat_v.shape[0]
    comps = delta * np.concatenate([flat_v + flat_w, -flat_v + flat_w, flat_v - flat_w, -flat_v - flat_w])
    vals = np.asarray(f(x + comps), dtype=float)
    vals = noise.corrupt(vals, noise_generator(rng) if noise.active else None).reshape(4, q)
    c = (n * n / (8.0 * delta**2)) * (vals[0] - vals[1] - vals[2] + vals[3])

    i, j, a, b, r, s = _entry_index(n)
    vw = V[:, i, j, a, b, r] * W[:, i, j, a, b, s] + W[:, i, j, a, b, r] * V[:, i, j, a, b, s]
    return c.reshape(vw.shape) * vw, 4 * q


def _submatrix_samples_entrywise(f, x, k, delta, noise, rng) -> tuple[np.ndarray, int]:
    """Same layout as the stabilized sampler, each entry from its own coordinate stencil."""
    n = x.shape[0]
    _, _, _, _, r, s = _entry_index(n)
    shape = (k, n, n, n - 1, n - 1)
    eye = np.eye(n)
    er = np.broadcast_to(eye[r], shape + (n,)).reshape(-1, n)
    es = np.broadcast_to(eye[s], shape + (n,)).reshape(-1, n)
    q = er.shape[0]
    comps = delta * np.concatenate([er + es, er - es, -er + es, -er - es])
    vals = np.asarray(f(x + comps), dtype=float)
    vals = noise.corrupt(vals, noise_generator(rng) if noise.active else None).reshape(4, q)
    entries = (vals[0] - vals[1] - vals[2] + vals[3]) / (4.0 * delta**2)
    return entries.reshape(shape), 4 * q


def cha(f, x, m: int, delta: float, noise: NoiseModel = NOISELESS, rng=None, *,
        backend: str = "stabilized", chunk: int | None = None, stats: dict | None = None) -> np.ndarray:
    """Cramer-Hessian-Adjugate: unbiased zeroth-order estimate of ``adj(Hessian)``.

    For every repetition k and every (i, j), the (i, j)-submatrix of the
    Hessian is estimated with mutually independent entries, its determinant
    taken, and the determinants averaged over k into the minors ``M_ij``.
    The output is ``[(-1)^(i+j) M_ji]``.

    ``backend="entrywise"`` swaps the inner sampler for coordinate stencils.
    If ``stats`` is a dict it receives ``evaluations``, ``pairs_drawn`` and
    ``pairs_per_minor``.  Only the ``(n-1)^2`` pairs a submatrix uses are evaluated.
    """
    cfg = ChaConfig(m, delta, backend)
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("x must be a point in R^n")
    n = x.shape[0]
    if n == 1:
        # the only minor is the empty determinant
        if stats is not None:
            stats.update(evaluations=0, pairs_drawn=0, pairs_per_minor=0)
        return np.ones((1, 1))
    sampler = _submatrix_samples_stabilized if backend == "stabilized" else _submatrix_samples_entrywise
    if chunk is None:
        chunk = max(1, 2**20 // n**5)
    minors = np.zeros((n, n))
    evaluations = 0
    done = 0
    while done < cfg.m:
        k = min(chunk, cfg.m - done)
        S, used = sampler(f, x, k, cfg.delta, noise, rng)
        minors += np.linalg.det(S).sum(axis=0)
        evaluations += used
        done += k
    minors /= cfg.m
    sign = (-1.0) ** np.add.outer(np.arange(n), np.arange(n))
    if stats is not None:
        stats["evaluations"] = evaluations
        stabilized = backend == "stabilized"
        stats["pairs_drawn"] = cfg.m * n**4 if stabilized else 0
        stats["pairs_per_minor"] = cfg.m * n * n if stabilized else 0
    return sign * minors.T


def cha_with_determinant(f, x, m: int, delta: float, noise: NoiseModel = NOISELESS, rng=None,
                         **kwargs) -> tuple[np.ndarray, float]:
    """CHA plus a determinant estimate by cofactor expansion along the first row.

    The first Hessian row is estimated from ``m`` fresh stabilized samples,
    independent of the minors, so the product stays unbiased.
    """
    adj = cha(f, x, m, delta, noise, rng, **kwargs)
    x = np.asarray(x, dtype=float)
    row = new_estimator_budget(f, euclidean(x.shape[0]), x, 4 * m, delta, noise, rng).form.coeffs[0]
    return adj, float(row @ adj[:, 0])


def nhi(f, x, m1: int, m2: int, m3: int, delta: float, noise: NoiseModel = NOISELESS, rng=None, *,
        hessian_sampler: Callable[[], np.ndarray] | None = None, stats: dict | None = None) -> np.ndarray:
    """Neumann-Hessian-Inverse.

    ``(1/m1) sum_i (I + sum_{h=1}^{m2} prod_{j=1}^{h} (I - Hbar_ij))`` where each
    ``Hbar_ij`` averages ``m3`` stabilized samples.  Products are accumulated
    left to right, reusing the prefix across ``h``.

    ``hessian_sampler`` replaces the inner ``Hbar_ij`` draw (used to inject an
    exact Hessian in tests).  If ``stats`` is a dict it receives
    ``standard_error``: the Frobenius norm of the entrywise standard error of
    the mean over the ``m1`` outer terms (0 when ``m1 == 1``).
    """
    cfg = NhiConfig(m1, m2, m3, delta)
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if hessian_sampler is None:
        chart = euclidean(n)

        def hessian_sampler():
            return new_estimator_budget(f, chart, x, 4 * cfg.m3, cfg.delta, noise, rng).form.coeffs

    eye = np.eye(n)
    terms = np.empty((cfg.m1, n, n))
    for i in range(cfg.m1):
        prefix = eye
        series = eye.copy()
        for _ in range(cfg.m2):
            prefix = prefix @ (eye - hessian_sampler())
            series = series + prefix
        terms[i] = series
    if stats is not None:
        se = terms.std(axis=0, ddof=1) / np.sqrt(cfg.m1) if cfg.m1 > 1 else np.zeros((n, n))
        stats["standard_error"] = float(np.linalg.norm(se))
    return terms.mean(axis=0)

"""Zeroth-order Hessian estimators.

Single-sample building blocks:

* :func:`raw_estimate`: one evaluation, ``(n^2/d^2) f(Exp_p(d v + d w)) v (x) w``.
* :func:`stabilized_estimate`: the symmetric four-point version.
* :func:`stein_estimate`: the Gaussian (Stein identity) estimator.

Budget-matched estimators consuming at most ``m`` noisy evaluations:
:func:`new_estimator_budget`, :func:`stein_budget`, :func:`entrywise_estimate`.
All three return the *average* of their per-sample estimates.

Objectives ``f`` are vectorised callables taking an ``(k, ambient_dim)`` array.
Forms are expressed in the orthonormal tangent basis of ``chart.basis(p)``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .manifold import ManifoldChart
from .sampling import as_generator, noise_generator, sample_gaussian, sample_unit_sphere

ESTIMATOR_KEYS = ("new", "stein", "entrywise")

# evaluations per sample for each budgeted estimator (entrywise: times n^2)
GRANULE = {"new": 4, "stein": 3, "entrywise": 4}


@dataclass(frozen=True)
class SymBilinearForm:
    """Symmetric bilinear form on a tangent space, as its coefficient matrix.

    The matrix is symmetrised on construction.  ``raw`` optionally keeps the
    asymmetric tensor an estimator produced before symmetrisation.
    """

    coeffs: np.ndarray
    raw: np.ndarray | None = field(default=None, compare=False, repr=False)
    base: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError(f"coefficients must be a square matrix, got shape {c.shape}")
        c = 0.5 * (c + c.T)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def n(self) -> int:
        return self.coeffs.shape[0]

    def __sub__(self, other: "SymBilinearForm") -> "SymBilinearForm":
        _check_compatible(self, other)
        return SymBilinearForm(self.coeffs - other.coeffs, base=self.base)

    def __call__(self, u, v) -> float:
        return float(np.asarray(u) @ self.coeffs @ np.asarray(v))


def _check_compatible(a: SymBilinearForm, b: SymBilinearForm) -> None:
    if a.n != b.n:
        raise ValueError(f"dimension mismatch: {a.n} vs {b.n}")
    if a.base is not None and b.base is not None and not np.array_equal(a.base, b.base):
        raise ValueError("forms live at different base points")


@dataclass(frozen=True)
class NoiseModel:
    """Independent additive N(0, variance) corruption of every evaluation."""

    variance: float = 0.0
    enabled: bool = True

    def __post_init__(self):
        if not self.variance >= 0:
            raise ValueError(f"noise variance must be nonnegative, got {self.variance}")

    @property
    def active(self) -> bool:
        return self.enabled and self.variance > 0

    def corrupt(self, values: np.ndarray, gen: np.random.Generator) -> np.ndarray:
        if not self.active:
            return values
        return values + np.sqrt(self.variance) * gen.standard_normal(values.shape)


NOISELESS = NoiseModel(0.0, enabled=False)


@dataclass(frozen=True)
class PhaseTimes:
    sampling: float = 0.0
    evaluation: float = 0.0
    computation: float = 0.0


@dataclass(frozen=True)
class BudgetedEstimate:
    form: SymBilinearForm
    evaluations_used: int
    wall_times: PhaseTimes = PhaseTimes()


def operator_norm(form) -> float:
    """Largest absolute eigenvalue of a symmetric form (or symmetric matrix)."""
    coeffs = form.coeffs if isinstance(form, SymBilinearForm) else np.asarray(form, dtype=float)
    if coeffs.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvalsh(coeffs))))


def estimation_error(estimate: SymBilinearForm, truth: SymBilinearForm) -> float:
    return operator_norm(estimate - truth)


# -- helpers ----------------------------------------------------------------------


def _check_unit(v, n: int, name: str) -> np.ndarray:
    """Unit direction(s) as a ``(k, n)`` array."""
    v = np.asarray(v, dtype=float)
    rows = v[None, :] if v.ndim == 1 else v
    if rows.ndim != 2 or rows.shape[1] != n:
        raise ValueError(f"{name} must have {n} components, got shape {v.shape}")
    if np.any(np.abs(np.linalg.norm(rows, axis=1) - 1.0) > 1e-10):
        raise ValueError(f"{name} must be a unit vector")
    return rows


def _noise_gen(noise: NoiseModel, rng):
    return noise_generator(rng) if noise.active else None


def _observe(f, chart, p, comps, basis, noise, gen) -> np.ndarray:
    values = np.asarray(f(chart.exp(p, comps, basis)), dtype=float)
    if values.shape != comps.shape[:-1]:
        raise ValueError("objective must return one value per point")
    return noise.corrupt(values, gen)


def _four_point(f, chart, p, a, b, delta, basis, noise, gen) -> np.ndarray:
    """``f(+a+b) - f(-a+b) - f(+a-b) + f(-a-b)`` with steps ``delta``; rows of a, b."""
    k = a.shape[0]
    comps = delta * np.concatenate([a + b, -a + b, a - b, -a - b])
    vals = _observe(f, chart, p, comps, basis, noise, gen).reshape(4, k)
    return vals[0] - vals[1] - vals[2] + vals[3]


def _symmetric_outer_sum(c: np.ndarray, V: np.ndarray, W: np.ndarray) -> np.ndarray:
    """``sum_k c_k (v_k w_k^T + w_k v_k^T)``."""
    M = (V * c[:, None]).T @ W
    return M + M.T


# -- single samples --------------------------------------------------------------------


def raw_estimate(f, chart: ManifoldChart, p, v, w, delta: float) -> SymBilinearForm:
    """One-evaluation estimate ``(n^2/delta^2) f(Exp_p(delta v + delta w)) v (x) w``.

    The form stores the symmetrised tensor and ``.raw`` the tensor itself.
    Stacked directions ``v, w`` of shape ``(k, n)`` give the mean of the k samples.
    """
    p = chart.check_point(p)
    chart.validate_step(delta)
    n = chart.n
    V = _check_unit(v, n, "v")
    W = _check_unit(w, n, "w")
    values = np.asarray(f(chart.exp(p, delta * (V + W), chart.basis(p))), dtype=float)
    raw = (n * n / delta**2) * ((V * values[:, None]).T @ W) / V.shape[0]
    return SymBilinearForm(raw, raw=raw, base=p)


def stabilized_estimate(f, chart: ManifoldChart, p, v, w, delta: float,
                        noise: NoiseModel = NOISELESS, rng=None) -> SymBilinearForm:
    """Four-point estimate ``n^2/(8 delta^2) [f(++) - f(-+) - f(+-) + f(--)] (v w^T + w v^T)``.

    The four observations are ``Exp_p(+-delta v +- delta w)``, each with its own
    noise draw.  Stacked ``(k, n)`` directions give the mean of the k samples.
    """
    p = chart.check_point(p)
    chart.validate_step(delta)
    n = chart.n
    V = _check_unit(v, n, "v")
    W = _check_unit(w, n, "w")
    diff = _four_point(f, chart, p, V, W, delta, chart.basis(p), noise, _noise_gen(noise, rng))
    c = n * n / (8.0 * delta**2) * diff
    return SymBilinearForm(_symmetric_outer_sum(c, V, W) / V.shape[0], base=p)


def stein_estimate(f, chart: ManifoldChart, p, u, delta: float,
                   noise: NoiseModel = NOISELESS, rng=None) -> SymBilinearForm:
    """Stein-identity estimate ``[f(Exp(du)) - 2 f(p) + f(Exp(-du))] / (2 d^2) (u u^T - I)``.

    Stacked Gaussian draws ``u`` of shape ``(k, n)`` give the mean of the k samples.
    """
    p = chart.check_point(p)
    if not delta > 0:
        raise ValueError(f"step size must be positive, got {delta}")
    n = chart.n
    U = np.asarray(u, dtype=float)
    U = U[None, :] if U.ndim == 1 else U
    if U.ndim != 2 or U.shape[1] != n:
        raise ValueError(f"u must have {n} components")
    k = U.shape[0]
    comps = np.concatenate([delta * U, np.zeros((k, n)), -delta * U])
    vals = _observe(f, chart, p, comps, chart.basis(p), noise, _noise_gen(noise, rng)).reshape(3, k)
    c = (vals[0] - 2.0 * vals[1] + vals[2]) / (2.0 * delta**2)
    S = (U * c[:, None]).T @ U - np.sum(c) * np.eye(n)
    return SymBilinearForm(S / k, base=p)


# -- budget-matched estimators -------------------------------------------------------------


def _min_budget(m: int, need: int, name: str) -> None:
    if int(m) != m or m < need:
        raise ValueError(f"{name} needs an evaluation budget m >= {need}, got {m}")


def new_estimator_budget(f, chart: ManifoldChart, p, m: int, delta: float,
                         noise: NoiseModel = NOISELESS, rng=None) -> BudgetedEstimate:
    """Average of ``m // 4`` stabilized samples with fresh sphere directions."""
    _min_budget(m, 4, "new estimator")
    p = chart.check_point(p)
    chart.validate_step(delta)
    n, k = chart.n, m // 4
    basis = chart.basis(p)

    t0 = time.perf_counter()
    gen = as_generator(rng)
    V = sample_unit_sphere(gen, n, k)
    W = sample_unit_sphere(gen, n, k)
    t1 = time.perf_counter()
    diff = _four_point(f, chart, p, V, W, delta, basis, noise, _noise_gen(noise, rng))
    t2 = time.perf_counter()
    c = n * n / (8.0 * delta**2) * diff
    form = SymBilinearForm(_symmetric_outer_sum(c, V, W) / k, base=p)
    t3 = time.perf_counter()
    return BudgetedEstimate(form, 4 * k, PhaseTimes(t1 - t0, t2 - t1, t3 - t2))


def stein_budget(f, chart: ManifoldChart, p, m: int, delta: float,
                 noise: NoiseModel = NOISELESS, rng=None) -> BudgetedEstimate:
    """Average of ``m // 3`` Stein samples with step ``delta / sqrt(n)``.

    ``f(p)`` is re-observed for every sample so each observation carries its own noise.
    """
    _min_budget(m, 3, "Stein estimator")
    p = chart.check_point(p)
    chart.validate_step(delta)
    n, k = chart.n, m // 3
    basis = chart.basis(p)
    step = delta / np.sqrt(n)

    t0 = time.perf_counter()
    U = sample_gaussian(as_generator(rng), n, k)
    t1 = time.perf_counter()
    comps = np.concatenate([step * U, np.zeros((k, n)), -step * U])
    vals = _observe(f, chart, p, comps, basis, noise, _noise_gen(noise, rng)).reshape(3, k)
    t2 = time.perf_counter()
    c = (vals[0] - 2.0 * vals[1] + vals[2]) * (n / (2.0 * delta**2))
    S = (U * c[:, None]).T @ U - np.sum(c) * np.eye(n)
    form = SymBilinearForm(S / k, base=p)
    t3 = time.perf_counter()
    return BudgetedEstimate(form, 3 * k, PhaseTimes(t1 - t0, t2 - t1, t3 - t2))


def entrywise_estimate(f, chart: ManifoldChart, p, m: int, delta: float,
                       noise: NoiseModel = NOISELESS, rng=None) -> BudgetedEstimate:
    """Coordinate four-point stencil for every ordered pair (i, j), averaged over
    ``m // (4 n^2)`` independent noisy repetitions, then symmetrised."""
    n = chart.n
    _min_budget(m, 4 * n * n, "entry-wise estimator")
    p = chart.check_point(p)
    chart.validate_step(delta)
    reps = m // (4 * n * n)
    basis = chart.basis(p)

    t0 = time.perf_counter()
    eye = np.eye(n)
    ii, jj = np.divmod(np.arange(n * n), n)
    A = np.tile(eye[ii], (reps, 1))
    B = np.tile(eye[jj], (reps, 1))
    t1 = time.perf_counter()
    diff = _four_point(f, chart, p, A, B, delta, basis, noise, _noise_gen(noise, rng))
    t2 = time.perf_counter()
    H = diff.reshape(reps, n, n).mean(axis=0) / (4.0 * delta**2)
    form = SymBilinearForm(H, raw=H, base=p)
    t3 = time.perf_counter()
    return BudgetedEstimate(form, 4 * n * n * reps, PhaseTimes(t1 - t0, t2 - t1, t3 - t2))


_BUDGETED = {
    "new": new_estimator_budget,
    "stein": stein_budget,
    "entrywise": entrywise_estimate,
}


def budgeted_estimate(key: str, f, chart: ManifoldChart, p, m: int, delta: float,
                      noise: NoiseModel = NOISELESS, rng=None) -> BudgetedEstimate:
    """Dispatch on an estimator key: ``"new"``, ``"stein"`` or ``"entrywise"``."""
    try:
        fn = _BUDGETED[key]
    except KeyError:
        raise ValueError(f"unknown estimator {key!r}; expected one of {', '.join(ESTIMATOR_KEYS)}") from None
    return fn(f, chart, p, m, delta, noise, rng)


def granule(key: str, n: int) -> int:
    """Evaluations consumed by one sample of estimator ``key`` in dimension ``n``."""
    return GRANULE[key] * (n * n if key == "entrywise" else 1)

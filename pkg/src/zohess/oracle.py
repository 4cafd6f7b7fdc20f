"""Objectives and ground-truth Hessians.

Objectives are vectorised: they take an ``(k, d)`` array of ambient points
(or a single ``(d,)`` point) and return ``k`` values.  Each instance counts
the points it has evaluated, which the budget audits rely on.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from .estimators import SymBilinearForm
from .manifold import Kind, ManifoldChart

OBJECTIVE_KEYS = ("paper-test", "quadratic", "coordinate-square")


class Objective:
    """A real-valued function of ambient coordinates with an evaluation counter.

    Use the constructors :meth:`paper_test`, :meth:`quadratic`,
    :meth:`coordinate_square` or :meth:`custom`.
    """

    def __init__(self, key: str, fn: Callable[[np.ndarray], np.ndarray], *,
                 gradient=None, hessian=None, params: dict | None = None):
        self.key = key
        self._fn = fn
        self._gradient = gradient
        self._hessian = hessian
        self.params = params or {}
        self.evaluations = 0

    def __call__(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = x[None, :] if single else x
        values = np.asarray(self._fn(pts), dtype=float)
        self.evaluations += pts.shape[0]
        return float(values[0]) if single else values

    def reset(self) -> None:
        self.evaluations = 0

    @property
    def has_derivatives(self) -> bool:
        return self._hessian is not None

    def gradient(self, x) -> np.ndarray:
        if self._gradient is None:
            raise ValueError(f"objective {self.key!r} has no analytic gradient")
        return self._gradient(np.asarray(x, dtype=float))

    def hessian(self, x) -> np.ndarray:
        if self._hessian is None:
            raise ValueError(f"objective {self.key!r} has no analytic Hessian")
        return self._hessian(np.asarray(x, dtype=float))

    def __repr__(self):
        return f"Objective({self.key!r}, evaluations={self.evaluations})"

    # -- constructors -------------------------------------------------------------

    @classmethod
    def paper_test(cls) -> "Objective":
        """``sum_i cos(x_i) + exp(x_1 x_2)`` over all ambient coordinates."""

        def fn(X):
            return np.cos(X).sum(axis=1) + np.exp(X[:, 0] * X[:, 1])

        def grad(x):
            g = -np.sin(x)
            e = np.exp(x[0] * x[1])
            g[0] += x[1] * e
            g[1] += x[0] * e
            return g

        def hess(x):
            H = np.diag(-np.cos(x))
            x1, x2 = x[0], x[1]
            e = np.exp(x1 * x2)
            H[0, 0] += x2 * x2 * e
            H[1, 1] += x1 * x1 * e
            H[0, 1] = H[1, 0] = (1.0 + x1 * x2) * e
            return H

        return cls("paper-test", fn, gradient=grad, hessian=hess)

    @classmethod
    def quadratic(cls, A, b=None, c: float = 0.0) -> "Objective":
        """``x^T A x / 2 + b^T x + c`` with ``A`` symmetrised."""
        A = np.asarray(A, dtype=float)
        A = 0.5 * (A + A.T)
        b = np.zeros(A.shape[0]) if b is None else np.asarray(b, dtype=float)

        def fn(X):
            return 0.5 * np.einsum("ki,ij,kj->k", X, A, X) + X @ b + c

        return cls("quadratic", fn, gradient=lambda x: A @ x + b,
                   hessian=lambda x: A.copy(), params={"A": A, "b": b, "c": c})

    @classmethod
    def coordinate_square(cls, i: int = 0) -> "Objective":
        """``x_i^2`` (0-based index)."""

        def grad(x):
            g = np.zeros_like(x)
            g[i] = 2.0 * x[i]
            return g

        def hess(x):
            H = np.zeros((x.shape[0], x.shape[0]))
            H[i, i] = 2.0
            return H

        return cls("coordinate-square", lambda X: X[:, i] ** 2, gradient=grad,
                   hessian=hess, params={"i": i})

    @classmethod
    def custom(cls, fn, vectorized: bool = True, key: str = "custom") -> "Objective":
        if vectorized:
            return cls(key, fn)
        return cls(key, lambda X: np.array([fn(x) for x in X]))


def default_quadratic_matrix(d: int) -> np.ndarray:
    """Diagonal test Hessian with spectrum spread over [0.3, 0.9]."""
    return np.diag(np.linspace(0.3, 0.9, d))


def objective_from_key(key: str, chart: ManifoldChart) -> Objective:
    if key == "paper-test":
        return Objective.paper_test()
    if key == "quadratic":
        return Objective.quadratic(default_quadratic_matrix(chart.ambient_dim))
    if key == "coordinate-square":
        return Objective.coordinate_square(0)
    raise ValueError(f"unknown objective {key!r}; expected one of {', '.join(OBJECTIVE_KEYS)}")


def analytic_hessian_euclidean(obj: Objective, x) -> SymBilinearForm:
    if obj.key not in ("paper-test", "quadratic", "coordinate-square"):
        raise ValueError(f"no closed-form Hessian for objective {obj.key!r}")
    return SymBilinearForm(obj.hessian(x))


def sphere_hessian_coordinate_square(x, i: int) -> SymBilinearForm:
    """Riemannian Hessian of ``x_i^2`` on the unit sphere, in the chart's tangent basis.

    As a quadratic form on unit tangents ``v`` it equals ``2 v_i^2 - 2 x_i^2``.
    """
    x = np.asarray(x, dtype=float)
    if abs(np.linalg.norm(x) - 1.0) > 1e-12:
        raise ValueError("x must lie on the unit sphere")
    from .manifold import sphere

    B = sphere(x.shape[0] - 1).basis(x)
    b = B[i]  # coefficients of the projected axis P e_i
    return SymBilinearForm(2.0 * np.outer(b, b) - 2.0 * x[i] ** 2 * np.eye(B.shape[1]))


def analytic_hessian(obj: Objective, chart: ManifoldChart, p) -> SymBilinearForm:
    """Closed-form Hessian of ``obj`` restricted to ``chart`` at ``p``.

    Graph charts use ``Exp_0(v) = (v, h(v))`` with ``grad h(0) = 0``, so the
    chart Hessian is the ambient block plus ``df/dy * hess h(0)``.  On the
    sphere it is the projected ambient Hessian minus the normal derivative.
    """
    p = chart.check_point(p)
    if chart.kind is Kind.EUCLIDEAN:
        return analytic_hessian_euclidean(obj, p)
    Hf = obj.hessian(p)
    g = obj.gradient(p)
    n = chart.n
    if chart.kind is Kind.GRAPH:
        return SymBilinearForm(Hf[:n, :n] + g[n] * chart.height_hessian())
    B = chart.basis(p)
    return SymBilinearForm(B.T @ Hf @ B - (p @ g) * np.eye(n))


def fd_hessian(f, chart: ManifoldChart, p, tau: float = 1e-3) -> SymBilinearForm:
    """Geodesic finite-difference Hessian.

    Second differences ``[f(Exp(tw)) - 2 f(p) + f(Exp(-tw))] / t^2`` along the
    basis directions and their pairwise sums/differences, polarised into the
    off-diagonal entries, with one Richardson step over ``{tau, tau/2}``.
    """
    if not 1e-6 <= tau <= 0.1:
        raise ValueError(f"probe step tau={tau} outside [1e-6, 0.1]")
    p = chart.check_point(p)
    n = chart.n
    basis = chart.basis(p)
    eye = np.eye(n)
    iu, ju = np.triu_indices(n, k=1)
    dirs = np.concatenate([eye, eye[iu] + eye[ju], eye[iu] - eye[ju]])
    f0 = float(np.asarray(f(p[None, :]))[0])

    def second_diff(t):
        plus = np.asarray(f(chart.exp(p, t * dirs, basis)))
        minus = np.asarray(f(chart.exp(p, -t * dirs, basis)))
        return (plus - 2.0 * f0 + minus) / (t * t)

    q = (4.0 * second_diff(tau / 2) - second_diff(tau)) / 3.0
    npairs = iu.size
    H = np.diag(q[:n])
    off = 0.25 * (q[n:n + npairs] - q[n + npairs:])
    H[iu, ju] = off
    H[ju, iu] = off
    return SymBilinearForm(H)

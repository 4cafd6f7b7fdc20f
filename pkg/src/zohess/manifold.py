"""Embedded manifolds used by the estimators.

Every chart works in ambient coordinates.  Tangent vectors are stored as
component vectors in a fixed orthonormal tangent basis at their base point,
so the same component array means the same direction for every estimator.

Supported charts:

* ``Euclidean(n)``: R^n, exp is addition.
* ``Graph(n, surface)``: the graph ``{(x, h(x))}`` in R^{n+1}, defined only at
  the base point ``p = 0`` with ``Exp_0(v) = (v, h(v))``.
* ``Sphere(n)``: the unit sphere S^n in R^{n+1}.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

AmbientPoint = np.ndarray

# exp_map on the sphere refuses longer steps (half the injectivity radius pi)
SPHERE_STEP_GUARD = np.pi / 2
_ZERO_STEP = 1e-14


class Kind(enum.Enum):
    EUCLIDEAN = "euclidean"
    GRAPH = "graph"
    SPHERE = "sphere"


class Surface(enum.Enum):
    FLAT = "flat"
    SPHERE_CAP = "sphere-cap"
    SADDLE = "saddle"


@dataclass(frozen=True)
class TangentVector:
    """Tangent vector at ``base`` given by its components in the chart basis."""

    base: AmbientPoint
    components: np.ndarray

    def __post_init__(self):
        base = np.asarray(self.base, dtype=float)
        comps = np.asarray(self.components, dtype=float)
        if comps.ndim != 1:
            raise ValueError("tangent components must be a 1-d vector")
        if not (np.all(np.isfinite(base)) and np.all(np.isfinite(comps))):
            raise ValueError("tangent vector has non-finite entries")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "components", comps)


@dataclass(frozen=True)
class ManifoldChart:
    kind: Kind
    n: int
    surface: Surface | None = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"intrinsic dimension must be a positive integer, got {self.n}")
        if (self.kind is Kind.GRAPH) != (self.surface is not None):
            raise ValueError("a surface is required for graph charts and only for them")

    @property
    def ambient_dim(self) -> int:
        return self.n if self.kind is Kind.EUCLIDEAN else self.n + 1

    @property
    def key(self) -> str:
        if self.kind is Kind.GRAPH:
            return f"graph-{self.surface.value}"
        return self.kind.value

    # -- graph height function -------------------------------------------------

    def height(self, x: np.ndarray) -> np.ndarray:
        """Graph height ``h`` at chart coordinates ``x`` (shape ``(..., n)``)."""
        x = np.asarray(x, dtype=float)
        if self.surface is Surface.FLAT:
            return np.zeros(x.shape[:-1])
        if self.surface is Surface.SPHERE_CAP:
            r2 = np.sum(x * x, axis=-1)
            if np.any(r2 >= 1.0):
                raise ValueError("point leaves the sphere-cap chart domain ||x|| < 1")
            return 1.0 - np.sqrt(1.0 - r2)
        if self.surface is Surface.SADDLE:
            half = self.n // 2
            return np.sum(x[..., :half] ** 2, axis=-1) - np.sum(x[..., half:] ** 2, axis=-1)
        raise ValueError("height is only defined for graph charts")

    def height_hessian(self) -> np.ndarray:
        """Hessian of ``h`` at the origin (the gradient there is zero for every surface)."""
        if self.surface is Surface.FLAT:
            return np.zeros((self.n, self.n))
        if self.surface is Surface.SPHERE_CAP:
            return np.eye(self.n)
        if self.surface is Surface.SADDLE:
            half = self.n // 2
            return np.diag([2.0] * half + [-2.0] * (self.n - half))
        raise ValueError("height is only defined for graph charts")

    # -- geometry ------------------------------------------------------------------

    def base_point(self) -> AmbientPoint:
        """Default base point used by the benchmarks."""
        if self.kind is Kind.SPHERE:
            return np.full(self.n + 1, 1.0 / np.sqrt(self.n + 1))
        return np.zeros(self.ambient_dim)

    def max_step(self) -> float:
        """Largest finite-difference step the estimators accept on this chart."""
        if self.kind is Kind.SPHERE:
            return np.pi / 4
        if self.surface is Surface.SPHERE_CAP:
            return 0.5
        return np.inf

    def validate_step(self, delta: float) -> None:
        if not delta > 0 or not np.isfinite(delta):
            raise ValueError(f"step size must be positive and finite, got {delta}")
        bound = self.max_step()
        if self.surface is Surface.SPHERE_CAP and delta >= bound:
            raise ValueError(f"step size {delta} must be < {bound} on {self.key}")
        if delta > bound:
            raise ValueError(f"step size {delta} exceeds {bound:.6g} on {self.key}")

    def check_point(self, p) -> AmbientPoint:
        p = np.asarray(p, dtype=float)
        if p.shape != (self.ambient_dim,):
            raise ValueError(f"expected a point of shape ({self.ambient_dim},), got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise ValueError("point has non-finite entries")
        if self.kind is Kind.GRAPH and np.any(p != 0.0):
            raise ValueError("graph charts are only defined at the base point p = 0")
        if self.kind is Kind.SPHERE and abs(np.linalg.norm(p) - 1.0) > 1e-12:
            raise ValueError("sphere point must have unit norm")
        return p

    def basis(self, p) -> np.ndarray:
        """Orthonormal tangent basis at ``p`` as the columns of an ``(ambient, n)`` array."""
        p = self.check_point(p)
        if self.kind is Kind.EUCLIDEAN:
            return np.eye(self.n)
        if self.kind is Kind.GRAPH:
            return np.eye(self.n + 1, self.n)
        return _sphere_basis(p)

    def exp(self, p: AmbientPoint, comps: np.ndarray, basis: np.ndarray | None = None) -> np.ndarray:
        """Vectorised exponential map.

        ``comps`` has shape ``(..., n)``; the result has shape ``(..., ambient_dim)``.
        No validation or step guard, this is the hot path of the estimators.
        """
        comps = np.asarray(comps, dtype=float)
        if self.kind is Kind.EUCLIDEAN:
            return p + comps
        if self.kind is Kind.GRAPH:
            return np.concatenate([comps, self.height(comps)[..., None]], axis=-1)
        if basis is None:
            basis = self.basis(p)
        amb = comps @ basis.T
        t = np.linalg.norm(comps, axis=-1, keepdims=True)
        safe = np.where(t < _ZERO_STEP, 1.0, t)
        out = p * np.cos(t) + amb * (np.sin(t) / safe)
        return np.where(t < _ZERO_STEP, p, out)


def euclidean(n: int) -> ManifoldChart:
    return ManifoldChart(Kind.EUCLIDEAN, n)


def graph(n: int, surface: Surface | str) -> ManifoldChart:
    return ManifoldChart(Kind.GRAPH, n, Surface(surface))


def sphere(n: int) -> ManifoldChart:
    return ManifoldChart(Kind.SPHERE, n)


MANIFOLD_KEYS = ("euclidean", "graph-flat", "graph-sphere-cap", "graph-saddle", "sphere")


def chart_from_key(key: str, n: int) -> ManifoldChart:
    """Build a chart from its config key, e.g. ``"graph-saddle"``."""
    if key == "euclidean":
        return euclidean(n)
    if key == "sphere":
        return sphere(n)
    if key.startswith("graph-"):
        try:
            return graph(n, key[len("graph-"):])
        except ValueError:
            pass
    raise ValueError(f"unknown manifold {key!r}; expected one of {', '.join(MANIFOLD_KEYS)}")


def _sphere_basis(x: np.ndarray) -> np.ndarray:
    # Gram-Schmidt of the canonical axes against x, skipping the axis most aligned with x.
    dim = x.shape[0]
    skip = int(np.argmax(np.abs(x)))
    vecs = [x]
    for i in range(dim):
        if i == skip:
            continue
        e = np.zeros(dim)
        e[i] = 1.0
        for _ in range(2):  # second pass for numerical orthogonality
            for q in vecs:
                e = e - (q @ e) * q
        vecs.append(e / np.linalg.norm(e))
    return np.stack(vecs[1:], axis=1)


def _components(chart: ManifoldChart, p: AmbientPoint, v) -> np.ndarray:
    if isinstance(v, TangentVector):
        if v.base.shape != p.shape or np.any(v.base != p):
            raise ValueError("tangent vector is attached to a different base point")
        v = v.components
    v = np.asarray(v, dtype=float)
    if v.shape != (chart.n,):
        raise ValueError(f"expected {chart.n} tangent components, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("tangent vector has non-finite entries")
    return v


def exp_map(chart: ManifoldChart, p, v) -> AmbientPoint:
    """Exponential map ``Exp_p(v)`` for a single tangent vector.

    ``v`` is a :class:`TangentVector` based at ``p`` or a bare component array.
    On the sphere the step length is limited to ``pi/2``.
    """
    p = chart.check_point(p)
    comps = _components(chart, p, v)
    if chart.kind is Kind.SPHERE and np.linalg.norm(comps) > SPHERE_STEP_GUARD + 1e-12:
        raise ValueError("sphere step exceeds the injectivity guard pi/2")
    if not np.any(comps):
        return p.copy()
    return chart.exp(p, comps)


def tangent_basis(chart: ManifoldChart, p) -> list[np.ndarray]:
    """The orthonormal tangent frame at ``p`` as a list of ambient vectors."""
    return list(chart.basis(p).T)


def to_ambient(chart: ManifoldChart, v: TangentVector) -> np.ndarray:
    return chart.basis(v.base) @ v.components


def parallel_transport_sphere(x, u, t: float, v) -> np.ndarray:
    """Transport ``v`` from ``x`` along the great circle ``x cos s + u sin s`` up to ``s = t``.

    ``x``, ``u`` and ``v`` are ambient vectors; ``u`` is a unit tangent at ``x``.
    The signed component of ``v`` along ``u`` rotates with the geodesic, the
    rest is carried unchanged.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if abs(np.linalg.norm(x) - 1.0) > 1e-12:
        raise ValueError("x must lie on the unit sphere")
    if abs(np.linalg.norm(u) - 1.0) > 1e-10:
        raise ValueError("u must be a unit vector")
    scale = max(1.0, np.linalg.norm(v))
    if abs(u @ x) > 1e-10 or abs(v @ x) > 1e-10 * scale:
        raise ValueError("u and v must be tangent at x")
    along = u @ v
    # ||uu^T v|| x sin t, keeping the sign of <u, v> so that v = -u maps correctly
    return v - along * u + along * u * np.cos(t) - along * x * np.sin(t)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from zohess.manifold import (
    TangentVector,
    chart_from_key,
    euclidean,
    exp_map,
    graph,
    parallel_transport_sphere,
    sphere,
    tangent_basis,
    to_ambient,
)


def random_sphere_point(rng, dim):
    x = rng.standard_normal(dim)
    return x / np.linalg.norm(x)


def random_tangent(rng, x):
    v = rng.standard_normal(x.shape[0])
    return v - (v @ x) * x


class TestExpMap:
    def test_euclidean_is_addition(self):
        e1 = np.eye(8)[0]
        np.testing.assert_array_equal(exp_map(euclidean(8), np.zeros(8), e1), e1)

    def test_sphere_quarter_circle(self):
        chart = sphere(2)
        x = np.array([1.0, 0.0, 0.0])
        B = chart.basis(x)
        # components of pi/2 * (0, 1, 0) in the tangent basis at x
        comps = B.T @ np.array([0.0, np.pi / 2, 0.0])
        np.testing.assert_allclose(exp_map(chart, x, comps), [0.0, 1.0, 0.0], atol=1e-15)

    def test_sphere_cap_graph(self):
        chart = graph(8, "sphere-cap")
        v = np.zeros(8)
        v[0] = 0.3
        expected = np.concatenate([v, [1 - np.sqrt(1 - 0.09)]])
        np.testing.assert_allclose(exp_map(chart, np.zeros(9), v), expected, rtol=0, atol=1e-16)

    def test_saddle_height(self):
        chart = graph(4, "saddle")
        v = np.array([0.1, 0.2, 0.3, 0.4])
        out = exp_map(chart, np.zeros(5), v)
        assert out[-1] == pytest.approx(0.01 + 0.04 - 0.09 - 0.16)

    @pytest.mark.parametrize("key", ["euclidean", "graph-flat", "graph-sphere-cap", "graph-saddle", "sphere"])
    def test_zero_vector_is_identity(self, key):
        chart = chart_from_key(key, 5)
        p = chart.base_point()
        assert np.array_equal(exp_map(chart, p, np.zeros(5)), p)
        assert np.array_equal(chart.exp(p, np.zeros((3, 5))), np.tile(p, (3, 1)))

    @pytest.mark.parametrize("key", ["graph-flat", "graph-sphere-cap", "graph-saddle"])
    def test_graph_first_coordinates_are_components(self, key, rng):
        chart = chart_from_key(key, 6)
        v = 0.2 * rng.standard_normal(6)
        np.testing.assert_array_equal(exp_map(chart, np.zeros(7), v)[:6], v)

    def test_sphere_exp_stays_on_sphere(self, rng):
        chart = sphere(7)
        for _ in range(200):
            x = random_sphere_point(rng, 8)
            v = rng.standard_normal(7)
            v *= rng.uniform(0, np.pi / 2) / np.linalg.norm(v)
            assert abs(np.linalg.norm(exp_map(chart, x, v)) - 1) <= 1e-12

    def test_errors(self):
        with pytest.raises(ValueError):
            exp_map(euclidean(3), np.zeros(3), np.zeros(4))
        with pytest.raises(ValueError, match="base point p = 0"):
            exp_map(graph(3, "flat"), np.ones(4), np.zeros(3))
        x = np.array([0.0, 0.0, 1.0])
        with pytest.raises(ValueError, match="different base point"):
            exp_map(sphere(2), x, TangentVector(np.array([1.0, 0.0, 0.0]), np.zeros(2)))
        with pytest.raises(ValueError, match="injectivity"):
            exp_map(sphere(2), x, np.array([2.0, 0.0]))
        with pytest.raises(ValueError, match="unit norm"):
            exp_map(sphere(2), np.array([0.0, 0.0, 2.0]), np.zeros(2))
        with pytest.raises(ValueError):
            chart_from_key("torus", 3)

    def test_tangent_vector_object(self):
        chart = sphere(2)
        x = np.array([0.0, 0.0, 1.0])
        v = TangentVector(x, np.array([0.1, 0.2]))
        out = exp_map(chart, x, v)
        amb = to_ambient(chart, v)
        t = np.linalg.norm(amb)
        np.testing.assert_allclose(out, x * np.cos(t) + amb / t * np.sin(t), atol=1e-15)


class TestTangentBasis:
    def test_euclidean(self):
        np.testing.assert_array_equal(np.array(tangent_basis(euclidean(3), np.ones(3))), np.eye(3))

    @pytest.mark.parametrize("surface", ["flat", "sphere-cap", "saddle"])
    def test_graph_at_origin(self, surface):
        chart = graph(4, surface)
        np.testing.assert_array_equal(np.array(tangent_basis(chart, np.zeros(5))), np.eye(5)[:4])
        # h has a critical point at 0, so (e_i, 0) are tangent: d/dt h(t e_i) -> 0
        for i in range(4):
            e = np.eye(4)[i]
            t = 1e-6
            assert abs(chart.height(t * e) - chart.height(-t * e)) / (2 * t) < 1e-9

    def test_sphere_pole(self):
        basis = np.array(tangent_basis(sphere(2), np.array([0.0, 0.0, 1.0])))
        assert basis.shape == (2, 3)
        np.testing.assert_array_equal(basis[:, 2], 0.0)
        np.testing.assert_allclose(basis @ basis.T, np.eye(2), atol=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 12), st.integers(0, 2**32 - 1))
    def test_sphere_basis_orthonormal_and_tangent(self, n, seed):
        x = random_sphere_point(np.random.default_rng(seed), n + 1)
        B = sphere(n).basis(x)
        np.testing.assert_allclose(B.T @ B, np.eye(n), atol=1e-12)
        np.testing.assert_allclose(B.T @ x, 0.0, atol=1e-12)
        np.testing.assert_array_equal(B, sphere(n).basis(x.copy()))


class TestParallelTransport:
    def test_orthogonal_to_direction_is_unchanged(self, rng):
        x = np.array([1.0, 0.0, 0.0, 0.0])
        u = np.array([0.0, 1.0, 0.0, 0.0])
        v = np.array([0.0, 0.0, 0.3, -0.7])
        for t in rng.uniform(0, 3, size=5):
            np.testing.assert_array_equal(parallel_transport_sphere(x, u, t, v), v)

    def test_zero_time(self, rng):
        x = random_sphere_point(rng, 5)
        u = random_tangent(rng, x)
        u /= np.linalg.norm(u)
        v = random_tangent(rng, x)
        np.testing.assert_allclose(parallel_transport_sphere(x, u, 0.0, v), v, atol=1e-15)

    def test_quarter_turn(self):
        out = parallel_transport_sphere([1.0, 0, 0], [0, 1.0, 0], np.pi / 2, [0, 1.0, 0])
        np.testing.assert_allclose(out, [-1.0, 0.0, 0.0], atol=1e-15)

    def test_matches_transport_ode(self, rng):
        # parallel fields along a great circle satisfy V' = -<V, gamma'> gamma
        for _ in range(5):
            x = random_sphere_point(rng, 4)
            u = random_tangent(rng, x)
            u /= np.linalg.norm(u)
            v = random_tangent(rng, x)
            t = rng.uniform(0.1, 1.5)

            def rhs(s, V):
                gamma = x * np.cos(s) + u * np.sin(s)
                dgamma = -x * np.sin(s) + u * np.cos(s)
                return -(V @ dgamma) * gamma

            sol = solve_ivp(rhs, (0, t), v, rtol=1e-12, atol=1e-13)
            np.testing.assert_allclose(parallel_transport_sphere(x, u, t, v), sol.y[:, -1], atol=1e-9)

    def test_preserves_inner_products(self, rng):
        for _ in range(100):
            x = random_sphere_point(rng, 6)
            u = random_tangent(rng, x)
            u /= np.linalg.norm(u)
            v1, v2 = random_tangent(rng, x), random_tangent(rng, x)
            t = rng.uniform(0, np.pi)
            p1 = parallel_transport_sphere(x, u, t, v1)
            p2 = parallel_transport_sphere(x, u, t, v2)
            assert abs(p1 @ p2 - v1 @ v2) <= 1e-10
            assert abs(np.linalg.norm(p1) - np.linalg.norm(v1)) <= 1e-10
            y = x * np.cos(t) + u * np.sin(t)
            assert abs(p1 @ y) <= 1e-10

    def test_errors(self):
        x = np.array([1.0, 0, 0])
        with pytest.raises(ValueError, match="unit"):
            parallel_transport_sphere(x, [0, 2.0, 0], 0.1, [0, 0, 1.0])
        with pytest.raises(ValueError, match="tangent"):
            parallel_transport_sphere(x, [0, 1.0, 0], 0.1, [1.0, 0, 0])

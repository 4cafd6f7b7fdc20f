import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import power_iteration_norm
from zohess.estimators import (
    NOISELESS, NoiseModel, SymBilinearForm, budgeted_estimate, entrywise_estimate,
    estimation_error, granule, new_estimator_budget, operator_norm, raw_estimate,
    stabilized_estimate, stein_budget, stein_estimate,
)
from zohess.manifold import euclidean, graph, sphere
from zohess.oracle import Objective, default_quadratic_matrix
from zohess.sampling import RngStream, sample_gaussian, sample_unit_sphere

N = 8


def unit(rng, n=N, size=None):
    return sample_unit_sphere(rng, n, size)


def random_spd(rng, n=N):
    Q = rng.standard_normal((n, n))
    return Q @ Q.T / n + np.eye(n)


# -- SymBilinearForm / norms -----------------------------------------------------------


def test_form_is_symmetrised_and_frozen():
    form = SymBilinearForm([[1.0, 2.0], [0.0, 3.0]])
    assert np.array_equal(form.coeffs, form.coeffs.T)
    assert form.coeffs[0, 1] == 1.0
    with pytest.raises(ValueError):
        form.coeffs[0, 0] = 5.0


def test_form_rejects_non_square():
    with pytest.raises(ValueError):
        SymBilinearForm(np.zeros((2, 3)))


def test_operator_norm_examples():
    assert operator_norm(SymBilinearForm(np.eye(8))) == pytest.approx(1.0, abs=1e-15)
    assert operator_norm(SymBilinearForm(np.diag([3.0, -5.0]))) == pytest.approx(5.0, abs=1e-15)


def test_operator_norm_matches_power_iteration(rng):
    for _ in range(5):
        X = rng.standard_normal((8, 8))
        S = X + X.T
        assert operator_norm(S) == pytest.approx(power_iteration_norm(S), abs=1e-10)


def test_estimation_error_examples(rng):
    T = SymBilinearForm(random_spd(rng))
    assert estimation_error(T, T) == 0.0
    assert estimation_error(SymBilinearForm(np.diag([1.0, 0.0])), SymBilinearForm(np.zeros((2, 2)))) == 1.0
    X = rng.standard_normal((8, 8))
    E = SymBilinearForm(X + X.T)
    assert estimation_error(E, T) == pytest.approx(power_iteration_norm(E.coeffs - T.coeffs), abs=1e-10)


def test_estimation_error_dimension_mismatch():
    with pytest.raises(ValueError):
        estimation_error(SymBilinearForm(np.eye(2)), SymBilinearForm(np.eye(3)))


def test_noise_model_validation():
    with pytest.raises(ValueError):
        NoiseModel(-0.1)
    assert not NoiseModel(0.0).active
    assert not NoiseModel(1.0, enabled=False).active


# -- raw estimator -------------------------------------------------------------------------


def test_raw_zero_function(rng):
    chart = euclidean(N)
    est = raw_estimate(lambda X: np.zeros(len(X)), chart, np.zeros(N), unit(rng), unit(rng), 0.1)
    assert np.all(est.coeffs == 0)


def test_raw_constant_function_is_nonzero_per_sample(rng):
    chart = euclidean(N)
    v, w = unit(rng), unit(rng)
    c = 2.5
    est = raw_estimate(lambda X: np.full(len(X), c), chart, np.zeros(N), v, w, 0.1)
    expected = (64 / 0.01) * c * np.outer(v, w)
    np.testing.assert_allclose(est.raw, expected, rtol=1e-13)
    np.testing.assert_allclose(est.coeffs, 0.5 * (expected + expected.T), rtol=1e-13)


def test_raw_product_monte_carlo():
    # E[raw] is the Hessian of x1 x2: ones at (0,1) and (1,0), zeros elsewhere
    chart = euclidean(N)
    f = Objective.custom(lambda X: X[:, 0] * X[:, 1])
    gen = RngStream(3).directions
    k = 10**6
    est = raw_estimate(f, chart, np.zeros(N), unit(gen, size=k), unit(gen, size=k), 0.1)
    truth = np.zeros((N, N))
    truth[0, 1] = truth[1, 0] = 1.0
    assert est.coeffs[0, 1] == pytest.approx(1.0, abs=0.05)
    assert operator_norm(est.coeffs - truth) <= 0.05


def test_raw_rejects_bad_input(rng):
    chart = euclidean(N)
    f = Objective.paper_test()
    with pytest.raises(ValueError):
        raw_estimate(f, chart, np.zeros(N), 2 * unit(rng), unit(rng), 0.1)
    with pytest.raises(ValueError):
        raw_estimate(f, chart, np.zeros(N), unit(rng), unit(rng), 0.0)
    with pytest.raises(ValueError):
        raw_estimate(f, sphere(3), sphere(3).base_point(), unit(rng, 3), unit(rng, 3), 1.0)


# -- stabilized estimator -------------------------------------------------------------------------


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), delta=st.floats(1e-3, 1.0), c=st.floats(-10, 10))
def test_stabilized_annihilates_affine(seed, delta, c):
    # exact in real arithmetic; in floating point the residual is rounding of |f| ~ 1e-16 times the prefactor
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(N)
    f = Objective.custom(lambda X: X @ a + c)
    est = stabilized_estimate(f, euclidean(N), np.zeros(N), unit(rng), unit(rng), delta)
    scale = N * N / (8 * delta**2) * (abs(c) + 4 * delta * np.abs(a).sum())
    assert np.max(np.abs(est.coeffs)) <= 64 * np.finfo(float).eps * scale


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), delta=st.floats(1e-3, 2.0))
def test_stabilized_quadratic_single_sample_exact(seed, delta):
    rng = np.random.default_rng(seed)
    A = random_spd(rng)
    v, w = unit(rng), unit(rng)
    est = stabilized_estimate(Objective.quadratic(A), euclidean(N), np.zeros(N), v, w, delta)
    expected = N * N / 2 * (v @ A @ w) * (np.outer(v, w) + np.outer(w, v))
    np.testing.assert_allclose(est.coeffs, expected, rtol=0, atol=1e-12 * np.max(np.abs(expected)))


def test_stabilized_monte_carlo_mean_recovers_quadratic():
    A = random_spd(np.random.default_rng(11))
    f = Objective.quadratic(A)
    chart = euclidean(N)
    gen = RngStream(4).directions
    acc = np.zeros((N, N))
    for _ in range(10):
        acc += stabilized_estimate(f, chart, np.zeros(N), unit(gen, size=10**6), unit(gen, size=10**6), 0.1).coeffs
    assert np.max(np.abs(acc / 10 - A)) <= 0.02


def test_stabilized_error_scales_as_inverse_sqrt_samples():
    A = random_spd(np.random.default_rng(12))
    f = Objective.quadratic(A)
    chart = euclidean(N)
    gen = RngStream(5).directions
    reps = 10
    mean_err = []
    for k in (10**4, 10**5, 10**6):
        errs = [np.max(np.abs(stabilized_estimate(f, chart, np.zeros(N), unit(gen, size=k),
                                                  unit(gen, size=k), 0.1).coeffs - A))
                for _ in range(reps)]
        mean_err.append(np.mean(errs))
    ratios = np.array(mean_err[:-1]) / np.array(mean_err[1:])
    assert np.all((ratios >= 2.5) & (ratios <= 4.0)), ratios


def test_stabilized_noise_uses_every_evaluation(rng):
    # f = 0 with noise: the four-point combination has variance 4 sigma^2
    f = Objective.custom(lambda X: np.zeros(len(X)))
    stream = RngStream(6)
    k = 200_000
    v = np.tile(np.eye(N)[0], (k, 1))
    w = np.tile(np.eye(N)[1], (k, 1))
    sigma2 = 0.0025
    chart = euclidean(N)
    # every sample alone: entry (0, 1) = n^2/(8 d^2) * combo, so var(combo) is recoverable
    samples = [stabilized_estimate(f, chart, np.zeros(N), v[:1], w[:1], 0.1, NoiseModel(sigma2), stream).coeffs[0, 1]
               for _ in range(2000)]
    combo = np.array(samples) * 8 * 0.01 / 64
    assert np.var(combo) == pytest.approx(4 * sigma2, rel=0.1)


# -- Stein ------------------------------------------------------------------------------------------------


def test_stein_constant_is_zero(rng):
    est = stein_estimate(lambda X: np.full(len(X), 3.0), euclidean(N), np.zeros(N),
                         sample_gaussian(rng, N), 0.1)
    assert np.all(est.coeffs == 0)


def test_stein_quadratic_single_sample_exact(rng):
    A = random_spd(rng)
    for _ in range(20):
        u = sample_gaussian(rng, N)
        est = stein_estimate(Objective.quadratic(A), euclidean(N), np.zeros(N), u, 0.3)
        expected = 0.5 * (u @ A @ u) * (np.outer(u, u) - np.eye(N))
        np.testing.assert_allclose(est.coeffs, expected, rtol=0, atol=1e-12 * np.max(np.abs(expected)))
        assert np.array_equal(est.coeffs, est.coeffs.T)


def test_stein_rejects_nonpositive_step(rng):
    with pytest.raises(ValueError):
        stein_estimate(Objective.paper_test(), euclidean(N), np.zeros(N), sample_gaussian(rng, N), 0.0)


def test_stein_budget_single_sample_matches(rng):
    f = Objective.paper_test()
    chart = euclidean(N)
    delta = 0.2
    budget = stein_budget(f, chart, np.zeros(N), 3, delta, rng=RngStream(9))
    u = sample_gaussian(RngStream(9).directions, N)
    # budget form: step delta/sqrt(n), prefactor n/(2 delta^2), i.e. stein_estimate at step delta/sqrt(n)
    single = stein_estimate(f, chart, np.zeros(N), u, delta / np.sqrt(N))
    np.testing.assert_allclose(budget.form.coeffs, single.coeffs, rtol=1e-12, atol=1e-12)
    assert budget.evaluations_used == 3


# -- budgeted estimators ---------------------------------------------------------------------------------


def test_new_budget_single_sample_matches():
    f = Objective.paper_test()
    chart = euclidean(N)
    budget = new_estimator_budget(f, chart, np.zeros(N), 4, 0.1, rng=RngStream(8))
    gen = RngStream(8).directions
    v, w = unit(gen), unit(gen)
    single = stabilized_estimate(f, chart, np.zeros(N), v, w, 0.1)
    np.testing.assert_allclose(budget.form.coeffs, single.coeffs, rtol=1e-12, atol=1e-12)
    assert budget.evaluations_used == 4


@pytest.mark.parametrize("key,m,used", [("new", 3840, 3840), ("new", 3843, 3840), ("stein", 3840, 3840),
                                        ("stein", 3841, 3840), ("entrywise", 3840, 3840),
                                        ("entrywise", 4000, 3840)])
def test_budget_accounting(key, m, used):
    f = Objective.paper_test()
    est = budgeted_estimate(key, f, euclidean(N), np.zeros(N), m, 0.05, NoiseModel(0.0025), RngStream(1))
    assert est.evaluations_used == used == f.evaluations
    assert m - used < granule(key, N)


@pytest.mark.parametrize("key,m", [("new", 3), ("stein", 2), ("entrywise", 4 * N * N - 1)])
def test_budget_below_minimum(key, m):
    with pytest.raises(ValueError):
        budgeted_estimate(key, Objective.paper_test(), euclidean(N), np.zeros(N), m, 0.05, rng=RngStream(0))


def test_unknown_estimator_key():
    with pytest.raises(ValueError):
        budgeted_estimate("gauss", Objective.paper_test(), euclidean(N), np.zeros(N), 100, 0.05, rng=RngStream(0))


def test_new_budget_quadratic_mean_error():
    A = default_quadratic_matrix(N)
    f = Objective.quadratic(A)
    chart = euclidean(N)
    truth = SymBilinearForm(A)
    errs = [estimation_error(new_estimator_budget(f, chart, np.zeros(N), 3840, 0.1, rng=RngStream(21, r)).form, truth)
            for r in range(100)]
    assert np.mean(errs) <= 0.35


def test_wall_times_are_nonnegative():
    est = new_estimator_budget(Objective.paper_test(), euclidean(N), np.zeros(N), 400, 0.1, rng=RngStream(0))
    t = est.wall_times
    assert min(t.sampling, t.evaluation, t.computation) >= 0


def test_entrywise_exact_on_quadratic(rng):
    A = random_spd(rng)
    for delta in (0.01, 0.3, 2.0):
        est = entrywise_estimate(Objective.quadratic(A), euclidean(N), np.zeros(N), 4 * N * N, delta)
        assert np.max(np.abs(est.form.coeffs - A)) <= 1e-10


def test_entrywise_repetitions():
    f = Objective.quadratic(np.eye(N))
    est = entrywise_estimate(f, euclidean(N), np.zeros(N), 3840, 0.05)
    assert est.evaluations_used // (4 * N * N) == 15


def test_entrywise_noise_std():
    # per-entry std of the unsymmetrised estimate: sqrt(4 sigma^2 / 15) / (4 delta^2) ~ 2.58
    sigma2, delta = 0.0025, 0.05
    expected = np.sqrt(4 * sigma2 / 15) / (4 * delta**2)
    assert expected == pytest.approx(2.58, abs=0.005)
    f = Objective.custom(lambda X: np.zeros(len(X)))
    stream = RngStream(7)
    diag = np.array([np.diag(entrywise_estimate(f, euclidean(N), np.zeros(N), 3840, delta,
                                                NoiseModel(sigma2), stream).form.raw)
                     for _ in range(400)])
    assert np.std(diag) == pytest.approx(expected, rel=0.05)


def test_noise_does_not_shift_direction_stream():
    A = default_quadratic_matrix(N)
    chart = euclidean(N)
    seen = {}
    for label, noise in (("quiet", NOISELESS), ("noisy", NoiseModel(0.0025))):
        points = []

        def record(X):
            points.append(np.array(X))
            return 0.5 * np.einsum("ki,ij,kj->k", X, A, X)

        new_estimator_budget(record, chart, np.zeros(N), 400, 0.1, noise, RngStream(13))
        seen[label] = np.concatenate(points)
    assert np.array_equal(seen["quiet"], seen["noisy"])


def test_graph_chart_estimate_runs():
    chart = graph(N, "saddle")
    est = new_estimator_budget(Objective.paper_test(), chart, np.zeros(N + 1), 400, 0.1, rng=RngStream(0))
    assert est.form.n == N

import numpy as np
import pytest

from lqlab.core.exceptions import InvalidArgumentError
from lqlab.models.ensemble import EnsembleFamily, EnsembleSpec
from lqlab.models.index_set import IndexSetSpec
from lqlab.models.process import ProcessConfig
from lqlab.services.ensembles import gaussian_abs_moment, sample_batch
from lqlab.services.process import (
    DeviationObjective,
    PopulationModel,
    empirical_lq_deviation,
    maximize_over_set,
    run_trials,
    search_net,
    single_function_trials,
    sup_deviation_estimate,
    tail_curve,
)


def test_empirical_deviation_by_hand(gaussian4):
    batch = sample_batch(gaussian4, 10, seed=1)
    v = np.array([1.0, 0.0, 0.0, 0.0])
    expected = float(np.mean(np.abs(batch.rows[:, 0]) ** 3)) - 0.5**3
    assert empirical_lq_deviation(batch, v, 3.0, 0.5) == pytest.approx(expected)
    with pytest.raises(InvalidArgumentError):
        empirical_lq_deviation(batch, np.ones(3), 3.0, 0.5)
    with pytest.raises(InvalidArgumentError):
        empirical_lq_deviation(batch, v, 3.0, -1.0)


def test_population_model_exact_cases(gaussian4, rademacher4):
    v = np.array([1.0, 2.0, 2.0, 0.0])
    gaussian = PopulationModel(gaussian4, 3.0)
    assert gaussian.value(v) == pytest.approx(gaussian_abs_moment(3.0) * 27.0)
    # q = 2 is exact for every isotropic family
    signs = PopulationModel.build(rademacher4, 2.0, N=10, seed=0)
    assert signs.exact
    assert signs.value(v) == pytest.approx(9.0)
    assert signs.std_error(v) == 0.0


def test_population_model_reference_sample(rademacher4):
    model = PopulationModel.build(rademacher4, 3.0, N=200, seed=4)
    assert not model.exact
    assert model.reference.shape == (64 * 200, 4)
    v = np.array([1.0, 0.0, 0.0, 0.0])
    # |<X, e1>|^3 = 1 for signs
    assert model.value(v) == pytest.approx(1.0)
    with pytest.raises(InvalidArgumentError):
        PopulationModel(rademacher4, 3.0)


@pytest.mark.parametrize("q", [1.5, 2.0, 3.0])
def test_deviation_gradient_matches_finite_differences(gaussian4, q):
    batch = sample_batch(gaussian4, 50, seed=3)
    objective = DeviationObjective(batch.rows, q, PopulationModel(gaussian4, q))
    v = np.array([0.3, -0.5, 0.8, 0.1])
    grad = objective.gradient(v)
    h = 1e-6
    for i in range(4):
        e = np.zeros(4)
        e[i] = h
        numeric = (objective.value(v + e) - objective.value(v - e)) / (2 * h)
        assert grad[i] == pytest.approx(numeric, rel=1e-4, abs=1e-6)


def test_maximize_over_finite_set_is_exhaustive(gaussian4):
    points = [[1.0, 0, 0, 0], [0, 1.0, 0, 0], [0, 0, 2.0, 0]]
    spec = IndexSetSpec.finite(points)
    batch = sample_batch(gaussian4, 40, seed=2)
    objective = DeviationObjective(batch.rows, 2.0, PopulationModel(gaussian4, 2.0))
    estimate = maximize_over_set(spec, objective, search_net(spec))
    expected = max(objective.value(np.array(p)) for p in points)
    assert estimate.value == pytest.approx(expected)
    assert estimate.audit.exhaustive
    assert estimate.audit.restarts == 0


def test_sup_estimate_on_sphere_matches_eigenvalues(small_process):
    """For q = 2 and Gaussian X the sup over the sphere is the spectral gap of the covariance."""
    batch = sample_batch(small_process.ensemble, small_process.N, seed=5)
    estimate = sup_deviation_estimate(batch, small_process)
    eigenvalues = np.linalg.eigvalsh(batch.rows.T @ batch.rows / batch.n)
    exact = float(np.max(np.abs(eigenvalues - 1.0)))
    assert estimate.value <= exact + 1e-9
    assert estimate.value == pytest.approx(exact, rel=2e-2)
    assert np.linalg.norm(estimate.argmax) == pytest.approx(1.0)
    assert estimate.audit.improvement >= 0.0


def test_sup_estimate_reports_population_error(rademacher4):
    config = ProcessConfig(
        set=IndexSetSpec.sphere(4),
        ensemble=rademacher4,
        q=3.0,
        N=64,
        net_max_points=128,
        ascent_restarts=1,
        ascent_steps=10,
    )
    batch = sample_batch(rademacher4, 64, seed=1)
    estimate = sup_deviation_estimate(batch, config)
    assert estimate.audit.population_error > 0.0


def test_run_trials_is_reproducible_across_threads(small_process):
    single = run_trials(small_process, threads=1)
    pooled = run_trials(small_process, threads=3)
    assert np.array_equal(single.values, pooled.values)
    assert single.seeds == pooled.seeds
    assert len(single.values) == small_process.trials


def test_run_trials_quantiles_and_tail(small_process):
    summary = run_trials(small_process, thresholds=[0.0, 0.1, 10.0])
    assert set(summary.quantiles) == {"0.5", "0.9", "0.99"}
    assert summary.quantile(0.5) <= summary.quantile(0.9) <= summary.quantile(0.99)
    probabilities = [point.probability for point in summary.tail]
    assert probabilities[0] == 1.0
    assert probabilities[-1] == 0.0
    assert probabilities == sorted(probabilities, reverse=True)


def test_tail_curve_requires_sorted_thresholds(small_process):
    summary = run_trials(small_process.model_copy(update={"trials": 2}))
    with pytest.raises(InvalidArgumentError):
        tail_curve(summary, [0.5, 0.1])
    assert tail_curve(summary, []) == []


def test_run_trials_rejects_dimension_mismatch(small_process):
    config = small_process.model_copy(
        update={"ensemble": EnsembleSpec(family=EnsembleFamily.GAUSSIAN, dimension=3)}
    )
    with pytest.raises(InvalidArgumentError):
        run_trials(config)


def test_origin_set_has_zero_deviation(gaussian4):
    config = ProcessConfig(
        set=IndexSetSpec.finite([[0.0] * 4]), ensemble=gaussian4, q=2.0, N=16, trials=3
    )
    summary = run_trials(config)
    assert np.all(summary.values == 0.0)


def test_single_function_trials(gaussian4):
    e1 = np.array([1.0, 0.0, 0.0, 0.0])
    deviations = single_function_trials(gaussian4, e1, 2.0, 400, 200, seed=3)
    assert deviations.shape == (200,)
    # mean-zero fluctuations of order N^{-1/2}
    assert abs(float(deviations.mean())) < 0.05
    assert float(np.abs(deviations).max()) < 1.0
    assert np.all(single_function_trials(gaussian4, np.zeros(4), 2.0, 10, 5, seed=0) == 0.0)


@pytest.mark.parametrize("q", [1.0, 2.0])
@pytest.mark.parametrize("factor", [0.5, 2.5, 10.0])
def test_scaled_set_sup_is_homogeneous(q, factor):
    ensemble = EnsembleSpec(family=EnsembleFamily.GAUSSIAN, dimension=3)
    sphere = IndexSetSpec.sphere(3)
    base = ProcessConfig(
        set=sphere, ensemble=ensemble, q=q, N=64, net_max_points=128,
        ascent_restarts=2, ascent_steps=40, seed=3,
    )
    scaled = base.model_copy(update={"set": IndexSetSpec.scaled(sphere, factor)})
    for seed in range(4):
        batch = sample_batch(ensemble, 64, seed=seed)
        reference = sup_deviation_estimate(batch, base)
        estimate = sup_deviation_estimate(batch, scaled)
        assert estimate.value == pytest.approx(factor**q * reference.value, rel=1e-12)
        assert np.allclose(estimate.argmax, factor * reference.argmax)
        assert estimate.audit.net_value == pytest.approx(factor**q * reference.audit.net_value)


def test_nested_scaling_multiplies_factors(gaussian4, sphere4):
    base = ProcessConfig(
        set=sphere4, ensemble=gaussian4, q=1.0, N=32, net_max_points=64,
        ascent_restarts=1, ascent_steps=20, seed=2,
    )
    nested = base.model_copy(
        update={"set": IndexSetSpec.scaled(IndexSetSpec.scaled(sphere4, 2.0), 3.0)}
    )
    batch = sample_batch(gaussian4, 32, seed=9)
    assert sup_deviation_estimate(batch, nested).value == pytest.approx(
        6.0 * sup_deviation_estimate(batch, base).value, rel=1e-12
    )


def test_run_trials_on_scaled_set(small_process):
    scaled = small_process.model_copy(
        update={"set": IndexSetSpec.scaled(small_process.set, 2.0), "trials": 3}
    )
    base = run_trials(small_process.model_copy(update={"trials": 3}))
    summary = run_trials(scaled)
    assert np.allclose(summary.values, 4.0 * base.values, rtol=1e-12)


@pytest.mark.parametrize("q", [1.0, 1.5, 3.0])
def test_deviation_is_homogeneous_and_even(gaussian4, q):
    batch = sample_batch(gaussian4, 30, seed=6)
    v = np.array([0.4, -1.0, 0.2, 0.7])
    population = gaussian_abs_moment(q) ** (1.0 / q) * float(np.linalg.norm(v))
    base = empirical_lq_deviation(batch, v, q, population)
    for c in (0.25, 3.0):
        scaled = empirical_lq_deviation(batch, c * v, q, c * population)
        assert scaled == pytest.approx(c**q * base, rel=1e-9, abs=1e-12)
    objective = DeviationObjective(batch.rows, q, PopulationModel(gaussian4, q))
    assert objective.value(-v) == pytest.approx(objective.value(v), rel=1e-12)


def test_sup_grows_with_the_index_set(gaussian4):
    rng = np.random.default_rng(12)
    points = rng.standard_normal((12, 4))
    smaller = IndexSetSpec.finite(points[:5].tolist())
    larger = IndexSetSpec.finite(points.tolist())
    batch = sample_batch(gaussian4, 40, seed=8)
    objective = DeviationObjective(batch.rows, 1.5, PopulationModel(gaussian4, 1.5))
    inner = maximize_over_set(smaller, objective, search_net(smaller))
    outer = maximize_over_set(larger, objective, search_net(larger))
    assert outer.value >= inner.value

"""
End-to-end experiments at their published scale (deselect with -m "not slow")
"""

import math

import numpy as np
import pytest

from lqlab.main import run_command
from lqlab.models.applications import RipQuery, RipVerdict
from lqlab.models.ensemble import EnsembleFamily, EnsembleSpec
from lqlab.models.index_set import IndexSetSpec
from lqlab.models.process import ProcessConfig
from lqlab.services.applications import rip_certify, section_diameter
from lqlab.services.bounds import calibrate_tail_constant, fit_tail_shape
from lqlab.services.chaining import build_admissible_sequence, chain_diagnostics
from lqlab.services.ensembles import gaussian_abs_moment, sample_batch
from lqlab.services.process import single_function_trials, sup_deviation_estimate

pytestmark = pytest.mark.slow

QS = [1.0, 1.5, 2.0, 3.0]


@pytest.mark.parametrize("q", QS)
def test_single_function_tail_has_bernstein_shape(q):
    spec = EnsembleSpec(family=EnsembleFamily.GAUSSIAN, dimension=1)
    deviations = single_function_trials(spec, [1.0], q, 1024, 10_000, seed=5)
    thresholds = [round(0.02 * k, 2) for k in range(1, 26)]
    tail = [float(np.mean(np.abs(deviations) > x)) for x in thresholds]
    assert calibrate_tail_constant(thresholds, tail, 1024, q).constant <= 50.0
    assert fit_tail_shape(thresholds, tail, q).r_squared >= 0.9


@pytest.mark.parametrize("q", QS)
def test_main_bound_dominates_quantiles(q, tmp_path):
    argv = [
        "calibrate", "--set", "sphere", "--d", "16", "--q", str(q),
        "--N-grid", "64:4096:x4", "--trials", "200", "--u", "3", "--level", "0.95",
        "--max-constant", "100", "--assert", "--out", str(tmp_path / "cal"),
    ]
    assert run_command(argv) == 0


@pytest.mark.parametrize("q", QS)
def test_median_decays_like_inverse_root_n(q, tmp_path):
    argv = [
        "scaling", "--set", "sphere", "--d", "16", "--q", str(q),
        "--N-grid", "64:4096:x4", "--trials", "200", "--assert",
        "--out", str(tmp_path / "scaling"),
    ]
    assert run_command(argv) == 0


def test_dudley_estimate_tracks_mean_width(tmp_path):
    argv = ["width", "--dims", "4,8,16,32", "--assert", "--out", str(tmp_path / "width")]
    assert run_command(argv) == 0


def test_rip_certification_rates():
    gaussian = EnsembleSpec(family=EnsembleFamily.GAUSSIAN, dimension=256)
    cone = IndexSetSpec.sparse_sphere(256, 5)

    def verdicts(N):
        return [
            rip_certify(
                RipQuery(ensemble=gaussian, set=cone, q=2.0, N=N, audit_vectors=1000, seed=seed),
                window=0.5,
            ).verdict
            for seed in range(50)
        ]

    assert verdicts(200).count(RipVerdict.CERTIFIED) >= 48
    assert verdicts(10).count(RipVerdict.VIOLATED) >= 48


def test_section_diameter_matches_singular_value():
    gaussian = EnsembleSpec(family=EnsembleFamily.GAUSSIAN, dimension=1024)
    ball = IndexSetSpec.ball(1024)
    ceiling = 2.5 * (math.sqrt(1024) + math.sqrt(64))
    for trial in range(20):
        batch = sample_batch(gaussian, 64, seed=9, trial=trial)
        estimate = section_diameter(batch, ball, 2.0, seed=9)
        top = float(np.linalg.svd(batch.rows, compute_uv=False)[0])
        assert estimate.value == pytest.approx(top, rel=0.02)
        assert estimate.value <= ceiling


def test_chain_partition_identity_on_random_triples():
    rng = np.random.default_rng(31)
    checked = 0
    for _ in range(50):
        d = int(rng.integers(2, 6))
        points = rng.standard_normal((int(rng.integers(5, 120)), d))
        seq = build_admissible_sequence(points)
        for _ in range(20):
            index = int(rng.integers(points.shape[0]))
            N = int(rng.integers(1, 10**6))
            diagnostics = chain_diagnostics(seq, index, N)
            assert diagnostics.initial_sum + diagnostics.terminal_sum == diagnostics.total
            checked += 1
    assert checked == 1000


def _grid_oracle(rows, q, angles=10_000):
    theta = np.linspace(0.0, 2.0 * np.pi, angles, endpoint=False)
    directions = np.stack([np.cos(theta), np.sin(theta)])
    empirical = np.mean(np.abs(rows @ directions) ** q, axis=0)
    return float(np.max(np.abs(empirical - gaussian_abs_moment(q))))


@pytest.mark.parametrize("q", [1.0, 2.0, 3.0])
def test_planar_sup_matches_dense_grid(q):
    gaussian = EnsembleSpec(family=EnsembleFamily.GAUSSIAN, dimension=2)
    config = ProcessConfig(
        set=IndexSetSpec.sphere(2), ensemble=gaussian, q=q, N=50, net_eps=0.01, seed=4
    )
    for trial in range(20):
        batch = sample_batch(gaussian, 50, seed=4, trial=trial)
        estimate = sup_deviation_estimate(batch, config)
        assert estimate.value == pytest.approx(_grid_oracle(batch.rows, q), rel=0.01)


def test_rip_worst_ratio_improves_with_samples():
    gaussian = EnsembleSpec(family=EnsembleFamily.GAUSSIAN, dimension=256)
    cone = IndexSetSpec.sparse_sphere(256, 5)
    mean_lower, failures = [], []
    for N in (25, 50, 100, 200):
        certificates = [
            rip_certify(
                RipQuery(ensemble=gaussian, set=cone, q=2.0, N=N, audit_vectors=500, seed=seed),
                window=0.5,
            )
            for seed in range(50)
        ]
        mean_lower.append(float(np.mean([c.worst_lower for c in certificates])))
        failures.append(sum(c.verdict == RipVerdict.VIOLATED for c in certificates) / 50)
    assert mean_lower == sorted(mean_lower)
    assert failures[-1] < failures[0]
    for previous, current in zip(failures, failures[1:]):
        assert current <= previous + 0.04

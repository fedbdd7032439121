import numpy as np
import pytest

from rica.errors import ParameterError
from rica.core import Frame, rica_recover
from rica.geodesics import exp_map
from rica.manifolds import ManifoldSpec, base_point, charts_for, intrinsic_metric, wrap_angle
from rica.metrics import total_correlation
from rica.sources import (
    SourceConfig,
    chart_observations,
    generate,
    ground_truth_spectrum,
    random_g_frame,
    sample_logistic_sources,
)


def test_scale_recursion():
    assert SourceConfig(n=3, b=0.3, r_s=0.85).scales[2] == pytest.approx(0.216750, abs=1e-12)


def test_config_validation():
    with pytest.raises(ParameterError):
        SourceConfig(n=2, b=0.0)
    with pytest.raises(ParameterError):
        SourceConfig(n=2, r_s=1.5)
    with pytest.raises(ParameterError):
        SourceConfig(n=2, N=0)


def test_logistic_moments(rng):
    cfg = SourceConfig(n=4, b=0.5, r_s=0.8, N=10_000)
    s = sample_logistic_sources(cfg, rng)
    med = np.median(s, axis=0)
    # median standard error of a logistic is about 2 b / sqrt(N)
    assert np.all(np.abs(med) < 3 * 2 * cfg.scales / np.sqrt(cfg.N))
    np.testing.assert_allclose(s.std(axis=0), cfg.scales * np.pi / np.sqrt(3), rtol=0.05)


def test_sources_are_finite_and_deterministic():
    cfg = SourceConfig(n=3, N=2000)
    a = sample_logistic_sources(cfg, np.random.default_rng(5))
    b = sample_logistic_sources(cfg, np.random.default_rng(5))
    assert np.isfinite(a).all() and np.array_equal(a, b)


def test_frame_identity_metric_is_orthogonal(rng):
    m = intrinsic_metric(ManifoldSpec.torus(5))
    J = random_g_frame(m, np.zeros(5), rng).j
    np.testing.assert_allclose(J.T @ J, np.eye(5), atol=1e-10)


def test_frame_on_sphere(rng):
    n = 4
    m = intrinsic_metric(ManifoldSpec.sphere(n))
    J = random_g_frame(m, np.zeros(n), rng).j
    np.testing.assert_allclose(np.linalg.norm(J, axis=0), 0.5, atol=1e-12)
    assert abs(np.linalg.det(J)) == pytest.approx(np.linalg.det(4 * np.eye(n)) ** -0.5, abs=1e-10)


def test_frame_determinism_and_spectrum():
    m = intrinsic_metric(ManifoldSpec.hyperbolic(4))
    f1 = random_g_frame(m, np.zeros(4), np.random.default_rng(1))
    f2 = random_g_frame(m, np.zeros(4), np.random.default_rng(1))
    f3 = random_g_frame(m, np.zeros(4), np.random.default_rng(2))
    assert np.array_equal(f1.j, f2.j)
    assert not np.allclose(f1.j, f3.j)


def test_generate_zero_source_maps_to_base():
    spec = ManifoldSpec.sphere(3)
    m = intrinsic_metric(spec)
    frame = random_g_frame(m, np.zeros(3), np.random.default_rng(0))
    batch = generate(spec, SourceConfig(n=3, N=10), frame, np.random.default_rng(1))
    np.testing.assert_array_equal(exp_map(spec, base_point(spec), np.zeros(3)), np.zeros(3))
    assert batch.x.shape == (10, 3) and batch.z is None


def test_generate_torus_identity_frame():
    spec = ManifoldSpec.torus(3)
    frame = Frame(np.eye(3), np.zeros(3), np.eye(3))
    batch = generate(spec, SourceConfig(n=3, b=2.0, r_s=1.0, N=500), frame, np.random.default_rng(3))
    np.testing.assert_array_equal(batch.x, wrap_angle(batch.s))
    assert not batch.in_radius.all()


@pytest.mark.parametrize(
    "spec",
    [ManifoldSpec.sphere(6), ManifoldSpec.hyperbolic(6), ManifoldSpec.torus(6), ManifoldSpec.spd(3)],
    ids=lambda s: s.kind,
)
def test_generate_then_recover(spec, rng):
    m = intrinsic_metric(spec)
    frame = random_g_frame(m, np.zeros(spec.dim), rng)
    batch = generate(spec, SourceConfig(n=spec.dim, N=2000), frame, rng, chart=charts_for(spec.kind)[1])
    latents, ok = rica_recover(spec, np.zeros(spec.dim), frame, batch.x)
    keep = ok & batch.in_radius
    assert keep.mean() > 0.99
    assert np.max(np.abs(latents[keep] - batch.s[keep])) < 1e-8
    assert batch.z.shape[0] == batch.x.shape[0]


def test_chart_observations_nan_outside_domain():
    spec = ManifoldSpec.hyperbolic(2)
    x = np.array([[0.1, 0.2], [1.0, 0.0], [np.nan, 0.0]])
    z = chart_observations(spec, charts_for("hyperbolic")[1], x)
    assert np.isfinite(z[0]).all() and np.isnan(z[1:]).all()
    z = chart_observations(spec, charts_for("hyperbolic")[0], x)
    assert np.array_equal(z[:2], x[:2])


def test_ground_truth_spectrum():
    lam, gap = ground_truth_spectrum(SourceConfig(n=4, b=0.3, r_s=1.0))
    assert gap == 0.0
    lam, gap = ground_truth_spectrum(SourceConfig(n=1, b=0.3))
    assert lam[0] == pytest.approx(-5.5556, abs=1e-4) and gap == np.inf
    gaps = [ground_truth_spectrum(SourceConfig(n=8, b=0.3, r_s=r))[1]
            for r in (0.999, 0.99, 0.97, 0.95, 0.9, 0.85, 0.75, 0.6)]
    assert all(a < b for a, b in zip(gaps, gaps[1:]))


def test_ground_truth_sources_are_independent(rng):
    s = sample_logistic_sources(SourceConfig(n=6, N=10_000), rng)
    assert abs(total_correlation(s).tc_nats) < 0.1

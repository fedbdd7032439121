import math

import numpy as np
import pytest

from rica.errors import ConvergenceError, RadiusError
from rica.geodesics import (
    GeodesicSolverConfig,
    exp_map,
    generic_exp_ode,
    generic_log_shoot,
    geodesic_trajectory,
    injectivity_radius,
    log_map,
    log_map_batch,
    within_radius,
)
from rica.geometry import euclidean_metric
from rica.manifolds import ManifoldSpec, base_point, intrinsic_metric

S2 = ManifoldSpec.sphere(2)
H2 = ManifoldSpec.hyperbolic(2)
T2 = ManifoldSpec.torus(2)


def test_exp_examples():
    np.testing.assert_allclose(exp_map(T2, np.zeros(2), np.array([0.1, -0.2])), [0.1, -0.2])
    np.testing.assert_allclose(exp_map(S2, np.zeros(2), np.array([0.5, 0.0])), [math.tan(0.5), 0.0])
    np.testing.assert_allclose(exp_map(H2, np.zeros(2), np.array([0.5, 0.0])), [math.tanh(0.5), 0.0])


def test_exp_examples_against_rk4():
    for spec, expected in ((S2, 0.546302), (H2, 0.462117)):
        x = generic_exp_ode(intrinsic_metric(spec), np.zeros(2), np.array([0.5, 0.0]))
        assert x[0] == pytest.approx(expected, abs=1e-6)
        assert abs(x[1]) < 1e-12


def test_log_examples():
    np.testing.assert_allclose(log_map(T2, np.zeros(2), np.array([3.0, 0.0])), [3.0, 0.0])
    np.testing.assert_allclose(
        log_map(T2, np.zeros(2), np.array([3.5, 0.0])), [3.5 - 2 * math.pi, 0.0], atol=1e-12
    )
    v = generic_log_shoot(euclidean_metric(2), np.array([1.0, 1.0]), np.array([2.0, 3.0]))
    np.testing.assert_allclose(v, [1.0, 2.0], atol=1e-12)
    v = log_map(S2, np.zeros(2), np.array([0.546302, 0.0]))
    np.testing.assert_allclose(v, [0.5, 0.0], atol=1e-6)


def test_torus_half_period_is_radius_error():
    with pytest.raises(RadiusError):
        log_map(T2, np.zeros(2), np.array([math.pi, 0.0]))
    V, ok = log_map_batch(T2, np.zeros(2), np.array([[math.pi, 0.0], [0.2, 0.1]]))
    assert ok.tolist() == [False, True]
    assert np.all(np.isnan(V[0])) and np.allclose(V[1], [0.2, 0.1])


def test_sphere_antipode_has_no_log():
    V, ok = log_map_batch(S2, np.zeros(2), np.array([[np.inf, 0.0]]))
    assert not ok[0]


def test_injectivity_radius():
    assert injectivity_radius(S2) == math.pi
    assert injectivity_radius(H2) == math.inf
    assert injectivity_radius(T2) == math.pi
    assert injectivity_radius(ManifoldSpec.spd(2)) == math.inf


def test_within_radius_flags():
    v = np.array([[1.0, 0.0], [1.6, 0.0]])  # g-norms 2 and 3.2 on the sphere
    assert within_radius(S2, np.zeros(2), v).tolist() == [True, False]
    assert within_radius(T2, np.zeros(2), np.array([[3.0, -3.0], [3.2, 0]])).tolist() == [True, False]
    assert within_radius(H2, np.zeros(2), v * 100).all()


def _tangents(spec, rng, count):
    """Random tangents whose g-norm is below 0.9 of the radius (capped at 3)."""
    g = intrinsic_metric(spec)(base_point(spec))
    V = rng.normal(size=(count, spec.dim))
    gnorm = np.sqrt(np.einsum("ni,ij,nj->n", V, g, V))
    limit = min(0.9 * injectivity_radius(spec), 3.0)
    if spec.kind == "torus":
        return V / np.max(np.abs(V), axis=1, keepdims=True) * rng.uniform(0, limit, (count, 1))
    return V / gnorm[:, None] * rng.uniform(0, limit, (count, 1))


@pytest.mark.parametrize(
    "spec",
    [ManifoldSpec.sphere(4), ManifoldSpec.hyperbolic(4), ManifoldSpec.torus(4), ManifoldSpec.spd(3)],
    ids=lambda s: s.kind,
)
def test_exp_log_round_trip_at_base(spec, rng):
    V = _tangents(spec, rng, 1000)
    if spec.kind == "hyperbolic":
        V *= 2.5 / 3.0  # keep tanh away from 1 so the chart stays resolvable
    X = exp_map(spec, base_point(spec), V)
    back, ok = log_map_batch(spec, base_point(spec), X)
    assert ok.all()
    assert np.max(np.abs(back - V)) < 1e-8


@pytest.mark.parametrize("spec", [ManifoldSpec.sphere(2), ManifoldSpec.hyperbolic(2), ManifoldSpec.spd(2)],
                         ids=lambda s: s.kind)
def test_analytic_and_ode_agree_at_base(spec, rng):
    m = intrinsic_metric(spec)
    for v in _tangents(spec, rng, 3) * 0.6:
        x_ode = generic_exp_ode(m, base_point(spec), v, GeodesicSolverConfig(rk4_steps=200))
        assert np.max(np.abs(x_ode - exp_map(spec, base_point(spec), v))) < 1e-8


def test_euclidean_ode_is_exact():
    x = generic_exp_ode(euclidean_metric(3), np.array([1.0, 2.0, 3.0]), np.array([0.5, -1.0, 2.0]))
    # zero Christoffel symbols: only summation round-off across the steps remains
    np.testing.assert_allclose(x, [1.5, 1.0, 5.0], atol=1e-12, rtol=0)


def test_rk4_fourth_order_convergence():
    m = intrinsic_metric(S2)
    v = np.array([0.9, 0.4])
    exact = exp_map(S2, np.zeros(2), v)
    errs = [np.max(np.abs(generic_exp_ode(m, np.zeros(2), v, GeodesicSolverConfig(rk4_steps=s)) - exact))
            for s in (4, 8)]
    assert 10 < errs[0] / errs[1] < 24


def test_speed_is_conserved():
    m = intrinsic_metric(H2)
    _, xs, us = geodesic_trajectory(m, np.zeros(2), np.array([0.6, -0.3]))
    speed = np.array([u @ m(x) @ u for x, u in zip(xs, us)])
    assert np.ptp(speed) / speed[0] < 1e-6


def test_exp_scaling_traces_geodesic():
    m = intrinsic_metric(S2)
    v = np.array([0.7, 0.2])
    _, xs, _ = geodesic_trajectory(m, np.zeros(2), v, GeodesicSolverConfig(rk4_steps=400))
    for t in (0.25, 0.5, 1.0):
        np.testing.assert_allclose(exp_map(S2, np.zeros(2), t * v), xs[int(400 * t)], atol=1e-8)


def test_shooting_round_trip_on_sphere():
    m = intrinsic_metric(S2)
    x0 = np.array([0.1, -0.2])
    v = np.array([0.5, 0.4])
    x = generic_exp_ode(m, x0, v)
    w = generic_log_shoot(m, x0, x)
    assert np.max(np.abs(generic_exp_ode(m, x0, w) - x)) < 1e-8


def test_shooting_matches_analytic_hyperbolic_log():
    m = intrinsic_metric(H2)
    x = np.array([0.6, -0.3])
    w = generic_log_shoot(m, np.zeros(2), x, GeodesicSolverConfig(rk4_steps=200))
    np.testing.assert_allclose(w, log_map(H2, np.zeros(2), x), atol=1e-7)


def test_shooting_reports_non_convergence():
    m = intrinsic_metric(S2)
    with pytest.raises(ConvergenceError):
        generic_log_shoot(m, np.zeros(2), np.array([3.0, 1.0]),
                          GeodesicSolverConfig(rk4_steps=5, shooting_max_iters=1, shooting_tol=1e-14))


def test_torus_exp_wraps_off_base():
    x = exp_map(T2, np.array([3.0, 0.0]), np.array([0.5, 0.0]))
    np.testing.assert_allclose(x, [3.5 - 2 * math.pi, 0.0], atol=1e-12)


def test_spd_exp_log_off_base(rng):
    spec = ManifoldSpec.spd(2)
    x0 = rng.normal(scale=0.4, size=3)
    v = rng.normal(scale=0.5, size=3)
    x = exp_map(spec, x0, v)
    np.testing.assert_allclose(log_map(spec, x0, x), v, atol=1e-9)

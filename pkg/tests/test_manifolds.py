import math

import numpy as np
import pytest

from rica.errors import DomainError, ParameterError
from rica.manifolds import (
    ManifoldSpec,
    alternate_chart,
    base_point,
    charts_for,
    intrinsic_metric,
    parse_chart,
    spd_point,
    sym_expm,
    sym_logm,
    table_rows,
    unvech,
    vech,
    vech_basis,
    wrap_angle,
)

ALL_SPECS = [
    ManifoldSpec.sphere(4),
    ManifoldSpec.hyperbolic(4),
    ManifoldSpec.torus(4),
    ManifoldSpec.spd(3),
]


def test_torus_metric_is_identity_everywhere(rng):
    m = intrinsic_metric(ManifoldSpec.torus(3))
    for x in rng.uniform(-np.pi, np.pi, size=(5, 3)):
        assert np.array_equal(m(x), np.eye(3))


def test_spd_metric_identity_at_origin():
    m = intrinsic_metric(ManifoldSpec.spd(2))
    np.testing.assert_allclose(m(np.zeros(3)), np.eye(3), atol=1e-12)


def test_hyperbolic_metric_value():
    m = intrinsic_metric(ManifoldSpec.hyperbolic(2))
    np.testing.assert_allclose(m(np.array([0.5, 0.0])), 64.0 / 9.0 * np.eye(2), rtol=1e-12)


@pytest.mark.parametrize(
    "spec, factor",
    [(ManifoldSpec.sphere(5), 4.0), (ManifoldSpec.hyperbolic(5), 4.0),
     (ManifoldSpec.torus(5), 1.0), (ManifoldSpec.spd(3), 1.0)],
)
def test_metric_at_base_point(spec, factor):
    g = intrinsic_metric(spec)(base_point(spec))
    np.testing.assert_allclose(g, factor * np.eye(spec.dim), atol=1e-12)


def test_base_points_are_zero():
    assert np.array_equal(base_point(ManifoldSpec.sphere(4)), np.zeros(4))
    assert np.array_equal(base_point(ManifoldSpec.spd(2)), np.zeros(3))
    assert np.array_equal(base_point(ManifoldSpec.torus(2)), np.zeros(2))
    # the SPD base coordinate is the identity matrix
    np.testing.assert_allclose(spd_point(base_point(ManifoldSpec.spd(3))), np.eye(3), atol=0)


def test_alternate_chart_examples():
    np.testing.assert_allclose(alternate_chart(ManifoldSpec.sphere(2), np.zeros(2)), [0, 0, -1])
    np.testing.assert_allclose(
        alternate_chart(ManifoldSpec.torus(1), np.array([np.pi / 2])), [1, 0], atol=1e-16
    )
    np.testing.assert_allclose(alternate_chart(ManifoldSpec.hyperbolic(2), np.zeros(2)), [0, 0, 1])


def test_table_rows_order():
    rows = table_rows()
    assert len(rows) == 8
    assert (rows[0][0].kind, rows[0][1].name) == ("sphere", "ambient")
    assert (rows[5][0].kind, rows[5][1].name) == ("torus", "sincos")
    assert (rows[7][0].kind, rows[7][1].name) == ("spd", "vech")
    assert rows[7][0].p == 4 and rows[7][0].dim == 10


def test_sphere_ambient_unit_norm(rng):
    x = rng.normal(scale=3.0, size=(200, 5))
    z = alternate_chart(ManifoldSpec.sphere(5), x)
    np.testing.assert_allclose(np.linalg.norm(z, axis=1), 1.0, atol=1e-12)


def test_lorentz_constraint(rng):
    x = rng.normal(size=(200, 4))
    x *= 0.95 * rng.uniform(size=(200, 1)) / np.linalg.norm(x, axis=1, keepdims=True)
    z = alternate_chart(ManifoldSpec.hyperbolic(4), x)
    lorentz = z[:, -1] ** 2 - np.sum(z[:, :-1] ** 2, axis=1)
    np.testing.assert_allclose(lorentz, 1.0, atol=1e-10)


def test_lorentz_rejects_boundary():
    with pytest.raises(DomainError):
        alternate_chart(ManifoldSpec.hyperbolic(2), np.array([1.0, 0.0]))


def test_sincos_pairs_unit(rng):
    z = alternate_chart(ManifoldSpec.torus(3), rng.uniform(-10, 10, size=(100, 3)))
    np.testing.assert_allclose(z[:, 0::2] ** 2 + z[:, 1::2] ** 2, 1.0, atol=1e-14)


def test_spd_alternate_chart_is_spd(rng):
    spec = ManifoldSpec.spd(3)
    for x in rng.normal(size=(20, 6)):
        P = unvech(alternate_chart(spec, x), 3)
        np.testing.assert_allclose(P, P.T, atol=0)
        assert np.all(np.linalg.eigvalsh(P) > 0)


def test_spd_metric_matches_affine_invariant_inner_product(rng):
    p = 3
    spec = ManifoldSpec.spd(p)
    m = intrinsic_metric(spec)
    for _ in range(5):
        x = rng.normal(scale=0.7, size=spec.dim)
        u, v = rng.normal(size=(2, spec.dim))
        # push chart tangents u, v through d expm numerically
        h = 1e-6
        U = (spd_point(x + h * u) - spd_point(x - h * u)) / (2 * h)
        V = (spd_point(x + h * v) - spd_point(x - h * v)) / (2 * h)
        Pinv = np.linalg.inv(spd_point(x))
        expected = np.trace(Pinv @ U @ Pinv @ V)
        assert abs(u @ m(x) @ v - expected) < 1e-8 * max(1.0, abs(expected))


def test_vech_round_trip_and_basis(rng):
    p = 4
    A = rng.normal(size=(p, p))
    S = A + A.T
    np.testing.assert_allclose(unvech(vech(S), p), S, atol=1e-14)
    B = vech_basis(p)
    gram = np.einsum("aij,bij->ab", B, B)
    np.testing.assert_allclose(gram, np.eye(B.shape[0]), atol=1e-14)
    # column-major lower triangle, diagonal first within each column
    assert vech(np.arange(9.0).reshape(3, 3) * 0 + np.diag([1.0, 2.0, 3.0]))[[0, 3, 5]].tolist() == [1, 2, 3]


def test_sym_expm_logm_inverse(rng):
    A = rng.normal(size=(4, 4))
    S = 0.5 * (A + A.T)
    np.testing.assert_allclose(sym_logm(sym_expm(S)), S, atol=1e-12)
    with pytest.raises(DomainError):
        sym_logm(-np.eye(2))


def test_wrap_angle_convention():
    assert wrap_angle(np.pi) == np.pi
    assert wrap_angle(-np.pi) == np.pi
    assert wrap_angle(3 * np.pi) == pytest.approx(np.pi)
    assert wrap_angle(0.3) == 0.3
    assert wrap_angle(3.5) == pytest.approx(3.5 - 2 * math.pi)
    x = np.linspace(-20, 20, 1001)
    w = wrap_angle(x)
    assert np.all((w > -np.pi) & (w <= np.pi))
    np.testing.assert_allclose(np.sin(w), np.sin(x), atol=1e-12)


def test_spec_validation():
    with pytest.raises(ParameterError):
        ManifoldSpec("klein", 3)
    with pytest.raises(ParameterError):
        ManifoldSpec("spd", 4, 2)
    assert ManifoldSpec.for_target("SPD", 8).p == 4
    assert ManifoldSpec.for_target("spd", 32).p == 8


def test_chart_parsing():
    assert parse_chart("hyperbolic", "Poincaré").name == "poincare"
    assert parse_chart("spd", "Log_Euclidean").tag == "intrinsic"
    assert [c.tag for c in charts_for("torus")] == ["intrinsic", "alternate"]
    with pytest.raises(ParameterError):
        parse_chart("sphere", "lorentz")

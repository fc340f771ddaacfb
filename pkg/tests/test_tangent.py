"""Tangent vectors, the Otto metric, observables, and constant-field flows."""

import numpy as np
import pytest

from ottocircle import (
    DomainError,
    ScalarField,
    TangentVector,
    WeightedOperatorContext,
    basis,
    cosine_density,
    flow_constant_field,
    flow_map,
    integrate,
    load_tangent_json,
    make_grid,
    metric_gram,
    observable,
    observable_derivative,
    otto_inner,
    otto_norm,
    remap_to_vol,
    save_tangent_json,
    tangent_from_json,
    tangent_to_json,
    uniform_density,
    vector_from_potential,
)

GRID = make_grid(128)
VOL = uniform_density(GRID)
WEIGHTED = cosine_density(GRID, 0.3)
N_MODES = 6


@pytest.fixture(scope="module")
def ctx_vol():
    return WeightedOperatorContext(VOL, N_MODES)


@pytest.fixture(scope="module")
def ctx_weighted():
    return WeightedOperatorContext(WEIGHTED, N_MODES)


def unit_vector(index, base=VOL):
    coeffs = np.zeros(2 * N_MODES)
    coeffs[index] = 1.0
    return TangentVector(coeffs, base)


def test_gram_diagonal_at_uniform():
    gram = metric_gram(VOL, N_MODES)
    expected = np.diag(np.repeat(np.arange(1, N_MODES + 1), 2) ** 2).astype(float)
    np.testing.assert_allclose(gram.matrix, expected, atol=1e-13)


def test_otto_inner_frozen_values():
    gram = metric_gram(VOL, N_MODES)
    assert otto_inner(unit_vector(0), unit_vector(0), gram) == pytest.approx(1.0)
    assert otto_inner(unit_vector(2), unit_vector(2), gram) == pytest.approx(4.0)
    assert otto_inner(unit_vector(0), unit_vector(1), gram) == pytest.approx(0.0, abs=1e-13)
    assert otto_norm(unit_vector(4), gram) == pytest.approx(3.0)


def test_otto_inner_base_discipline():
    gram_vol = metric_gram(VOL, N_MODES)
    v_weighted = unit_vector(0, base=WEIGHTED)
    with pytest.raises(DomainError):
        otto_inner(v_weighted, v_weighted, gram_vol)
    with pytest.raises(DomainError):
        otto_inner(unit_vector(0), v_weighted, gram_vol)


def test_tangent_vector_validation():
    with pytest.raises(DomainError):
        TangentVector(np.zeros(5), VOL)
    with pytest.raises(DomainError):
        TangentVector(np.zeros((2, 4)), VOL)


def test_vector_from_potential_recovers_band_limited(ctx_weighted):
    rng = np.random.default_rng(17)
    coeffs = rng.standard_normal(2 * N_MODES)
    psi = ScalarField(GRID, coeffs @ ctx_weighted.basis0)
    v = vector_from_potential(psi, ctx_weighted)
    np.testing.assert_allclose(v.coeffs, coeffs, atol=1e-12)


def test_potential_roundtrip(ctx_vol):
    v = unit_vector(2)
    psi = v.potential(ctx_vol)
    np.testing.assert_allclose(psi.values, basis(GRID, 2, "cos").values, atol=1e-15)
    with pytest.raises(DomainError):
        v.potential(WeightedOperatorContext(VOL, N_MODES + 1))


def test_observable_frozen_value():
    phi = ScalarField(GRID, np.cos(GRID.nodes))
    # int cos(x) (1 + 0.3 cos x) dvol = 0.15
    assert observable(phi, WEIGHTED) == pytest.approx(0.15, abs=1e-14)
    assert observable(phi, VOL) == pytest.approx(0.0, abs=1e-14)


def test_observable_derivative_matches_linearization(ctx_weighted):
    # moving mass along V_psi changes rho at rate -(rho psi')'; for a linear
    # statistic the chain rule gives exactly int phi' psi' dmu
    rng = np.random.default_rng(23)
    phi = ScalarField(GRID, np.cos(2 * GRID.nodes) + 0.5 * np.sin(GRID.nodes))
    coeffs = rng.standard_normal(2 * N_MODES)
    v = TangentVector(coeffs, WEIGHTED)
    dpsi = coeffs @ ctx_weighted.basis1
    from ottocircle import deriv

    drho = -deriv(ScalarField(GRID, WEIGHTED.rho * dpsi)).values
    linearized = float(np.mean(phi.values * drho))
    assert observable_derivative(phi, v, ctx_weighted) == pytest.approx(linearized, abs=1e-12)


def test_observable_derivative_base_mismatch(ctx_vol):
    phi = ScalarField(GRID, np.cos(GRID.nodes))
    v = unit_vector(0, base=WEIGHTED)
    with pytest.raises(DomainError):
        observable_derivative(phi, v, ctx_vol)


def test_flow_map_fixed_points():
    psi = ScalarField(GRID, np.zeros(GRID.n))
    np.testing.assert_allclose(flow_map(psi, 1.0), GRID.nodes, atol=1e-15)
    np.testing.assert_allclose(flow_map(ScalarField(GRID, np.cos(GRID.nodes)), 0.0),
                               GRID.nodes, atol=1e-15)


def test_flow_map_matches_separable_solution():
    # dx/dt = -sin x solves to tan(x/2) e^{-t} = tan(x0/2) on (0, pi)
    psi = ScalarField(GRID, np.cos(GRID.nodes))
    t = 0.4
    moved = flow_map(psi, t, steps=256)
    interior = (GRID.nodes > 0.3) & (GRID.nodes < np.pi - 0.3)
    expected = 2.0 * np.arctan(np.tan(GRID.nodes[interior] / 2.0) * np.exp(-t))
    np.testing.assert_allclose(moved[interior], expected, atol=1e-10)


def test_flow_conserves_mass():
    psi = ScalarField(GRID, 0.2 * np.cos(GRID.nodes))
    nu = flow_constant_field(psi, WEIGHTED, 0.5)
    assert integrate(nu.field()) == pytest.approx(1.0, abs=1e-12)
    assert nu.rho.min() > 0.0


def test_remap_identity_at_uniform(ctx_vol):
    rng = np.random.default_rng(29)
    v = TangentVector(rng.standard_normal(2 * N_MODES), VOL)
    back = remap_to_vol(v, ctx_vol)
    np.testing.assert_allclose(back.coeffs, v.coeffs, atol=1e-12)


def test_remap_norm_bound(ctx_vol):
    rng = np.random.default_rng(31)
    v = TangentVector(rng.standard_normal(2 * N_MODES), WEIGHTED)
    moved = remap_to_vol(v, ctx_vol)
    bound = WEIGHTED.rho.max() * otto_inner(v, v, metric_gram(WEIGHTED, N_MODES))
    assert otto_inner(moved, moved, metric_gram(VOL, N_MODES)) <= bound + 1e-12


def test_remap_requires_uniform_context(ctx_weighted):
    v = unit_vector(0, base=WEIGHTED)
    with pytest.raises(DomainError):
        remap_to_vol(v, ctx_weighted)


def test_tangent_serialization_roundtrip(tmp_path):
    rng = np.random.default_rng(37)
    v = TangentVector(rng.standard_normal(2 * N_MODES), WEIGHTED)
    payload = tangent_to_json(v)
    back = tangent_from_json(payload, WEIGHTED)
    np.testing.assert_allclose(back.coeffs, v.coeffs, rtol=0.0, atol=0.0)

    path = tmp_path / "vector.json"
    save_tangent_json(v, path)
    np.testing.assert_allclose(load_tangent_json(path, WEIGHTED).coeffs, v.coeffs,
                               rtol=0.0, atol=0.0)

    with pytest.raises(DomainError):
        tangent_from_json(payload, VOL)  # wrong base density
    payload_bad = dict(payload, ordering="sin-first")
    with pytest.raises(DomainError):
        tangent_from_json(payload_bad, WEIGHTED)

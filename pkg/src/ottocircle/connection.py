"""Lie bracket, Levi-Civita connection, Christoffel symbols, parallel transport.

The covariant derivative of constant-potential fields reduces, in one
dimension, to a single projection:

    nabla_{V_phi1} V_phi2 = V_theta,   theta = argmin |phi1' phi2'' dx - d(theta)|_{L^2(mu)},

equivalently <nabla_{V_phi1} V_phi2, V_phi3> = int phi1' phi2'' phi3' dmu.
The Lie bracket potential solves the same kind of problem for the
antisymmetrized field phi1' phi2'' - phi1'' phi2', and the two identities

    nabla_{V1} V2 = (1/2) V_{<grad phi1, grad phi2>} + (1/2) [V1, V2]
    nabla_{V1} V2 - nabla_{V2} V1 = [V1, V2]

hold at solver precision whenever the quadratic products stay inside the
Galerkin span (inputs band-limited to N/2).

Two independent code paths compute the bracket: the default forms the
Hessian combination and projects it; the alternative assembles the same
field from weighted Laplacians and runs it through div_mu and the Green
solve.  Their agreement is a cross-check of the operator stack, and the
Laplacian path is invariant under flipping the sign convention of the
weighted Laplacian (both occurrences flip together).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import cho_factor, cho_solve

from .density import Density
from .errors import DomainError
from .grid import ScalarField, basis_matrix, check_same_grid, deriv
from .operators import (
    WeightedOperatorContext,
    assemble_gram,
    div_mu,
    green_mu_coeffs,
    laplace_mu,
)
from .tangent import BASIS_ORDERING, TangentVector


def _potential_field(phi, ctx: WeightedOperatorContext) -> ScalarField:
    if isinstance(phi, TangentVector):
        return phi.potential(ctx)
    if isinstance(phi, ScalarField):
        return phi
    raise DomainError(f"expected ScalarField or TangentVector, got {type(phi).__name__}")


def lie_bracket(phi1, phi2, ctx: WeightedOperatorContext, route: str = "hessian",
                laplace_sign: float = 1.0) -> TangentVector:
    """Potential coefficients of [V_phi1, V_phi2] at ctx.mu.

    route="hessian" projects the field phi1' phi2'' - phi1'' phi2' onto exact
    forms (default: one Gram solve).  route="laplacian" builds the same field
    from weighted Laplacians and inverts the Laplacian on its weighted
    divergence; laplace_sign flips the sign convention of both Laplacian
    occurrences at once, which must not change the result.
    """
    f1 = _potential_field(phi1, ctx)
    f2 = _potential_field(phi2, ctx)
    check_same_grid(f1, f2)
    check_same_grid(f1, ctx.mu.field())
    if route == "hessian":
        d1, d2 = deriv(f1).values, deriv(f2).values
        h1, h2 = deriv(f1, 2).values, deriv(f2, 2).values
        coeffs, _ = ctx.project_gradient_coeffs(d1 * h2 - h1 * d2)
        return TangentVector(coeffs, ctx.mu)
    if route == "laplacian":
        if laplace_sign not in (1.0, -1.0):
            raise DomainError(f"laplace_sign must be +1 or -1, got {laplace_sign}")
        lap1 = laplace_sign * laplace_mu(f1, ctx).values
        lap2 = laplace_sign * laplace_mu(f2, ctx).values
        field = ScalarField(f1.grid, deriv(f1).values * lap2 - deriv(f2).values * lap1)
        rhs = div_mu(field, ctx)
        coeffs = laplace_sign * green_mu_coeffs(rhs, ctx)
        return TangentVector(coeffs, ctx.mu)
    raise DomainError(f"unknown bracket route {route!r}")


def covariant_derivative(phi1, phi2, ctx: WeightedOperatorContext) -> TangentVector:
    """nabla_{V_phi1} V_phi2 for constant potentials, as a projection."""
    f1 = _potential_field(phi1, ctx)
    f2 = _potential_field(phi2, ctx)
    check_same_grid(f1, f2)
    check_same_grid(f1, ctx.mu.field())
    w = deriv(f1).values * deriv(f2, 2).values
    coeffs, _ = ctx.project_gradient_coeffs(w)
    return TangentVector(coeffs, ctx.mu)


@dataclass(frozen=True)
class ChristoffelTensor:
    """Gamma^k_ij of the basis frame at a base density.

    gamma[k, i, j] multiplies coefficients as (nabla_{V_i} V_j)^k; indices
    follow the cos1, sin1, cos2, ... ordering.  The frame is not a coordinate
    frame, so gamma is generally not symmetric in (i, j); the antisymmetric
    part encodes the bracket structure constants.
    """

    gamma: np.ndarray
    base: Density
    N: int

    def __post_init__(self):
        g = np.asarray(self.gamma, dtype=np.float64)
        d = 2 * self.N
        if g.shape != (d, d, d):
            raise DomainError(f"Christoffel tensor shape {g.shape} does not match N={self.N}")
        g = g.copy()
        g.flags.writeable = False
        object.__setattr__(self, "gamma", g)

    def contract(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Coefficients of Gamma(a, b): out^k = sum_ij a_i b_j gamma[k,i,j]."""
        return np.einsum("kij,i,j->k", self.gamma, a, b)

    def max_ij_asymmetry(self) -> float:
        return float(np.abs(self.gamma - self.gamma.transpose(0, 2, 1)).max())


def christoffel(ctx: WeightedOperatorContext) -> ChristoffelTensor:
    """Assemble Gamma^k_ij from Gram * Gamma^._ij = int phi_i' phi_j'' phi_l' dmu."""
    weights = ctx.mu.rho / ctx.grid.n
    c = np.einsum("ix,jx,lx,x->ijl", ctx.basis1, ctx.basis2, ctx.basis1, weights, optimize=True)
    d = 2 * ctx.N
    # Solve over the last axis for every (i, j) pair.
    gamma = ctx.gram_solve(c.reshape(d * d, d).T).reshape(d, d, d)
    return ChristoffelTensor(gamma, ctx.mu, ctx.N)


def christoffel_residual(tensor: ChristoffelTensor, ctx: WeightedOperatorContext) -> float:
    """Max |Gram * Gamma^._ij - c_ij.| over all (i, j): solver self-consistency."""
    weights = ctx.mu.rho / ctx.grid.n
    c = np.einsum("ix,jx,lx,x->ijl", ctx.basis1, ctx.basis2, ctx.basis1, weights, optimize=True)
    recon = np.einsum("lk,kij->ijl", ctx.gram, tensor.gamma)
    return float(np.abs(recon - c).max())


def christoffel_to_json(tensor: ChristoffelTensor) -> dict:
    return {
        "N": tensor.N,
        "ordering": BASIS_ORDERING,
        "base_sha256": tensor.base.sha256(),
        "gamma": [[[float(v) for v in row] for row in block] for block in tensor.gamma],
    }


def save_christoffel_json(tensor: ChristoffelTensor, path) -> None:
    with open(path, "w") as handle:
        json.dump(christoffel_to_json(tensor), handle, sort_keys=True)
        handle.write("\n")


def load_christoffel_json(path, base: Density) -> ChristoffelTensor:
    with open(path) as handle:
        payload = json.load(handle)
    if payload.get("ordering") != BASIS_ORDERING:
        raise DomainError(f"unsupported basis ordering {payload.get('ordering')!r}")
    if payload.get("base_sha256") != base.sha256():
        raise DomainError("Christoffel tensor was exported at a different base density")
    return ChristoffelTensor(np.asarray(payload["gamma"], dtype=np.float64), base, int(payload["N"]))


def parallel_transport(v0: TangentVector, path, substeps: int = 4) -> list[TangentVector]:
    """Transport v0 along a stored path, returning the vector at every path time.

    Integrates d(eta)/dt = -Gram(mu_t)^{-1} b(t), b_l = int psi_t' eta''
    phi_l' dmu_t (the coefficient form of nabla_{V_psi} V_eta = 0), with RK4
    whose stage data comes from cubic-in-time interpolation of the stored
    densities and potentials.  A geodesic's own velocity solves the same
    equation as its Christoffel ODE, so it is self-parallel.
    """
    times = np.asarray(path.times, dtype=np.float64)
    if times.size < 2:
        raise DomainError("path must have at least two times for transport")
    grid = path.grid
    N = v0.N
    if not np.array_equal(v0.base.rho, path.densities[0].rho):
        raise DomainError("v0 must be based at the path's initial density")
    b1 = basis_matrix(grid, N, order=1)
    b2 = basis_matrix(grid, N, order=2)
    rho_spline = CubicSpline(times, np.stack([d.rho for d in path.densities]), axis=0)
    dpsi_spline = CubicSpline(times, np.stack([deriv(p).values for p in path.potentials]), axis=0)

    def rhs(t, eta):
        rho = rho_spline(t)
        dpsi = dpsi_spline(t)
        gram = assemble_gram(b1, rho)
        b = b1 @ (dpsi * (eta @ b2) * rho) / grid.n
        return -cho_solve(cho_factor(gram), b)

    eta = v0.coeffs.copy()
    out = [TangentVector(eta, path.densities[0])]
    for idx in range(times.size - 1):
        h = (times[idx + 1] - times[idx]) / substeps
        t = times[idx]
        for _ in range(substeps):
            k1 = rhs(t, eta)
            k2 = rhs(t + 0.5 * h, eta + 0.5 * h * k1)
            k3 = rhs(t + 0.5 * h, eta + 0.5 * h * k2)
            k4 = rhs(t + h, eta + h * k3)
            eta = eta + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t += h
        out.append(TangentVector(eta, path.densities[idx + 1]))
    return out

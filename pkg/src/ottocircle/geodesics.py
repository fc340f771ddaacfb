"""Wasserstein geodesics on the circle by three independent routes.

A geodesic from mu0 with initial potential psi0 solves the coupled system

    d(psi)/dt + |psi'|^2 / 2 = 0        (Hamilton-Jacobi)
    d(rho)/dt + (rho * psi')' = 0       (continuity)

as long as the characteristics x0 + t*psi0'(x0) do not cross (equivalently
1 + t*psi0'' > 0).  The three routes:

  * geodesic_hj: psi from the exact characteristic solution (momentum is
    constant along straight characteristics; node values recovered by Newton
    inversion of the characteristic map), rho by RK4 on the continuity
    equation with spectral space derivatives.
  * geodesic_christoffel: basis-coefficient ODE d(Psi_k)/dt = -Gram^{-1}_k
    [int psi' psi'' phi_l' dmu_t], the Galerkin contraction of the
    Christoffel symbols recomputed at every stage, with rho co-evolved by the
    same continuity stepper.
  * displacement_interpolation: pushforward of mu0 by the displacement
    t * psi0' through the exact Jacobian formula.

All stored potentials are de-meaned against their own mu_t.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .density import Density, make_density, pushforward_monotone
from .errors import CausticError, ConfigError
from .grid import TWO_PI, GridSpec, ScalarField, basis_matrix, check_same_grid, deriv, eval_trig
from .operators import WeightedOperatorContext, assemble_gram
from .tangent import TangentVector


@dataclass(frozen=True)
class GeodesicPath:
    """Densities and velocity potentials stored on a shared time grid."""

    grid: GridSpec
    times: np.ndarray
    densities: list[Density]
    potentials: list[ScalarField]
    route: str = field(default="unknown", compare=False)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        if times.ndim != 1 or times.size < 1:
            raise ConfigError("path needs a one-dimensional, nonempty time grid")
        if times.size != len(self.densities) or times.size != len(self.potentials):
            raise ConfigError("times, densities, potentials must have equal length")
        if np.any(np.diff(times) <= 0.0):
            raise ConfigError("path times must be strictly increasing")
        times = times.copy()
        times.flags.writeable = False
        object.__setattr__(self, "times", times)


def first_caustic_time(psi0: ScalarField, refine: int = 4) -> float:
    """Earliest t > 0 with 1 + t*psi0'' = 0 (inf if characteristics never cross).

    The second derivative is scanned on a refine-x finer grid.
    """
    n_fine = refine * psi0.grid.n
    x_fine = TWO_PI * np.arange(n_fine) / n_fine
    curv_min = float(eval_trig(psi0, x_fine, order=2).min())
    if curv_min >= 0.0:
        return float("inf")
    return -1.0 / curv_min


def _check_caustic_free(psi0: ScalarField, t_max: float) -> None:
    t_star = first_caustic_time(psi0)
    if t_star <= t_max:
        raise CausticError(
            f"characteristics cross at t = {t_star:.6f} <= requested {t_max:.6f}",
            first_crossing=t_star,
        )


def _demeaned(values: np.ndarray, rho: np.ndarray, grid: GridSpec) -> ScalarField:
    return ScalarField(grid, values - np.mean(values * rho))


def _continuity_rhs(rho: np.ndarray, dpsi: np.ndarray, grid: GridSpec) -> np.ndarray:
    return -deriv(ScalarField(grid, rho * dpsi), 1).values


def _characteristic_feet(psi0: ScalarField, t: float, targets: np.ndarray,
                         guess: np.ndarray | None = None) -> np.ndarray:
    """Solve x0 + t*psi0'(x0) = target for each target by vectorized Newton."""
    x = targets.copy() if guess is None else guess.copy()
    for _ in range(60):
        f = x + t * eval_trig(psi0, x, order=1) - targets
        fp = 1.0 + t * eval_trig(psi0, x, order=2)
        step = f / fp
        x = x - step
        if np.abs(step).max() < 1e-14:
            break
    return x


def geodesic_hj(mu0: Density, psi0: ScalarField, times, steps_per_interval: int = 4) -> GeodesicPath:
    """Characteristic Hamilton-Jacobi potential with RK4 continuity density."""
    check_same_grid(psi0, mu0.field())
    times = np.asarray(times, dtype=np.float64)
    if times[0] != 0.0:
        raise ConfigError("geodesic time grids start at t = 0")
    _check_caustic_free(psi0, float(times[-1]))
    grid = mu0.grid
    nodes = grid.nodes

    feet_cache: dict[float, np.ndarray] = {}

    def dpsi_at(t: float, guess=None) -> np.ndarray:
        if t == 0.0:
            return eval_trig(psi0, nodes, order=1)
        if t not in feet_cache:
            feet_cache[t] = _characteristic_feet(psi0, t, nodes, guess)
        return eval_trig(psi0, feet_cache[t], order=1)

    rho = mu0.rho.copy()
    densities = [mu0]
    potentials = [_demeaned(psi0.values, mu0.rho, grid)]
    for idx in range(times.size - 1):
        h = (times[idx + 1] - times[idx]) / steps_per_interval
        t = times[idx]
        for _ in range(steps_per_interval):
            k1 = _continuity_rhs(rho, dpsi_at(t), grid)
            half = dpsi_at(t + 0.5 * h)
            k2 = _continuity_rhs(rho + 0.5 * h * k1, half, grid)
            k3 = _continuity_rhs(rho + 0.5 * h * k2, half, grid)
            k4 = _continuity_rhs(rho + h * k3, dpsi_at(t + h), grid)
            rho = rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            t += h
        t_out = times[idx + 1]
        mu_t = make_density(ScalarField(grid, rho))
        rho = mu_t.rho.copy()
        feet = feet_cache[t_out] if t_out in feet_cache else _characteristic_feet(psi0, t_out, nodes)
        p0 = eval_trig(psi0, feet)
        dp0 = eval_trig(psi0, feet, order=1)
        psi_t = p0 + 0.5 * t_out * dp0**2
        densities.append(mu_t)
        potentials.append(_demeaned(psi_t, mu_t.rho, grid))
    return GeodesicPath(grid, times, densities, potentials, route="hj")


def geodesic_christoffel(mu0: Density, psi0_coeffs, times, ctx: WeightedOperatorContext | None = None,
                         N: int | None = None, steps_per_interval: int = 4) -> GeodesicPath:
    """Basis-coefficient geodesic ODE with the density co-evolved spectrally.

    psi0_coeffs may be a coefficient array or a TangentVector at mu0.  The
    per-stage right-hand side Gram^{-1} [int psi' psi'' phi_l' dmu] is the
    contraction Gamma^k_ij Psi_i Psi_j with the Christoffel symbols of the
    current density, evaluated without materializing the full tensor.
    """
    if isinstance(psi0_coeffs, TangentVector):
        psi0_coeffs = psi0_coeffs.coeffs
    coeffs = np.asarray(psi0_coeffs, dtype=np.float64)
    if N is None:
        N = coeffs.size // 2 if ctx is None else ctx.N
    if coeffs.size != 2 * N:
        raise ConfigError(f"expected {2 * N} coefficients, got {coeffs.size}")
    times = np.asarray(times, dtype=np.float64)
    if times[0] != 0.0:
        raise ConfigError("geodesic time grids start at t = 0")
    grid = mu0.grid
    b0 = basis_matrix(grid, N, order=0)
    b1 = basis_matrix(grid, N, order=1)
    b2 = basis_matrix(grid, N, order=2)

    def rhs(state):
        psi_c = state[: 2 * N]
        rho = state[2 * N :]
        dpsi = psi_c @ b1
        ddpsi = psi_c @ b2
        gram = assemble_gram(b1, rho)
        moment = b1 @ (dpsi * ddpsi * rho) / grid.n
        dcoeffs = -cho_solve(cho_factor(gram), moment)
        drho = _continuity_rhs(rho, dpsi, grid)
        return np.concatenate([dcoeffs, drho])

    state = np.concatenate([coeffs, mu0.rho])
    densities = [mu0]
    potentials = [_demeaned(coeffs @ b0, mu0.rho, grid)]
    coeff_series = [coeffs.copy()]
    for idx in range(times.size - 1):
        h = (times[idx + 1] - times[idx]) / steps_per_interval
        for _ in range(steps_per_interval):
            k1 = rhs(state)
            k2 = rhs(state + 0.5 * h * k1)
            k3 = rhs(state + 0.5 * h * k2)
            k4 = rhs(state + h * k3)
            state = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        psi_c = state[: 2 * N].copy()
        mu_t = make_density(ScalarField(grid, state[2 * N :]))
        state[2 * N :] = mu_t.rho
        densities.append(mu_t)
        potentials.append(_demeaned(psi_c @ b0, mu_t.rho, grid))
        coeff_series.append(psi_c)
    path = GeodesicPath(grid, times, densities, potentials, route="christoffel")
    object.__setattr__(path, "coefficient_series", np.stack(coeff_series))
    return path


def displacement_interpolation(mu0: Density, psi0: ScalarField, t: float) -> Density:
    """Pushforward of mu0 by x -> x + t*psi0'(x) (exact Jacobian + resample)."""
    check_same_grid(psi0, mu0.field())
    _check_caustic_free(psi0, max(t, 0.0))
    displacement = ScalarField(mu0.grid, t * deriv(psi0).values)
    return pushforward_monotone(mu0, displacement)


def displacement_path(mu0: Density, psi0: ScalarField, times) -> GeodesicPath:
    """Displacement interpolation sampled on a time grid, with characteristic
    potentials attached so the path supports action and transport."""
    times = np.asarray(times, dtype=np.float64)
    if times[0] != 0.0:
        raise ConfigError("geodesic time grids start at t = 0")
    _check_caustic_free(psi0, float(times[-1]))
    grid = mu0.grid
    densities = [mu0]
    potentials = [_demeaned(psi0.values, mu0.rho, grid)]
    for t in times[1:]:
        mu_t = displacement_interpolation(mu0, psi0, float(t))
        feet = _characteristic_feet(psi0, float(t), grid.nodes)
        psi_t = eval_trig(psi0, feet) + 0.5 * float(t) * eval_trig(psi0, feet, order=1) ** 2
        densities.append(mu_t)
        potentials.append(_demeaned(psi_t, mu_t.rho, grid))
    return GeodesicPath(grid, times, densities, potentials, route="displacement")


def flow_path(mu0: Density, psi: ScalarField, times, steps: int | None = None) -> GeodesicPath:
    """Curve pushed along the fixed field grad(psi); velocity potential is psi
    at every time (it is not a geodesic)."""
    from .tangent import flow_constant_field

    times = np.asarray(times, dtype=np.float64)
    grid = mu0.grid
    densities = []
    potentials = []
    for t in times:
        mu_t = mu0 if t == 0.0 else flow_constant_field(psi, mu0, float(t), steps)
        densities.append(mu_t)
        potentials.append(_demeaned(psi.values, mu_t.rho, grid))
    return GeodesicPath(grid, times, densities, potentials, route="flow")


def action(path: GeodesicPath) -> float:
    """Time-quadrature (trapezoid) of int |psi_t'|^2 dmu_t along the path."""
    speeds = speed_squared_series(path)
    return float(np.trapezoid(speeds, path.times))


def speed_squared_series(path: GeodesicPath) -> np.ndarray:
    """int |psi_t'|^2 dmu_t at each stored time (the action integrand)."""
    out = np.empty(path.times.size)
    for idx in range(path.times.size):
        dpsi = deriv(path.potentials[idx]).values
        out[idx] = np.mean(dpsi * dpsi * path.densities[idx].rho)
    return out


def continuity_residual(path: GeodesicPath) -> np.ndarray:
    """L^2(vol) residual of d(rho)/dt + (rho psi')' at interior path times.

    The time derivative uses the 5-point fourth-order central stencil, so the
    result measures the stored path's internal consistency rather than the
    stencil's own truncation error.  Needs at least 5 uniformly spaced times.
    """
    t = path.times
    if t.size < 5:
        raise ConfigError("continuity residual needs at least 5 path times")
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-12, atol=1e-14):
        raise ConfigError("continuity residual needs a uniform time grid")
    h = float(dt[0])
    rho = np.stack([d.rho for d in path.densities])
    out = np.full(t.size, np.nan)
    for idx in range(2, t.size - 2):
        drho_dt = (rho[idx - 2] - 8 * rho[idx - 1] + 8 * rho[idx + 1] - rho[idx + 2]) / (12 * h)
        flux = _continuity_rhs(rho[idx], deriv(path.potentials[idx]).values, path.grid)
        out[idx] = np.sqrt(np.mean((drho_dt - flux) ** 2))
    return out


def constant_speed_report(path: GeodesicPath, w2, max_times: int = 17) -> dict:
    """Ratios W2(mu_s, mu_t) / |t - s| over the path's time-grid pairs.

    w2 is the distance oracle (mu, nu) -> W2.  When the path stores more than
    max_times times, a uniform subsample is used to keep the pair count
    manageable.  Deviation is reported relative to the endpoint distance.
    """
    m = path.times.size
    if m > max_times:
        stride = int(np.ceil((m - 1) / (max_times - 1)))
        idxs = list(range(0, m, stride))
        if idxs[-1] != m - 1:
            idxs.append(m - 1)
    else:
        idxs = list(range(m))
    w2_end = w2(path.densities[0], path.densities[-1])
    total = path.times[-1] - path.times[0]
    pairs = []
    for a in range(len(idxs)):
        for b in range(a + 1, len(idxs)):
            i, j = idxs[a], idxs[b]
            gap = path.times[j] - path.times[i]
            ratio = w2(path.densities[i], path.densities[j]) / gap
            pairs.append({"s": float(path.times[i]), "t": float(path.times[j]), "ratio": float(ratio)})
    ratios = np.array([p["ratio"] for p in pairs])
    reference = w2_end / total
    deviation = float(np.abs(ratios / reference - 1.0).max())
    return {
        "w2_endpoints": float(w2_end),
        "reference_speed": float(reference),
        "pairs": pairs,
        "max_relative_deviation": deviation,
    }


# -- serialization ----------------------------------------------------------


def path_to_csv(path: GeodesicPath, file_path) -> None:
    with open(file_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["time", "node", "density", "potential"])
        for idx, t in enumerate(path.times):
            rho = path.densities[idx].rho
            psi = path.potentials[idx].values
            for x, r, p in zip(path.grid.nodes, rho, psi):
                writer.writerow([repr(float(t)), repr(float(x)), repr(float(r)), repr(float(p))])


def path_manifest(path: GeodesicPath, csv_name: str) -> dict:
    return {
        "route": path.route,
        "n": path.grid.n,
        "times": [float(t) for t in path.times],
        "csv": csv_name,
        "mass_drift_max": float(max(d.mass_drift for d in path.densities)),
    }


def save_path(path: GeodesicPath, directory, stem: str) -> dict:
    import os

    csv_name = f"{stem}.csv"
    path_to_csv(path, os.path.join(directory, csv_name))
    manifest = path_manifest(path, csv_name)
    with open(os.path.join(directory, f"{stem}.json"), "w") as handle:
        json.dump(manifest, handle, sort_keys=True, indent=2)
        handle.write("\n")
    return manifest

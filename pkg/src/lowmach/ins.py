"""Incompressible Navier-Stokes reference solver on the same torus.

The low-Mach limit target system

    du/dt + (u . grad) u + grad Pi = (mu/2) lap u,    div u = 0,

is integrated with the same RK4 machinery as the two-fluid solver so the
time-discretisation error cancels to leading order in comparisons.  The
pressure Pi is never time-stepped: incompressibility is enforced exactly
in spectral space by the Leray projector, and Pi is recovered on demand
as -inv_lap(div(u . grad u)) for diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import ScalarField, SpectralGrid, VectorField


@dataclass(frozen=True)
class InsState:
    """Divergence-free velocity plus the mean-zero diagnostic pressure."""

    t: float
    u: VectorField
    Pi: ScalarField

    def __post_init__(self):
        if self.u.grid != self.Pi.grid:
            raise ValueError("state fields must share one grid")

    @property
    def grid(self) -> SpectralGrid:
        return self.u.grid


def leray_project_arrays(grid: SpectralGrid, v: np.ndarray) -> np.ndarray:
    """v - grad inv_lap div v, mode by mode; the k = 0 mode passes through."""
    vh = grid.fft(v)
    div_h = sum(1j * grid.wavenumbers[c] * vh[c] for c in range(grid.dim))
    phi_h = -grid.inv_k2 * div_h
    out = np.empty_like(v)
    for c in range(grid.dim):
        out[c] = grid.ifft(vh[c] - 1j * grid.wavenumbers[c] * phi_h)
    return out


def leray_project(v: VectorField) -> VectorField:
    return VectorField(v.grid, leray_project_arrays(v.grid, v.data))


def _advection(grid, u):
    uh = grid.fft(u)
    adv = np.empty_like(u)
    for c in range(grid.dim):
        grad_c = [grid.ifft(1j * grid.wavenumbers[ax] * uh[c])
                  for ax in range(grid.dim)]
        adv[c] = grid.dealias(sum(u[ax] * grad_c[ax] for ax in range(grid.dim)))
    return adv


def rhs_ins(state: InsState, mu: float) -> np.ndarray:
    """P(-(u . grad) u) + (mu/2) lap u; the nonlinearity is dealiased."""
    grid = state.grid
    u = state.u.data
    adv = _advection(grid, u)
    visc = np.stack([grid.lap(u[c]) for c in range(grid.dim)])
    return leray_project_arrays(grid, -adv) + 0.5 * mu * visc


def pressure_from_velocity(grid: SpectralGrid, u: np.ndarray) -> np.ndarray:
    """Diagnostic Pi = -inv_lap(div(u . grad u)); mean zero by construction."""
    adv = _advection(grid, u)
    return -grid.inv_lap(grid.div(adv))


def make_state(grid: SpectralGrid, t: float, u: np.ndarray,
               with_pressure: bool = True) -> InsState:
    Pi = pressure_from_velocity(grid, u) if with_pressure else np.zeros(grid.shape)
    return InsState(t, VectorField(grid, u), ScalarField(grid, Pi))


def step_rk4(state: InsState, mu: float, dt: float,
             with_pressure: bool = False) -> InsState:
    """Classical RK4 step; each stage tendency is divergence-free, and the
    final combination is re-projected to pin round-off drift."""
    grid = state.grid
    u = state.u.data
    t = state.t

    k1 = rhs_ins(state, mu)
    k2 = rhs_ins(make_state(grid, t + 0.5 * dt, u + 0.5 * dt * k1, False), mu)
    k3 = rhs_ins(make_state(grid, t + 0.5 * dt, u + 0.5 * dt * k2, False), mu)
    k4 = rhs_ins(make_state(grid, t + dt, u + dt * k3, False), mu)
    unew = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    unew = leray_project_arrays(grid, unew)
    return make_state(grid, t + dt, unew, with_pressure)


def stable_dt(state: InsState, mu: float, cfl: float) -> float:
    """Advective CFL bound capped by the explicit viscous limit for nu = mu/2."""
    grid = state.grid
    umax = float(np.sqrt(np.max(np.sum(state.u.data**2, axis=0))))
    dt_adv = cfl * grid.dx / max(umax, 1e-12)
    dt_visc = cfl * grid.dx**2 / (2.0 * grid.dim * 0.5 * mu)
    return min(dt_adv, dt_visc)


def kinetic_energy(state: InsState) -> float:
    return 0.5 * state.grid.l2_norm_sq(state.u.data)


def enstrophy(state: InsState) -> float:
    """Half the squared L2 norm of the vorticity (zero in 1-D)."""
    grid = state.grid
    u = state.u.data
    if grid.dim == 1:
        return 0.0
    if grid.dim == 2:
        w = grid.deriv(u[1], 0) - grid.deriv(u[0], 1)
        return 0.5 * grid.l2_norm_sq(w)
    wx = grid.deriv(u[2], 1) - grid.deriv(u[1], 2)
    wy = grid.deriv(u[0], 2) - grid.deriv(u[2], 0)
    wz = grid.deriv(u[1], 0) - grid.deriv(u[0], 1)
    return 0.5 * grid.l2_norm_sq(np.stack([wx, wy, wz]))

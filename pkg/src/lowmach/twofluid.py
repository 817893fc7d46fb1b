"""Time integration of the Mach-scaled compressible two-fluid system.

Unknowns (R, Q, u) on a periodic grid evolve by

    dR/dt = -div(R u)
    dQ/dt = -div(Q u)
    du/dt = -(u . grad) u - grad p / (eps^2 (R+Q))
            + (mu lap u + (mu+lambda) grad div u) / (R+Q)

with p supplied by the implicit closure; the pressure gradient is
assembled as dpdR grad R + dpdQ grad Q from the closure jet.  Every
product and every closure-derived coefficient field is dealiased (2/3
rule), so states that start band-limited stay band-limited.  Continuity
is advanced in conservative form, which conserves the discrete masses to
round-off.

Time stepping is classical explicit RK4 under an acoustic CFL constraint
(the 1/eps^2 pressure term makes the fast signal speed c/eps).  A run is
sequential in time; distinct runs share no mutable state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import closure
from .closure import Gammas
from .errors import NonDivergenceFree, NonPositiveDensity
from .field import ScalarField, SpectralGrid, VectorField

DENSITY_FLOOR = 1e-8


@dataclass(frozen=True)
class PhysParams:
    """Physical parameters of one run.

    forcing, when set, is a callable (t, grid) -> (fR, fQ, fu) of source
    arrays added to the tendencies; used by manufactured-solution tests.
    """

    gammas: Gammas
    mu: float
    lam: float
    epsilon: float
    forcing: Optional[Callable] = None
    closure_tol: float = closure.DEFAULT_TOL

    def __post_init__(self):
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if 2.0 * self.mu + 3.0 * self.lam < 0:
            raise ValueError("need 2 mu + 3 lambda >= 0")
        if not 0 < self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in (0, 1]")


@dataclass(frozen=True)
class FieldState:
    """Flow state at one instant; all fields share one grid."""

    t: float
    R: ScalarField
    Q: ScalarField
    u: VectorField

    def __post_init__(self):
        if not (self.R.grid == self.Q.grid == self.u.grid):
            raise ValueError("state fields must share one grid")

    @property
    def grid(self) -> SpectralGrid:
        return self.R.grid


@dataclass(frozen=True)
class Tendency:
    R: np.ndarray
    Q: np.ndarray
    u: np.ndarray


def state_from_arrays(t, grid, R, Q, u) -> FieldState:
    return FieldState(t, ScalarField(grid, R), ScalarField(grid, Q),
                      VectorField(grid, u))


def _check_positive(R, Q, t):
    if min(R.min(), Q.min()) <= DENSITY_FLOOR:
        raise NonPositiveDensity(
            f"density left the admissible set (min <= {DENSITY_FLOOR:g}) "
            f"at t = {t:.6g}", t=t)


def momentum_rhs(grid, u, adv_vel, coeff_R, coeff_Q, inv_rho,
                 grad_R, grad_Q, mu, lam, epsilon):
    """Shared momentum assembly for the nonlinear and the linearized system.

    coeff_R/coeff_Q multiply grad R / grad Q (already dealiased pressure
    coefficients), inv_rho is the dealiased 1/(R+Q) coefficient, adv_vel
    the advecting velocity.
    """
    P = grid.dealias
    uh = grid.fft(u)
    grad_u = np.stack([
        np.stack([grid.ifft(1j * grid.wavenumbers[ax] * uh[c])
                  for ax in range(grid.dim)])
        for c in range(grid.dim)
    ])  # grad_u[c, ax] = d u_c / d x_ax
    div_u = sum(grad_u[c][c] for c in range(grid.dim))
    lap_u = grid.ifft(-grid.k2 * uh)
    grad_div = grid.grad(div_u)

    du = np.empty_like(u)
    for c in range(grid.dim):
        adv = P(sum(adv_vel[ax] * grad_u[c][ax] for ax in range(grid.dim)))
        pg = P(coeff_R * grad_R[c] + coeff_Q * grad_Q[c])
        visc = P(inv_rho * (mu * lap_u[c] + (mu + lam) * grad_div[c]))
        du[c] = -adv - P(inv_rho * pg) / epsilon**2 + visc
    return du


def _div_dealiased_flux(grid, scalar, u):
    """div(dealias(scalar * u)) in one spectral pass per component."""
    acc = 0.0
    for c in range(grid.dim):
        acc = acc + 1j * grid.wavenumbers[c] * (
            grid.dealias_mask * grid.fft(scalar * u[c]))
    return grid.ifft(acc)


def rhs(state: FieldState, params: PhysParams) -> Tendency:
    """Tendency of the two-fluid system at the given state."""
    grid = state.grid
    R, Q, u = state.R.data, state.Q.data, state.u.data
    _check_positive(R, Q, state.t)
    P = grid.dealias

    dR = -_div_dealiased_flux(grid, R, u)
    dQ = -_div_dealiased_flux(grid, Q, u)

    _, dpdR, dpdQ = closure.pressure_first_derivatives(
        R, Q, params.gammas, params.closure_tol)
    coeff_R = P(dpdR)
    coeff_Q = P(dpdQ)
    inv_rho = P(1.0 / (R + Q))
    du = momentum_rhs(grid, u, u, coeff_R, coeff_Q, inv_rho,
                      grid.grad(R), grid.grad(Q),
                      params.mu, params.lam, params.epsilon)

    if params.forcing is not None:
        fR, fQ, fu = params.forcing(state.t, grid)
        dR = dR + fR
        dQ = dQ + fQ
        du = du + fu
    return Tendency(dR, dQ, du)


def sound_speed_max(state: FieldState, params: PhysParams) -> float:
    """Grid maximum of c = sqrt((dpdR + dpdQ) / (R + Q))."""
    R, Q = state.R.data, state.Q.data
    _, dpdR, dpdQ = closure.pressure_first_derivatives(
        R, Q, params.gammas, params.closure_tol)
    return float(np.sqrt(np.max((dpdR + dpdQ) / (R + Q))))


def stable_dt(state: FieldState, params: PhysParams, cfl: float) -> float:
    """Acoustic CFL step c/eps fast-signal bound, capped by the viscous limit."""
    if not 0 < cfl <= 1.0:
        raise ValueError("cfl must lie in (0, 1]")
    grid = state.grid
    umax = float(np.sqrt(np.max(np.sum(state.u.data**2, axis=0))))
    cmax = sound_speed_max(state, params)
    dt = cfl * grid.dx / (umax + cmax / params.epsilon)
    rho_min = float(np.min(state.R.data + state.Q.data))
    visc = max(params.mu, params.mu + params.lam)
    dt_visc = cfl * grid.dx**2 / (2.0 * grid.dim * visc / rho_min)
    return min(dt, dt_visc)


def step_rk4(state: FieldState, params: PhysParams, dt: float) -> FieldState:
    """One classical RK4 step; raises NonPositiveDensity if any stage
    leaves the admissible set."""
    grid = state.grid
    R, Q, u = state.R.data, state.Q.data, state.u.data
    t = state.t

    k1 = rhs(state, params)
    s2 = state_from_arrays(t + 0.5 * dt, grid,
                           R + 0.5 * dt * k1.R, Q + 0.5 * dt * k1.Q,
                           u + 0.5 * dt * k1.u)
    k2 = rhs(s2, params)
    s3 = state_from_arrays(t + 0.5 * dt, grid,
                           R + 0.5 * dt * k2.R, Q + 0.5 * dt * k2.Q,
                           u + 0.5 * dt * k2.u)
    k3 = rhs(s3, params)
    s4 = state_from_arrays(t + dt, grid,
                           R + dt * k3.R, Q + dt * k3.Q, u + dt * k3.u)
    k4 = rhs(s4, params)

    c = dt / 6.0
    new = state_from_arrays(
        t + dt, grid,
        R + c * (k1.R + 2.0 * k2.R + 2.0 * k3.R + k4.R),
        Q + c * (k1.Q + 2.0 * k2.Q + 2.0 * k3.Q + k4.Q),
        u + c * (k1.u + 2.0 * k2.u + 2.0 * k3.u + k4.u))
    _check_positive(new.R.data, new.Q.data, new.t)
    return new


def band_limited_profile(grid: SpectralGrid, rng, kmax: int, shape=None):
    """Zero-mean random field with modes confined to |k_i| <= kmax."""
    raw = rng.standard_normal(shape if shape is not None else grid.shape)
    keep = np.ones(grid.shape, dtype=bool)
    for f in grid.freq:
        keep &= np.abs(f) <= kmax
    out = grid.ifft(keep * grid.fft(raw))
    return out - out.mean(axis=tuple(range(-grid.dim, 0)), keepdims=True)


def well_prepared_init(u0: VectorField, delta0: float, epsilon: float,
                       seed: int, s: int = 2) -> FieldState:
    """Well-prepared data about the constant state (1, 1, u0).

    R = 1 + eps^2 delta0 rhat, Q = 1 + eps^2 delta0 qhat,
    u = u0 + eps delta0 what, with rhat/qhat unit H^s profiles and what a
    unit H^(s+1) profile, all band-limited and fixed by the seed, so

        |R - 1|_{H^s} <= eps^2 delta0,   |Q - 1|_{H^s} <= eps^2 delta0,
        |u - u0|_{H^(s+1)} <= eps delta0

    hold by construction.  u0 must be divergence-free.
    """
    grid = u0.grid
    div0 = grid.div(u0.data)
    if np.max(np.abs(div0)) > 1e-12 * (1.0 + np.max(np.abs(u0.data))):
        raise NonDivergenceFree("u0 must be divergence-free to 1e-12")
    rng = np.random.default_rng(seed)
    kmax = max(1, min(3, grid.n // 3 - 1))

    rhat = band_limited_profile(grid, rng, kmax)
    rhat /= np.sqrt(grid.hs_norm_sq(rhat, s))
    qhat = band_limited_profile(grid, rng, kmax)
    qhat /= np.sqrt(grid.hs_norm_sq(qhat, s))
    what = band_limited_profile(grid, rng, kmax, shape=(grid.dim,) + grid.shape)
    what /= np.sqrt(grid.hs_norm_sq(what, s + 1))

    R = 1.0 + epsilon**2 * delta0 * rhat
    Q = 1.0 + epsilon**2 * delta0 * qhat
    u = u0.data + epsilon * delta0 * what
    return state_from_arrays(0.0, grid, R, Q, u)


def masses(state: FieldState):
    grid = state.grid
    return grid.integrate(state.R.data), grid.integrate(state.Q.data)

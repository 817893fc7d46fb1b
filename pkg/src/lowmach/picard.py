"""Constructive fixed-point scheme for the two-fluid system.

Starting from the constant-in-time lift of the initial data, each sweep
solves the linear problem with coefficients frozen at the previous
iterate:

    dR/dt + v . grad R + r div u = 0
    dQ/dt + v . grad Q + q div u = 0
    du/dt + v . grad u + a_R(r,q)/eps^2 grad R + a_Q(r,q)/eps^2 grad Q
          = mu/(r+q) lap u + (mu+lambda)/(r+q) grad div u,

with a_R = gp Z^(gp-1) dZdR / (r+q) evaluated at the frozen fields (and
a_Q alike).  The system is linear in (R, Q, u) for fixed frozen data;
superposition holds to round-off.

Frozen coefficients at Runge-Kutta stage times come from cubic Lagrange
interpolation of the stored step-grid trajectory (stage values are not
stored).  Contraction is *measured*, not proven: each sweep records the
squared-metric distance to its predecessor,

    d_k = sup over snapshot times of
          [eps^-2 |dR|_{L2}^2 + eps^-2 |dQ|_{L2}^2 + |du|_{L2}^2],

together with the time integral of |du|_{H^1}^2 (kept as a separate
piece), the ratio d_k / d_{k-1}, and the observed suprema of the energy
functionals that play the role of the a-priori constants.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import closure
from .errors import NonPositiveDensity
from .field import SpectralGrid
from .twofluid import (
    FieldState,
    PhysParams,
    momentum_rhs,
    state_from_arrays,
    step_rk4,
)


@dataclass
class Trajectory:
    """Fields stored at every integrator time-step."""

    grid: SpectralGrid
    times: np.ndarray          # (nt,)
    R: np.ndarray              # (nt, *shape)
    Q: np.ndarray
    u: np.ndarray              # (nt, dim, *shape)

    @classmethod
    def allocate(cls, grid, times):
        nt = len(times)
        return cls(grid, np.asarray(times, dtype=float),
                   np.empty((nt,) + grid.shape),
                   np.empty((nt,) + grid.shape),
                   np.empty((nt, grid.dim) + grid.shape))

    def store(self, i, state: FieldState):
        self.R[i] = state.R.data
        self.Q[i] = state.Q.data
        self.u[i] = state.u.data

    def state(self, i) -> FieldState:
        return state_from_arrays(float(self.times[i]), self.grid,
                                 self.R[i].copy(), self.Q[i].copy(),
                                 self.u[i].copy())


def constant_lift(init: FieldState, times) -> Trajectory:
    """Iterate zero: the initial data held fixed over the whole window."""
    traj = Trajectory.allocate(init.grid, times)
    for i in range(len(traj.times)):
        traj.store(i, init)
    return traj


class FrozenCoefficients:
    """Cubic-in-time view of a stored trajectory.

    Evaluation at a node returns the stored fields; in between, 4-point
    Lagrange interpolation on the uniform step grid (clamped stencils at
    the ends).  Frozen densities must stay positive at every stored time.
    """

    def __init__(self, traj: Trajectory):
        if min(traj.R.min(), traj.Q.min()) <= 0.0:
            raise NonPositiveDensity("frozen coefficient densities must be "
                                     "positive at every stored time")
        self.traj = traj
        t = traj.times
        self._dt = float(t[1] - t[0]) if len(t) > 1 else 1.0

    def at(self, t: float):
        traj = self.traj
        times = traj.times
        nt = len(times)
        # nodal hit (includes the endpoints of every RK step)
        i = int(round((t - times[0]) / self._dt))
        if 0 <= i < nt and abs(times[i] - t) <= 1e-12 * max(1.0, abs(t)):
            return traj.R[i], traj.Q[i], traj.u[i]
        j = int(np.floor((t - times[0]) / self._dt))
        lo = min(max(j - 1, 0), nt - 4)
        idx = range(lo, lo + 4)
        w = []
        for a in idx:
            num = 1.0
            for b in idx:
                if b != a:
                    num *= (t - times[b]) / (times[a] - times[b])
            w.append(num)
        R = sum(wi * traj.R[a] for wi, a in zip(w, idx))
        Q = sum(wi * traj.Q[a] for wi, a in zip(w, idx))
        u = sum(wi * traj.u[a] for wi, a in zip(w, idx))
        return R, Q, u


def _linear_rhs(grid, R, Q, u, frozen_fields, params: PhysParams):
    r, q, v = frozen_fields
    P = grid.dealias
    grad_R = grid.grad(R)
    grad_Q = grid.grad(Q)
    div_u = grid.div(u)

    dR = -P(sum(v[ax] * grad_R[ax] for ax in range(grid.dim))) - P(r * div_u)
    dQ = -P(sum(v[ax] * grad_Q[ax] for ax in range(grid.dim))) - P(q * div_u)

    _, dpdR, dpdQ = closure.pressure_first_derivatives(
        r, q, params.gammas, params.closure_tol)
    coeff_R = P(dpdR)
    coeff_Q = P(dpdQ)
    inv_rho = P(1.0 / (r + q))
    du = momentum_rhs(grid, u, v, coeff_R, coeff_Q, inv_rho,
                      grad_R, grad_Q, params.mu, params.lam, params.epsilon)
    return dR, dQ, du


def linear_solve(frozen: FrozenCoefficients, init: FieldState,
                 params: PhysParams) -> Trajectory:
    """RK4 integration of the frozen-coefficient linear system over the
    frozen trajectory's time grid."""
    times = frozen.traj.times
    grid = init.grid
    out = Trajectory.allocate(grid, times)
    out.store(0, init)
    R, Q, u = init.R.data, init.Q.data, init.u.data

    for n in range(len(times) - 1):
        t0, t1 = float(times[n]), float(times[n + 1])
        dt = t1 - t0
        mid = frozen.at(0.5 * (t0 + t1))
        k1 = _linear_rhs(grid, R, Q, u, frozen.at(t0), params)
        k2 = _linear_rhs(grid, R + 0.5 * dt * k1[0], Q + 0.5 * dt * k1[1],
                         u + 0.5 * dt * k1[2], mid, params)
        k3 = _linear_rhs(grid, R + 0.5 * dt * k2[0], Q + 0.5 * dt * k2[1],
                         u + 0.5 * dt * k2[2], mid, params)
        k4 = _linear_rhs(grid, R + dt * k3[0], Q + dt * k3[1],
                         u + dt * k3[2], frozen.at(t1), params)
        c = dt / 6.0
        R = R + c * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        Q = Q + c * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        u = u + c * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        out.R[n + 1], out.Q[n + 1], out.u[n + 1] = R, Q, u
    return out


@dataclass(frozen=True)
class ContractionRecord:
    """Measured distance between consecutive iterates.

    d_sup is the squared-metric supremum over snapshot times; du_h1_int,
    the time integral of |du|_{H^1}^2, is kept alongside rather than
    inside the sup.  E_s_sup and Es1_dt_sup are the observed suprema of
    the order-s energy of the iterate and of the order-(s-1) energy of
    its time derivative.
    """

    k: int
    d_sup: float
    du_h1_int: float
    ratio: float              # d_k / d_{k-1}; nan for the first record
    E_s_sup: float
    Es1_dt_sup: float


def metric_distance(a: Trajectory, b: Trajectory, epsilon: float,
                    snap_idx) -> tuple:
    """(sup part, H^1-integral part) of the contraction metric between two
    trajectories sharing one time grid."""
    grid = a.grid
    sup = 0.0
    h1_vals = []
    snap_times = []
    for i in snap_idx:
        dR = a.R[i] - b.R[i]
        dQ = a.Q[i] - b.Q[i]
        du = a.u[i] - b.u[i]
        val = (grid.l2_norm_sq(dR) / epsilon**2
               + grid.l2_norm_sq(dQ) / epsilon**2
               + grid.l2_norm_sq(du))
        sup = max(sup, val)
        h1_vals.append(grid.hs_norm_sq(du, 1))
        snap_times.append(a.times[i])
    if len(h1_vals) > 1:
        dt = np.diff(np.asarray(snap_times))
        vals = np.asarray(h1_vals)
        h1_int = float(np.sum(0.5 * dt * (vals[1:] + vals[:-1])))
    else:
        h1_int = 0.0
    return sup, h1_int


def homogeneous_E(grid, dR, dQ, du, s, epsilon) -> float:
    """E_s applied to increments (no constant-state shift)."""
    return 0.5 * (grid.hs_norm_sq(dR, s) / epsilon**2
                  + grid.hs_norm_sq(dQ, s) / epsilon**2
                  + grid.hs_norm_sq(du, s))


def energy_suprema(traj: Trajectory, s: int, epsilon: float, snap_idx):
    """Observed sup of E_s along the iterate and of E_{s-1} of its time
    derivative (centred differences on the step grid)."""
    grid = traj.grid
    e_sup = 0.0
    for i in snap_idx:
        e_sup = max(e_sup, homogeneous_E(grid, traj.R[i] - 1.0,
                                         traj.Q[i] - 1.0, traj.u[i],
                                         s, epsilon))
    nt = len(traj.times)
    edt_sup = 0.0
    for i in range(nt):
        lo = max(i - 1, 0)
        hi = min(i + 1, nt - 1)
        span = traj.times[hi] - traj.times[lo]
        if span == 0:
            continue
        dR = (traj.R[hi] - traj.R[lo]) / span
        dQ = (traj.Q[hi] - traj.Q[lo]) / span
        du = (traj.u[hi] - traj.u[lo]) / span
        edt_sup = max(edt_sup,
                      homogeneous_E(grid, dR, dQ, du, max(s - 1, 0), epsilon))
    return e_sup, edt_sup


def iterate(init: FieldState, params: PhysParams, times, K: int,
            snap_idx=None, s: int = 2, keep_trajectories: bool = True):
    """Run K sweeps of the frozen-coefficient iteration.

    Returns (trajectories, records); trajectories holds [iterate 0 ..
    iterate K] when keep_trajectories, else just the final iterate.
    """
    if K < 1:
        raise ValueError("need at least one sweep")
    times = np.asarray(times, dtype=float)
    if snap_idx is None:
        snap_idx = range(len(times))
    prev = constant_lift(init, times)
    kept = [prev]
    records = []
    d_prev: Optional[float] = None
    for k in range(1, K + 1):
        cur = linear_solve(FrozenCoefficients(prev), init, params)
        d_sup, h1_int = metric_distance(cur, prev, params.epsilon, snap_idx)
        ratio = float("nan") if d_prev is None else (
            d_sup / d_prev if d_prev > 0 else 0.0)
        e_sup, edt_sup = energy_suprema(cur, s, params.epsilon, snap_idx)
        records.append(ContractionRecord(k, d_sup, h1_int, ratio,
                                         e_sup, edt_sup))
        d_prev = d_sup
        prev = cur
        if keep_trajectories:
            kept.append(cur)
    if not keep_trajectories:
        kept = [prev]
    return kept, records


def nonlinear_trajectory(init: FieldState, params: PhysParams,
                         times) -> Trajectory:
    """Reference trajectory of the full nonlinear system on the same grid
    of times (for fixed-point consistency checks)."""
    times = np.asarray(times, dtype=float)
    traj = Trajectory.allocate(init.grid, times)
    traj.store(0, init)
    state = init
    for n in range(len(times) - 1):
        state = step_rk4(state, params, float(times[n + 1] - times[n]))
        traj.store(n + 1, state)
    return traj

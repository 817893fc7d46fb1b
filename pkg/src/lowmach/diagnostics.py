"""Energy functionals and convergence-rate norms.

Evaluates, on immutable state snapshots:

* E_s: (1/2)[eps^-2 |R-1|_{H^s}^2 + eps^-2 |Q-1|_{H^s}^2 + |u|_{H^s}^2];

* F_s: the symmetrized-energy analogue with pointwise closure weights
  gp Z^(gp-1) dZdR / (eps^2 R), gp Z^(gp-1) dZdQ / (eps^2 Q) and (R+Q).
  The weights are frozen at the undifferentiated fields and multiply the
  squared iterated-gradient tensors of every order j <= s (the derivative
  factors themselves are unweighted), which keeps the two-sided
  E_s-equivalence with the recorded grid extremes of the weights;

* the relative energy: weighted kinetic distance to a reference velocity,
  the eps^-2 Bregman pressure-potential gap, and the accumulated viscous
  dissipation of the difference;

* the rate norms sup |R-1|_{H^s}, |u - u_ref|_{L^2}, the running
  integral of |u - u_ref|_{H^1}^2, and |div u|_{H^(s-1)}.

Dissipation-style time integrals are accumulated with the trapezoid rule
on snapshot times.  All evaluations are pure and safe to run concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import closure
from .field import SpectralGrid, VectorField
from .twofluid import FieldState, PhysParams


@dataclass(frozen=True)
class EnergyReport:
    """One diagnostic row; all entries are nonnegative."""

    t: float
    E_s: float
    F_s: float
    rel_energy: float
    visc_dissipation: float
    rate_R: float          # |R - 1|_{H^s}
    rate_Q: float          # |Q - 1|_{H^s}
    rate_u_L2: float       # |u - u_ref|_{L^2}
    rate_u_H1_int: float   # int_0^t |u - u_ref|_{H^1}^2
    rate_div: float        # |div u|_{H^(s-1)}


@dataclass(frozen=True)
class RateNorms:
    """The five rate quantities at one instant (squared where the
    convergence statements are squared)."""

    rate_R_sq: float
    rate_Q_sq: float
    rate_u_L2_sq: float
    rate_u_H1_sq: float    # instantaneous integrand of the H^1 integral
    rate_div: float


def energy_E_s(state: FieldState, s: int, epsilon: float) -> float:
    grid = state.grid
    e = (grid.hs_norm_sq(state.R.data - 1.0, s) / epsilon**2
         + grid.hs_norm_sq(state.Q.data - 1.0, s) / epsilon**2
         + grid.hs_norm_sq(state.u.data, s))
    return 0.5 * e


def closure_weights(state: FieldState, gammas, tol=closure.DEFAULT_TOL):
    """The three pointwise weight fields of F_s, without the eps factors:
    gp Z^(gp-1) dZdR / R, gp Z^(gp-1) dZdQ / Q, and R + Q."""
    R, Q = state.R.data, state.Q.data
    J = closure.jet(R, Q, gammas, tol)
    gp = gammas.gamma_plus
    zfac = gp * J.Z ** (gp - 1.0)
    return zfac * J.dZdR / R, zfac * J.dZdQ / Q, R + Q


def _weighted_hs_sq(grid: SpectralGrid, w: np.ndarray, a: np.ndarray,
                    s: int) -> float:
    """sum_{j<=s} integral of w |grad^j a|^2 dx with the weight field w
    never differentiated; leading axes of `a` are component axes."""
    a = np.asarray(a, dtype=float)
    comps = [a[idx] for idx in np.ndindex(a.shape[: a.ndim - grid.dim])]
    total = 0.0
    for j in range(s + 1):
        total += sum(grid.integrate(w * c * c) for c in comps)
        if j < s:
            comps = [grid.deriv(c, ax) for c in comps for ax in range(grid.dim)]
    return total


def energy_F_s(state: FieldState, s: int, epsilon: float, gammas,
               tol=closure.DEFAULT_TOL) -> float:
    grid = state.grid
    w_R, w_Q, w_u = closure_weights(state, gammas, tol)
    val = (_weighted_hs_sq(grid, w_R, state.R.data - 1.0, s) / epsilon**2
           + _weighted_hs_sq(grid, w_Q, state.Q.data - 1.0, s) / epsilon**2
           + _weighted_hs_sq(grid, w_u, state.u.data, s))
    return 0.5 * val


def internal_energy_integral(state: FieldState, gammas,
                             tol=closure.DEFAULT_TOL) -> float:
    """Volume integral of the absolute pressure potential (the as-written
    initial-smallness functional; O(1) at the constant state)."""
    e = closure.internal_energy_density(state.R.data, state.Q.data, gammas, tol)
    return state.grid.integrate(e)


def bregman_integral(state: FieldState, gammas,
                     tol=closure.DEFAULT_TOL) -> float:
    rel = closure.relative_internal_energy_density(
        state.R.data, state.Q.data, gammas, tol)
    return state.grid.integrate(rel)


def relative_energy(state: FieldState, u_ref: VectorField, epsilon: float,
                    dissipation: float, gammas,
                    tol=closure.DEFAULT_TOL) -> float:
    """(1/2) int |sqrt(R+Q) u - sqrt(2) u_ref|^2 + eps^-2 Bregman gap
    + accumulated dissipation (passed in, trapezoid over snapshots)."""
    grid = state.grid
    rho = state.R.data + state.Q.data
    diff = np.sqrt(rho) * state.u.data - np.sqrt(2.0) * u_ref.data
    kin = 0.5 * grid.l2_norm_sq(diff)
    return kin + bregman_integral(state, gammas, tol) / epsilon**2 + dissipation


def dissipation_rate(state: FieldState, u_ref: VectorField, mu: float,
                     lam: float) -> float:
    """mu |grad(u - u_ref)|^2 + (mu+lam) |div u|^2, integrated over the box."""
    grid = state.grid
    du = state.u.data - u_ref.data
    grad_sq = sum(grid.l2_norm_sq(grid.grad(du[c])) for c in range(grid.dim))
    div_sq = grid.l2_norm_sq(grid.div(state.u.data))
    return mu * grad_sq + (mu + lam) * div_sq


def rate_norms(state: FieldState, u_ref: VectorField, s: int) -> RateNorms:
    """Instantaneous rate quantities; the H^1 integrand is returned for the
    caller to accumulate.  |div u|_{H^(s-1)} equals |div(u - u_ref)| there
    whenever div u_ref = 0, which is asserted."""
    grid = state.grid
    du = state.u.data - u_ref.data
    div_u = grid.div(state.u.data)
    div_ref = grid.div(u_ref.data)
    assert np.max(np.abs(div_ref)) <= 1e-10 * (1.0 + np.max(np.abs(u_ref.data)))
    return RateNorms(
        rate_R_sq=grid.hs_norm_sq(state.R.data - 1.0, s),
        rate_Q_sq=grid.hs_norm_sq(state.Q.data - 1.0, s),
        rate_u_L2_sq=grid.l2_norm_sq(du),
        rate_u_H1_sq=grid.hs_norm_sq(du, 1),
        rate_div=float(np.sqrt(grid.hs_norm_sq(div_u, max(s - 1, 0)))),
    )


class TrapezoidAccumulator:
    """Running trapezoid integral of sampled nonnegative rates."""

    def __init__(self):
        self._t = None
        self._rate = None
        self.value = 0.0

    def push(self, t, rate):
        if self._t is not None:
            self.value += 0.5 * (t - self._t) * (rate + self._rate)
        self._t = t
        self._rate = rate
        return self.value

    def restore(self, t, rate, value):
        """Re-arm mid-run (checkpoint resume); the rate at the restored
        time is recomputed by the caller from the loaded state."""
        self._t = t
        self._rate = rate
        self.value = value


class SnapshotDiagnostics:
    """Stateful per-run assembler of EnergyReport rows.

    Holds the two trapezoid accumulators (viscous dissipation of the
    difference and the H^1 error integral); everything else is stateless.
    """

    def __init__(self, params: PhysParams, s: int):
        self.params = params
        self.s = s
        self._diss = TrapezoidAccumulator()
        self._h1 = TrapezoidAccumulator()

    @property
    def dissipation(self) -> float:
        return self._diss.value

    @property
    def h1_integral(self) -> float:
        return self._h1.value

    def restore(self, state: FieldState, u_ref: VectorField,
                h1_value: float, diss_value: float):
        """Re-arm both accumulators at a checkpointed instant; the rates
        there are pure recomputations from the restored fields."""
        p = self.params
        self._h1.restore(state.t,
                         rate_norms(state, u_ref, self.s).rate_u_H1_sq,
                         h1_value)
        self._diss.restore(state.t,
                           dissipation_rate(state, u_ref, p.mu, p.lam),
                           diss_value)

    def measure(self, state: FieldState, u_ref: VectorField) -> EnergyReport:
        p = self.params
        diss = self._diss.push(state.t,
                               dissipation_rate(state, u_ref, p.mu, p.lam))
        rn = rate_norms(state, u_ref, self.s)
        h1_int = self._h1.push(state.t, rn.rate_u_H1_sq)
        return EnergyReport(
            t=state.t,
            E_s=energy_E_s(state, self.s, p.epsilon),
            F_s=energy_F_s(state, self.s, p.epsilon, p.gammas, p.closure_tol),
            rel_energy=relative_energy(state, u_ref, p.epsilon, diss,
                                       p.gammas, p.closure_tol),
            visc_dissipation=diss,
            rate_R=float(np.sqrt(rn.rate_R_sq)),
            rate_Q=float(np.sqrt(rn.rate_Q_sq)),
            rate_u_L2=float(np.sqrt(rn.rate_u_L2_sq)),
            rate_u_H1_int=h1_int,
            rate_div=rn.rate_div,
        )


def total_energy(state: FieldState, params: PhysParams) -> float:
    """Kinetic energy plus the eps^-2 Bregman potential: the discrete
    analogue of the decaying total energy of unforced runs."""
    grid = state.grid
    rho = state.R.data + state.Q.data
    kin = 0.5 * grid.integrate(rho * np.sum(state.u.data**2, axis=0))
    return kin + bregman_integral(state, params.gammas,
                                  params.closure_tol) / params.epsilon**2

"""Implicit algebraic pressure closure for the two-fluid model.

The two phase pressures coincide, which determines a density-like variable
Z from the partial densities (R, Q) through

    F(Z) = Z**g - R * Z**(g-1) - Q = 0,     g = gamma_plus / gamma_minus,

with R <= Z.  The common pressure is p = Z**gamma_plus and the volume
fraction of phase "+" is alpha = R / Z.  This module solves the root
problem with a safeguarded Newton iteration inside an analytic bracket and
evaluates the first and second derivatives of Z and p with respect to
(R, Q), plus the internal-energy potential and its Bregman gap about the
state (R, Q) = (1, 1).

All entry points accept scalars or numpy arrays (broadcast together) and
are pure functions: safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DegenerateState, NonConvergence

DEFAULT_TOL = 1e-13
MAX_ITER = 200

# Floor used in brackets when one density is exactly zero.  Those points are
# solved by closed form, so the floor only has to keep the bracket positive.
_ZERO_FLOOR = 1e-30


@dataclass(frozen=True)
class Gammas:
    """Adiabatic exponents of the two phases.

    gamma_plus and gamma_minus must both exceed 1; the closure exponent is
    their ratio gamma = gamma_plus / gamma_minus (either side of 1 is
    supported).
    """

    gamma_plus: float
    gamma_minus: float

    def __post_init__(self):
        if not (self.gamma_plus > 1.0 and self.gamma_minus > 1.0):
            raise ValueError(
                f"adiabatic exponents must exceed 1, got "
                f"({self.gamma_plus}, {self.gamma_minus})"
            )

    @property
    def gamma(self) -> float:
        return self.gamma_plus / self.gamma_minus


@dataclass(frozen=True)
class ClosureJet:
    """Closure root and all (R, Q)-derivatives of Z and p at one state.

    Entries are scalars or arrays matching the broadcast shape of the
    inputs.  `residual` is |Z**g - R Z**(g-1) - Q| for inspection.
    """

    R: np.ndarray
    Q: np.ndarray
    Z: np.ndarray
    alpha: np.ndarray
    p: np.ndarray
    dZdR: np.ndarray
    dZdQ: np.ndarray
    d2ZdRR: np.ndarray
    d2ZdRQ: np.ndarray
    d2ZdQQ: np.ndarray
    dpdR: np.ndarray
    dpdQ: np.ndarray
    d2pdRR: np.ndarray
    d2pdRQ: np.ndarray
    d2pdQQ: np.ndarray


def _as_arrays(R, Q):
    R = np.asarray(R, dtype=float)
    Q = np.asarray(Q, dtype=float)
    scalar = R.ndim == 0 and Q.ndim == 0
    R, Q = np.broadcast_arrays(R, Q)
    return np.array(R, copy=True), np.array(Q, copy=True), scalar


def _check_admissible(R, Q):
    if np.any(R < 0.0) or np.any(Q < 0.0):
        raise ValueError("partial densities must be nonnegative")
    if np.any((R == 0.0) & (Q == 0.0)):
        raise DegenerateState("closure undefined at R = Q = 0")


def closure_residual(Z, R, Q, gammas: Gammas):
    """F(Z) = Z**g - R Z**(g-1) - Q, the defining residual of the closure."""
    g = gammas.gamma
    Z = np.asarray(Z, dtype=float)
    return Z**g - R * Z ** (g - 1.0) - Q


def z_bracket(R, Q, gammas: Gammas):
    """Bracket [low, high] containing the closure root.

    low = R (floored when R = 0) and high = max(2 R, (2 Q)^(1/g)), padded
    so high > low strictly.  F changes sign on the bracket; when Q = 0 the
    root sits exactly at low = R.
    """
    R, Q, scalar = _as_arrays(R, Q)
    _check_admissible(R, Q)
    g = gammas.gamma
    low = np.maximum(R, _ZERO_FLOOR)
    high = np.maximum(2.0 * np.maximum(R, _ZERO_FLOOR),
                      (2.0 * np.maximum(Q, _ZERO_FLOOR)) ** (1.0 / g))
    high = np.maximum(high, low * (1.0 + 1e-8))
    if scalar:
        return float(low), float(high)
    return low, high


def solve_z(R, Q, gammas: Gammas, tol: float = DEFAULT_TOL):
    """Unique root Z of the closure residual, R <= Z.

    Safeguarded Newton inside the analytic bracket: a Newton step is
    rejected in favour of bisection whenever it leaves the current bracket
    or fails to reduce |F|.  Convergence criterion:

        |F(Z)| <= tol * max(1, Q, Z**g).

    Closed forms short-circuit the degenerate boundaries (Q = 0 -> Z = R,
    R = 0 -> Z = Q**(1/g)) and the gamma = 1 case (Z = R + Q).
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    R, Q, scalar = _as_arrays(R, Q)
    _check_admissible(R, Q)
    g = gammas.gamma

    if g == 1.0:
        Z = R + Q
        return float(Z) if scalar else Z

    Z = np.empty_like(R)
    q_zero = Q == 0.0
    r_zero = R == 0.0
    interior = ~(q_zero | r_zero)
    Z[q_zero] = R[q_zero]
    Z[r_zero] = Q[r_zero] ** (1.0 / g)

    if np.any(interior):
        Ri = R[interior]
        Qi = Q[interior]
        lo, hi = z_bracket(Ri, Qi, gammas)
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        Ri = np.atleast_1d(Ri)
        Qi = np.atleast_1d(Qi)
        Z[interior] = _newton_bisect(Ri, Qi, lo, hi, g, tol)

    return float(Z) if scalar else Z


def _newton_bisect(R, Q, lo, hi, g, tol):
    """Vectorised safeguarded Newton; F(lo) <= 0 <= F(hi) on entry."""

    def f_and_df(z):
        zgm2 = z ** (g - 2.0)
        zgm1 = zgm2 * z
        f = zgm1 * z - R * zgm1 - Q
        df = g * zgm1 - (g - 1.0) * R * zgm2
        return f, df

    x = 0.5 * (lo + hi)
    f, df = f_and_df(x)
    scale = np.maximum(1.0, np.maximum(Q, x**g))
    done = np.abs(f) <= tol * scale

    for _ in range(MAX_ITER + 1):
        if np.all(done):
            break
        # Newton candidate; fall back to the bracket midpoint wherever the
        # step escapes (lo, hi) or is not finite.
        with np.errstate(divide="ignore", invalid="ignore"):
            x_new = x - f / df
        bad = ~np.isfinite(x_new) | (x_new <= lo) | (x_new >= hi)
        x_new = np.where(bad, 0.5 * (lo + hi), x_new)

        f_new, df_new = f_and_df(x_new)
        # A Newton step that fails to reduce |F| gets replaced by bisection.
        worse = ~bad & (np.abs(f_new) >= np.abs(f))
        if np.any(worse):
            x_bis = 0.5 * (lo + hi)
            x_new = np.where(worse, x_bis, x_new)
            f_new, df_new = f_and_df(x_new)

        # Keep the sign-change bracket current.
        neg = f_new < 0.0
        lo = np.where(~done & neg, x_new, lo)
        hi = np.where(~done & ~neg, x_new, hi)

        x = np.where(done, x, x_new)
        f = np.where(done, f, f_new)
        df = np.where(done, df, df_new)
        scale = np.maximum(1.0, np.maximum(Q, x**g))
        done = done | (np.abs(f) <= tol * scale)
    else:
        raise NonConvergence(
            f"closure root iteration exceeded {MAX_ITER} iterations "
            f"(tol={tol:g})"
        )
    return x


def jet(R, Q, gammas: Gammas, tol: float = DEFAULT_TOL) -> ClosureJet:
    """Closure root with all first and second derivatives of Z and p.

    Implements the implicit-function derivatives of the closure
    literally; with the common denominator

        D = g Z**(g-1) - R (g-1) Z**(g-2)   (> 0 since Z >= R),

    the first derivatives are dZdR = Z**(g-1) / D and dZdQ = 1 / D, the
    second derivatives follow by the quotient rule, and the pressure
    derivatives chain through p = Z**gamma_plus.
    """
    R, Q, scalar = _as_arrays(R, Q)
    Z = np.asarray(solve_z(R, Q, gammas, tol))
    g = gammas.gamma
    gp = gammas.gamma_plus

    zgm1 = Z ** (g - 1.0)
    zgm2 = Z ** (g - 2.0)
    zgm3 = Z ** (g - 3.0)
    D = g * zgm1 - R * (g - 1.0) * zgm2
    D2 = D * D

    dZdR = zgm1 / D
    dZdQ = 1.0 / D

    # dD/dZ and the explicit dD/dR, used by the quotient rule below.
    dD_dZ = g * (g - 1.0) * zgm2 - R * (g - 1.0) * (g - 2.0) * zgm3

    d2ZdRR = ((g - 1.0) * zgm2 * dZdR * D
              - zgm1 * (dD_dZ * dZdR - (g - 1.0) * zgm2)) / D2
    d2ZdRQ = ((g - 1.0) * zgm2 * dZdQ * D
              - zgm1 * dD_dZ * dZdQ) / D2
    d2ZdQQ = -dD_dZ * dZdQ / D2

    zp1 = Z ** (gp - 1.0)
    zp2 = Z ** (gp - 2.0)
    p = zp1 * Z
    dpdR = gp * zp1 * dZdR
    dpdQ = gp * zp1 * dZdQ
    d2pdRR = gp * (gp - 1.0) * zp2 * dZdR * dZdR + gp * zp1 * d2ZdRR
    d2pdRQ = gp * (gp - 1.0) * zp2 * dZdQ * dZdR + gp * zp1 * d2ZdRQ
    d2pdQQ = gp * (gp - 1.0) * zp2 * dZdQ * dZdQ + gp * zp1 * d2ZdQQ

    alpha = R / Z

    fields = dict(R=R, Q=Q, Z=Z, alpha=alpha, p=p, dZdR=dZdR, dZdQ=dZdQ,
                  d2ZdRR=d2ZdRR, d2ZdRQ=d2ZdRQ, d2ZdQQ=d2ZdQQ,
                  dpdR=dpdR, dpdQ=dpdQ, d2pdRR=d2pdRR, d2pdRQ=d2pdRQ,
                  d2pdQQ=d2pdQQ)
    if scalar:
        fields = {k: float(v) for k, v in fields.items()}
    return ClosureJet(**fields)


def pressure_first_derivatives(R, Q, gammas: Gammas, tol: float = DEFAULT_TOL):
    """(Z, dpdR, dpdQ) without the second-derivative work; solver hot path."""
    R, Q, scalar = _as_arrays(R, Q)
    Z = np.asarray(solve_z(R, Q, gammas, tol))
    g = gammas.gamma
    gp = gammas.gamma_plus
    zgm2 = Z ** (g - 2.0)
    zgm1 = zgm2 * Z
    D = g * zgm1 - R * (g - 1.0) * zgm2
    zp1 = Z ** (gp - 1.0)
    dpdR = gp * zp1 * zgm1 / D
    dpdQ = gp * zp1 / D
    if scalar:
        return float(Z), float(dpdR), float(dpdQ)
    return Z, dpdR, dpdQ


def internal_energy_density(R, Q, gammas: Gammas, tol: float = DEFAULT_TOL):
    """Pressure potential e(R, Q) per unit volume.

    e = (R/alpha)**gamma_plus * alpha / (gamma_plus - 1)
      + (Q/(1-alpha))**gamma_minus * (1-alpha) / (gamma_minus - 1),

    with the vanishing-phase term dropped at alpha in {0, 1}.
    """
    R, Q, scalar = _as_arrays(R, Q)
    _check_admissible(R, Q)
    Z = np.asarray(solve_z(R, Q, gammas, tol))
    alpha = R / Z
    gp = gammas.gamma_plus
    gm = gammas.gamma_minus

    plus = np.zeros_like(Z)
    minus = np.zeros_like(Z)
    has_plus = alpha > 0.0
    has_minus = alpha < 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        rho_plus = np.where(has_plus, R / np.where(has_plus, alpha, 1.0), 0.0)
        one_m = 1.0 - alpha
        rho_minus = np.where(has_minus, Q / np.where(has_minus, one_m, 1.0), 0.0)
    plus = np.where(has_plus, rho_plus**gp * alpha / (gp - 1.0), 0.0)
    minus = np.where(has_minus, rho_minus**gm * one_m / (gm - 1.0), 0.0)
    e = plus + minus
    return float(e) if scalar else e


def internal_energy_gradient(R, Q, gammas: Gammas, tol: float = DEFAULT_TOL):
    """(e, de/dR, de/dQ) with the gradient assembled from the closure jet.

    Uses e = R Z**(gp-1)/(gp-1) + (Z**gp - R Z**(gp-1))/(gm-1), which
    agrees with `internal_energy_density` wherever both phases are present.
    """
    R, Q, scalar = _as_arrays(R, Q)
    J = jet(R, Q, gammas, tol)
    gp = gammas.gamma_plus
    gm = gammas.gamma_minus
    Z = np.asarray(J.Z)
    dZdR = np.asarray(J.dZdR)
    dZdQ = np.asarray(J.dZdQ)
    zp1 = Z ** (gp - 1.0)
    zp2 = Z ** (gp - 2.0)

    e = R * zp1 / (gp - 1.0) + (zp1 * Z - R * zp1) / (gm - 1.0)
    dplus_dR = zp1 + R * (gp - 1.0) * zp2 * dZdR
    dminus_dR = gp * zp1 * dZdR - dplus_dR
    dedR = dplus_dR / (gp - 1.0) + dminus_dR / (gm - 1.0)
    dplus_dQ = R * (gp - 1.0) * zp2 * dZdQ
    dminus_dQ = gp * zp1 * dZdQ - dplus_dQ
    dedQ = dplus_dQ / (gp - 1.0) + dminus_dQ / (gm - 1.0)
    if scalar:
        return float(e), float(dedR), float(dedQ)
    return e, dedR, dedQ


@lru_cache(maxsize=64)
def _base_point_gradient(gamma_plus, gamma_minus, tol):
    g = Gammas(gamma_plus, gamma_minus)
    _, dedR, dedQ = internal_energy_gradient(1.0, 1.0, g, tol)
    # base value through the same evaluation path as the Bregman's e(R, Q),
    # so the gap vanishes identically at (1, 1)
    e0 = internal_energy_density(1.0, 1.0, g, tol)
    return e0, dedR, dedQ


def relative_internal_energy_density(R, Q, gammas: Gammas,
                                     tol: float = DEFAULT_TOL):
    """Bregman gap of the pressure potential about (R, Q) = (1, 1).

    e(R,Q) - e(1,1) - de/dR(1,1) (R-1) - de/dQ(1,1) (Q-1); nonnegative in
    a neighbourhood of (1, 1), O(|R-1|^2 + |Q-1|^2) there, which keeps the
    1/eps^2-weighted potential finite for well-prepared states.
    """
    R, Q, scalar = _as_arrays(R, Q)
    e = internal_energy_density(R, Q, gammas, tol)
    e0, dR0, dQ0 = _base_point_gradient(gammas.gamma_plus,
                                        gammas.gamma_minus, tol)
    rel = e - e0 - dR0 * (R - 1.0) - dQ0 * (Q - 1.0)
    return float(rel) if scalar else rel

"""Tests for the implicit pressure closure and its derivative formulas."""

import numpy as np
import pytest

from lowmach.closure import (
    Gammas,
    closure_residual,
    internal_energy_density,
    internal_energy_gradient,
    jet,
    pressure_first_derivatives,
    relative_internal_energy_density,
    solve_z,
    z_bracket,
)
from lowmach.errors import DegenerateState, NonConvergence

GAMMA_PAIRS = [(2.0, 2.0), (2.0, 3.0), (1.4, 2.0), (3.0, 1.5)]

# Frozen with the pure-bisection oracle below (80 double bisections on the
# analytic bracket), before the main solver was written.
Z_11_G23 = 2.3247179572447463      # root of Z - Z**(1/3) - 1 = 0
Z_1207_G23 = 2.0958086447012523


def bisect_oracle(R, Q, g, iters=120, dtype=float):
    """Plain bisection on the analytic bracket; independent of solve_z."""
    R = np.asarray(R, dtype=dtype)
    Q = np.asarray(Q, dtype=dtype)
    one = dtype(1.0)
    lo = np.maximum(R, dtype(1e-30))
    hi = np.maximum(2 * lo, (2 * np.maximum(Q, dtype(1e-30))) ** (one / dtype(g)))
    hi = np.maximum(hi, lo * dtype(1 + 1e-8))

    def F(Z):
        return Z ** dtype(g) - R * Z ** dtype(g - 1) - Q

    flo = F(lo)
    for _ in range(iters):
        mid = (lo + hi) / 2
        fm = F(mid)
        neg = (fm < 0) == (flo < 0)
        lo = np.where(neg, mid, lo)
        flo = np.where(neg, fm, flo)
        hi = np.where(neg, hi, mid)
    return (lo + hi) / 2


def random_sample(n_points=10_000, seed=7):
    rng = np.random.default_rng(seed)
    R = rng.uniform(0.1, 3.0, n_points)
    Q = rng.uniform(0.1, 3.0, n_points)
    return R, Q


# ---------------------------------------------------------------------------
# z_bracket


def test_bracket_single_phase_plus():
    lo, hi = z_bracket(1.3, 0.0, Gammas(2.0, 3.0))
    assert lo == 1.3
    assert hi >= lo
    # root sits exactly at the lower end
    assert solve_z(1.3, 0.0, Gammas(2.0, 3.0)) == 1.3


def test_bracket_matches_paper_bound():
    g = Gammas(2.0, 3.0)
    R, Q = 1.7, 2.9
    lo, hi = z_bracket(R, Q, g)
    assert hi == max(2 * R, (2 * Q) ** (1.0 / g.gamma))


def test_bracket_contains_root_single_phase_minus():
    g = Gammas(1.5, 3.0)  # gamma = 0.5
    lo, hi = z_bracket(0.0, 2.0, g)
    assert lo < 4.0 < hi  # Z = 2**(1/0.5) = 4
    assert solve_z(0.0, 2.0, g) == pytest.approx(4.0, rel=1e-14)


def test_bracket_sign_change_on_sample():
    R, Q = random_sample(2000, seed=11)
    for gp, gm in GAMMA_PAIRS:
        g = Gammas(gp, gm)
        lo, hi = z_bracket(R, Q, g)
        assert np.all(closure_residual(lo, R, Q, g) <= 0)
        assert np.all(closure_residual(hi, R, Q, g) >= 0)


def test_degenerate_state_rejected():
    with pytest.raises(DegenerateState):
        z_bracket(0.0, 0.0, Gammas(2.0, 2.0))
    with pytest.raises(DegenerateState):
        solve_z(np.array([1.0, 0.0]), np.array([1.0, 0.0]), Gammas(2.0, 2.0))


# ---------------------------------------------------------------------------
# solve_z


def test_gamma_one_closed_form():
    assert solve_z(1.0, 1.0, Gammas(2.0, 2.0)) == 2.0
    J = jet(1.0, 1.0, Gammas(2.0, 2.0))
    assert J.p == 4.0
    assert J.alpha == 0.5


def test_root_against_frozen_bisection_value():
    z = solve_z(1.0, 1.0, Gammas(2.0, 3.0))
    assert z == pytest.approx(Z_11_G23, abs=1e-13)
    assert 1.0 <= z <= 2.0**1.5
    z2 = solve_z(1.2, 0.7, Gammas(2.0, 3.0))
    assert z2 == pytest.approx(Z_1207_G23, abs=1e-13)


def test_single_phase_limit():
    g = Gammas(1.4, 2.0)
    z = solve_z(0.5, 0.0, g)
    assert z == 0.5
    J = jet(0.5, 0.0, g)
    assert J.p == pytest.approx(0.5**1.4, rel=1e-15)
    assert J.alpha == 1.0


def test_nonconvergence_below_machine_precision():
    R, Q = random_sample(100, seed=3)
    with pytest.raises(NonConvergence):
        solve_z(R, Q, Gammas(2.0, 3.0), tol=1e-30)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        solve_z(-1.0, 1.0, Gammas(2.0, 2.0))
    with pytest.raises(ValueError):
        solve_z(1.0, 1.0, Gammas(2.0, 2.0), tol=0.0)
    with pytest.raises(ValueError):
        Gammas(1.0, 2.0)


def test_residual_and_admissibility_invariants():
    R, Q = random_sample()
    for gp, gm in GAMMA_PAIRS:
        g = Gammas(gp, gm)
        Z = solve_z(R, Q, g)
        res = np.abs(closure_residual(Z, R, Q, g))
        scale = np.maximum(1.0, np.maximum(Q, Z**g.gamma))
        assert np.max(res / scale) <= 1e-12
        assert np.all(Z >= R)
        alpha = R / Z
        assert np.all((alpha >= 0) & (alpha <= 1))


def test_gamma_one_exactness_invariant():
    R, Q = random_sample()
    Z = solve_z(R, Q, Gammas(2.0, 2.0))
    assert np.max(np.abs(Z - (R + Q)) / (R + Q)) <= 1e-12


def test_monotonicity_invariant():
    R, Q = random_sample(4000, seed=5)
    h = 1e-6
    for gp, gm in GAMMA_PAIRS:
        g = Gammas(gp, gm)
        Z = solve_z(R, Q, g)
        assert np.all(solve_z(R + h, Q, g) > Z)
        assert np.all(solve_z(R, Q + h, g) > Z)


def test_bisection_oracle_equivalence():
    R, Q = random_sample()
    tol = 1e-13
    for gp, gm in GAMMA_PAIRS:
        g = Gammas(gp, gm)
        Z = solve_z(R, Q, g, tol=tol)
        Zo = bisect_oracle(R, Q, g.gamma)
        assert np.max(np.abs(Z - Zo) / np.maximum(1.0, Zo)) <= 10 * tol


# ---------------------------------------------------------------------------
# jet derivatives


def test_jet_gamma_one_closed_form():
    J = jet(1.0, 1.0, Gammas(2.0, 2.0))
    assert J.dZdR == pytest.approx(1.0, abs=1e-13)
    assert J.dZdQ == pytest.approx(1.0, abs=1e-13)
    assert J.dpdR == pytest.approx(4.0, rel=1e-13)
    assert J.dpdQ == pytest.approx(4.0, rel=1e-13)
    for second in (J.d2ZdRR, J.d2ZdRQ, J.d2ZdQQ):
        assert abs(second) <= 1e-13


def test_jet_positively_sloped():
    R, Q = random_sample(4000, seed=13)
    for gp, gm in GAMMA_PAIRS:
        J = jet(R, Q, Gammas(gp, gm))
        assert np.all(J.dZdR > 0)
        assert np.all(J.dZdQ > 0)


def _mpmath_fd_jet(R, Q, g, h=1e-5):
    """All ten derivative entries by high-precision finite differences of a
    bisection root; fully independent of the jet formulas."""
    import mpmath as mp

    with mp.workdps(30):
        gam = mp.mpf(g.gamma_plus) / mp.mpf(g.gamma_minus)
        gp = mp.mpf(g.gamma_plus)

        def z(r, q):
            r, q = mp.mpf(r), mp.mpf(q)
            lo = max(r, mp.mpf("1e-30"))
            hi = max(2 * lo, (2 * q) ** (1 / gam)) * (1 + mp.mpf("1e-8"))
            flo = lo**gam - r * lo ** (gam - 1) - q
            for _ in range(130):
                mid = (lo + hi) / 2
                fm = mid**gam - r * mid ** (gam - 1) - q
                if (fm < 0) == (flo < 0):
                    lo, flo = mid, fm
                else:
                    hi = mid
            return (lo + hi) / 2

        def p(r, q):
            return z(r, q) ** gp

        hh = mp.mpf(h)
        out = {}
        for name, f in (("Z", z), ("p", p)):
            f00 = f(R, Q)
            fpR, fmR = f(R + hh, Q), f(R - hh, Q)
            fpQ, fmQ = f(R, Q + hh), f(R, Q - hh)
            fpp, fpm = f(R + hh, Q + hh), f(R + hh, Q - hh)
            fmp, fmm = f(R - hh, Q + hh), f(R - hh, Q - hh)
            out["d%sdR" % name] = (fpR - fmR) / (2 * hh)
            out["d%sdQ" % name] = (fpQ - fmQ) / (2 * hh)
            out["d2%sdRR" % name] = (fpR - 2 * f00 + fmR) / hh**2
            out["d2%sdQQ" % name] = (fpQ - 2 * f00 + fmQ) / hh**2
            out["d2%sdRQ" % name] = (fpp - fpm - fmp + fmm) / (4 * hh**2)
        return {k: float(v) for k, v in out.items()}


def test_jet_matches_extended_precision_fd_pointwise():
    g = Gammas(2.0, 3.0)
    for R, Q in [(1.2, 0.7), (1.0, 1.0), (0.4, 2.2)]:
        J = jet(R, Q, g)
        fd = _mpmath_fd_jet(R, Q, g)
        for name in ("dZdR", "dZdQ", "d2ZdRR", "d2ZdRQ", "d2ZdQQ",
                     "dpdR", "dpdQ", "d2pdRR", "d2pdRQ", "d2pdQQ"):
            assert getattr(J, name) == pytest.approx(fd[name], rel=1e-6), name


def test_d2ZdQQ_matches_second_difference():
    g = Gammas(2.0, 3.0)
    J = jet(1.0, 1.0, g)
    fd = _mpmath_fd_jet(1.0, 1.0, g)
    assert J.d2ZdQQ == pytest.approx(fd["d2ZdQQ"], rel=1e-6)


def test_jet_fd_cascade_on_sample():
    """First derivatives against differences of the root; second derivatives
    against differences of the first-derivative fields (double precision is
    noise-limited for direct second differences of the root)."""
    R, Q = random_sample()
    h = 1e-5
    for gp, gm in GAMMA_PAIRS:
        g = Gammas(gp, gm)
        J = jet(R, Q, g)
        zpR, zmR = solve_z(R + h, Q, g), solve_z(R - h, Q, g)
        zpQ, zmQ = solve_z(R, Q + h, g), solve_z(R, Q - h, g)
        assert np.max(np.abs((zpR - zmR) / (2 * h) - J.dZdR)
                      / np.abs(J.dZdR)) <= 1e-6
        assert np.max(np.abs((zpQ - zmQ) / (2 * h) - J.dZdQ)
                      / np.abs(J.dZdQ)) <= 1e-6

        JpR = jet(R + h, Q, g)
        JmR = jet(R - h, Q, g)
        JpQ = jet(R, Q + h, g)
        JmQ = jet(R, Q - h, g)
        pairs = [
            (J.d2ZdRR, (JpR.dZdR - JmR.dZdR) / (2 * h)),
            (J.d2ZdRQ, (JpQ.dZdR - JmQ.dZdR) / (2 * h)),
            (J.d2ZdRQ, (JpR.dZdQ - JmR.dZdQ) / (2 * h)),
            (J.d2ZdQQ, (JpQ.dZdQ - JmQ.dZdQ) / (2 * h)),
            (J.d2pdRR, (JpR.dpdR - JmR.dpdR) / (2 * h)),
            (J.d2pdRQ, (JpQ.dpdR - JmQ.dpdR) / (2 * h)),
            (J.d2pdQQ, (JpQ.dpdQ - JmQ.dpdQ) / (2 * h)),
        ]
        for exact, fd in pairs:
            denom = np.maximum(np.abs(exact), 1e-8)
            assert np.max(np.abs(exact - fd) / denom) <= 1e-6


def test_pressure_consistency_between_phases():
    R, Q = random_sample()
    for gp, gm in GAMMA_PAIRS:
        g = Gammas(gp, gm)
        J = jet(R, Q, g)
        mask = J.alpha < 1.0
        p_minus = (Q[mask] / (1.0 - J.alpha[mask])) ** gm
        assert np.max(np.abs(J.p[mask] - p_minus) / J.p[mask]) <= 1e-10


def test_pressure_first_derivatives_match_jet():
    R, Q = random_sample(1000, seed=17)
    for gp, gm in GAMMA_PAIRS:
        g = Gammas(gp, gm)
        J = jet(R, Q, g)
        Z, dpdR, dpdQ = pressure_first_derivatives(R, Q, g)
        assert np.allclose(Z, J.Z, rtol=1e-14)
        assert np.allclose(dpdR, J.dpdR, rtol=1e-12)
        assert np.allclose(dpdQ, J.dpdQ, rtol=1e-12)


# ---------------------------------------------------------------------------
# internal energy and Bregman gap


def test_internal_energy_gamma_one():
    e = internal_energy_density(1.0, 1.0, Gammas(2.0, 2.0))
    assert e == pytest.approx(4.0, rel=1e-14)


def test_internal_energy_identity():
    R, Q = random_sample(3000, seed=19)
    for gp, gm in GAMMA_PAIRS:
        g = Gammas(gp, gm)
        e = internal_energy_density(R, Q, g)
        J = jet(R, Q, g)
        ident = J.p * (J.alpha / (gp - 1.0) + (1.0 - J.alpha) / (gm - 1.0))
        assert np.max(np.abs(e - ident) / np.abs(ident)) <= 1e-12


def test_internal_energy_single_phase():
    e = internal_energy_density(1.0, 0.0, Gammas(2.0, 3.0))
    assert e == pytest.approx(1.0, rel=1e-14)
    e2 = internal_energy_density(0.0, 1.0, Gammas(2.0, 3.0))
    # R = 0: Z = Q**(1/gamma), only the minus phase contributes
    assert e2 == pytest.approx(1.0 / (3.0 - 1.0), rel=1e-13)


def test_internal_energy_gradient_matches_fd():
    g = Gammas(2.0, 3.0)
    h = 1e-6
    for R, Q in [(1.0, 1.0), (1.3, 0.8), (0.7, 1.9)]:
        _, dedR, dedQ = internal_energy_gradient(R, Q, g)
        fdR = (internal_energy_density(R + h, Q, g)
               - internal_energy_density(R - h, Q, g)) / (2 * h)
        fdQ = (internal_energy_density(R, Q + h, g)
               - internal_energy_density(R, Q - h, g)) / (2 * h)
        assert dedR == pytest.approx(fdR, rel=1e-8)
        assert dedQ == pytest.approx(fdQ, rel=1e-8)


def test_bregman_gap_zero_at_base_point():
    for gp, gm in GAMMA_PAIRS:
        assert relative_internal_energy_density(1.0, 1.0, Gammas(gp, gm)) == \
            pytest.approx(0.0, abs=1e-15)


def test_bregman_gap_quadratic_leading_order():
    g = Gammas(2.0, 2.0)
    h = 1e-3
    # d2e/dRR(1,1) by second differences of the potential itself
    d2 = (internal_energy_density(1.0 + h, 1.0, g)
          - 2.0 * internal_energy_density(1.0, 1.0, g)
          + internal_energy_density(1.0 - h, 1.0, g)) / h**2
    rel = relative_internal_energy_density(1.0 + h, 1.0, g)
    assert rel == pytest.approx(0.5 * d2 * h**2, rel=5e-3)
    assert rel >= 0.0


def test_bregman_gap_symmetric_quadratic_form():
    g = Gammas(2.0, 3.0)
    h = 1e-3
    a = relative_internal_energy_density(1.0 - h, 1.0 + h, g)
    b = relative_internal_energy_density(1.0 + h, 1.0 - h, g)
    # same quadratic form value up to the cubic remainder
    assert a == pytest.approx(b, abs=10 * h**3)
    assert a > 0 and b > 0


def test_bregman_gap_nonnegative_near_base():
    rng = np.random.default_rng(23)
    R = 1.0 + 0.2 * rng.uniform(-1, 1, 500)
    Q = 1.0 + 0.2 * rng.uniform(-1, 1, 500)
    for gp, gm in GAMMA_PAIRS:
        rel = relative_internal_energy_density(R, Q, Gammas(gp, gm))
        assert np.all(rel >= -1e-15)

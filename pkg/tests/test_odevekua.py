import cmath

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from vekua.dual import ConfigurationError, GroupSpec, enumerate_reps
from vekua.field import TimeCoefficientField, fit_power_law
from vekua.odevekua import (HypothesisError, VekuaTimeOp, apply_vekua_time, boundary_denominators,
                            build_profiles, check_hypotheses, compute_rho, cumulative_integral,
                            integrate_mode_rk, mode_diagonalize, mode_matrix, mode_residual,
                            periodic_derivative, profile_samples, rk4_linear, solve_mode_F,
                            solve_mode_closed, solve_timedep, time_grid)
from vekua.symbol import DiagonalSymbol

T1 = GroupSpec.parse("t1")
S3 = GroupSpec.parse("s3")
S3T1 = GroupSpec.parse(["s3", "t1"])


def top(D="1i*Dt", group=T1, p0=0.0, lam=0.0, delta=0.5, alpha=1.0, q=None, s=0.0, T=256):
    q = {"form": "1-cos", "scale": 1.0} if q is None else q
    sym = D if isinstance(D, DiagonalSymbol) else DiagonalSymbol.from_expr(D, group)
    return VekuaTimeOp(sym, p0, lam, delta, alpha, build_profiles(q, s, T))


def scalar_symbol(sigma):
    # circle symbol equal to sigma at k = 1 and conj(sigma) at k = -1
    return DiagonalSymbol.from_table(T1, {T1.rep(0): 0.0, T1.rep(1): sigma, T1.rep(-1): np.conj(sigma)})


# --- profiles ----------------------------------------------------------------------

def test_profiles_one_minus_cos():
    pr = build_profiles({"form": "1-cos"}, 0.0, 512)
    assert abs(pr.q0 - 2 * np.pi) < 1e-9 and pr.s0 == 0
    assert pr.Q[0] == 0 and pr.Qt[-1] == 0
    assert abs(pr.Qt[0] + pr.q0) <= 1e-12 * pr.q0
    assert np.max(np.abs(pr.Qt - pr.Q + pr.q0)) <= 1e-12 * pr.q0
    t = pr.t
    assert np.max(np.abs(pr.Q - (t - np.sin(t)))) < 1e-10


def test_profiles_constant_q():
    pr = build_profiles(1.0, 0.0, 64)
    assert np.allclose(pr.Q, pr.t, rtol=0, atol=1e-13)
    assert np.allclose(pr.Qt, pr.t - 2 * np.pi, rtol=0, atol=1e-13)


def test_profile_errors_and_forms():
    with pytest.raises(ConfigurationError, match="not identically zero"):
        build_profiles(0.0, 0.0, 16)
    with pytest.raises(ConfigurationError, match="negative"):
        build_profiles(np.cos, 0.0, 16)
    with pytest.raises(ConfigurationError):
        build_profiles(1.0, 0.0, 15)
    t = time_grid(16)
    trig = profile_samples({"form": "trig", "a0": 1, "cos": [0.5], "sin": [0, 0.2]}, 16)
    assert np.allclose(trig, 1 + 0.5 * np.cos(t) + 0.2 * np.sin(2 * t))
    assert np.array_equal(profile_samples({"form": "samples", "values": list(range(16))}, 16)[-1:], [0])


def test_spectral_derivative_and_quadrature_order():
    errs = []
    for T in (16, 32, 64):
        t = time_grid(T)
        y = np.exp(np.sin(t))
        tol = 1e-3 if T == 16 else 1e-9
        assert np.max(np.abs(periodic_derivative(y) - np.cos(t) * y)) < tol
        c = cumulative_integral(y, 2 * np.pi / T)
        c4 = cumulative_integral(y, 2 * np.pi / T, periodic_derivative(y))
        ref = cumulative_integral(np.exp(np.sin(time_grid(4096))), 2 * np.pi / 4096,
                                  periodic_derivative(np.exp(np.sin(time_grid(4096)))))[:: 4096 // T]
        errs.append((np.max(np.abs(c - ref)), np.max(np.abs(c4 - ref))))
    (a2, a4), (b2, b4), (c2, c4_) = errs
    assert a2 / b2 > 3.5 and b4 < b2 and b4 / c4_ > 12


# --- rho and diagonalization ------------------------------------------------------------

def test_rho_examples():
    P = top(lam=0.0, delta=0.5, alpha=1.0)
    assert abs(compute_rho(P, T1.rep(1), 0) - np.sqrt(3) / 2) < 1e-15
    P = top(lam=0.0, delta=0.0, alpha=3 - 4j)
    assert abs(compute_rho(P, T1.rep(2), 0) - 5) < 1e-14
    P = top(lam=0.0, delta=0.6, alpha=1j)
    assert abs(compute_rho(P, T1.rep(0), 0) - 0.8) < 1e-15


def test_rho_imaginary_branch_and_b_violation():
    P = top(D=scalar_symbol(2.0), lam=1.0, delta=0.0, alpha=1.0)
    assert abs(compute_rho(P, T1.rep(1), 0) - 1j * np.sqrt(3)) < 1e-14
    P = top(D=scalar_symbol(0.5), lam=2.0, delta=0.0, alpha=1.0)
    with pytest.raises(HypothesisError, match="b"):
        compute_rho(P, T1.rep(1), 0)


def test_diagonalize_flip_examples():
    P = top(lam=0.0, delta=0.0, alpha=1.0)
    dg = mode_diagonalize(P, T1.rep(1), 0)
    assert np.array_equal(dg.Mtilde, [[0, 1], [1, 0]]) and dg.rho == 1
    assert np.array_equal(dg.T_mat[:, 0], [1, 1]) and np.array_equal(dg.T_mat[:, 1], [1, -1])
    P = top(lam=0.0, delta=0.0, alpha=1j)
    dg = mode_diagonalize(P, T1.rep(1), 0)
    assert np.array_equal(dg.Mtilde, [[0, 1j], [-1j, 0]]) and dg.rho == 1


cplx = st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False)


@given(cplx, st.floats(-3, 3), st.floats(-2, 2), st.floats(0.2, 3), st.floats(0, 2 * np.pi))
def test_diagonalization_identities(sigma, lam, delta, amod, arg):
    alpha = amod * cmath.exp(1j * arg)
    assume(abs(abs(delta) - amod) > 1e-3)
    P = top(D=scalar_symbol(sigma), lam=lam, delta=delta, alpha=alpha, T=8)
    mu = lam * sigma + delta
    assume(abs(abs(alpha) ** 2 - mu * mu) > 1e-2)
    dg = mode_diagonalize(P, T1.rep(1), 0)
    assert abs(dg.rho ** 2 - (abs(alpha) ** 2 - mu * mu)) <= 1e-12 * (1 + abs(mu) ** 2)
    assert dg.rho.real >= 0 and (dg.rho.real > 0 or dg.rho.imag >= 0)
    scale = max(1.0, abs(dg.rho), abs(mu), abs(alpha))
    assert np.max(np.abs(dg.T_mat @ dg.T_inv - np.eye(2))) <= 1e-12 * scale ** 2 / min(1, abs(dg.rho))
    D = dg.T_inv @ dg.Mtilde @ dg.T_mat
    assert np.max(np.abs(D - dg.rho * np.diag([1, -1]))) <= 1e-12 * scale ** 3 / min(1, abs(dg.rho))


@given(st.floats(0.05, 2), st.floats(0.1, 3), st.integers(0, 2**32 - 1))
def test_exponential_weights_bounded(c, rho_re, seed):
    rng = np.random.default_rng(seed)
    a = rng.uniform(0, 0.5, 3)
    pr = build_profiles(lambda t: c * (1 - np.cos(t)) + a[0] * (1 - np.cos(2 * t)), 0.0, 128)
    assert np.all(np.diff(pr.Qt) >= 0)
    i, j = sorted(rng.integers(0, 129, 2))
    assert np.exp(rho_re * (pr.Qt[i] - pr.Qt[j])) <= 1.0


# --- hypotheses ---------------------------------------------------------------------------

def test_hypotheses_example_margin():
    P = top(D="d0^2", group=S3, p0=0.0, lam=0.0, delta=0.5, alpha=1.0, T=512)
    rep = check_hypotheses(P, 10)
    assert rep.ok and not rep.d_checked
    target = abs(np.exp(-np.sqrt(3) * np.pi) - 1)
    assert abs(rep.e_min - target) < 1e-8
    assert all(abs(s["min_denominator"] - target) < 1e-8 for s in rep.e_shells)


def test_hypothesis_a_equality():
    P = top(delta=1.0, alpha=1.0)
    assert not P.a_ok and not check_hypotheses(P, 5).ok


def test_hypothesis_d_linear_growth_fails():
    P = top(D="d0", group=S3, p0=1.0, lam=0.0, delta=0.5, alpha=1.0)
    rep = check_hypotheses(P, 20)
    assert rep.d_checked and not rep.d_ok and rep.d_violations
    assert rep.d_fit.exponent > 0.5


def test_hypothesis_d_log_growth_passes():
    D = DiagonalSymbol.tabulate(S3, lambda r: np.log(r.weight), 25)
    P = top(D=D, group=S3, p0=1.0, lam=0.0, delta=0.5, alpha=1.0)
    rep = check_hypotheses(P, 20)
    assert rep.d_ok and abs(rep.d_constant - 1) < 1e-12
    P = top(D="1i*d0", group=S3, p0=1.0, lam=0.0, delta=0.5, alpha=1.0)
    assert check_hypotheses(P, 20).d_ok


def test_hypothesis_c_and_e_failures():
    # rho -> 0 along a sparse family breaks c); a tuned s0 breaks e)
    P = top(D="1i*d0", group=S3, delta=0.0, alpha=1.0, q=1.0, s=-1.0)
    rep = check_hypotheses(P, 5)
    assert not rep.e_ok and rep.e_violations
    with pytest.raises(HypothesisError, match="DCn"):
        solve_mode_closed(P, S3.rep(0), 0, 0, np.ones((2, P.profiles.grid + 1)))


# --- mode solutions ---------------------------------------------------------------------------

def test_zero_forcing_gives_zero():
    P = top()
    sol = solve_mode_closed(P, T1.rep(1), 0, 0, np.zeros((2, 257)))
    assert not np.any(sol.z1) and not np.any(sol.z2) and not np.any(sol.u_hat)


def test_constant_coefficient_mode_closed_form():
    # q = 1, sigma = 0, p0 = 0, s = 0: z1' = rho z1 + 1 has the periodic solution -1/rho
    P = top(D="1i*Dt", lam=0.0, delta=0.5, alpha=1.0, q=1.0, T=2048)
    G = np.zeros((2, 2049))
    G[0] = 1.0
    sol = solve_mode_closed(P, T1.rep(0), 0, 0, G)
    rho = sol.diag.rho
    t = P.profiles.t
    z_end = -1 / rho
    expected = -(1 / rho) * (1 - np.exp(rho * (t - 2 * np.pi))) + np.exp(rho * (t - 2 * np.pi)) * z_end
    assert np.max(np.abs(sol.z1 - expected)) < 1e-12
    assert np.max(np.abs(sol.z2)) == 0
    assert sol.boundary_residual < 1e-14


def _random_mode_setup(seed, T):
    rng = np.random.default_rng(seed)
    P = top(D="1i*d0 + 0.5i*Dt", group=S3T1, p0=0.3, lam=0.08, delta=0.4, alpha=0.9 + 0.3j,
            q={"form": "1-cos", "scale": 0.4}, s={"form": "trig", "a0": 0.05, "sin": [0.1]}, T=T)
    rep = S3T1.rep(3, 2)
    t = P.profiles.t
    c = rng.normal(size=(2, 4)) + 1j * rng.normal(size=(2, 4))
    F = np.stack([sum(c[a, k] * np.exp(1j * (k - 2) * t) for k in range(4)) for a in range(2)])
    return P, rep, F


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_closed_form_against_rk4(seed):
    devs = []
    for T in (1024, 2048):
        P, rep, F = _random_mode_setup(seed, T)
        sol = solve_mode_F(P, rep, 1, 2, F)
        w_rk = integrate_mode_rk(P, rep, 1, 2, F, sol.w[:, 0])
        devs.append(np.max(np.abs(w_rk - sol.w)))
        assert sol.boundary_residual < 1e-8
        assert mode_residual(P, sol.diag.sigma, sol.w, F) < 1e-6
        # w itself is periodic, so the RK solution started at w(0) returns there
        assert np.max(np.abs(w_rk[:, -1] - sol.w[:, 0])) < 1e-6
    assert devs[1] < 1e-6 and devs[0] / devs[1] >= 4


def test_rk4_trivial_and_exponential():
    T = 4096
    h = 2 * np.pi / T
    w = rk4_linear(np.zeros((T + 1, 2, 2)), np.zeros((2, T + 1)), [1 + 2j, -3], h)
    assert np.array_equal(w[:, -1], [1 + 2j, -3])
    M = np.broadcast_to(np.eye(2), (T + 1, 2, 2))
    w = rk4_linear(M, np.zeros((2, T + 1)), [1, 0], h)
    assert abs(w[0, -1] / np.exp(2 * np.pi) - 1) < 1e-6
    assert np.max(np.abs(w[0] - np.exp(time_grid(T)))) / np.exp(2 * np.pi) < 1e-6


def test_mode_matrix_splits_into_drift_plus_q_mtilde():
    P, rep, _ = _random_mode_setup(0, 64)
    dg = mode_diagonalize(P, rep, 1)
    M = mode_matrix(P, dg.sigma)
    pr = P.profiles
    drift = (dg.sigma * P.p0 + pr.s)[:, None, None] * np.eye(2)
    assert np.allclose(M, drift + pr.q[:, None, None] * dg.Mtilde, atol=1e-14)


# --- field-level solve ---------------------------------------------------------------------------

def _manufactured(P, cutoff, seed, width=10.0):
    rng = np.random.default_rng(seed)
    t = P.profiles.t
    ent = {}
    for rep in enumerate_reps(P.group, cutoff):
        amp = np.exp(-rep.weight ** 2 / width)
        m = {}
        for i in range(rep.dim):
            for j in range(rep.dim):
                c = rng.normal(size=(2, 3)) + 1j * rng.normal(size=(2, 3))
                m[(i, j)] = amp * (c[0, 0] + c[0, 1] * np.cos(t) + c[0, 2] * np.sin(2 * t))
        ent[rep] = m
    return TimeCoefficientField(P.group, P.profiles.grid, ent)


def test_manufactured_solution_small():
    P = top(D="1i*d0 + 1i*Dt", group=S3T1, p0=0.5, lam=0.1, delta=0.3, alpha=1 + 0.5j,
            q={"form": "1-cos", "scale": 0.5}, s={"form": "trig", "a0": 0.1, "sin": [0.2]}, T=512)
    u0 = _manufactured(P, 4, 3)
    f = apply_vekua_time(P, u0)
    diags = []
    u = solve_timedep(P, f, diagnostics=diags)
    err = max(np.max(np.abs(u.get(r, i, j) - u0.get(r, i, j)))
              for r in u0.support for (i, j) in u0.entries_at(r))
    assert err < 1e-8
    assert diags and max(d.residual / (1 + d.f_norm) for d in diags) < 1e-7


def test_solve_zero_rhs_and_threads(monkeypatch):
    P = top(D="1i*d0", group=S3, p0=0.2, lam=0.05, T=128)
    zero = TimeCoefficientField(S3, 128, {S3.rep(1): {(0, 0): np.zeros(129)}})
    u = solve_timedep(P, zero)
    assert u.max_norm() == 0
    f = apply_vekua_time(P, _manufactured(P, 3, 4))
    a = solve_timedep(P, f)
    monkeypatch.setenv("VEKUA_THREADS", "4")
    b = solve_timedep(P, f)
    assert all(np.array_equal(a.get(r, i, j), b.get(r, i, j)) for r in a.support for (i, j) in a.entries_at(r))


def test_solve_rejects_incompatible_symbol_and_bad_grid():
    P = top(D="d0", group=S3, T=64)
    f = TimeCoefficientField(S3, 64, {S3.rep(1): {(0, 0): np.ones(65)}})
    with pytest.raises(HypothesisError) as ei:
        solve_timedep(P, f)
    assert any(x["reason"] == "D not diagonal-compatible" for x in ei.value.failures)
    with pytest.raises(ConfigurationError):
        solve_timedep(top(D="1i*d0", group=S3, T=32), f)
    with pytest.raises(HypothesisError):
        solve_timedep(top(D="1i*d0", group=S3, delta=1.0, alpha=1.0, T=64), f)


def test_boundary_denominators_match_definition():
    P = top(D=scalar_symbol(0.7j), p0=0.4, lam=0.1, delta=0.2, alpha=1.1, s={"form": "const", "value": 0.05})
    dg = mode_diagonalize(P, T1.rep(1), 0)
    pr = P.profiles
    e = 2 * np.pi * dg.sigma * P.p0 + pr.s0
    d1, d2 = boundary_denominators(P, dg.rho, dg.sigma)
    assert abs(d1 - abs(np.exp(-dg.rho * pr.q0) - np.exp(e))) < 1e-14
    assert abs(d2 - abs(np.exp(-dg.rho * pr.q0) - np.exp(-e))) < 1e-14

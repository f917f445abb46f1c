"""Vekua operators with time-dependent coefficients on ``T^1 x G``.

    P u = d_t u - (p0 + i lam q(t)) D u - (s(t) + i delta q(t)) u - alpha q(t) conj(u)

For every group mode the pair ``w = (u_hat, conj(u)_hat)`` solves the periodic
system ``w' = M(t) w + F``.  ``M - (sigma p0 + s) Id = q(t) Mtilde`` is
diagonalized by a constant matrix ``T`` and the two scalar equations are solved
in closed form by quadrature.

Internally the scaled unknown ``W = exp(sigma p0 t + S(t)) z`` is used, so that
``w = T W`` and both components of ``W`` are ``2 pi``-periodic; the integrals
of the closed form become

    W1(t) = -A1(t) + exp(Phi1(t)) A1(0) / (exp(-rho q0) - E)
    W2(t) =  B2(t) + exp(Phi2(t)) B2(2pi) / (1 - exp(-rho q0) E)

with ``Phi1 = rho Qt + sigma p0 t + S``, ``Phi2 = -rho Q + sigma p0 t + S``,
``E = exp(2 pi sigma p0 + s0)``, ``A1(t) = int_t^2pi exp(Phi1(t) - Phi1(tau)) G1``
and ``B2(t) = int_0^t exp(Phi2(t) - Phi2(tau)) G2``.
"""
from __future__ import annotations

import cmath
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .dual import ConfigurationError, RepPoint, enumerate_reps
from .field import PowerLawFit, TimeCoefficientField, fit_power_law
from .symbol import CompatReport, DiagonalSymbol, check_diagonal_compat

ZERO_RTOL = 1e-12
EXPONENT_CAP = 10.0


class HypothesisError(ValueError):
    """A per-mode hypothesis (b, diagonality, (DCn)) fails on the solve support."""

    def __init__(self, message, failures=None):
        self.failures = failures or []
        super().__init__(message)


# --- time grid helpers ---------------------------------------------------------

def time_grid(T: int) -> np.ndarray:
    return np.linspace(0.0, 2 * np.pi, T + 1)


def periodic_derivative(samples: np.ndarray) -> np.ndarray:
    """Spectral ``d/dt`` of periodic samples on the closed grid (last node = first)."""
    y = np.asarray(samples)
    T = y.shape[-1] - 1
    k = np.fft.fftfreq(T, 1.0 / T)
    if T % 2 == 0:
        k[T // 2] = 0.0
    d = np.fft.ifft(1j * k * np.fft.fft(y[..., :T], axis=-1), axis=-1)
    if not np.iscomplexobj(y):
        d = d.real
    return np.concatenate([d, d[..., :1]], axis=-1)


def cumulative_integral(y: np.ndarray, h: float, dy: np.ndarray | None = None) -> np.ndarray:
    """Cumulative trapezoid with the Euler-Maclaurin endpoint correction
    ``h^2/12 (y'(a) - y'(b))`` per step (4th order for smooth ``y``)."""
    y = np.asarray(y)
    steps = 0.5 * h * (y[:-1] + y[1:])
    if dy is not None:
        steps = steps + h * h / 12.0 * (dy[:-1] - dy[1:])
    out = np.zeros_like(steps, shape=y.shape)
    out[1:] = np.cumsum(steps)
    return out


# --- profiles --------------------------------------------------------------------

@dataclass(frozen=True)
class TimeProfiles:
    grid: int
    t: np.ndarray
    q: np.ndarray
    s: np.ndarray
    Q: np.ndarray
    S: np.ndarray
    Qt: np.ndarray
    q0: float
    s0: float

    @property
    def h(self) -> float:
        return 2 * np.pi / self.grid


def profile_samples(spec, T: int, name: str = "q") -> np.ndarray:
    """Samples on the closed grid from a number, callable, array or config dict.

    Dict forms: ``{"form": "const", "value": c}``, ``{"form": "1-cos", "scale": c}``,
    ``{"form": "trig", "a0": c, "cos": [...], "sin": [...]}`` and
    ``{"form": "samples", "values": [...]}``.
    """
    t = time_grid(T)
    if isinstance(spec, Mapping):
        form = spec.get("form")
        if form == "const":
            return np.full(T + 1, float(spec.get("value", 0.0)))
        if form == "1-cos":
            return float(spec.get("scale", 1.0)) * (1.0 - np.cos(t))
        if form == "trig":
            y = np.full(T + 1, float(spec.get("a0", 0.0)))
            for n, c in enumerate(spec.get("cos", []), start=1):
                y += float(c) * np.cos(n * t)
            for n, c in enumerate(spec.get("sin", []), start=1):
                y += float(c) * np.sin(n * t)
            return y
        if form == "samples":
            return profile_samples(np.asarray(spec["values"], dtype=float), T, name)
        raise ConfigurationError(f"unknown profile form {form!r} for {name}")
    if callable(spec):
        return np.asarray(spec(t), dtype=float) * np.ones(T + 1)
    a = np.asarray(spec, dtype=float)
    if a.ndim == 0:
        return np.full(T + 1, float(a))
    if a.shape == (T,):
        return np.append(a, a[0])
    if a.shape == (T + 1,):
        return a.copy()
    raise ConfigurationError(f"{name} samples must have length {T} or {T + 1}")


def build_profiles(q_spec, s_spec, T: int) -> TimeProfiles:
    """Sample ``q`` and ``s`` and tabulate ``Q``, ``S``, ``Qt = Q - q0``."""
    if T < 4 or T % 2:
        raise ConfigurationError("time grid T must be even and >= 4")
    q = profile_samples(q_spec, T, "q")
    s = profile_samples(s_spec, T, "s")
    if np.any(q < 0):
        raise ConfigurationError(f"q is negative at node {int(np.argmax(q < 0))}")
    if not np.any(q > 0):
        raise ConfigurationError("q is not identically zero is required; got q == 0")
    h = 2 * np.pi / T
    Q = cumulative_integral(q, h, periodic_derivative(q))
    S = cumulative_integral(s, h, periodic_derivative(s))
    q0 = float(Q[-1])
    s0 = float(S[-1])
    Qt = Q - q0
    for a in (q, s, Q, S, Qt):
        a.setflags(write=False)
    return TimeProfiles(T, time_grid(T), q, s, Q, S, Qt, q0, s0)


# --- operator ----------------------------------------------------------------------

@dataclass(frozen=True)
class VekuaTimeOp:
    D: DiagonalSymbol
    p0: float
    lam: float
    delta: float
    alpha: complex
    profiles: TimeProfiles
    zero_rtol: float = ZERO_RTOL

    def __post_init__(self):
        object.__setattr__(self, "alpha", complex(self.alpha))
        for name in ("p0", "lam", "delta"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.alpha == 0:
            raise ConfigurationError("alpha must be nonzero")

    @property
    def group(self):
        return self.D.group

    @property
    def a_ok(self) -> bool:
        return abs(abs(self.delta) - abs(self.alpha)) > self.zero_rtol * max(1.0, abs(self.alpha))

    def mu(self, rep: RepPoint, m: int) -> complex:
        return self.lam * complex(self.D.eval(rep)[m]) + self.delta


def _rho_from_sq(r2: complex) -> complex:
    r = cmath.sqrt(r2)
    if r.real < 0 or (r.real == 0 and r.imag < 0):
        r = -r
    return r


def compute_rho(P: VekuaTimeOp, rep: RepPoint, m: int) -> complex:
    """Root of ``|alpha|^2 - (lam sigma_m + delta)^2`` with ``Re >= 0``
    (``Im >= 0`` when purely imaginary)."""
    mu = P.mu(rep, m)
    if abs(abs(mu) - abs(P.alpha)) <= P.zero_rtol * max(1.0, abs(P.alpha)):
        raise HypothesisError(f"hypothesis b) violated at mode {rep} row {m}",
                              [{"rep": rep, "row": m, "reason": "b"}])
    return _rho_from_sq(abs(P.alpha) ** 2 - mu * mu)


@dataclass
class ModeDiag:
    rep: RepPoint
    m: int
    sigma: complex
    mu: complex
    rho: complex
    Mtilde: np.ndarray
    T_mat: np.ndarray
    T_inv: np.ndarray


def mode_diagonalize(P: VekuaTimeOp, rep: RepPoint, m: int) -> ModeDiag:
    rho = compute_rho(P, rep, m)
    sigma = complex(P.D.eval(rep)[m])
    mu = P.lam * sigma + P.delta
    a = P.alpha
    Mt = np.array([[1j * mu, a], [np.conj(a), -1j * mu]], dtype=complex)
    Tm = np.array([[a, a], [rho - 1j * mu, -rho - 1j * mu]], dtype=complex)
    Ti = np.array([[-rho - 1j * mu, -a], [-rho + 1j * mu, a]], dtype=complex) / (-2 * a * rho)
    return ModeDiag(rep, m, sigma, mu, rho, Mt, Tm, Ti)


def mode_matrix(P: VekuaTimeOp, sigma: complex) -> np.ndarray:
    """``M(t)`` samples, shape ``(T+1, 2, 2)``, as in the mode system."""
    pr = P.profiles
    q, s = pr.q, pr.s
    M = np.empty((pr.grid + 1, 2, 2), dtype=complex)
    M[:, 0, 0] = (P.p0 + 1j * P.lam * q) * sigma + (s + 1j * P.delta * q)
    M[:, 0, 1] = P.alpha * q
    M[:, 1, 0] = np.conj(P.alpha) * q
    M[:, 1, 1] = (P.p0 - 1j * P.lam * q) * sigma + (s - 1j * P.delta * q)
    return M


def _exp_diff(a: complex, b: complex):
    """``exp(a) - exp(b)`` as ``(shift, value)`` with ``exp(shift) * value``."""
    c = max(a.real, b.real)
    return c, cmath.exp(a - c) - cmath.exp(b - c)


def boundary_denominators(P: VekuaTimeOp, rho: complex, sigma: complex) -> tuple[float, float]:
    """``|exp(-rho q0) - exp(+-(2 pi sigma p0 + s0))|``."""
    pr = P.profiles
    lE = 2 * np.pi * sigma * P.p0 + pr.s0
    out = []
    for sgn in (1, -1):
        c, v = _exp_diff(-rho * pr.q0, sgn * lE)
        out.append(abs(v) * np.exp(c) if c < 700 else np.inf)
    return out[0], out[1]


@dataclass
class ModeSolution:
    z1: np.ndarray
    z2: np.ndarray
    W: np.ndarray
    w: np.ndarray
    u_hat: np.ndarray
    diag: ModeDiag
    denominators: tuple[float, float]
    boundary_residual: float


# exp(Re Phi) may be split into two factors when its spread stays below this
_SPLIT_RANGE = 1000.0


def _local_terms(Phi, G, dG, dPhi, h, forward: bool):
    # one-step corrected trapezoid weights; e is the step transfer factor
    k = dG - dPhi * G
    if forward:
        e = np.exp(Phi[1:] - Phi[:-1])
        loc = 0.5 * h * (e * G[..., :-1] + G[..., 1:]) + h * h / 12.0 * (e * k[..., :-1] - k[..., 1:])
    else:
        e = np.exp(Phi[:-1] - Phi[1:])
        loc = 0.5 * h * (G[..., :-1] + e * G[..., 1:]) + h * h / 12.0 * (k[..., :-1] - e * k[..., 1:])
    return e, loc


def _backward(Phi, G, dG, dPhi, h):
    """``A(t_i) = int_{t_i}^{2pi} exp(Phi(t_i) - Phi(tau)) G(tau) dtau`` along the last axis."""
    e, loc = _local_terms(Phi, G, dG, dPhi, h, forward=False)
    A = np.zeros(G.shape, dtype=complex)
    re = Phi.real
    if re.max() - re.min() < _SPLIT_RANGE:
        # A_i = sum_{k >= i} exp(Phi_i - Phi_k) loc_k, with a centred shift
        c = 0.5 * (re.max() + re.min())
        terms = np.exp(c - Phi[:-1]) * loc
        A[..., :-1] = np.exp(Phi[:-1] - c) * np.cumsum(terms[..., ::-1], axis=-1)[..., ::-1]
        return A
    for i in range(G.shape[-1] - 2, -1, -1):
        A[..., i] = e[i] * A[..., i + 1] + loc[..., i]
    return A


def _forward(Phi, G, dG, dPhi, h):
    """``B(t_i) = int_0^{t_i} exp(Phi(t_i) - Phi(tau)) G(tau) dtau`` along the last axis."""
    e, loc = _local_terms(Phi, G, dG, dPhi, h, forward=True)
    B = np.zeros(G.shape, dtype=complex)
    re = Phi.real
    if re.max() - re.min() < _SPLIT_RANGE:
        # B_j = sum_{k < j} exp(Phi_j - Phi_{k+1}) loc_k
        c = 0.5 * (re.max() + re.min())
        terms = np.exp(c - Phi[1:]) * loc
        B[..., 1:] = np.exp(Phi[1:] - c) * np.cumsum(terms, axis=-1)
        return B
    for i in range(G.shape[-1] - 1):
        B[..., i + 1] = e[i] * B[..., i] + loc[..., i]
    return B


def solve_mode_closed(P: VekuaTimeOp, rep: RepPoint, m: int, n: int, Gpair) -> ModeSolution:
    """Closed-form periodic solution of one mode from ``G = T^-1 F``.

    ``Gpair`` has shape ``(2, T+1)``, or ``(2, K, T+1)`` for ``K`` columns of
    the same row solved together.  The column ``n`` does not enter the
    formulas; it is accepted to identify the mode.
    """
    if not P.a_ok:
        raise HypothesisError("hypothesis a) violated: |delta| == |alpha|")
    diag = mode_diagonalize(P, rep, m)
    pr = P.profiles
    G = np.asarray(Gpair, dtype=complex)
    if G.shape[0] != 2 or G.shape[-1] != pr.grid + 1 or G.ndim not in (2, 3):
        raise ConfigurationError(f"G samples must have shape (2, {pr.grid + 1}) or (2, K, {pr.grid + 1})")
    rho, sigma = diag.rho, diag.sigma
    den = boundary_denominators(P, rho, sigma)
    tol = P.zero_rtol
    if min(den) <= tol:
        raise HypothesisError(f"condition (DCn) violated at mode {rep} row {m}",
                              [{"rep": rep, "row": m, "reason": "DCn", "denominators": den}])
    h = pr.h
    t = pr.t
    drift = sigma * P.p0 * t + pr.S
    Phi1 = rho * pr.Qt + drift
    Phi2 = -rho * pr.Q + drift
    dPhi1 = rho * pr.q + sigma * P.p0 + pr.s
    dPhi2 = -rho * pr.q + sigma * P.p0 + pr.s
    dG = periodic_derivative(G)
    A1 = _backward(Phi1, G[0], dG[0], dPhi1, h)
    B2 = _forward(Phi2, G[1], dG[1], dPhi2, h)
    lE = 2 * np.pi * sigma * P.p0 + pr.s0
    c1, d1 = _exp_diff(-rho * pr.q0, lE)
    W1 = -A1 + np.exp(Phi1 - c1) * (A1[..., :1] / d1)
    c2, d2 = _exp_diff(0j, Phi2[-1])
    W2 = B2 + np.exp(Phi2 - c2) * (B2[..., -1:] / d2)
    W = np.stack([W1, W2])
    w = np.einsum("ab,b...->a...", diag.T_mat, W)
    scale = np.exp(-drift)
    z1, z2 = W1 * scale, W2 * scale
    E = np.exp(lE)
    zres = np.abs(np.stack([z1[..., 0], z2[..., 0]]) - E * np.stack([z1[..., -1], z2[..., -1]]))
    zscale = 1.0 + np.abs(np.stack([z1[..., 0], z2[..., 0]]))
    return ModeSolution(z1, z2, W, w, w[0], diag, den, float(np.max(zres / zscale)))


def solve_mode_F(P: VekuaTimeOp, rep: RepPoint, m: int, n: int, Fpair) -> ModeSolution:
    """As :func:`solve_mode_closed` from the forcing ``F`` (``G = T^-1 F``)."""
    diag = mode_diagonalize(P, rep, m)
    G = np.einsum("ab,b...->a...", diag.T_inv, np.asarray(Fpair, dtype=complex))
    return solve_mode_closed(P, rep, m, n, G)


def rk4_linear(M: np.ndarray, F: np.ndarray, w0, h: float) -> np.ndarray:
    """Classical RK4 for ``w' = M(t) w + F(t)`` on a uniform grid.

    Steps of size ``2h`` use the odd nodes as midpoints; odd nodes are then
    filled by cubic Hermite interpolation with slopes from the equation.
    """
    N = M.shape[0] - 1
    if N % 2:
        raise ConfigurationError("grid must have an even number of intervals")
    w = np.zeros((N + 1, 2), dtype=complex)
    w[0] = w0

    def rhs(k, y):
        return M[k] @ y + F[:, k]

    H = 2 * h
    for k in range(0, N, 2):
        y = w[k]
        k1 = rhs(k, y)
        k2 = rhs(k + 1, y + 0.5 * H * k1)
        k3 = rhs(k + 1, y + 0.5 * H * k2)
        k4 = rhs(k + 2, y + H * k3)
        w[k + 2] = y + H / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    for k in range(0, N, 2):
        y0, y1 = w[k], w[k + 2]
        d0, d1 = rhs(k, y0), rhs(k + 2, y1)
        w[k + 1] = 0.5 * (y0 + y1) + H / 8.0 * (d0 - d1)
    return w.T


def integrate_mode_rk(P: VekuaTimeOp, rep: RepPoint, m: int, n: int, Fpair, w_init) -> np.ndarray:
    """RK4 integration of the mode system from ``w(0) = w_init``; shape ``(2, T+1)``."""
    sigma = complex(P.D.eval(rep)[m])
    F = np.asarray(Fpair, dtype=complex)
    return rk4_linear(mode_matrix(P, sigma), F, np.asarray(w_init, dtype=complex), P.profiles.h)


# --- hypotheses ------------------------------------------------------------------

@dataclass
class HypothesisReport:
    cutoff: float
    a_ok: bool
    b_ok: bool
    b_violations: list
    diagonal_ok: bool
    diagonal: CompatReport | None
    c_fit: PowerLawFit | None
    c_ok: bool
    d_checked: bool
    d_ok: bool
    d_constant: float | None
    d_fit: PowerLawFit | None
    d_violations: list
    e_min: float | None
    e_shells: list
    e_fit: PowerLawFit | None
    e_ok: bool
    e_violations: list
    caveat: str = "truncation-limited"

    @property
    def ok(self) -> bool:
        return self.a_ok and self.b_ok and self.diagonal_ok and self.c_ok and self.d_ok and self.e_ok

    def as_dict(self) -> dict:
        def fit(f):
            return None if f is None else f.as_dict()

        def modes(v):
            return [{"rep": list(x["rep"].index), "row": x["row"], **{k: y for k, y in x.items()
                                                                   if k not in ("rep", "row")}}
                    for x in v[:50]]
        return {
            "cutoff": self.cutoff,
            "ok": self.ok,
            "a_ok": self.a_ok,
            "b_ok": self.b_ok,
            "b_violations": modes(self.b_violations),
            "diagonal_ok": self.diagonal_ok,
            "diagonal": None if self.diagonal is None else self.diagonal.as_dict(),
            "c_ok": self.c_ok,
            "c_fit": fit(self.c_fit),
            "c_j0": None if self.c_fit is None else -self.c_fit.exponent,
            "d_checked": self.d_checked,
            "d_ok": self.d_ok,
            "d_constant": self.d_constant,
            "d_fit": fit(self.d_fit),
            "d_violations": modes(self.d_violations),
            "e_ok": self.e_ok,
            "e_min": self.e_min,
            "e_fit": fit(self.e_fit),
            "e_violations": modes(self.e_violations),
            "e_shells": self.e_shells,
            "caveat": self.caveat,
        }


D_LOG_EXPONENT_MAX = 0.25


def check_hypotheses(P: VekuaTimeOp, cutoff: float, cap: float = EXPONENT_CAP) -> HypothesisReport:
    """Evaluate hypotheses a)-e) and the diagonality of ``D`` on every mode.

    c) and e) fit lower power-law bounds on per-shell minima.  d) (only for
    ``p0 != 0``) fits the growth of ``max |Re sigma| / log <xi>`` per shell
    and accepts exponents up to ``D_LOG_EXPONENT_MAX``; it also needs
    ``Re sigma = 0`` on the trivial rep where ``log <xi> = 0``.
    """
    reps = enumerate_reps(P.group, cutoff)
    diag = check_diagonal_compat(P.D, cutoff)
    pr = P.profiles
    tolb = P.zero_rtol * max(1.0, abs(P.alpha))
    b_viol, d_viol, e_viol = [], [], []
    shell_rho: dict[int, float] = {}
    shell_e: dict[int, float] = {}
    shell_d: dict[int, float] = {}
    wts: dict[int, float] = {}
    e_min = None
    d_trivial_bad = False
    for rep in reps:
        if not P.D.defined_at(rep):
            continue
        sig = np.asarray(P.D.eval(rep), dtype=complex)
        mu = P.lam * sig + P.delta
        k4 = rep.weight_sq4
        wts[k4] = rep.weight
        bad_b = np.abs(np.abs(mu) - abs(P.alpha)) <= tolb
        for i in np.flatnonzero(bad_b):
            b_viol.append({"rep": rep, "row": int(i), "abs_mu": float(abs(mu[i]))})
        rho = np.array([_rho_from_sq(abs(P.alpha) ** 2 - x * x) for x in mu])
        good = ~bad_b
        if good.any():
            shell_rho[k4] = min(shell_rho.get(k4, np.inf), float(np.abs(rho[good]).min()))
        for i in np.flatnonzero(good):
            d1, d2 = boundary_denominators(P, rho[i], sig[i])
            e = min(d1, d2)
            shell_e[k4] = min(shell_e.get(k4, np.inf), e)
            e_min = e if e_min is None else min(e_min, e)
            if e <= P.zero_rtol:
                e_viol.append({"rep": rep, "row": int(i), "denominators": [d1, d2]})
        if P.p0 != 0:
            a = float(np.max(np.abs(sig.real)))
            if rep.weight_sq4 == 4:
                if a > 1e-12:
                    d_trivial_bad = True
                    d_viol.append({"rep": rep, "row": int(np.argmax(np.abs(sig.real))), "abs_a": a})
            else:
                shell_d[k4] = max(shell_d.get(k4, 0.0), a / np.log(rep.weight))

    def fit_lower(shell):
        keys = [k for k in shell if np.isfinite(shell[k]) and shell[k] > 0]
        if len(keys) < 3:
            return None
        return fit_power_law(np.array([shell[k] for k in keys]), "lower_bound",
                             weights=np.array([wts[k] for k in keys]))

    c_fit = fit_lower(shell_rho)
    c_ok = not b_viol and (c_fit is None or c_fit.exponent >= -cap)
    e_fit = fit_lower(shell_e)
    e_ok = not e_viol and e_min is not None and (e_fit is None or e_fit.exponent >= -cap)
    e_shells = [{"weight": wts[k], "min_denominator": shell_e[k]} for k in sorted(shell_e)]

    d_checked = P.p0 != 0
    d_fit, d_const, d_ok = None, None, True
    if d_checked:
        d_const = max(shell_d.values(), default=0.0)
        keys = sorted(shell_d)
        vals = np.array([shell_d[k] for k in keys])
        if np.count_nonzero(vals) >= 3:
            d_fit = fit_power_law(vals, "upper_growth", weights=np.array([wts[k] for k in keys]))
        grows = d_fit is not None and not d_fit.identically_zero and d_fit.exponent > D_LOG_EXPONENT_MAX
        d_ok = not grows and not d_trivial_bad
        if grows:
            # offenders: modes in the shells where the ratio exceeds its lower-half maximum
            half = keys[: max(1, len(keys) // 2)]
            ref = max(shell_d[k] for k in half)
            top = {k for k in keys if shell_d[k] > ref}
            for rep in reps:
                if rep.weight_sq4 in top:
                    sig = np.asarray(P.D.eval(rep))
                    i = int(np.argmax(np.abs(sig.real)))
                    d_viol.append({"rep": rep, "row": i, "abs_a": float(abs(sig[i].real)),
                                   "log_weight": float(np.log(rep.weight))})
    return HypothesisReport(
        cutoff=float(cutoff), a_ok=P.a_ok, b_ok=not b_viol, b_violations=b_viol,
        diagonal_ok=diag.compat, diagonal=diag, c_fit=c_fit, c_ok=c_ok,
        d_checked=d_checked, d_ok=d_ok, d_constant=d_const, d_fit=d_fit, d_violations=d_viol,
        e_min=e_min, e_shells=e_shells, e_fit=e_fit, e_ok=e_ok, e_violations=e_viol)


# --- fields ------------------------------------------------------------------------

def _threads() -> int:
    try:
        return max(1, int(os.environ.get("VEKUA_THREADS", "1")))
    except ValueError:
        return 1


def apply_vekua_time(P: VekuaTimeOp, u: TimeCoefficientField) -> TimeCoefficientField:
    """Coefficients of ``P u``; ``d_t`` by spectral differentiation on the grid."""
    pr = P.profiles
    if u.grid != pr.grid:
        raise ConfigurationError("field grid does not match the profiles")
    out: dict = {}
    q, s = pr.q, pr.s
    for rep in u.support:
        ent = u.entries_at(rep)
        c = rep.conjugate()
        centries = u.entries_at(c)
        sig = P.D.eval(rep)
        sgn = rep.entry_sign
        d = rep.dim
        keys = set(ent) | {(d - 1 - i, d - 1 - j) for (i, j) in centries}
        res = {}
        for (i, j) in keys:
            x = u.get(rep, i, j)
            y = sgn[i] * sgn[j] * np.conj(u.get(c, d - 1 - i, d - 1 - j))
            res[(i, j)] = (periodic_derivative(x) - (P.p0 + 1j * P.lam * q) * sig[i] * x
                           - (s + 1j * P.delta * q) * x - P.alpha * q * y)
        out[rep] = res
    return TimeCoefficientField(u.group, u.grid, out)


@dataclass
class ModeDiagnostics:
    rep: RepPoint
    entry: tuple[int, int]
    rho: complex
    denominators: tuple[float, float]
    residual: float
    boundary_residual: float
    f_norm: float

    def row(self) -> list:
        return [" ".join(map(str, self.rep.index)), self.entry[0], self.entry[1],
                repr(self.rho.real), repr(self.rho.imag), repr(self.denominators[0]),
                repr(self.denominators[1]), repr(self.residual), repr(self.boundary_residual)]


DIAG_HEADER = ["rep", "row", "col", "rho_re", "rho_im", "den_plus", "den_minus",
               "residual", "boundary_residual"]


class ResidualError(ValueError):
    def __init__(self, failures):
        self.failures = failures
        super().__init__(f"mode residual above tolerance at {len(failures)} mode(s)")


def mode_residual(P: VekuaTimeOp, sigma: complex, w: np.ndarray, F: np.ndarray, axis_max: bool = True):
    """``max |w' - M w - F|`` with ``w'`` by spectral differentiation.

    ``w`` and ``F`` have shape ``(2, T+1)`` or ``(2, K, T+1)``; with
    ``axis_max=False`` the per-column maxima are returned.
    """
    M = mode_matrix(P, sigma)
    r = periodic_derivative(w) - np.einsum("tab,b...t->a...t", M, w) - F
    a = np.abs(r).max(axis=(0, -1))
    return float(np.max(a)) if axis_max else a


def solve_timedep(P: VekuaTimeOp, f: TimeCoefficientField, cutoff: float | None = None,
                  diagnostics: list | None = None, residual_rtol: float = 1e-4) -> TimeCoefficientField:
    """Mode-by-mode periodic solution of ``P u = f``.

    Each conjugate pair of entries is solved once.  Failing hypotheses on the
    support abort the solve with every offending mode listed; so does a mode
    residual above ``residual_rtol * (1 + max|F|)``.
    """
    pr = P.profiles
    if f.grid != pr.grid:
        raise ConfigurationError("right-hand side grid does not match the profiles")
    if not P.a_ok:
        raise HypothesisError("hypothesis a) violated: |delta| == |alpha|")
    # pairs sharing (rep, row) share rho, sigma and the phases: solve them together
    groups: dict = {}
    for rep, i, j in f.modes():
        if cutoff is not None and rep.weight > cutoff * (1 + 1e-14):
            continue
        groups.setdefault((rep, i), []).append(j)
    failures = []
    for rep in {r for r, _ in groups}:
        c = rep.conjugate()
        if not (P.D.defined_at(rep) and P.D.defined_at(c)):
            failures.append({"rep": rep, "row": None, "reason": "symbol undefined"})
            continue
        sig, sigb = P.D.eval(rep), P.D.eval(c)[::-1]
        bad = np.abs(np.conj(sigb) - sig) > 1e-12 * (1 + np.abs(sig))
        for i in np.flatnonzero(bad):
            failures.append({"rep": rep, "row": int(i), "reason": "D not diagonal-compatible"})
    for rep, i in groups:
        try:
            rho = compute_rho(P, rep, i)
            den = boundary_denominators(P, rho, complex(P.D.eval(rep)[i]))
            if min(den) <= P.zero_rtol:
                failures.append({"rep": rep, "row": i, "reason": "DCn", "denominators": den})
        except HypothesisError as e:
            failures.extend(e.failures)
    if failures:
        raise HypothesisError(f"hypotheses fail at {len(failures)} mode(s)", failures)

    def work(key):
        rep, i = key
        cols = groups[key]
        c = rep.conjugate()
        d = rep.dim
        sg = rep.entry_sign
        F = np.empty((2, len(cols), pr.grid + 1), dtype=complex)
        for k, j in enumerate(cols):
            F[0, k] = f.get(rep, i, j)
            F[1, k] = sg[i] * sg[j] * np.conj(f.get(c, d - 1 - i, d - 1 - j))
        sol = solve_mode_F(P, rep, i, 0, F)
        res = mode_residual(P, sol.diag.sigma, sol.w, F, axis_max=False)
        fn = np.abs(F).max(axis=(0, 2))
        E = np.exp(2 * np.pi * sol.diag.sigma * P.p0 + pr.s0)
        z0 = np.stack([sol.z1[:, 0], sol.z2[:, 0]])
        zT = np.stack([sol.z1[:, -1], sol.z2[:, -1]])
        bres = (np.abs(z0 - E * zT) / (1.0 + np.abs(z0))).max(axis=0)
        return key, sol, res, fn, bres

    with ThreadPoolExecutor(max_workers=_threads()) as ex:
        results = list(ex.map(work, groups))
    out: dict = {}
    bad = []
    for (rep, i), sol, res, fn, bres in results:
        c = rep.conjugate()
        d = rep.dim
        sg = rep.entry_sign
        for k, j in enumerate(groups[(rep, i)]):
            out.setdefault(rep, {})[(i, j)] = sol.w[0, k]
            if (c, d - 1 - i, d - 1 - j) != (rep, i, j):
                out.setdefault(c, {})[(d - 1 - i, d - 1 - j)] = sg[i] * sg[j] * np.conj(sol.w[1, k])
            if diagnostics is not None:
                diagnostics.append(ModeDiagnostics(rep, (i, j), sol.diag.rho, sol.denominators,
                                                   float(res[k]), float(bres[k]), float(fn[k])))
            if res[k] > residual_rtol * (1 + fn[k]):
                bad.append({"rep": rep, "row": i, "col": j, "residual": float(res[k])})
    if bad:
        raise ResidualError(bad)
    return TimeCoefficientField(f.group, f.grid, out)


def sup_in_time(u: TimeCoefficientField) -> dict:
    return u.sup_by_rep()

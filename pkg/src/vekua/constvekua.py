"""Constant-coefficient Vekua operators ``Pu = Lu - q u - p conj(u)``.

Every coefficient ``u_hat(xi)[i, j]`` is coupled to its conjugate partner
``u_hat(conj xi)[i', j']`` with ``i' = dim-1-i``.  With
``x = u_hat(xi)[i, j]`` and ``y = s * conj(u_hat(conj xi)[i', j'])`` (``s`` the
entry phase) the pair solves

    [[sigma_i(xi) - q,   -p                          ]] [x]   [f_hat(xi)[i, j]      ]
    [[-conj(p),          conj(sigma_i'(conj xi)) - conj(q)]] [y] = [s conj(f_hat(conj xi)[i', j'])]

and its determinant ``Delta`` depends on the row ``i`` only.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .dual import ConfigurationError, RepPoint, _order_key, enumerate_reps
from .field import (CoefficientField, PowerLawFit, apply_multiplier, conj_field,
                    field_combine, fit_power_law)
from .symbol import CompatReport, DiagonalSymbol, check_diagonal_compat

ZERO_RTOL = 1e-12
ADMISSIBLE_RTOL = 1e-10


class InadmissibleError(ValueError):
    """Right-hand side violates the compatibility relation at singular modes."""

    def __init__(self, violations):
        self.violations = violations
        head = ", ".join(f"{v['rep']} entry {v['entry']}" for v in violations[:5])
        more = "" if len(violations) <= 5 else f" (+{len(violations) - 5} more)"
        super().__init__(f"inadmissible at singular mode: {head}{more}")


@dataclass(frozen=True)
class VekuaConstOp:
    L: DiagonalSymbol
    p: complex
    q: complex
    zero_rtol: float = ZERO_RTOL

    def __post_init__(self):
        object.__setattr__(self, "p", complex(self.p))
        object.__setattr__(self, "q", complex(self.q))
        if self.p == 0:
            raise ConfigurationError("p must be nonzero")

    @property
    def group(self):
        return self.L.group

    def zero_tol(self, rep: RepPoint) -> float:
        """Scale-aware singularity threshold ``rtol * max(1, <xi>^(2K))``."""
        return self.zero_rtol * max(1.0, rep.weight ** (2 * self.L.order))

    def compat(self, cutoff: float) -> CompatReport:
        return check_diagonal_compat(self.L, cutoff)


def _entry(rep: RepPoint, entry) -> tuple[int, int]:
    if isinstance(entry, (int, np.integer)):
        i, j = int(entry), int(entry)
    else:
        i, j = (int(x) for x in entry)
    if not (0 <= i < rep.dim and 0 <= j < rep.dim):
        raise ConfigurationError(f"entry {(i, j)} out of range at {rep}")
    return i, j


@dataclass
class ModeSystem2x2:
    rep: RepPoint
    entry: tuple[int, int]
    partner_rep: RepPoint
    partner_entry: tuple[int, int]
    phase: float
    A: np.ndarray
    det: complex
    self_partner: bool


def build_mode_system(P: VekuaConstOp, rep: RepPoint, entry) -> ModeSystem2x2:
    """Assemble the coupled system from ``P`` at the mode and at its partner.

    Row one is the ``(i, j)`` coefficient of ``Pu``.  Row two is the
    ``(i', j')`` coefficient of ``Pu`` at the conjugate rep, conjugated and
    multiplied by the entry phase, so that both rows are in the unknowns
    ``(x, y)`` described in the module docstring.
    """
    i, j = _entry(rep, entry)
    c = rep.conjugate()
    d = rep.dim
    ib, jb = d - 1 - i, d - 1 - j
    s = float(rep.entry_sign[i] * rep.entry_sign[j])
    sig = P.L.eval(rep)[i]
    sig_bar = P.L.eval(c)[ib]
    # partner row: (Pu)^(c)[ib, jb] = (sig_bar - q) u(c)[ib, jb] - p conj-coefficient,
    # and conj(u)^(c)[ib, jb] = s conj(u(xi)[i, j]); conjugating and scaling by s
    # turns it into an equation in x and y.
    A = np.array([[sig - P.q, -P.p],
                  [-np.conj(P.p), np.conj(sig_bar) - np.conj(P.q)]], dtype=complex)
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    return ModeSystem2x2(rep, (i, j), c, (ib, jb), s, A, complex(det), c == rep and (i, j) == (ib, jb))


def discriminant(P: VekuaConstOp, rep: RepPoint, k: int) -> complex:
    """Determinant of the row-``k`` system (independent of the column)."""
    return build_mode_system(P, rep, (k, k)).det


def discriminant_closed_form(sigma: complex, p: complex, q: complex) -> complex:
    """``sigma^2 - 2 sigma Re(q) + |q|^2 - |p|^2``; valid when the partner
    symbol satisfies ``conj(sigma(conj xi)[i']) == sigma(xi)[i]``."""
    return sigma * sigma - 2 * sigma * q.real + abs(q) ** 2 - abs(p) ** 2


def _real_system(a11: complex, p: complex) -> np.ndarray:
    # x -> a11 x - p conj(x) as a real 2x2 map on (Re x, Im x)
    return np.array([[a11.real - p.real, -a11.imag - p.imag],
                     [a11.imag - p.imag, a11.real + p.real]])


def _canonical(rep: RepPoint, i: int, j: int) -> bool:
    """Deterministic choice of which member of a conjugate pair is 'the mode'."""
    c = rep.conjugate()
    if c != rep:
        return _order_key(rep) < _order_key(c)
    d = rep.dim
    return i * d + j < (d - 1 - i) * d + (d - 1 - j)


def cramer_solve_mode(P: VekuaConstOp, rep: RepPoint, entry, fhat_pair):
    """Solve one coupled pair.

    ``fhat_pair = (f_hat(xi)[i, j], f_hat(conj xi)[i', j'])``.  Returns
    ``(u_hat(xi)[i, j], u_hat(conj xi)[i', j'])``.  At a singular mode the
    admissible right-hand side gets the selected solution ``u_hat(xi)[i, j] = 0``,
    ``u_hat(conj xi)[i', j'] = -s conj(f_hat(xi)[i, j]) / conj(p)``.
    Self-partner entries (``y = conj(x)``) are solved as a real 2x2 system,
    taking the minimum-norm solution when singular.
    """
    M = build_mode_system(P, rep, entry)
    f1 = complex(fhat_pair[0])
    fb = complex(fhat_pair[1])
    s = M.phase
    f2 = s * np.conj(fb)
    a11, a22 = M.A[0, 0], M.A[1, 1]
    p = P.p
    tol = P.zero_tol(rep)
    singular = abs(M.det) <= tol
    if M.self_partner:
        if abs(f1 - fb) > 1e-14 * (1 + abs(f1)):
            raise ConfigurationError("self-partner entry needs equal pair values")
        R = _real_system(a11, p)
        b = np.array([f1.real, f1.imag])
        if singular:
            rel = a22 * f1 + p * f2
            if abs(rel) > ADMISSIBLE_RTOL * (1 + abs(f1)):
                raise InadmissibleError([{"rep": rep, "entry": M.entry, "residual": abs(rel)}])
            sol = np.linalg.lstsq(R, b, rcond=None)[0]
        else:
            sol = np.linalg.solve(R, b)
        x = complex(sol[0], sol[1])
        return x, x
    if singular:
        rel = a22 * f1 + p * f2
        if abs(rel) > ADMISSIBLE_RTOL * (1 + abs(f1) + abs(f2)):
            raise InadmissibleError([{"rep": rep, "entry": M.entry, "residual": abs(rel)}])
        if _canonical(rep, *M.entry):
            return 0j, complex(-s * np.conj(f1) / np.conj(p))
        return complex(-f2 / np.conj(p)), 0j
    x = (a22 * f1 + p * f2) / M.det
    y = (a11 * f2 + np.conj(p) * f1) / M.det
    return complex(x), complex(s * np.conj(y))


def apply_vekua(P: VekuaConstOp, u: CoefficientField) -> CoefficientField:
    """``Lu - q u - p conj(u)`` in coefficient space."""
    return field_combine(1.0, field_combine(1.0, apply_multiplier(P.L, u), -P.q, u),
                         -P.p, conj_field(u))


# --- per-rep vectorized pieces ---------------------------------------------

def _rep_blocks(P: VekuaConstOp, rep: RepPoint):
    c = rep.conjugate()
    sig = P.L.eval(rep)
    sig_bar = P.L.eval(c)[::-1]
    a11 = (sig - P.q)[:, None]
    a22 = (np.conj(sig_bar) - np.conj(P.q))[:, None]
    det = (a11 * a22 - abs(P.p) ** 2)[:, 0]
    return a11, a22, det


def _self_partner_mask(rep: RepPoint) -> np.ndarray:
    d = rep.dim
    m = np.zeros((d, d), dtype=bool)
    if rep.conjugate() == rep and d % 2 == 1:
        m[d // 2, d // 2] = True
    return m


def _canonical_mask(rep: RepPoint) -> np.ndarray:
    c = rep.conjugate()
    d = rep.dim
    if c != rep:
        return np.full((d, d), _order_key(rep) < _order_key(c))
    flat = np.arange(d * d).reshape(d, d)
    return flat < flat[::-1, ::-1]


def _admissibility_residual(P, rep, F1, F2):
    a11, a22, det = _rep_blocks(P, rep)
    rel = a22 * F1 + P.p * F2
    scale = ADMISSIBLE_RTOL * (1 + np.abs(F1) + np.abs(F2))
    return det, rel, scale


@dataclass
class AdmissibilityReport:
    admissible: bool
    violations: list = field(default_factory=list)
    n_singular: int = 0


def is_admissible(P: VekuaConstOp, f: CoefficientField, cutoff: float | None = None) -> AdmissibilityReport:
    """Check ``a22 f_hat + p * s conj(partner f_hat) = 0`` at every singular entry."""
    fc = conj_field(f)
    viol = []
    n_sing = 0
    for rep in f.support:
        if cutoff is not None and rep.weight > cutoff * (1 + 1e-14):
            continue
        F1, F2 = f[rep], fc[rep]
        det, rel, scale = _admissibility_residual(P, rep, F1, F2)
        sing = np.abs(det) <= P.zero_tol(rep)
        if not sing.any():
            continue
        n_sing += int(sing.sum()) * rep.dim
        bad = sing[:, None] & (np.abs(rel) > scale)
        for i, j in zip(*np.nonzero(bad)):
            viol.append({"rep": rep, "entry": (int(i), int(j)), "residual": float(abs(rel[i, j]))})
    return AdmissibilityReport(not viol, viol, n_sing)


def solve_const(P: VekuaConstOp, f: CoefficientField, cutoff: float | None = None) -> CoefficientField:
    """Mode-by-mode solution of ``Pu = f`` over the support of ``f``.

    Raises :class:`InadmissibleError` listing every offending singular entry.
    """
    if f.group != P.group:
        raise ConfigurationError("operator and right-hand side live on different groups")
    fc = conj_field(f)
    out = {}
    viol = []
    for rep in f.support:
        if cutoff is not None and rep.weight > cutoff * (1 + 1e-14):
            continue
        F1, F2 = f[rep], fc[rep]
        a11, a22, det = _rep_blocks(P, rep)
        tol = P.zero_tol(rep)
        sing = np.abs(det) <= tol
        safe = np.where(sing, 1.0, det)[:, None]
        X = (a22 * F1 + P.p * F2) / safe
        selfm = _self_partner_mask(rep)
        if sing.any():
            rel = a22 * F1 + P.p * F2
            scale = ADMISSIBLE_RTOL * (1 + np.abs(F1) + np.abs(F2))
            bad = sing[:, None] & (np.abs(rel) > scale)
            for i, j in zip(*np.nonzero(bad)):
                viol.append({"rep": rep, "entry": (int(i), int(j)), "residual": float(abs(rel[i, j]))})
            canon = _canonical_mask(rep)
            S = np.broadcast_to(sing[:, None], X.shape)
            X = np.where(S & canon, 0j, X)
            X = np.where(S & ~canon, -F2 / np.conj(P.p), X)
        for i, j in zip(*np.nonzero(selfm)):
            if sing[i]:
                try:
                    X[i, j] = cramer_solve_mode(P, rep, (i, j), (F1[i, j], F1[i, j]))[0]
                except InadmissibleError:
                    pass  # already listed above
        out[rep] = X
    if viol:
        raise InadmissibleError(viol)
    return CoefficientField(f.group, out)


def relative_residual(P: VekuaConstOp, u: CoefficientField, f: CoefficientField) -> float:
    r = field_combine(1.0, apply_vekua(P, u), -1.0, f)
    return r.max_norm() / max(1.0, f.max_norm())


# --- Diophantine scan --------------------------------------------------------

@dataclass
class ModeTable:
    """Flat table of ``(rep, row)`` modes with partner rows and symbol values."""

    reps: list
    rep_id: np.ndarray
    row: np.ndarray
    weight_sq4: np.ndarray
    weight: np.ndarray
    sigma: np.ndarray
    sigma_partner: np.ndarray
    self_partner: np.ndarray


def mode_table(P: VekuaConstOp, cutoff: float) -> ModeTable:
    reps = enumerate_reps(P.group, cutoff)
    pos = {r: n for n, r in enumerate(reps)}
    dims = np.array([r.dim for r in reps])
    offs = np.concatenate([[0], np.cumsum(dims)[:-1]])
    rep_id = np.repeat(np.arange(len(reps)), dims)
    row = np.arange(int(dims.sum())) - offs[rep_id]
    conj_id = np.array([pos[r.conjugate()] for r in reps])
    partner = offs[conj_id][rep_id] + (dims[rep_id] - 1 - row)
    sigma = P.L.eval_reps(reps)
    w4 = np.array([r.weight_sq4 for r in reps])[rep_id]
    selfp = (conj_id[rep_id] == rep_id) & (2 * row == dims[rep_id] - 1)
    return ModeTable(reps, rep_id, row, w4, np.sqrt(w4) / 2.0, sigma, sigma[partner], selfp)


def mode_discriminants(P: VekuaConstOp, table: ModeTable) -> np.ndarray:
    return (table.sigma - P.q) * (np.conj(table.sigma_partner) - np.conj(P.q)) - abs(P.p) ** 2


GS_EXPONENT_CAP = 10.0


@dataclass
class DiophantineReport:
    cutoff: float
    zero_rtol: float
    n_modes: int
    zeros: list
    shells: list
    min_abs_disc: float | None
    dc_fit: PowerLawFit | None
    dcprime_fit: PowerLawFit | None
    verdicts: list
    notes: list = field(default_factory=list)
    compat: CompatReport | None = None
    caveat: str = "truncation-limited"

    @property
    def verdict(self) -> str:
        return " & ".join(self.verdicts)

    def as_dict(self) -> dict:
        return {
            "tool": "vekua",
            "version": __version__,
            "cutoff": self.cutoff,
            "tolerances": {"zero_rtol": self.zero_rtol},
            "n_modes": self.n_modes,
            "n_zeros": len(self.zeros),
            "zeros": [_mode_dict(r, i) for r, i in self.zeros],
            "min_abs_disc": self.min_abs_disc,
            "dc_fit": None if self.dc_fit is None else self.dc_fit.as_dict(),
            "dcprime_fit": None if self.dcprime_fit is None else self.dcprime_fit.as_dict(),
            "verdicts": list(self.verdicts),
            "compat": None if self.compat is None else self.compat.as_dict(),
            "notes": list(self.notes),
            "caveat": self.caveat,
            "shells": [dict(s) for s in self.shells],
        }

    def shells_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["weight", "min_abs_disc", "zero_count", "n_modes"])
        for s in self.shells:
            w.writerow([repr(s["weight"]), "" if s["min_abs_disc"] is None else repr(s["min_abs_disc"]),
                        s["zero_count"], s["n_modes"]])
        return buf.getvalue()


def _mode_dict(rep: RepPoint, i: int) -> dict:
    return {"rep": list(rep.index), "row": int(i), "twice_m": [int(x) for x in rep.twice_m[i]]}


def scan_diophantine(P: VekuaConstOp, cutoff: float, gs_cap: float = GS_EXPONENT_CAP,
                     with_compat: bool = False) -> DiophantineReport:
    """Classify every ``(rep, row)`` mode up to ``cutoff`` as zero or nonzero
    and fit lower power-law bounds on the per-shell minima of ``|Delta|``.

    Verdict rules: ``GH_fail_zero_set_infinite`` when zeros occur in at least
    three distinct shells of the upper half of the weight range; otherwise
    ``GH_plausible`` if the nonzero minima beyond the last zero shell admit a
    lower bound ``C <xi>^-M`` with ``M <= gs_cap`` and ``GH_fail_small_divisors``
    if not.  ``GS_plausible``/``GS_fail`` apply the same test to all nonzero
    minima.
    """
    t = mode_table(P, cutoff)
    det = mode_discriminants(P, t)
    absd = np.abs(det)
    K = P.L.order
    ztol = P.zero_rtol * np.maximum(1.0, t.weight ** (2 * K))
    is_zero = absd <= ztol
    zeros = [(t.reps[t.rep_id[n]], int(t.row[n])) for n in np.flatnonzero(is_zero)]

    # shells are contiguous because reps are enumerated weight-major
    w4, starts = np.unique(t.weight_sq4, return_index=True)
    ends = np.append(starts[1:], len(absd))
    shells = []
    for k4, a, b in zip(w4, starts, ends):
        seg = absd[a:b]
        nz = seg[~is_zero[a:b]]
        shells.append({"weight": float(np.sqrt(k4) / 2.0),
                       "min_abs_disc": float(nz.min()) if nz.size else None,
                       "zero_count": int(is_zero[a:b].sum()),
                       "n_modes": int(b - a)})
    sw = np.array([s["weight"] for s in shells])
    smin = np.array([np.nan if s["min_abs_disc"] is None else s["min_abs_disc"] for s in shells])
    szero = np.array([s["zero_count"] for s in shells])
    notes = []

    def lower_fit(mask):
        ok = mask & np.isfinite(smin)
        if np.unique(sw[ok]).size < 3:
            return None
        return fit_power_law(smin[ok], "lower_bound", weights=sw[ok])

    dcprime = lower_fit(np.ones_like(sw, dtype=bool))
    dc = None
    if not zeros:
        dc = dcprime
    last_zero_w = sw[szero > 0].max() if zeros else 0.0
    upper = sw >= 0.5 * (1.0 + cutoff)
    zero_shells_upper = int(np.count_nonzero(upper & (szero > 0)))

    verdicts = []
    if zero_shells_upper >= 3:
        verdicts.append("GH_fail_zero_set_infinite")
    else:
        tail = lower_fit(sw > last_zero_w)
        if zeros:
            notes.append(f"finitely many zero shells found (last at weight {last_zero_w:.6g})")
        if tail is None or tail.exponent >= -gs_cap:
            verdicts.append("GH_plausible")
            if tail is None:
                notes.append("too few nonzero shells beyond the zero set to fit (DC)")
        else:
            verdicts.append("GH_fail_small_divisors")
    if dcprime is None or dcprime.exponent >= -gs_cap:
        verdicts.append("GS_plausible")
        if dcprime is None:
            notes.append("too few nonzero shells to fit (DC')")
    else:
        verdicts.append("GS_fail")
    nzabs = absd[~is_zero]
    return DiophantineReport(
        cutoff=float(cutoff), zero_rtol=P.zero_rtol, n_modes=int(absd.size), zeros=zeros,
        shells=shells, min_abs_disc=float(nzabs.min()) if nzabs.size else None,
        dc_fit=dc, dcprime_fit=dcprime, verdicts=verdicts, notes=notes,
        compat=P.compat(cutoff) if with_compat else None)


def zero_modes(P: VekuaConstOp, cutoff: float) -> list:
    """All singular ``(rep, row)`` modes up to ``cutoff``, canonical members first."""
    t = mode_table(P, cutoff)
    absd = np.abs(mode_discriminants(P, t))
    ztol = P.zero_rtol * np.maximum(1.0, t.weight ** (2 * P.L.order))
    return [(t.reps[t.rep_id[n]], int(t.row[n])) for n in np.flatnonzero(absd <= ztol)]


def small_modes(P: VekuaConstOp, cutoff: float, count: int) -> list:
    """Per shell, the nonzero mode with the smallest ``|Delta|``; the ``count``
    highest shells are returned in increasing weight."""
    t = mode_table(P, cutoff)
    absd = np.abs(mode_discriminants(P, t))
    ztol = P.zero_rtol * np.maximum(1.0, t.weight ** (2 * P.L.order))
    best: dict[int, int] = {}
    for n in np.flatnonzero(absd > ztol):
        if t.self_partner[n]:
            continue
        k = int(t.weight_sq4[n])
        if k not in best or absd[n] < absd[best[k]]:
            best[k] = n
    picks = [best[k] for k in sorted(best)][-count:]
    return [(t.reps[t.rep_id[n]], int(t.row[n])) for n in picks]


# --- witnesses -----------------------------------------------------------------

WITNESS_KINDS = ("gh_zero", "gh_necessity", "gs_fail")


@dataclass
class WitnessBundle:
    kind: str
    u: CoefficientField | None
    f: CoefficientField | None
    modes: list
    skipped: list
    table: list = field(default_factory=list)


def _null_vector_self(a11: complex, p: complex) -> complex:
    R = _real_system(a11, p)
    _, _, vt = np.linalg.svd(R)
    v = vt[-1]
    return complex(v[0], v[1])


def make_witness(P: VekuaConstOp, kind: str, modes, c: complex = 1.0) -> WitnessBundle:
    """Construct the witness distributions on the supplied ``(rep, entry)`` modes.

    ``gh_zero``: on each singular mode put the null vector ``(x, y) = (a22, conj(p))``
    so ``Pu = 0`` with ``|u_hat| >= |p|`` there.  ``gh_necessity``: put
    ``x = a22 c + p conj(c)``, ``y = a11 conj(c) + conj(p) c`` so that
    ``Pu = f`` with ``f_hat = c Delta``.  ``gs_fail``: place ``1/conj(p)`` in
    the partner slot of ``f``, giving ``|u_hat| = 1/|Delta|`` at the mode.
    """
    if kind not in WITNESS_KINDS:
        raise ConfigurationError(f"unknown witness kind {kind!r}")
    c = complex(c)
    if kind == "gh_necessity" and c == 0:
        raise ConfigurationError("gh_necessity needs c != 0")
    u: dict = {}
    f: dict = {}
    used, skipped, table = [], [], []
    taken = set()

    def put(store, rep, i, j, val):
        m = store.setdefault(rep, np.zeros((rep.dim, rep.dim), dtype=complex))
        m[i, j] = val

    for mode in modes:
        rep, entry = mode
        i, j = _entry(rep, entry)
        M = build_mode_system(P, rep, (i, j))
        key, pkey = (rep, i, j), (M.partner_rep,) + M.partner_entry
        if key in taken or pkey in taken:
            skipped.append({"rep": rep, "entry": (i, j), "reason": "mode already used by its partner"})
            continue
        a11, a22, s = M.A[0, 0], M.A[1, 1], M.phase
        tol = P.zero_tol(rep)
        if kind == "gh_zero":
            if abs(M.det) > tol:
                skipped.append({"rep": rep, "entry": (i, j), "reason": f"|Delta| = {abs(M.det):.3g} is not zero"})
                continue
            if M.self_partner:
                x = _null_vector_self(a11, P.p) * abs(P.p)
                put(u, rep, i, j, x)
            else:
                put(u, rep, i, j, a22)
                put(u, M.partner_rep, *M.partner_entry, s * P.p)
        elif kind == "gh_necessity":
            x = a22 * c + P.p * np.conj(c)
            y = a11 * np.conj(c) + np.conj(P.p) * c
            if M.self_partner:
                put(u, rep, i, j, x)
                put(f, rep, i, j, c * M.det)
            else:
                put(u, rep, i, j, x)
                put(u, M.partner_rep, *M.partner_entry, s * np.conj(y))
                put(f, rep, i, j, c * M.det)
                put(f, M.partner_rep, *M.partner_entry, s * c * np.conj(M.det))
            table.append({"rep": rep, "entry": (i, j), "weight": rep.weight, "abs_disc": abs(M.det)})
        else:
            if M.self_partner:
                skipped.append({"rep": rep, "entry": (i, j), "reason": "self-partner entry"})
                continue
            if abs(M.det) <= tol:
                skipped.append({"rep": rep, "entry": (i, j), "reason": "singular mode"})
                continue
            put(f, M.partner_rep, *M.partner_entry, 1.0 / np.conj(P.p))
        taken.update([key, pkey])
        used.append((rep, (i, j)))

    group = P.group
    if kind == "gh_zero":
        return WitnessBundle(kind, CoefficientField(group, u), None, used, skipped)
    if kind == "gh_necessity":
        return WitnessBundle(kind, CoefficientField(group, u), CoefficientField(group, f),
                             used, skipped, table)
    ff = CoefficientField(group, f)
    uu = solve_const(P, ff)
    for rep, (i, j) in used:
        d = discriminant(P, rep, i)
        table.append({"rep": rep, "entry": (i, j), "weight": rep.weight,
                      "abs_disc": abs(d), "abs_u": float(abs(uu[rep][i, j])), "recip": 1.0 / abs(d)})
    return WitnessBundle(kind, uu, ff, used, skipped, table)

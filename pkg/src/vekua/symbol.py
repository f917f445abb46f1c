"""Diagonal left-invariant symbols and a small operator-expression language.

Grammar (whitespace is ignored)::

    expr  := '0' | [sign] term (sign term)*
    term  := [coeff ['*']] gen ['^' int]
    coeff := lit ('*' lit)*
    lit   := number ['i' | 'j'] | 'i' | '(' [sign] lit (sign lit)* ')'
    gen   := ('d0' | 'Dt') ['@' int]

``d0`` acts on a sphere factor with symbol ``m`` (row entry index) and
``Dt`` on a circle factor with symbol ``k``.  The factor tag may be dropped
when the group has exactly one factor of the matching kind.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .dual import CIRCLE, SPHERE3, ConfigurationError, GroupSpec, RepPoint, enumerate_reps, rep_from_list
from .field import CoefficientField, PowerLawFit, fit_power_law

GEN_KIND = {"d0": SPHERE3, "Dt": CIRCLE}


class SymbolSyntaxError(ConfigurationError):
    def __init__(self, message: str, text: str, pos: int):
        self.text = text
        self.pos = pos
        pointer = f"\n  {text}\n  {' ' * pos}^" if text else ""
        super().__init__(f"{message} at position {pos}{pointer}")


@dataclass(frozen=True)
class SymbolTerm:
    factor: int
    gen: str
    power: int
    coeff: complex

    def key(self):
        return (self.factor, self.gen, self.power)


@dataclass(frozen=True)
class SymbolExpr:
    group: GroupSpec
    terms: tuple[SymbolTerm, ...]

    @property
    def order(self) -> int:
        return max((t.power for t in self.terms), default=0)

    def __str__(self):
        if not self.terms:
            return "0"
        return " + ".join(f"{_fmt_complex(t.coeff)}*{t.gen}@{t.factor}^{t.power}" for t in self.terms)


def _fmt_complex(z: complex) -> str:
    re_, im = repr(float(z.real)), repr(float(z.imag))
    if not im.startswith("-"):
        im = "+" + im
    return f"({re_}{im}i)"


_NUM = re.compile(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")


class _Parser:
    def __init__(self, text: str, group: GroupSpec):
        self.text = text
        self.group = group
        self.pos = 0

    def error(self, msg, pos=None):
        raise SymbolSyntaxError(msg, self.text, self.pos if pos is None else pos)

    def skip(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self, s: str) -> bool:
        self.skip()
        return self.text.startswith(s, self.pos)

    def take(self, s: str) -> bool:
        if self.peek(s):
            self.pos += len(s)
            return True
        return False

    def at_end(self) -> bool:
        self.skip()
        return self.pos >= len(self.text)

    def sign(self) -> int | None:
        if self.take("+"):
            return 1
        if self.take("-"):
            return -1
        return None

    def expr(self) -> list[SymbolTerm]:
        if self.at_end():
            return []
        terms = []
        s = self.sign() or 1
        terms.extend(self.term(s))
        while not self.at_end():
            s = self.sign()
            if s is None:
                self.error(f"expected '+' or '-', found {self.text[self.pos]!r}")
            terms.extend(self.term(s))
        return terms

    def term(self, sign: int) -> list[SymbolTerm]:
        self.skip()
        coeff = complex(sign)
        has_coeff = False
        if not self.at_gen():
            coeff *= self.coeff()
            has_coeff = True
            self.take("*")
        if not self.at_gen():
            if has_coeff and self.at_term_end() and coeff == 0:
                return []
            self.error("expected generator 'd0' or 'Dt'")
        gen_pos = self.pos
        gen = "d0" if self.take("d0") else ("Dt" if self.take("Dt") else None)
        factor = None
        if self.take("@"):
            fpos = self.pos
            factor = self.integer()
            if not 0 <= factor < len(self.group):
                self.error(f"factor index {factor} out of range for {self.group}", fpos)
        power = 1
        if self.take("^"):
            ppos = self.pos
            power = self.integer()
            if power < 1:
                self.error("power must be a positive integer", ppos)
        kind = GEN_KIND[gen]
        if factor is None:
            cands = [j for j, f in enumerate(self.group.factors) if f == kind]
            if not cands:
                self.error(f"{gen} requires a {kind} factor", gen_pos)
            if len(cands) > 1:
                self.error(f"{gen} is ambiguous on {self.group}; add '@factor'", gen_pos)
            factor = cands[0]
        elif self.group.factors[factor] != kind:
            self.error(f"{gen} requires a {kind} factor", gen_pos)
        return [SymbolTerm(factor, gen, power, coeff)]

    def at_gen(self) -> bool:
        return self.peek("d0") or self.peek("Dt")

    def at_term_end(self) -> bool:
        return self.at_end() or self.peek("+") or self.peek("-")

    def integer(self) -> int:
        self.skip()
        m = re.compile(r"[+-]?\d+").match(self.text, self.pos)
        if not m:
            self.error("expected an integer")
        self.pos = m.end()
        return int(m.group())

    def coeff(self) -> complex:
        c = self.lit()
        while self.peek("*") and not self._star_then_gen():
            self.take("*")
            c *= self.lit()
        return c

    def _star_then_gen(self) -> bool:
        save = self.pos
        self.take("*")
        r = self.at_gen()
        self.pos = save
        return r

    def lit(self) -> complex:
        self.skip()
        if self.take("("):
            s = self.sign() or 1
            z = s * self.lit()
            while not self.take(")"):
                if self.at_end():
                    self.error("unclosed '('")
                s = self.sign()
                if s is None:
                    self.error("malformed complex literal")
                z += s * self.lit()
            return z
        m = _NUM.match(self.text, self.pos)
        if m:
            self.pos = m.end()
            x = float(m.group())
            if self.pos < len(self.text) and self.text[self.pos] in "ij":
                self.pos += 1
                return complex(0.0, x)
            return complex(x, 0.0)
        if self.pos < len(self.text) and self.text[self.pos] in "ij":
            self.pos += 1
            return 1j
        self.error("malformed complex literal")


def parse_symbol(text: str, group) -> SymbolExpr:
    """Parse an operator expression into a normalized term list."""
    group = GroupSpec.parse(group)
    if not isinstance(text, str):
        raise ConfigurationError("symbol expression must be a string")
    raw = _Parser(text, group).expr()
    merged: dict[tuple, complex] = {}
    for t in raw:
        merged[t.key()] = merged.get(t.key(), 0j) + t.coeff
    terms = tuple(SymbolTerm(f, g, p, c) for (f, g, p), c in sorted(merged.items()) if c != 0)
    return SymbolExpr(group, terms)


def _term_values(term: SymbolTerm, group: GroupSpec, half_m: np.ndarray, ks: np.ndarray):
    if term.gen == "d0":
        g = half_m[:, group.sphere_factors.index(term.factor)]
    else:
        g = ks[:, group.circle_factors.index(term.factor)]
    return term.coeff * np.asarray(g, dtype=float) ** term.power


def eval_expr_flat(expr: SymbolExpr, half_m: np.ndarray, ks: np.ndarray) -> np.ndarray:
    """Evaluate on a flat table of modes: ``half_m`` (N, n_sphere), ``ks`` (N, n_circle)."""
    out = np.zeros(len(half_m) if half_m.ndim == 2 and half_m.shape[1] else len(ks), dtype=complex)
    for t in expr.terms:
        out += _term_values(t, expr.group, half_m, ks)
    return out


def eval_symbol(expr: SymbolExpr, rep: RepPoint) -> np.ndarray:
    """``sigma_m(xi) = sum coeff * g**power`` over the rows of ``rep``."""
    half_m = rep.twice_m / 2.0
    ks = np.tile(np.asarray(rep.ks, dtype=float), (rep.dim, 1))
    out = np.zeros(rep.dim, dtype=complex)
    for t in expr.terms:
        out += _term_values(t, expr.group, half_m, ks)
    return out


class DiagonalSymbol:
    """Diagonal entries ``sigma_m(xi)`` of a left-invariant operator.

    Built from a parsed expression or from a table ``rep -> vector``.
    ``order`` is the growth exponent ``K`` used for scale-aware zero tests:
    the largest power for expressions and the fitted growth order for tables.
    """

    def __init__(self, group, expr: SymbolExpr | None = None,
                 table: Mapping[RepPoint, np.ndarray] | None = None, order: float | None = None,
                 label: str | None = None):
        self.group = GroupSpec.parse(group)
        if (expr is None) == (table is None):
            raise ConfigurationError("give exactly one of expr or table")
        self.expr = expr
        self.table = None
        if table is not None:
            tab = {}
            for rep, vec in table.items():
                v = np.array(vec, dtype=complex).ravel()
                if v.size == 1 and rep.dim > 1:
                    v = np.full(rep.dim, v[0])
                if v.shape != (rep.dim,):
                    raise ConfigurationError(f"symbol vector at {rep} must have length {rep.dim}")
                v.setflags(write=False)
                tab[rep] = v
            self.table = tab
        if order is None:
            order = expr.order if expr is not None else self._fit_order()
        self.order = float(order)
        self.label = label if label is not None else (str(expr) if expr is not None else "table")

    @classmethod
    def from_expr(cls, text: str, group) -> "DiagonalSymbol":
        group = GroupSpec.parse(group)
        return cls(group, expr=parse_symbol(text, group), label=text)

    @classmethod
    def from_table(cls, group, table, order=None) -> "DiagonalSymbol":
        return cls(group, table=table, order=order)

    @classmethod
    def tabulate(cls, group, fn: Callable[[RepPoint], object], cutoff: float, order=None) -> "DiagonalSymbol":
        """Tabulate ``fn(rep)`` (a scalar or a row vector) on every rep up to ``cutoff``."""
        group = GroupSpec.parse(group)
        return cls(group, table={r: fn(r) for r in enumerate_reps(group, cutoff)}, order=order)

    def _fit_order(self) -> float:
        vals = {r: float(np.max(np.abs(v))) for r, v in self.table.items()}
        if len({r.weight_sq4 for r in vals}) < 3:
            return 0.0
        fit = fit_power_law(vals, "upper_growth")
        return max(0.0, fit.exponent)

    @property
    def is_tabulated(self) -> bool:
        return self.table is not None

    def defined_at(self, rep: RepPoint) -> bool:
        return self.table is None or rep in self.table

    def eval(self, rep: RepPoint) -> np.ndarray:
        if rep.group != self.group:
            raise ConfigurationError("rep belongs to another group")
        if self.table is not None:
            v = self.table.get(rep)
            if v is None:
                raise ConfigurationError(f"symbol undefined at rep {rep}")
            return v
        return eval_symbol(self.expr, rep)

    __call__ = eval

    def eval_reps(self, reps) -> np.ndarray:
        """Concatenated row symbols over ``reps`` (vectorized for expressions)."""
        reps = list(reps)
        if self.table is not None or not reps:
            return np.concatenate([self.eval(r) for r in reps]) if reps else np.zeros(0, complex)
        half_m = np.concatenate([r.twice_m for r in reps]) / 2.0
        ks = np.concatenate([np.tile(np.asarray(r.ks, float), (r.dim, 1)) for r in reps])
        out = np.zeros(len(ks), dtype=complex)
        for t in self.expr.terms:
            out += _term_values(t, self.group, half_m, ks)
        return out

    def __repr__(self):
        return f"DiagonalSymbol({self.group}, {self.label!r}, order={self.order:g})"


def symbol_from_config(spec, group) -> DiagonalSymbol:
    """``"expr"`` or ``{"table": path}`` as used in operator configs."""
    if isinstance(spec, str):
        return DiagonalSymbol.from_expr(spec, group)
    if isinstance(spec, Mapping) and "table" in spec:
        return load_symbol_table(spec["table"], group)
    raise ConfigurationError("operator symbol must be an expression string or {'table': path}")


def load_symbol_table(path, group) -> DiagonalSymbol:
    """Symbol table file: JSON array of ``{rep, vector: [{re, im}, ...]}``."""
    group = GroupSpec.parse(group)
    with open(path) as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        data = data["records"]
    tab = {}
    for rec in data:
        rep = rep_from_list(group, rec["rep"])
        if "vector" in rec:
            vec = [complex(z["re"], z.get("im", 0.0)) if isinstance(z, dict) else complex(z) for z in rec["vector"]]
        else:
            mat = rec["matrix"]
            vec = [complex(mat[i][i]["re"], mat[i][i].get("im", 0.0)) for i in range(len(mat))]
        tab[rep] = vec
    return DiagonalSymbol.from_table(group, tab)


def save_symbol_table(sym: DiagonalSymbol, path, reps=None) -> None:
    reps = list(sym.table) if reps is None else list(reps)
    recs = [{"rep": list(r.index), "vector": [{"re": z.real, "im": z.imag} for z in sym.eval(r)]}
            for r in sorted(reps, key=lambda r: (r.weight_sq4, r.index))]
    with open(path, "w") as fh:
        json.dump(recs, fh)


@dataclass
class CompatReport:
    compat: bool
    growth: PowerLawFit | None
    violations: list = field(default_factory=list)
    n_checked: int = 0

    def as_dict(self) -> dict:
        return {
            "compat": self.compat,
            "growth": None if self.growth is None else self.growth.as_dict(),
            "n_violations": len(self.violations),
            "violations": [{"rep": list(v["rep"].index), "entry": v["entry"], "reason": v["reason"]}
                           for v in self.violations[:50]],
            "n_checked": self.n_checked,
        }


def check_diagonal_compat(sym: DiagonalSymbol, cutoff: float, rtol: float = 1e-12) -> CompatReport:
    """Entrywise check of ``sigma(conj xi)[entry_map(m)] == conj(sigma(xi)[m])``
    and a growth fit ``|sigma_m(xi)| <= C <xi>^K`` on the per-shell maxima."""
    reps = enumerate_reps(sym.group, cutoff)
    violations = []
    shell: dict[int, float] = {}
    weights: dict[int, float] = {}
    for rep in reps:
        if not sym.defined_at(rep):
            violations.append({"rep": rep, "entry": None, "reason": "symbol undefined at rep"})
            continue
        v = sym.eval(rep)
        c = rep.conjugate()
        if not sym.defined_at(c):
            violations.append({"rep": rep, "entry": None, "reason": "symbol undefined at conjugate rep"})
            continue
        mapped = sym.eval(c)[::-1]
        bad = np.abs(mapped - np.conj(v)) > rtol * (1 + np.abs(v))
        for i in np.flatnonzero(bad):
            violations.append({"rep": rep, "entry": int(i),
                               "reason": f"sigma(conj xi)[{rep.dim - 1 - i}] = {mapped[i]:.6g} "
                                         f"!= conj(sigma(xi)[{i}]) = {np.conj(v[i]):.6g}"})
        a = float(np.max(np.abs(v)))
        shell[rep.weight_sq4] = max(shell.get(rep.weight_sq4, 0.0), a)
        weights[rep.weight_sq4] = rep.weight
    growth = None
    if len(shell) >= 3:
        growth = fit_power_law(np.array(list(shell.values())), "upper_growth",
                               weights=np.array([weights[k] for k in shell]))
    return CompatReport(not violations, growth, violations, len(reps))


def term_is_compatible(term: SymbolTerm) -> bool:
    """A single term ``c * g**p`` passes the entrywise rule iff ``c (-1)**p == conj(c)``."""
    c = complex(term.coeff)
    return abs(c * (-1) ** term.power - c.conjugate()) <= 1e-12 * (1 + abs(c))


# --- sphere ladder actions -------------------------------------------------

LADDERS = ("plus", "minus", "zero")


def ladder_weights(twice_l: int, which: str) -> np.ndarray:
    """Table weights indexed by the source index ``n in J_l``.

    ``plus``: ``-sqrt((l-n)(l+n+1))`` (target ``n+1``), ``minus``:
    ``-sqrt((l+n)(l-n+1))`` (target ``n-1``), ``zero``: ``n``.
    """
    l = twice_l / 2
    n = np.arange(-twice_l, twice_l + 1, 2) / 2
    if which == "plus":
        return -np.sqrt((l - n) * (l + n + 1))
    if which == "minus":
        return -np.sqrt((l + n) * (l - n + 1))
    if which == "zero":
        return n
    raise ConfigurationError(f"unknown ladder {which!r}")


def apply_ladder(u: CoefficientField, which: str, factor: int) -> CoefficientField:
    """Coefficients of ``d_+ u``, ``d_- u`` or ``d_0 u`` on one sphere factor.

    With ``u = sum d_xi tr(u_hat(xi) xi)`` the table's column shift on
    ``t_mn`` becomes a row shift on ``u_hat``: the ``plus`` action moves row
    ``m-1`` into row ``m``, ``minus`` moves row ``m+1`` into row ``m``, and
    ``zero`` scales row ``m`` by ``m``.
    """
    group = u.group
    if not 0 <= factor < len(group) or group.factors[factor] != SPHERE3:
        raise ConfigurationError(f"factor {factor} is not a sphere3 factor of {group}")
    ax = group.sphere_factors.index(factor)
    out = {}
    for rep in u.support:
        m = u[rep]
        tl = rep.dims[ax] - 1
        w = ladder_weights(tl, which)
        t = m.reshape(rep.dims + (rep.dim,))
        t = np.moveaxis(t, ax, 0)
        new = np.zeros_like(t)
        shape = (-1,) + (1,) * (t.ndim - 1)
        if which == "zero":
            new = w.reshape(shape) * t
        elif which == "plus":
            new[1:] = w[:-1].reshape(shape) * t[:-1]
        else:
            new[:-1] = w[1:].reshape(shape) * t[1:]
        out[rep] = np.moveaxis(new, 0, ax).reshape(rep.dim, rep.dim)
    return CoefficientField(group, out)

"""Coefficient-space fields on a truncated dual.

A :class:`CoefficientField` maps each stored rep to its ``dim x dim`` complex
Fourier coefficient matrix; every unstored coefficient is exactly zero.  The
support is kept closed under conjugation so that ``u`` and ``conj(u)`` live on
the same set of reps.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .dual import ConfigurationError, GroupSpec, RepPoint, rep_from_list


class CoefficientField:
    """Finitely supported map ``rep -> complex (dim, dim) matrix``."""

    def __init__(self, group: GroupSpec, entries: Mapping[RepPoint, np.ndarray] | None = None):
        self.group = GroupSpec.parse(group)
        store: dict[RepPoint, np.ndarray] = {}
        for rep, mat in (entries or {}).items():
            if rep.group != self.group:
                raise ConfigurationError(f"rep {rep} belongs to another group")
            a = np.array(mat, dtype=complex)
            if a.ndim == 0:
                a = a.reshape(1, 1)
            if a.shape != (rep.dim, rep.dim):
                raise ConfigurationError(
                    f"coefficient at {rep} has shape {a.shape}, expected {(rep.dim, rep.dim)}")
            a.setflags(write=False)
            store[rep] = a
        for rep in list(store):
            c = rep.conjugate()
            if c not in store:
                z = np.zeros((c.dim, c.dim), dtype=complex)
                z.setflags(write=False)
                store[c] = z
        self._entries = store

    @property
    def entries(self) -> dict[RepPoint, np.ndarray]:
        return dict(self._entries)

    @property
    def support(self) -> list[RepPoint]:
        return list(self._entries)

    def __getitem__(self, rep: RepPoint) -> np.ndarray:
        m = self._entries.get(rep)
        if m is None:
            return np.zeros((rep.dim, rep.dim), dtype=complex)
        return m

    def __contains__(self, rep):
        return rep in self._entries

    def __len__(self):
        return len(self._entries)

    def max_norm(self) -> float:
        return max((float(np.max(np.abs(m))) for m in self._entries.values() if m.size), default=0.0)

    def sup_by_rep(self) -> dict[RepPoint, float]:
        return {r: float(np.max(np.abs(m))) for r, m in self._entries.items()}

    def map(self, fn: Callable[[RepPoint, np.ndarray], np.ndarray]) -> "CoefficientField":
        return CoefficientField(self.group, {r: fn(r, m) for r, m in self._entries.items()})

    def __eq__(self, other):
        if not isinstance(other, CoefficientField) or other.group != self.group:
            return NotImplemented
        reps = set(self._entries) | set(other._entries)
        return all(np.array_equal(self[r], other[r]) for r in reps)

    def allclose(self, other: "CoefficientField", atol=1e-12) -> bool:
        reps = set(self._entries) | set(other._entries)
        return all(np.allclose(self[r], other[r], rtol=0, atol=atol) for r in reps)

    def __repr__(self):
        return f"CoefficientField({self.group}, {len(self)} reps)"


def conj_field(u: CoefficientField) -> CoefficientField:
    """Coefficients of the pointwise conjugate ``conj(u)``.

    ``v(xi)[i, j] = phase(i, j) * conj(u(conj xi)[dim-1-i, dim-1-j])``; on a
    circle factor this is ``conj(u(-k))`` and on a sphere factor
    ``(-1)**(m-n) * conj(u(ell)[-m, -n])``.
    """
    out = {}
    for rep in u.support:
        src = u[rep.conjugate()]
        s = rep.entry_sign
        out[rep] = np.outer(s, s) * np.conj(src[::-1, ::-1])
    return CoefficientField(u.group, out)


def apply_multiplier(sigma, u: CoefficientField) -> CoefficientField:
    """Left-invariant diagonal operator: scales row ``i`` by ``sigma_i(xi)``."""
    if sigma.group != u.group:
        raise ConfigurationError("symbol and field live on different groups")
    return u.map(lambda rep, m: sigma.eval(rep)[:, None] * m)


def field_combine(a: complex, u: CoefficientField, b: complex, v: CoefficientField) -> CoefficientField:
    if u.group != v.group:
        raise ConfigurationError("cannot combine fields on different groups")
    reps = list(u.support) + [r for r in v.support if r not in u]
    return CoefficientField(u.group, {r: a * u[r] + b * v[r] for r in reps})


def field_from_function(group, reps, fn) -> CoefficientField:
    group = GroupSpec.parse(group)
    return CoefficientField(group, {r: fn(r) for r in reps})


def random_field(group, reps, rng: np.random.Generator, decay: float = 0.0) -> CoefficientField:
    """Gaussian random coefficients scaled by ``weight**-decay``."""
    out = {}
    for r in reps:
        z = rng.standard_normal((r.dim, r.dim)) + 1j * rng.standard_normal((r.dim, r.dim))
        out[r] = z * r.weight ** (-decay)
    return CoefficientField(group, out)


class TimeCoefficientField:
    """Partial Fourier coefficients ``u(t, xi)[i, j]`` sampled in time.

    Samples live on the closed uniform grid ``t_n = 2*pi*n/T``, ``n = 0..T``.
    Storage is sparse in entries: ``entries[rep][(i, j)]`` is a length ``T+1``
    complex array; absent entries are identically zero.
    """

    def __init__(self, group: GroupSpec, grid: int, entries=None):
        self.group = GroupSpec.parse(group)
        if grid < 4 or grid % 2:
            raise ConfigurationError("time grid T must be even and >= 4")
        self.grid = int(grid)
        store: dict[RepPoint, dict[tuple[int, int], np.ndarray]] = {}
        for rep, ent in (entries or {}).items():
            if rep.group != self.group:
                raise ConfigurationError(f"rep {rep} belongs to another group")
            d = {}
            for (i, j), samples in ent.items():
                if not (0 <= i < rep.dim and 0 <= j < rep.dim):
                    raise ConfigurationError(f"entry {(i, j)} out of range at {rep}")
                a = np.array(samples, dtype=complex)
                if a.shape != (self.grid + 1,):
                    raise ConfigurationError(f"entry {(i, j)} at {rep} has {a.shape[0]} samples, "
                                             f"expected {self.grid + 1}")
                a.setflags(write=False)
                d[(int(i), int(j))] = a
            store[rep] = d
        for rep in list(store):
            store.setdefault(rep.conjugate(), {})
        self._entries = store

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, 2 * np.pi, self.grid + 1)

    @property
    def support(self) -> list[RepPoint]:
        return list(self._entries)

    def entries_at(self, rep: RepPoint) -> dict[tuple[int, int], np.ndarray]:
        return dict(self._entries.get(rep, {}))

    def get(self, rep: RepPoint, i: int, j: int) -> np.ndarray:
        a = self._entries.get(rep, {}).get((i, j))
        return np.zeros(self.grid + 1, dtype=complex) if a is None else a

    def modes(self):
        """Every stored ``(rep, i, j)`` together with its conjugate partner entry."""
        seen = set()
        for rep in self._entries:
            c = rep.conjugate()
            for (i, j) in self._entries[rep]:
                key = (rep, i, j)
                if key in seen:
                    continue
                partner = (c, rep.dim - 1 - i, rep.dim - 1 - j)
                seen.add(key)
                seen.add(partner)
                yield key

    def sup_by_rep(self) -> dict[RepPoint, float]:
        return {r: max((float(np.max(np.abs(a))) for a in e.values()), default=0.0)
                for r, e in self._entries.items()}

    def max_norm(self) -> float:
        return max(self.sup_by_rep().values(), default=0.0)

    def __repr__(self):
        n = sum(len(e) for e in self._entries.values())
        return f"TimeCoefficientField({self.group}, T={self.grid}, {len(self._entries)} reps, {n} entries)"


def conj_time_field(u: TimeCoefficientField) -> TimeCoefficientField:
    out: dict = {}
    for rep in u.support:
        src = u.entries_at(rep.conjugate())
        s = rep.entry_sign
        d = rep.dim
        out[rep] = {(d - 1 - i, d - 1 - j): s[i] * s[j] * np.conj(a) for (i, j), a in src.items()}
    return TimeCoefficientField(u.group, u.grid, out)


@dataclass
class PowerLawFit:
    """``value <= C * weight**exponent`` (or ``>=`` for lower-bound fits)."""

    constant: float
    exponent: float
    max_residual: float
    mode: str = "upper_growth"
    n_samples: int = 0
    n_zero: int = 0
    identically_zero: bool = False
    notes: list[str] = field(default_factory=list)

    def bound(self, weight):
        return self.constant * np.asarray(weight, dtype=float) ** self.exponent

    def as_dict(self) -> dict:
        return {
            "constant": self.constant,
            "exponent": self.exponent,
            "max_residual": self.max_residual,
            "mode": self.mode,
            "n_samples": self.n_samples,
            "n_zero": self.n_zero,
            "identically_zero": self.identically_zero,
        }


FIT_MODES = ("upper_growth", "decay", "lower_bound")


def fit_power_law(values, mode: str = "upper_growth", weights=None) -> PowerLawFit:
    """Log-log least-squares fit of nonnegative samples against rep weights.

    ``values`` is either a mapping ``RepPoint -> value`` or an array paired
    with ``weights``.  The exponent is fitted on the asymptotic window (weights
    in the upper half of the sampled range on a log scale; ``lower_bound`` adds the
    slope of the running minimum of the detrended samples) and the constant is
    then moved so the bound holds at every sample: above all samples for
    ``upper_growth``/``decay``, below for ``lower_bound``.  Exact zeros are
    dropped from the fit and counted in ``n_zero``.
    """
    if mode not in FIT_MODES:
        raise ValueError(f"unknown fit mode {mode!r}")
    if weights is None:
        if not isinstance(values, Mapping):
            raise TypeError("pass a mapping rep -> value or explicit weights")
        w = np.array([r.weight for r in values], dtype=float)
        v = np.array(list(values.values()), dtype=float)
    else:
        w = np.asarray(weights, dtype=float)
        v = np.asarray(values, dtype=float)
    if np.any(v < 0):
        raise ValueError("power-law fit needs nonnegative values")
    finite = np.isfinite(v)
    nz = finite & (v > 0)
    n_zero = int(np.count_nonzero(v == 0))
    if not np.any(nz):
        return PowerLawFit(0.0, 0.0, 0.0, mode, 0, n_zero, True, ["identically zero"])
    w, v = w[nz], v[nz]
    lw, lv = np.log(w), np.log(v)
    if np.unique(w).size < 3:
        raise ValueError("power-law fit needs at least 3 distinct weights")
    mid = 0.5 * (lw.min() + lw.max())
    tail = lw >= mid - 1e-12
    notes = []
    if np.unique(w[tail]).size < 3:
        tail = np.ones_like(lw, dtype=bool)
        notes.append("tail window too small; fitted on all samples")
    x, y = lw[tail], lv[tail]
    xm = x.mean()
    sxx = float(np.sum((x - xm) ** 2))
    exponent = float(np.sum((x - xm) * (y - y.mean())) / sxx)
    if mode == "lower_bound":
        # a lower bound follows the record lows, not the bulk: detrend by the
        # bulk exponent and add the slope of the running minimum of the rest
        order = np.argsort(x, kind="stable")
        r = np.minimum.accumulate((y - exponent * x)[order])
        xs = x[order]
        exponent += float(np.sum((xs - xm) * (r - r.mean())) / sxx)
    gap = lv - exponent * lw
    if mode == "lower_bound":
        logc = float(gap.min())
        slack = gap - logc
    else:
        logc = float(gap.max())
        slack = logc - gap
    return PowerLawFit(math.exp(logc), exponent, float(slack.max()), mode,
                       int(v.size), n_zero, False, notes)


# --- JSON round trip -------------------------------------------------------

def _c(z: complex) -> dict:
    z = complex(z)
    return {"re": z.real, "im": z.imag}


def _z(d) -> complex:
    if isinstance(d, dict):
        return complex(float(d["re"]), float(d.get("im", 0.0)))
    if isinstance(d, (list, tuple)):
        return complex(float(d[0]), float(d[1]))
    return complex(d)


def field_to_records(u: CoefficientField) -> list[dict]:
    recs = []
    for rep in sorted(u.support, key=lambda r: (r.weight_sq4, r.index)):
        m = u[rep]
        recs.append({"rep": list(rep.index),
                     "matrix": [[_c(z) for z in row] for row in m]})
    return recs


def field_from_records(group, records) -> CoefficientField:
    group = GroupSpec.parse(group)
    out = {}
    for rec in records:
        rep = rep_from_list(group, rec["rep"])
        out[rep] = np.array([[_z(z) for z in row] for row in rec["matrix"]], dtype=complex)
    return CoefficientField(group, out)


def time_field_to_records(u: TimeCoefficientField) -> list[dict]:
    recs = []
    for rep in sorted(u.support, key=lambda r: (r.weight_sq4, r.index)):
        for (i, j), a in sorted(u.entries_at(rep).items()):
            recs.append({"rep": list(rep.index), "entry": [i, j], "grid": u.grid,
                         "samples": [_c(z) for z in a]})
    return recs


def time_field_from_records(group, records, grid: int | None = None) -> TimeCoefficientField:
    group = GroupSpec.parse(group)
    out: dict = {}
    for rec in records:
        g = int(rec["grid"])
        if grid is None:
            grid = g
        elif g != grid:
            raise ConfigurationError("time field records disagree on grid size")
        rep = rep_from_list(group, rec["rep"])
        i, j = (int(x) for x in rec["entry"])
        out.setdefault(rep, {})[(i, j)] = np.array([_z(z) for z in rec["samples"]], dtype=complex)
    if grid is None:
        raise ConfigurationError("empty time field needs an explicit grid size")
    return TimeCoefficientField(group, grid, out)


def _unwrap(data):
    if isinstance(data, dict):
        return data.get("group"), data["records"]
    return None, data


def save_field(u, path) -> None:
    """Write a coefficient (or time) field as a JSON array of records."""
    if isinstance(u, TimeCoefficientField):
        recs = time_field_to_records(u)
    else:
        recs = field_to_records(u)
    with open(path, "w") as fh:
        json.dump(recs, fh)


def load_field(path, group=None):
    with open(path) as fh:
        data = json.load(fh)
    g, recs = _unwrap(data)
    group = group if group is not None else g
    if group is None:
        raise ConfigurationError("loading a field needs the group spec")
    if recs and "samples" in recs[0]:
        return time_field_from_records(group, recs)
    return field_from_records(group, recs)

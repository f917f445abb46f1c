"""Truncated unitary duals of tori, the 3-sphere and their products.

Representations are indexed by integers only: a circle factor carries its
frequency ``k`` and a sphere factor carries ``2*ell``, so half-integer spins
never touch floating point.  Matrix entries of a representation are addressed
by flat row/column positions ``0 <= i < dim``; on each sphere factor position
``i`` stands for ``m = -ell + i``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from itertools import product

import numpy as np

CIRCLE = "circle"
SPHERE3 = "sphere3"

_TAGS = {
    "t1": CIRCLE,
    "t": CIRCLE,
    "circle": CIRCLE,
    "s3": SPHERE3,
    "su2": SPHERE3,
    "sphere3": SPHERE3,
}


class ConfigurationError(ValueError):
    """Raised for malformed group, operator or command configurations."""


@dataclass(frozen=True)
class GroupSpec:
    factors: tuple[str, ...]

    def __post_init__(self):
        if len(self.factors) == 0:
            raise ConfigurationError("group spec needs at least one factor")
        for f in self.factors:
            if f not in (CIRCLE, SPHERE3):
                raise ConfigurationError(f"unknown factor kind {f!r}")

    @classmethod
    def parse(cls, tags) -> "GroupSpec":
        """Build from tags such as ``["s3", "t1"]``; ``"tN"`` expands to N circles."""
        if isinstance(tags, GroupSpec):
            return tags
        if isinstance(tags, str):
            tags = [tags]
        kinds = []
        for tag in tags:
            t = str(tag).strip().lower()
            if t in _TAGS:
                kinds.append(_TAGS[t])
            elif t.startswith("t") and t[1:].isdigit() and int(t[1:]) > 0:
                kinds.extend([CIRCLE] * int(t[1:]))
            else:
                raise ConfigurationError(f"unknown group factor tag {tag!r}")
        return cls(tuple(kinds))

    @property
    def tags(self) -> list[str]:
        return ["t1" if f == CIRCLE else "s3" for f in self.factors]

    @property
    def sphere_factors(self) -> tuple[int, ...]:
        return tuple(i for i, f in enumerate(self.factors) if f == SPHERE3)

    @property
    def circle_factors(self) -> tuple[int, ...]:
        return tuple(i for i, f in enumerate(self.factors) if f == CIRCLE)

    def __len__(self):
        return len(self.factors)

    def rep(self, *index) -> "RepPoint":
        """Shorthand: ``G.rep(2, -1)`` with doubled sphere indices."""
        if len(index) == 1 and isinstance(index[0], (tuple, list)):
            index = tuple(index[0])
        return RepPoint(self, tuple(int(i) for i in index))

    def __str__(self):
        return "x".join("S3" if f == SPHERE3 else "T1" for f in self.factors)


@dataclass(frozen=True)
class RepPoint:
    """One class of the unitary dual.

    ``index[j]`` is the circle frequency ``k`` or the doubled spin ``2*ell``
    of factor ``j``.
    """

    group: GroupSpec
    index: tuple[int, ...]

    def __post_init__(self):
        if len(self.index) != len(self.group.factors):
            raise ConfigurationError(
                f"rep index {self.index} does not match group {self.group}")
        for kind, i in zip(self.group.factors, self.index):
            if kind == SPHERE3 and i < 0:
                raise ConfigurationError("doubled spin must be nonnegative")

    @cached_property
    def dims(self) -> tuple[int, ...]:
        """Per-sphere-factor dimensions ``2*ell + 1``, in factor order."""
        return tuple(self.index[j] + 1 for j in self.group.sphere_factors)

    @cached_property
    def dim(self) -> int:
        return math.prod(self.dims)

    @cached_property
    def weight_sq4(self) -> int:
        """``4 * weight**2``, an exact integer."""
        total = 4
        for kind, i in zip(self.group.factors, self.index):
            total += 4 * i * i if kind == CIRCLE else i * (i + 2)
        return total

    @cached_property
    def weight(self) -> float:
        return math.sqrt(self.weight_sq4) / 2.0

    @cached_property
    def ells(self) -> tuple[float, ...]:
        return tuple(self.index[j] / 2 for j in self.group.sphere_factors)

    @cached_property
    def ks(self) -> tuple[int, ...]:
        return tuple(self.index[j] for j in self.group.circle_factors)

    def conjugate(self) -> "RepPoint":
        return RepPoint(self.group, tuple(
            -i if kind == CIRCLE else i
            for kind, i in zip(self.group.factors, self.index)))

    @cached_property
    def twice_m(self) -> np.ndarray:
        """Doubled entry indices, shape ``(dim, n_sphere)``, row-major over factors."""
        if not self.dims:
            return np.zeros((1, 0), dtype=np.int64)
        grids = [np.arange(-tl, tl + 1, 2) for tl in (d - 1 for d in self.dims)]
        mesh = np.meshgrid(*grids, indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=1).astype(np.int64)

    @cached_property
    def entry_sign(self) -> np.ndarray:
        """``s[i] = (-1)**(sum_j (m_j + ell_j))``; the conjugation phase of
        entry ``(i, j)`` is ``s[i] * s[j]``."""
        if not self.dims:
            return np.ones(1)
        steps = (self.twice_m + np.asarray([d - 1 for d in self.dims])) // 2
        return np.where(steps.sum(axis=1) % 2 == 0, 1.0, -1.0)

    def entry_position(self, twice_m) -> int:
        """Flat position of the entry with the given doubled indices."""
        twice_m = tuple(int(x) for x in np.atleast_1d(twice_m))
        if len(twice_m) != len(self.dims):
            raise ConfigurationError("entry index does not match sphere factors")
        pos = 0
        for tm, d in zip(twice_m, self.dims):
            tl = d - 1
            if abs(tm) > tl or (tm - tl) % 2:
                raise ConfigurationError(f"2m={tm} is not in J_ell for 2ell={tl}")
            pos = pos * d + (tm + tl) // 2
        return pos

    def __str__(self):
        parts = []
        for kind, i in zip(self.group.factors, self.index):
            if kind == CIRCLE:
                parts.append(f"k={i}")
            else:
                parts.append(f"l={i // 2}" if i % 2 == 0 else f"l={i}/2")
        return "(" + ", ".join(parts) + ")"


@dataclass(frozen=True)
class ConjRule:
    """How the conjugate representation acts on coefficient matrices.

    The entry map is the full index reversal ``i -> dim - 1 - i`` (all
    sphere entry indices negated) and the phase of entry ``(i, j)`` is
    ``sign[i] * sign[j]``.
    """

    source: RepPoint
    target: RepPoint
    self_dual: bool

    def entry_map(self, i: int) -> int:
        return self.source.dim - 1 - i

    def phase(self, i: int, j: int) -> float:
        s = self.source.entry_sign
        return float(s[i] * s[j])

    def phase_matrix(self) -> np.ndarray:
        s = self.source.entry_sign
        return np.outer(s, s)


def conjugate_rep(rep: RepPoint) -> ConjRule:
    target = rep.conjugate()
    return ConjRule(rep, target, target == rep)


def _order_key(rep: RepPoint):
    # weight-major, then doubled indices by magnitude with +k ahead of -k
    return (rep.weight_sq4, tuple((abs(i), i < 0) for i in rep.index))


def enumerate_reps(group: GroupSpec, weight_cutoff: float) -> list[RepPoint]:
    """All reps with ``weight <= weight_cutoff`` in deterministic order."""
    group = GroupSpec.parse(group)
    if not weight_cutoff >= 1:
        raise ConfigurationError("weight cutoff must be >= 1")
    limit4 = 4.0 * weight_cutoff * weight_cutoff * (1 + 1e-14)
    budget = limit4 - 4
    ranges = []
    for kind in group.factors:
        if kind == CIRCLE:
            kmax = int(math.isqrt(int(budget // 4)))
            ranges.append(range(-kmax, kmax + 1))
        else:
            tl = 0
            while (tl + 1) * (tl + 3) <= budget:
                tl += 1
            ranges.append(range(0, tl + 1))
    reps = []
    for idx in product(*ranges):
        r = RepPoint(group, idx)
        if r.weight_sq4 <= limit4:
            reps.append(r)
    reps.sort(key=_order_key)
    return reps


def rep_to_list(rep: RepPoint) -> list[int]:
    return list(rep.index)


def rep_from_list(group: GroupSpec, data) -> RepPoint:
    return RepPoint(group, tuple(int(x) for x in data))

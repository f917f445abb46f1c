import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vekua.dual import (CIRCLE, SPHERE3, ConfigurationError, GroupSpec, conjugate_rep,
                        enumerate_reps, rep_from_list, rep_to_list)

groups = st.lists(st.sampled_from(["t1", "s3"]), min_size=1, max_size=3).map(GroupSpec.parse)


def test_group_parse_tags():
    assert GroupSpec.parse(["s3", "t1"]).factors == (SPHERE3, CIRCLE)
    assert GroupSpec.parse("t3").factors == (CIRCLE,) * 3
    assert GroupSpec.parse(["su2"]).tags == ["s3"]
    with pytest.raises(ConfigurationError):
        GroupSpec.parse([])
    with pytest.raises(ConfigurationError):
        GroupSpec.parse(["so3"])


def test_circle_cutoff_examples():
    reps = enumerate_reps(GroupSpec.parse("t1"), 1.5)
    assert [r.index for r in reps] == [(0,), (1,), (-1,)]
    assert math.isclose(reps[1].weight, math.sqrt(2))
    assert [r.index for r in enumerate_reps(GroupSpec.parse("t1"), 1)] == [(0,)]


def test_sphere_cutoff_example():
    reps = enumerate_reps(GroupSpec.parse("s3"), 2)
    assert [r.index for r in reps] == [(0,), (1,), (2,)]
    assert [r.dim for r in reps] == [1, 2, 3]
    assert np.allclose([r.weight for r in reps], [1, math.sqrt(1.75), math.sqrt(3)])


def test_cutoff_below_one_rejected():
    with pytest.raises(ConfigurationError):
        enumerate_reps(GroupSpec.parse("t1"), 0.5)


def test_dim_and_weight_on_product():
    G = GroupSpec.parse(["s3", "t1", "s3"])
    r = G.rep(1, -2, 2)
    assert r.dim == 2 * 3
    assert r.weight_sq4 == 4 * (1 + 4 + 0.75 + 2)
    assert r.ells == (0.5, 1.0) and r.ks == (-2,)


def test_conjugate_examples():
    c = conjugate_rep(GroupSpec.parse("t1").rep(3))
    assert c.target.index == (-3,) and not c.self_dual and c.phase(0, 0) == 1
    s = conjugate_rep(GroupSpec.parse("s3").rep(2))
    assert s.self_dual and s.target == s.source
    # entry (m, n) = (1, 0) sits at (2, 1); it maps to (-1, 0) at (0, 1) with phase -1
    assert (s.entry_map(2), s.entry_map(1)) == (0, 1)
    assert s.phase(2, 1) == -1
    p = conjugate_rep(GroupSpec.parse(["s3", "t1"]).rep(1, 2))
    assert p.target.index == (1, -2) and not p.self_dual


def test_twice_m_row_major():
    r = GroupSpec.parse(["s3", "s3"]).rep(1, 2)
    assert r.twice_m.tolist() == [[-1, -2], [-1, 0], [-1, 2], [1, -2], [1, 0], [1, 2]]
    assert r.entry_position([1, 0]) == 4
    with pytest.raises(ConfigurationError):
        r.entry_position([0, 0])


def test_phase_matches_sphere_rule():
    for tl in range(0, 9):
        r = GroupSpec.parse("s3").rep(tl)
        m = r.twice_m[:, 0] / 2
        expected = (-1.0) ** (m[:, None] - m[None, :])
        assert np.array_equal(conjugate_rep(r).phase_matrix(), expected.real)


def test_serialization_roundtrip():
    G = GroupSpec.parse(["s3", "t1"])
    r = G.rep(3, -4)
    assert rep_from_list(G, rep_to_list(r)) == r


@given(groups, st.floats(1.0, 50.0))
def test_enumeration_closed_and_unique(G, cutoff):
    if len(G) == 3:
        cutoff = min(cutoff, 12.0)
    reps = enumerate_reps(G, cutoff)
    s = set(reps)
    assert len(s) == len(reps)
    assert all(r.conjugate() in s for r in reps)
    assert all(r.weight <= cutoff * (1 + 1e-12) for r in reps)
    ws = [r.weight_sq4 for r in reps]
    assert ws == sorted(ws)


@given(groups, st.data())
def test_conjugation_involution(G, data):
    idx = [data.draw(st.integers(-6, 6)) if f == CIRCLE else data.draw(st.integers(0, 8))
           for f in G.factors]
    r = G.rep(*idx)
    rule = conjugate_rep(r)
    back = conjugate_rep(rule.target)
    assert back.target == r
    assert r.conjugate().weight == r.weight and r.conjugate().dim == r.dim
    for i in range(r.dim):
        j = rule.entry_map(i)
        assert back.entry_map(j) == i
        for k in range(r.dim):
            assert rule.phase(i, k) * back.phase(j, rule.entry_map(k)) == 1


def test_sphere_phase_against_wigner_matrices():
    # conj(t(g))_{mn} = (-1)^(m-n) t(g)_{-m,-n} for spin matrices in the standard basis
    from scipy.linalg import expm
    rng = np.random.default_rng(3)
    for tl in range(1, 6):
        j = tl / 2
        m = np.arange(-j, j + 1)
        jz = np.diag(m)
        jp = np.diag(np.sqrt(j * (j + 1) - m[:-1] * (m[:-1] + 1)), -1)
        jx, jy = (jp + jp.T) / 2, (jp - jp.T) / 2j
        a, b, c = rng.normal(size=3)
        t = expm(1j * (a * jx + b * jy + c * jz))
        r = GroupSpec.parse("s3").rep(tl)
        S = conjugate_rep(r).phase_matrix()
        assert np.allclose(np.conj(t), S * t[::-1, ::-1], atol=1e-12)

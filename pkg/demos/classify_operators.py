"""Walk through the constant-coefficient tools on a few operators.

Run with ``python3 demos/classify_operators.py``.
"""
import numpy as np

from vekua.constvekua import (VekuaConstOp, apply_vekua, make_witness, relative_residual,
                              scan_diophantine, solve_const)
from vekua.dual import GroupSpec, enumerate_reps
from vekua.field import random_field
from vekua.symbol import DiagonalSymbol

T1 = GroupSpec.parse("t1")
S3 = GroupSpec.parse("s3")
S3T1 = GroupSpec.parse(["s3", "t1"])


def op(expr, group, p, q):
    return VekuaConstOp(DiagonalSymbol.from_expr(expr, group), p, q)


def show(title, P, cutoff):
    rep = scan_diophantine(P, cutoff, with_compat=True)
    print(f"\n{title}  (cutoff {cutoff:g}, {rep.n_modes} modes)")
    print(f"  zeros: {len(rep.zeros)}   min |Delta| off zeros: {rep.min_abs_disc}")
    if rep.dcprime_fit is not None:
        print(f"  lower-bound exponent over all nonzero shells: {rep.dcprime_fit.exponent:.3f}")
    print(f"  compatible symbol: {rep.compat.compat}")
    print(f"  verdicts: {rep.verdict}")
    for note in rep.notes:
        print(f"  note: {note}")
    return rep


# A circle operator with no zeros: |Delta| grows like k^2.
show("Dt - 1/2 conj on the circle", op("Dt", T1, 0.5, 0), 1e4)

# On S3, L = 2 d0^2 with p = q = 1 vanishes on m = 0 and m = +-1 in every
# integer-l representation, so the zero set is infinite.
P = op("2*d0^2", S3, 1, 1)
rep = show("2 d0^2 - 1 - conj on S3", P, 30)
modes = [(S3.rep(2 * j), (j + 1, j + 1)) for j in range(1, 21)]
W = make_witness(P, "gh_zero", modes)
print(f"  witness on {len(W.modes)} zero modes: |P u| = {apply_vekua(P, W.u).max_norm():.1e}, "
      f"coefficients do not decay (sup = {max(W.u.sup_by_rep().values()):g} on every mode)")

# The product operator d0 + a i Dt on S3 x T1 only vanishes at k = 0, m = 0.
for a in (1.0, 0.3):
    show(f"d0 + {a} i Dt - i - conj on S3 x T1", op(f"d0 + {a}i*Dt", S3T1, 1, 1j), 30)

# Away from the zero set the solver inverts P exactly.
P = op("1i*d0 + 1i*Dt", S3T1, 1, 0.5 + 0.2j)
f = random_field(S3T1, enumerate_reps(S3T1, 12), np.random.default_rng(0))
u = solve_const(P, f)
print(f"\nround trip on S3 x T1 up to weight 12: relative residual {relative_residual(P, u, f):.1e}")

"""``vekua`` command-line front end.

Exit codes: 0 ok, 1 configuration error, 2 zeros found (classify), 3
inadmissible right-hand side, 4 hypothesis failure, 5 no witness modes.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import CliConfig, load_config, parse_complex
from .constvekua import (InadmissibleError, VekuaConstOp, apply_vekua, make_witness,
                         mode_discriminants, mode_table, relative_residual, scan_diophantine,
                         solve_const, zero_modes)
from .dual import ConfigurationError
from .field import (CoefficientField, TimeCoefficientField, field_combine, fit_power_law,
                    load_field, save_field)
from .odevekua import (DIAG_HEADER, HypothesisError, ResidualError, check_hypotheses,
                       solve_timedep)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ZEROS = 2
EXIT_INADMISSIBLE = 3
EXIT_HYPOTHESIS = 4
EXIT_NO_WITNESS = 5

CAVEAT = "truncation-limited"


def _clean(x):
    """JSON-safe copy: non-finite floats become strings, numpy scalars plain."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else str(v)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": _clean(x.real), "im": _clean(x.imag)}
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _header(command: str, cfg: CliConfig) -> dict:
    return {"tool": "vekua", "version": __version__, "command": command,
            "group": cfg.group.tags, "cutoff": cfg.cutoff,
            "tolerances": {"zero_rtol": cfg.zero_tol}, "caveat": CAVEAT}


def _emit(report: dict, out: str | None) -> None:
    text = json.dumps(_clean(report), indent=2)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _sibling(out: str | None, suffix: str) -> Path | None:
    if not out:
        return None
    p = Path(out)
    return p.with_name(p.stem + suffix)


def _decay_summary(values: dict) -> dict | None:
    vals = {r: v for r, v in values.items()}
    if len({r.weight_sq4 for r in vals}) < 3:
        return None
    return fit_power_law(vals, "decay").as_dict()


# --- commands --------------------------------------------------------------------

def cmd_classify(cfg: CliConfig, args) -> int:
    P = cfg.build_const()
    rep = scan_diophantine(P, cfg.cutoff, with_compat=True)
    body = _header("classify", cfg)
    body.update(rep.as_dict())
    body["cutoff"] = cfg.cutoff
    _emit(body, args.out)
    csv_path = _sibling(args.out, ".shells.csv")
    if csv_path is not None:
        csv_path.write_text(rep.shells_csv())
    return EXIT_ZEROS if rep.zeros else EXIT_OK


def _load_rhs(cfg: CliConfig, args):
    if not args.rhs:
        raise ConfigurationError("solve needs --rhs PATH")
    try:
        return load_field(args.rhs, cfg.group)
    except (OSError, KeyError, ValueError) as e:
        if isinstance(e, ConfigurationError):
            raise
        raise ConfigurationError(f"cannot read rhs {args.rhs}: {e}") from None


def cmd_solve(cfg: CliConfig, args) -> int:
    f = _load_rhs(cfg, args)
    body = _header("solve", cfg)
    if cfg.kind == "constant":
        if not isinstance(f, CoefficientField):
            raise ConfigurationError("constant-coefficient solve needs a coefficient (not time) field")
        P = cfg.build_const()
        try:
            u = solve_const(P, f, cfg.cutoff)
        except InadmissibleError as e:
            body["status"] = "inadmissible"
            body["violations"] = [{"rep": list(v["rep"].index), "entry": list(v["entry"]),
                                   "residual": v["residual"]} for v in e.violations]
            _emit(body, args.out)
            return EXIT_INADMISSIBLE
        fr = CoefficientField(f.group, {r: f[r] for r in f.support if r.weight <= cfg.cutoff * (1 + 1e-14)})
        body["status"] = "solved"
        body["residual"] = relative_residual(P, u, fr)
        body["decay"] = _decay_summary(u.sup_by_rep())
    else:
        if not isinstance(f, TimeCoefficientField):
            raise ConfigurationError("time-dependent solve needs a time field")
        P = cfg.build_time()
        hyp = check_hypotheses(P, cfg.cutoff)
        body["hypotheses"] = hyp.as_dict()
        diags: list = []
        try:
            u = solve_timedep(P, f, cfg.cutoff, diagnostics=diags)
        except (HypothesisError, ResidualError) as e:
            body["status"] = "hypothesis_failure"
            body["message"] = str(e)
            body["failures"] = [{"rep": list(x["rep"].index), **{k: v for k, v in x.items() if k != "rep"}}
                                for x in e.failures[:100]]
            _emit(body, args.out)
            return EXIT_HYPOTHESIS
        body["status"] = "solved"
        body["max_residual"] = max((d.residual for d in diags), default=0.0)
        body["decay"] = _decay_summary(u.sup_by_rep())
        dpath = _sibling(args.out, ".modes.csv")
        if dpath is not None:
            lines = [",".join(DIAG_HEADER)] + [",".join(map(str, d.row())) for d in diags]
            dpath.write_text("\n".join(lines) + "\n")
    sol_path = _sibling(args.out, ".solution.json")
    if sol_path is not None:
        save_field(u, sol_path)
        body["solution_file"] = str(sol_path)
    _emit(body, args.out)
    return EXIT_OK


def pick_witness_modes(P: VekuaConstOp, kind: str, cutoff: float, count: int) -> list:
    """Deterministic mode family for the witness constructions."""
    if kind == "gh_zero":
        picks, taken = [], set()
        for rep, i in zero_modes(P, cutoff):
            key = (rep, i)
            if key in taken:
                continue
            taken.update([key, (rep.conjugate(), rep.dim - 1 - i)])
            picks.append((rep, (i, i)))
            if len(picks) == count:
                break
        return picks
    # record lows of nonzero |Delta| over increasing shells
    t = mode_table(P, cutoff)
    absd = np.abs(mode_discriminants(P, t))
    ztol = P.zero_rtol * np.maximum(1.0, t.weight ** (2 * P.L.order))
    best = math.inf
    picks = []
    for n in np.argsort(t.weight_sq4, kind="stable"):
        if absd[n] <= ztol[n] or t.self_partner[n]:
            continue
        if absd[n] < best:
            best = absd[n]
            rep = t.reps[t.rep_id[n]]
            picks.append((rep, (int(t.row[n]), int(t.row[n]))))
    return picks[-count:] if len(picks) > 1 else []


def cmd_witness(cfg: CliConfig, args) -> int:
    P = cfg.build_const()
    kind = args.kind or "gh_zero"
    count = args.modes if args.modes is not None else 20
    modes = pick_witness_modes(P, kind, cfg.cutoff, count)
    body = _header("witness", cfg)
    body["kind"] = kind
    if not modes:
        body["status"] = "no_modes"
        body["message"] = f"no qualifying modes for {kind} at cutoff {cfg.cutoff}"
        _emit(body, args.out)
        return EXIT_NO_WITNESS
    c = parse_complex(cfg.extra.get("c", 1.0), "c")
    W = make_witness(P, kind, modes, c=c)
    body["status"] = "ok"
    body["modes"] = [{"rep": list(r.index), "entry": list(e)} for r, e in W.modes]
    body["skipped"] = [{"rep": list(s["rep"].index), "entry": list(s["entry"]), "reason": s["reason"]}
                       for s in W.skipped]
    ver: dict = {}
    if kind == "gh_zero":
        ver["norm_Pu"] = apply_vekua(P, W.u).max_norm()
        ver["min_abs_u_on_modes"] = min(abs(W.u[r][e]) for r, e in W.modes)
        ver["decay"] = _decay_summary(W.u.sup_by_rep())
    elif kind == "gh_necessity":
        ver["norm_Pu_minus_f"] = field_combine(1.0, apply_vekua(P, W.u), -1.0, W.f).max_norm()
        ver["table"] = [{"rep": list(r["rep"].index), "weight": r["weight"], "abs_disc": r["abs_disc"]}
                        for r in W.table]
    else:
        ver["table"] = [{"rep": list(r["rep"].index), "entry": list(r["entry"]), "weight": r["weight"],
                         "abs_disc": r["abs_disc"], "abs_u": r["abs_u"]} for r in W.table]
        ver["growth_monotone"] = bool(all(a["abs_u"] < b["abs_u"] for a, b in zip(W.table, W.table[1:])))
    body["verification"] = ver
    for name, fld in (("u", W.u), ("f", W.f)):
        p = _sibling(args.out, f".{name}.json")
        if fld is not None and p is not None:
            save_field(fld, p)
            body[f"{name}_file"] = str(p)
    _emit(body, args.out)
    return EXIT_OK


def cmd_ode_check(cfg: CliConfig, args) -> int:
    P = cfg.build_time()
    hyp = check_hypotheses(P, cfg.cutoff)
    body = _header("ode-check", cfg)
    body["grid"] = cfg.grid
    body["q0"] = P.profiles.q0
    body["s0"] = P.profiles.s0
    body.update(hyp.as_dict())
    _emit(body, args.out)
    return EXIT_OK if hyp.ok else EXIT_HYPOTHESIS


def cmd_decay(cfg: CliConfig, args) -> int:
    if not args.rhs:
        raise ConfigurationError("decay needs --rhs PATH (the field to fit)")
    fld = load_field(args.rhs, cfg.group)
    body = _header("decay", cfg)
    sup = fld.sup_by_rep()
    body["n_reps"] = len(sup)
    body["fit"] = _decay_summary(sup)
    _emit(body, args.out)
    return EXIT_OK


COMMANDS = {
    "classify": cmd_classify,
    "solve": cmd_solve,
    "witness": cmd_witness,
    "ode-check": cmd_ode_check,
    "decay": cmd_decay,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vekua", description="Fourier-mode analysis of Vekua-type operators")
    ap.add_argument("--version", action="version", version=f"vekua {__version__}")
    ap.add_argument("command", choices=list(COMMANDS))
    ap.add_argument("--config", required=True, help="operator config (JSON)")
    ap.add_argument("--rhs", help="right-hand side / input field file")
    ap.add_argument("--out", help="report path (JSON); side files are written next to it")
    ap.add_argument("--cutoff", type=float, help="weight cutoff, overrides the config")
    ap.add_argument("--grid", type=int, help="time grid T, overrides the config")
    ap.add_argument("--zero-tol", type=float, dest="zero_tol", help="relative zero tolerance")
    ap.add_argument("--kind", choices=["gh_zero", "gh_necessity", "gs_fail"], help="witness kind")
    ap.add_argument("--modes", type=int, help="witness mode budget N")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.cutoff is not None:
            if args.cutoff < 1:
                raise ConfigurationError("--cutoff must be >= 1")
            cfg.cutoff = args.cutoff
        if args.grid is not None:
            if args.grid < 4 or args.grid % 2:
                raise ConfigurationError("--grid must be an even integer >= 4")
            cfg.grid = args.grid
        if args.zero_tol is not None:
            cfg.zero_tol = args.zero_tol
        if args.out:
            parent = Path(args.out).resolve().parent
            if not parent.is_dir():
                raise ConfigurationError(f"output directory {parent} does not exist")
        return COMMANDS[args.command](cfg, args)
    except ConfigurationError as e:
        print(f"vekua: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point.

Exit status: 0 on success, 1 on usage or input-contract errors, 2 when a
verification check fails.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from .covering import (ContractError, bucket_overlaps, greedy_select, level_set_items,
                       overlap_bound, selection_violations, trim_sets)
from .field import Field, FieldFormatError, Grid, read_field, write_field
from .geometry import ParameterError, Params
from .lattice import (DyadicPieces, ResourceError, build_family, build_lattice, family_size,
                      widened_nesting_check)
from .maximal import BACKWARD, FORWARD, ScaleFamily, maximal_field
from .reports import CSV_HEADER, to_json
from .synth import random_function, random_weight, trial_rng
from .trials import THEOREMS, TrialSpec, run_trials
from .weights import (WeightPair, a1_pointwise_gap, a_1r_constant, a_qr_constant, bump_constant,
                      default_family, minmax_closure_check, sawyer_constant)

EXIT_OK, EXIT_USAGE, EXIT_FAILED = 0, 1, 2


class UsageError(Exception):
    pass


def _add_params(p: argparse.ArgumentParser, q=2.0, r=2.0):
    g = p.add_argument_group("parameters")
    g.add_argument("--n", type=int, default=1, help="spatial dimension")
    g.add_argument("--p", type=float, default=1.0, help="parabolic exponent (>= 1)")
    g.add_argument("--gamma", type=float, default=0.0, help="time lag in [0, 1)")
    g.add_argument("--alpha", type=float, default=0.0, help="fractional order in [0, 1)")
    g.add_argument("--q", type=float, default=q)
    g.add_argument("--r", type=float, default=r)
    g.add_argument("--s", type=float, default=None, help="bump exponent (> 1)")


def _add_grid(p: argparse.ArgumentParser, cells=16):
    p.add_argument("--cells", type=int, default=cells, help="cells per axis of the unit grid")
    p.add_argument("--seed", type=int, default=0)


def _add_scales(p: argparse.ArgumentParser):
    p.add_argument("--scales", type=float, nargs="+", default=None,
                   help="explicit sidelengths (default: half-octave ladder over the grid)")
    p.add_argument("--xi", type=float, default=None, help="drop scales below this floor")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="parweight",
                                     description="Parabolic maximal functions and two-weight constants.")
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON file of option defaults; explicit flags win")
    sub = parser.add_subparsers(dest="command", required=True)

    m = sub.add_parser("maximal", help="evaluate a maximal function field")
    _add_params(m)
    _add_grid(m)
    _add_scales(m)
    m.add_argument("--input", type=Path, help="parfield v1 input (default: random field)")
    m.add_argument("--output", type=Path, help="write the result as a parfield v1 file")
    m.add_argument("--direction", choices=[FORWARD, BACKWARD], default=FORWARD)
    m.add_argument("--uncentered", action="store_true")

    lt = sub.add_parser("lattice", help="build, dump or validate a dyadic lattice")
    lt.add_argument("action", choices=["validate", "dump", "family"])
    lt.add_argument("--n", type=int, default=1)
    lt.add_argument("--p", type=float, default=1.0)
    lt.add_argument("--kmin", type=int, default=0)
    lt.add_argument("--kmax", type=int, default=4)
    lt.add_argument("--shift", type=int, default=0, help="spatial shift label in [0, 3^n)")
    lt.add_argument("--time-offset", type=float, default=0.0)
    lt.add_argument("--cells", type=int, default=None,
                    help="grid cells per axis for the partition check (default: finest level)")

    w = sub.add_parser("weights", help="estimate weight constants")
    w.add_argument("--constant", choices=["aqr", "a1r", "bump", "sawyer", "gap", "closure"],
                   default="aqr")
    _add_params(w)
    _add_grid(w)
    _add_scales(w)
    w.add_argument("--w", type=Path, help="parfield v1 file for w")
    w.add_argument("--v", type=Path, help="parfield v1 file for v")
    w.add_argument("--unit-weights", action="store_true", help="use w = v = 1")
    w.add_argument("--strength", type=float, default=1.0, help="log-amplitude of random weights")

    c = sub.add_parser("cover", help="greedy selection and overlap statistics")
    _add_params(c)
    _add_grid(c, 32)
    _add_scales(c)
    c.add_argument("--lam", type=float, default=None, help="level (default: a power of 2 near the median)")
    c.add_argument("--log", action="store_true", help="emit the selection log")

    v = sub.add_parser("verify", help="seeded verification trials")
    v.add_argument("theorem", choices=THEOREMS)
    _add_params(v)
    v.add_argument("--cells", type=int, default=0, help="cells per axis (default depends on theorem)")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--trials", type=int, default=10)
    v.add_argument("--jobs", type=int, default=None, help="worker processes (default $PARWEIGHT_JOBS or 1)")
    v.add_argument("--csv", action="store_true", help="emit a CSV table instead of JSON lines")
    v.add_argument("--strength", type=float, default=1.0)
    v.add_argument("--spikes", type=int, default=1)
    v.add_argument("--interpolation", type=float, default=None,
                   help="interpolation constant for the Sawyer strong bound")

    d = sub.add_parser("demo", help="small seeded run of every theorem, as CSV")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--trials", type=int, default=3)
    d.add_argument("--jobs", type=int, default=None)
    d.add_argument("--output", type=Path, default=None)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=Path, default=None)
    known, _ = pre.parse_known_args(argv)
    if known.config is None:
        return
    try:
        cfg = json.loads(known.config.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config {known.config}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    for action in parser._subparsers._group_actions:
        for sp in action.choices.values():
            dests = {a.dest for a in sp._actions}
            sp.set_defaults(**{k: v for k, v in cfg.items() if k in dests})


def _params(a, weak: bool = False) -> Params:
    P = Params(n=a.n, p=a.p, gamma=a.gamma, alpha=a.alpha, q=a.q, r=a.r, s=a.s)
    if weak:
        P.check_weak_type()
    return P


def _scales(a, grid: Grid, p: float, gamma: float = 0.0) -> ScaleFamily:
    if a.scales:
        return ScaleFamily(sorted(a.scales), a.xi)
    s = ScaleFamily.default(grid, p, gamma)
    return ScaleFamily(s.scales, a.xi) if a.xi is not None else s


def _emit(out, obj):
    out.write(obj if isinstance(obj, str) else to_json(obj))
    out.write("\n")


def cmd_maximal(a, out) -> int:
    P = _params(a)
    if a.input:
        f = read_field(a.input, "f")
    else:
        f = random_function(Grid.unit(P.n, a.cells), trial_rng(a.seed, 0))
    scales = _scales(a, f.grid, P.p, P.gamma)
    M = maximal_field(f, a.direction, not a.uncentered, P, scales)
    if a.output:
        write_field(M, a.output)
    vals = M.values
    _emit(out, {"operator": M.name, "direction": a.direction, "centered": not a.uncentered,
                "grid": list(f.grid.extents), "scales": list(scales.scales),
                "max": float(vals.max()), "mean": float(vals.mean()),
                "output": str(a.output) if a.output else None})
    return EXIT_OK


def _partition_ok(lat, cells: int) -> bool:
    grid = Grid([0.0] * (lat.n + 1), [1.0 / cells] * (lat.n + 1), [cells] * (lat.n + 1))
    pieces = DyadicPieces(lat, grid)
    for k in lat.levels:
        count = np.zeros(grid.extents, dtype=np.int64)
        for i in np.flatnonzero(pieces.k == k):
            count[pieces.slices(int(i))] += 1
        if not np.all(count == 1):
            return False
    return True


def cmd_lattice(a, out) -> int:
    if a.action == "family":
        fam = build_family(None, a.kmin, a.kmax, a.p, n=a.n)
        _emit(out, {"family_size": len(fam), "expected": family_size(a.n, a.p),
                    "time_denominator": fam.time_denominator})
        return EXIT_OK
    lat = build_lattice(None, a.kmin, a.kmax, a.p, a.shift, a.time_offset, n=a.n)
    if a.action == "dump":
        from .geometry import Box
        region = Box([0.0] * (a.n + 1), [1.0] * (a.n + 1))
        for line in lat.dump_lines(region):
            out.write(line + "\n")
        return EXIT_OK
    viol = lat.sidelength_violations()
    nest = widened_nesting_check(lat)
    cells = a.cells
    if cells is None:
        cells = min(64, 2 ** max(a.kmax, 0) * 4) if a.n == 1 else 16
    part = _partition_ok(lat, cells)
    ok = not viol and nest and part
    _emit(out, {"sidelengths": not viol, "violations": viol, "nesting": nest, "partition": part,
                "levels": [a.kmin, a.kmax], "p": a.p, "n": a.n, "passed": ok})
    return EXIT_OK if ok else EXIT_FAILED


def _pair(a, grid: Grid) -> WeightPair:
    if a.unit_weights:
        return WeightPair(Field.constant(grid, 1.0, "w"), Field.constant(grid, 1.0, "v"))
    if a.w or a.v:
        if not (a.w and a.v):
            raise UsageError("--w and --v must be given together")
        return WeightPair(read_field(a.w, "w"), read_field(a.v, "v"))
    rng = trial_rng(a.seed, 0)
    return WeightPair(random_weight(grid, rng, a.strength, name="w"),
                      random_weight(grid, rng, a.strength, name="v"))


def cmd_weights(a, out) -> int:
    P = _params(a)
    grid = read_field(a.w).grid if a.w else Grid.unit(P.n, a.cells)
    pair = _pair(a, grid)
    grid = pair.grid
    scales = _scales(a, grid, P.p, P.gamma)
    fam = default_family(grid, P.p, P.gamma, scales)
    kind = a.constant
    if kind == "aqr":
        rep = a_1r_constant(pair, P.r, P.gamma, fam) if P.q == 1 else a_qr_constant(pair, P, P.gamma, fam)
    elif kind == "a1r":
        rep = a_1r_constant(pair, P.r, P.gamma, fam)
    elif kind == "bump":
        if P.s is None:
            raise UsageError("--constant bump needs --s")
        rep = bump_constant(pair, P.q, P.s, P.gamma, fam)
    elif kind == "sawyer":
        sfam = default_family(grid, P.p, 0.0, scales)
        rep = sawyer_constant(pair, P.q, P.r, P.alpha, sfam, scales)
    elif kind == "gap":
        _emit(out, a1_pointwise_gap(pair, P.r, P.gamma, scales, fam))
        return EXIT_OK
    else:
        rng = trial_rng(a.seed, 1)
        other = WeightPair(random_weight(grid, rng, a.strength, name="w"),
                           random_weight(grid, rng, a.strength, name="v"))
        rep = minmax_closure_check(pair, other, P, P.gamma, fam)
        _emit(out, rep.to_json())
        return EXIT_OK if rep.passed else EXIT_FAILED
    _emit(out, rep.to_json())
    return EXIT_OK


def cmd_cover(a, out) -> int:
    P = _params(a)
    grid = Grid.unit(P.n, a.cells)
    f = random_function(grid, trial_rng(a.seed, 0))
    scales = _scales(a, grid, P.p, P.gamma)
    lam = a.lam
    if lam is None:
        M = maximal_field(f, FORWARD, True, P, scales).values
        pos = M[M > 0]
        lam = 2.0 ** math.floor(math.log2(np.median(pos))) if len(pos) else 1.0
    inp = level_set_items(f, P, scales, lam)
    sel = greedy_select(inp)
    viol = selection_violations(inp, sel)
    rects = [inp.rects[i] for i in sel.selected]
    buckets = bucket_overlaps(rects, P.gamma)
    res = trim_sets(rects, f, P, lam)
    bound = overlap_bound(P.n, P.p)
    ok = (not viol["uncovered"] and not viol["antichain"] and all(b <= bound for b in buckets.values())
          and res.mass_ok and res.overlap_ok)
    if a.log:
        _emit(out, {"selection_log": sel.log})
    _emit(out, {"lam": lam, "items": len(inp), "selected": len(rects),
                "bucket_overlap": {str(k): v for k, v in buckets.items()}, "overlap_bound": bound,
                "uncovered": viol["uncovered"], "antichain": viol["antichain"],
                "min_mass_ratio": min(res.mass_ratio, default=1.0), "F_overlap": res.f_overlap,
                "c": res.c, "C2": res.C2, "passed": ok})
    return EXIT_OK if ok else EXIT_FAILED


def _write_reports(reports, out, as_csv: bool):
    if as_csv:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(CSV_HEADER)
        for rep in reports:
            wr.writerow(rep.csv_row())
        out.write(buf.getvalue())
    else:
        for rep in reports:
            _emit(out, rep.to_json())


def cmd_verify(a, out) -> int:
    P = _params(a, weak=a.theorem == "weak")
    if a.theorem == "bump" and P.s is None:
        raise UsageError("verify bump needs --s")
    if a.theorem in ("fs", "bump", "sawyer") and P.q <= 1:
        raise UsageError(f"verify {a.theorem} needs q > 1")
    if a.trials < 0:
        raise UsageError("--trials must be nonnegative")
    spec = TrialSpec(a.theorem, P, a.seed, a.cells, a.strength, a.spikes, a.interpolation)
    reports = run_trials(spec, a.trials, a.jobs)
    _write_reports(reports, out, a.csv)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAILED


DEMO = [
    ("weak", dict(q=2.0, r=2.0)),
    ("weak", dict(q=2.0, r=4.0, alpha=0.25)),
    ("fs", dict(q=2.0, r=2.0)),
    ("bump", dict(q=3.0, r=3.0, s=2.0)),
    ("sawyer", dict(q=2.0, r=2.0)),
    ("domination", dict(q=2.0, r=2.0)),
]


def cmd_demo(a, out) -> int:
    reports = []
    for theorem, kw in DEMO:
        spec = TrialSpec(theorem, Params(**kw), a.seed)
        reports.extend(run_trials(spec, a.trials, a.jobs))
    if a.output:
        with open(a.output, "w", encoding="utf-8") as fh:
            _write_reports(reports, fh, True)
    _write_reports(reports, out, True)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAILED


COMMANDS = {"maximal": cmd_maximal, "lattice": cmd_lattice, "weights": cmd_weights,
            "cover": cmd_cover, "verify": cmd_verify, "demo": cmd_demo}


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        _apply_config(parser, argv)
        a = parser.parse_args(argv)
    except UsageError as exc:
        print(f"parweight: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return COMMANDS[a.command](a, out)
    except (ParameterError, ContractError, FieldFormatError, ResourceError, UsageError,
            OSError) as exc:
        print(f"parweight: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

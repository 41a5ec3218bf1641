"""Command-line orchestration: gen-d, verify, certify, spectrum, report.

Exit codes are stable: 0 all-pass, 2 usage error, 3 invalid growth
sequence, 4 verification or certificate failure, 5 precision ceiling.
Written reports are byte-deterministic for identical configurations;
wall-clock timings go to the console only.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import __version__
from .basis import (
    AmbiguousIndex,
    UncoveredIndex,
    clause_intervals,
    classify,
    dump_basis_csv,
    expander_for,
    f_in_e_roundtrip,
)
from .certify import certify_nuclear, check_column_norms
from .growth import (
    GrowthSequence,
    InvalidSequence,
    check_rapidity,
    generate_rapid,
    load_d,
    save_d,
    validate_structural,
)
from .operator import (
    UndecidableSign,
    t_column_closed,
    t_column_oracle,
    tminus_support_check,
    truncate,
)
from .scalars import PrecisionError, default_precision
from .spectral import (
    ZeroImage,
    dump_eigenvector_csv,
    dump_norm_sequence_csv,
    irreducibility_check,
    power_iteration,
    power_norm_sequence,
    tminus_eigenvector_check,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INVALID_D = 3
EXIT_VERIFICATION = 4
EXIT_PRECISION = 5

REPORT_SCHEMA = "readop-run-report/1"

_WHICH = {"T": "T", "T+": "plus", "T-": "minus", "modulus": "modulus"}


def _write_json(doc: dict, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _load_sequence(path: str) -> GrowthSequence:
    d = load_d(path)
    report = validate_structural(d)
    if not report.structural_ok:
        fails = "; ".join(f"{r.name}{r.params}: {r.detail}" for r in report.failures())
        raise InvalidSequence(f"structural validation failed: {fails}")
    return d


def _resolve_size(d: GrowthSequence, args) -> int:
    if args.block is not None:
        if not 1 <= args.block <= d.levels:
            raise InvalidSequence(f"--block must be in [1, {d.levels}]")
        return d.v(args.block)
    n = args.size
    if n > d.v(d.levels):
        raise InvalidSequence(f"--N must be at most v_L = {d.v(d.levels)}")
    if n not in d.v_list():
        print(f"note: N = {n} is not block-aligned; boundary columns will carry flags")
    return n


def _boundary_window_indices(d: GrowthSequence, lo_cap: int) -> list[int]:
    """Clause-interval edges across all levels, for spot coverage beyond lo_cap."""
    out = set()
    top = d.v(d.levels)
    for n in range(1, d.levels + 1):
        for _, _, lo, hi in clause_intervals(d, n):
            if lo > hi:
                continue
            out.update(x for x in (lo, lo + 1, (lo + hi) // 2, hi - 1, hi)
                       if lo_cap < x <= top)
    return sorted(out)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_gen_d(args) -> int:
    d = generate_rapid(args.levels, args.seed)
    save_d(d, args.out)
    audit = check_rapidity(d)
    print(f"wrote {args.out}: levels = {d.levels}")
    for n in range(1, d.levels + 1):
        print(f"  a_{n} = {d.a_at(n)}  b_{n} = {d.b_at(n)}  v_{n} = {d.v(n)}")
    for rec in audit.rapidity:
        print(f"  {rec.name}{rec.params}: {'pass' if rec.ok else 'FAIL'}")
    return EXIT_OK if audit.rapidity_ok else EXIT_VERIFICATION


def cmd_verify(args) -> int:
    d = _load_sequence(args.d)
    n_trunc = _resolve_size(d, args)
    expander = expander_for(d)
    stages: dict[str, dict] = {}
    timings: dict[str, float] = {}

    def run_stage(name, fn):
        t0 = time.perf_counter()
        stages[name] = fn()
        timings[name] = time.perf_counter() - t0

    def stage_structural():
        rep = validate_structural(d)
        return {"verdict": "pass" if rep.structural_ok else "fail",
                "checks": len(rep.structural)}

    def stage_partition():
        indices = list(range(1, min(n_trunc, d.v(d.levels)) + 1))
        indices += _boundary_window_indices(d, indices[-1] if indices else 0)
        for i in indices:
            classify(i, d)  # raises Uncovered/Ambiguous on invalid structure
        return {"verdict": "pass", "indices_checked": len(indices)}

    def stage_roundtrip():
        indices = list(range(0, n_trunc + 1))
        indices += _boundary_window_indices(d, n_trunc)
        bad = []
        for i in indices:
            ok, _ = f_in_e_roundtrip(i, d, expander)
            if not ok:
                bad.append(i)
        return {"verdict": "pass" if not bad else "fail",
                "indices_checked": len(indices), "failures": bad}

    def stage_equivalence():
        top = d.v(d.levels) - 1
        indices = [i for i in range(0, min(n_trunc, top) + 1)]
        indices += [i for i in _boundary_window_indices(d, n_trunc) if i <= top]
        bad = []
        for i in indices:
            if t_column_closed(i, d) != t_column_oracle(i, d, expander):
                bad.append(i)
        return {"verdict": "pass" if not bad else "fail",
                "columns_checked": len(indices), "failures": bad}

    def stage_support():
        trunc = truncate(d, n_trunc, expander)
        audit = tminus_support_check(trunc)
        audit["verdict"] = "pass" if audit.pop("ok") else "fail"
        audit["f0_annihilated"] = tminus_eigenvector_check(d)
        if not audit["f0_annihilated"]:
            audit["verdict"] = "fail"
        return audit

    def stage_rapidity():
        rep = check_rapidity(d)
        return {"verdict": "pass" if rep.rapidity_ok else "fail",
                "fatal": False,
                "failures": [f"{r.name}{r.params}" for r in rep.rapidity if not r.ok]}

    run_stage("structural", stage_structural)
    run_stage("partition", stage_partition)
    run_stage("roundtrip", stage_roundtrip)
    run_stage("oracle_equivalence", stage_equivalence)
    run_stage("tminus_support", stage_support)
    run_stage("rapidity", stage_rapidity)

    report = {
        "schema": REPORT_SCHEMA,
        "command": "verify",
        "config": {
            "d_file": str(args.d),
            "levels": d.levels,
            "N": n_trunc,
            "block": args.block,
            "precision_bits": default_precision(),
            "version": __version__,
        },
        "stages": stages,
    }
    fatal = [name for name, s in stages.items()
             if s["verdict"] == "fail" and s.get("fatal", True)]
    report["verdict"] = "pass" if not fatal else "fail"

    for name, s in stages.items():
        print(f"{name:<20} {s['verdict']}   ({timings[name]:.3f}s)")
    if args.out:
        _write_json(report, Path(args.out) / "verify_report.json")
        print(f"report: {Path(args.out) / 'verify_report.json'}")
    if args.dump_basis:
        dump_basis_csv(d, n_trunc, args.dump_basis)
    return EXIT_OK if not fatal else EXIT_VERIFICATION


def cmd_certify(args) -> int:
    d = _load_sequence(args.d)
    n_max = args.levels or d.levels
    cert = certify_nuclear(d, n_max)
    print(f"nuclear certificate: {cert.verdict}")
    if cert.total is not None:
        print(f"  total bound enclosure: [{cert.total.lo}, {cert.total.hi}] < 2")
    for failure in cert.rapidity_failures:
        print(f"  rapidity violated: {failure}")
    for row in cert.rows:
        print(f"  row {row.row} ({row.family}, level {row.level}): "
              f"{'within' if row.ok else 'EXCEEDS'} bound")

    top = d.v(d.levels) - 1  # last fully constructible column
    i_max = args.columns if args.columns is not None else min(d.v(1), 200)
    if i_max > top:
        print(f"note: clamping column range to [0, {top}]")
        i_max = top
    norms = check_column_norms(d, i_max)
    worst = norms.worst()
    print(f"column norms on [0, {i_max}]: "
          f"{'all <= 1' if norms.all_ok else f'{len(norms.failures())} exceed 1'} "
          f"(worst: column {worst.index})")

    if args.out:
        out = Path(args.out)
        _write_json(cert.to_json(), out / "nuclear_certificate.json")
        _write_json(norms.to_json(), out / "column_norms.json")
        print(f"wrote {out / 'nuclear_certificate.json'}, {out / 'column_norms.json'}")
    if cert.verdict == "unknown":
        return EXIT_PRECISION
    return EXIT_OK if cert.verdict == "pass" else EXIT_VERIFICATION


def cmd_spectrum(args) -> int:
    d = _load_sequence(args.d)
    n_trunc = _resolve_size(d, args)
    part = _WHICH[args.which]
    trunc = truncate(d, n_trunc)
    out = Path(args.out) if args.out else None

    if part == "T":
        roots = power_norm_sequence(trunc, "T", args.powers)
        print(f"T at N = {n_trunc}: ||T^k||^(1/k) over k <= {args.powers}: "
              f"first {roots[0]:.6g}, last {roots[-1]:.6g} (no Perron claim; T is signed)")
        if out:
            dump_norm_sequence_csv(roots, out / "norm_roots_T.csv")
        return EXIT_OK

    irr = irreducibility_check(trunc, part)
    print(f"{args.which} at N = {n_trunc}: strongly connected = {irr.strongly_connected}"
          f" (excluding flagged boundary columns: "
          f"{irr.strongly_connected_excluding_flagged})")
    print(f"  returns to row 0 from columns {irr.row_zero_columns}")

    if part == "minus":
        f0 = tminus_eigenvector_check(d)
        print(f"  eigenpair witness: T^- f_0 = 0 exactly: {f0}"
              f" (positive eigenvector f_0, eigenvalue 0)")
        if out:
            _write_json(irr.to_json(), out / "irreducibility_minus.json")
        return EXIT_OK if f0 else EXIT_VERIFICATION

    try:
        rep = power_iteration(trunc, part, tol=args.tol, max_iter=args.max_iter)
    except ZeroImage as exc:
        print(f"  power iteration: zero image ({exc})")
        return EXIT_VERIFICATION
    print(f"  eigenvalue witness {rep.eigenvalue:.12g}, residual {rep.residual:.3g}, "
          f"{rep.iterations} iterations, converged = {rep.converged}")
    roots = power_norm_sequence(trunc, part, args.powers)
    if out:
        _write_json(rep.to_json(), out / f"spectral_{part}.json")
        _write_json(irr.to_json(), out / f"irreducibility_{part}.json")
        dump_eigenvector_csv(rep, out / f"eigenvector_{part}.csv")
        dump_norm_sequence_csv(roots, out / f"norm_roots_{part}.csv")
        print(f"  artifacts in {out}")
    return EXIT_OK if rep.converged else EXIT_VERIFICATION


def cmd_report(args) -> int:
    directory = Path(args.dir)
    stages = {}
    for path in sorted(directory.glob("*.json")):
        if path.name == "run_report.json":
            continue
        stages[path.stem] = json.loads(path.read_text())
    doc = {"schema": REPORT_SCHEMA, "command": "report", "stages": stages}
    out = Path(args.out) if args.out else directory / "run_report.json"
    _write_json(doc, out)
    print(f"merged {len(stages)} stage files into {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be nonnegative, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="readop",
        description="Exact truncations of a Read-type quasinilpotent l1 operator: "
                    "construction checks, nuclearity certificates, Perron witnesses.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-d", help="generate a rapidity-certified growth sequence")
    p.add_argument("--levels", type=_positive_int, required=True)
    p.add_argument("--seed", type=_positive_int, default=2,
                   help="search floor for a_1 (default 2)")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_gen_d)

    def add_size(p):
        group = p.add_mutually_exclusive_group(required=True)
        group.add_argument("--block", type=_positive_int,
                           help="truncate at N = v_block (recommended)")
        group.add_argument("--N", dest="size", type=_positive_int,
                           help="raw truncation size")

    p = sub.add_parser("verify", help="structural and construction checks")
    p.add_argument("--d", required=True)
    add_size(p)
    p.add_argument("--out", help="directory for the deterministic report")
    p.add_argument("--dump-basis", help="CSV dump of the classification table")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("certify", help="nuclearity certificate and column norms")
    p.add_argument("--d", required=True)
    p.add_argument("--levels", type=_positive_int,
                   help="materialize rows up to this level (default: all)")
    p.add_argument("--columns", type=_nonneg_int,
                   help="column-norm range (default min(v_1, 200))")
    p.add_argument("--out", help="output directory")
    p.set_defaults(fn=cmd_certify)

    p = sub.add_parser("spectrum", help="Perron and norm-decay witnesses")
    p.add_argument("--d", required=True)
    add_size(p)
    p.add_argument("--which", choices=sorted(_WHICH), default="modulus")
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--max-iter", type=int, default=10000)
    p.add_argument("--powers", type=_positive_int, default=64)
    p.add_argument("--out", help="output directory")
    p.set_defaults(fn=cmd_spectrum)

    p = sub.add_parser("report", help="merge stage outputs into one run report")
    p.add_argument("--dir", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except InvalidSequence as exc:
        print(f"invalid growth sequence: {exc}", file=sys.stderr)
        return EXIT_INVALID_D
    except (UncoveredIndex, AmbiguousIndex) as exc:
        print(f"clause partition violated: {exc}", file=sys.stderr)
        return EXIT_INVALID_D
    except (PrecisionError, UndecidableSign) as exc:
        print(f"precision ceiling: {exc}", file=sys.stderr)
        return EXIT_PRECISION


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point.

Subcommands: check, lattice, simplify, count, run, verify, profile, emit-c,
report.  Exit codes: 0 success, 1 diagnostics/failure, 2 usage error.
`report` runs the whole pipeline (simplify + count + verify + profile) and
writes a summary table, variants.csv/variants.json, and matplotlib figures
rendered to files next to the delimited output.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import cgen, counting, facelattice as fl, frontend, interp, ir, simplify
from . import polyhedron as ph
from .errors import RedsimplError


def _load(path: str) -> ir.Program:
    text = Path(path).read_text()
    prog = frontend.parse(text)
    diags = ir.validate(prog)
    errs = [d for d in diags if d.severity == "error"]
    if errs:
        for d in errs:
            print(f"error[{d.code}]: {d.message}", file=sys.stderr)
        raise SystemExit(1)
    return prog


def _maybe_substitute(prog: ir.Program, spec: str | None) -> ir.Program:
    if not spec:
        return prog
    use, def_ = spec.split("=", 1)
    return ir.substitute_definition(prog, use.strip(), def_.strip())


def cmd_check(args) -> int:
    try:
        prog = frontend.parse(Path(args.program).read_text())
    except RedsimplError as e:
        print(f"error[{e.code}]: {e.message}", file=sys.stderr)
        return 1
    diags = ir.validate(prog)
    for d in diags:
        print(f"{d.severity}[{d.code}]: {d.message}")
    if any(d.severity == "error" for d in diags):
        return 1
    print(f"ok: {len(prog.variables)} variables, {len(prog.equations)} equations")
    return 0


def cmd_lattice(args) -> int:
    prog = _load(args.program)
    out = 0
    for name, eq in prog.equations:
        for red in ir.reduces_of(eq):
            dom = ph.remove_redundancy(red.body_domain)
            lat = fl.build_face_lattice(dom)
            if args.json:
                print(json.dumps(fl.lattice_as_dict(lat), indent=2))
            else:
                print(f"reduction in {name}:")
                print(fl.lattice_as_text(lat))
            out += 1
    if out == 0:
        print("no reductions found", file=sys.stderr)
        return 1
    return 0


def _run_search(prog, args):
    return simplify.simplify_all(
        prog,
        budget_nodes=args.budget_nodes,
        budget_seconds=args.budget_seconds,
        first_only=args.first,
    )


def _variant_rows(prog, res, verify_sizes, seed, tol, do_verify=True):
    rows = []
    for i, v in enumerate(res.variants):
        verified = None
        if do_verify:
            rep = interp.verify_equivalence(
                prog, v.program, verify_sizes, trials=2, seed=seed, tol=tol
            )
            verified = bool(rep.passed)
        rows.append(
            {
                "program_id": f"v{i + 1:03d}",
                "trace": [_trace_entry(s) for s in v.trace],
                "degree": v.degree,
                "polynomial": v.complexity.render(),
                "verified": verified,
            }
        )
    return rows


def _trace_entry(step: str) -> dict:
    words = step.split()
    kind = words[0]
    entry = {"kind": kind, "detail": step}
    if kind == "simplify" and "rho=[" in step:
        entry["face"] = words[1]
        entry["rho"] = [int(x) for x in step.split("rho=[")[1].split("]")[0].split(",")]
    elif kind == "decompose":
        entry["face"] = words[1]
        entry["basis"] = step.split(" on ", 1)[1]
    elif kind == "factor":
        entry["face"] = words[-1]
    elif kind == "substitute":
        entry["face"] = words[-1]
    return entry


def cmd_simplify(args) -> int:
    prog = _maybe_substitute(_load(args.program), args.substitute)
    res = _run_search(prog, args)
    emit_dir = Path(args.emit_dir) if args.emit_dir else None
    if emit_dir:
        emit_dir.mkdir(parents=True, exist_ok=True)
    rows = _variant_rows(prog, res, [4, 6], args.seed, args.tol, do_verify=False)
    stem = Path(args.program).stem
    for row, v in zip(rows, res.variants):
        print(f"{row['program_id']}: degree {v.degree}, ops {v.complexity.render()}")
        for s in v.trace:
            print(f"    {s}")
        if emit_dir:
            (emit_dir / f"{stem}.{row['program_id']}.red").write_text(
                frontend.print_program(v.program)
            )
    if emit_dir:
        (emit_dir / "variants.json").write_text(json.dumps(rows, indent=2))
    if res.budget_exceeded:
        print("warning: search budget exceeded; variant list may be partial", file=sys.stderr)
    print(f"{len(res.variants)} variants ({res.explored} programs explored)")
    return 0


def cmd_count(args) -> int:
    prog = _maybe_substitute(_load(args.program), args.substitute)
    rep = counting.program_ops(prog)
    if args.json:
        payload = rep.as_dict()
        payload["per_residue"] = {
            str(r): [str(c) for c in row]
            for r, row in enumerate(rep.total.coeffs)
        }
        print(json.dumps(payload, indent=2))
    else:
        for name, q in rep.per_equation:
            print(f"{name}: {q.render()}")
        print(f"total: {rep.total.render()}  (degree {rep.degree})")
    return 0


def _read_inputs(prog, n, path, seed):
    if path is None:
        return interp.random_inputs(prog, n, seed)
    text = Path(path).read_text()
    if str(path).endswith(".csv"):
        # one row per input variable: name,value,value,...
        data = {}
        for line in text.splitlines():
            if not line.strip():
                continue
            name, *vals = [x.strip() for x in line.split(",")]
            data[name] = vals
    else:
        data = json.loads(text)
    out = {}
    for v in prog.inputs():
        pts = ph.enumerate_points(v.domain, n)
        vals = data[v.name]
        flat = vals if isinstance(vals, list) else [vals]
        if len(flat) != len(pts):
            raise RedsimplError(
                f"input {v.name} needs {len(pts)} values at N={n}, got {len(flat)}"
            )
        conv = float if v.scalar == "float" else int
        out[v.name] = {pt: conv(x) for pt, x in zip(pts, flat)}
    return out


def cmd_run(args) -> int:
    prog = _load(args.program)
    inputs = _read_inputs(prog, args.n, args.inputs, args.seed)
    outs = interp.evaluate(prog, inputs, args.n)
    for name, vals in outs.items():
        print(name, " ".join(repr(v) if isinstance(v, float) else str(v) for v in vals.values()))
    return 0


def cmd_verify(args) -> int:
    p1 = _load(args.program)
    p2 = _load(args.candidate)
    sizes = [int(s) for s in args.sizes.split(",")]
    rep = interp.verify_equivalence(p1, p2, sizes, trials=args.trials, seed=args.seed, tol=args.tol)
    print(json.dumps(rep.as_dict(), indent=2))
    return 0 if rep.passed else 1


def cmd_profile(args) -> int:
    prog = _load(args.program)
    sizes = [int(s) for s in args.sizes.split(",")]
    prof = interp.op_profile(prog, sizes, seed=args.seed)
    print("N,ops")
    for n, ops in prof:
        print(f"{n},{ops}")
    if len(prof) >= 4:
        print(f"# fitted degree: {counting.measured_degree(prof):.3f}", file=sys.stderr)
    return 0


def cmd_emit_c(args) -> int:
    prog = _load(args.program)
    unit = cgen.emit_c(prog)
    out = Path(args.out) if args.out else None
    if out:
        out.write_text(unit.source)
        print(f"wrote {out} ({unit.entry_signature})")
    else:
        print(unit.source)
    return 0


def cmd_report(args) -> int:
    t_start = time.time()
    prog = _maybe_substitute(_load(args.program), args.substitute)
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    res = _run_search(prog, args)
    orig_rep = counting.program_ops(prog)
    verify_sizes = [int(s) for s in args.sizes.split(",")]
    rows = _variant_rows(prog, res, verify_sizes, args.seed, args.tol)

    profile_sizes = [int(s) for s in args.profile_sizes.split(",")]
    profiles = {"original": interp.op_profile(prog, profile_sizes, seed=args.seed)}
    for row, v in zip(rows, res.variants):
        profiles[row["program_id"]] = interp.op_profile(
            v.program, profile_sizes, seed=args.seed
        )

    # human table
    width = max(len(r["program_id"]) for r in rows) if rows else 8
    print(f"original: degree {orig_rep.degree}, ops {orig_rep.total.render()}")
    header = f"{'id':<{width}}  {'degree':>6}  {'verified':>8}  polynomial"
    print(header)
    print("-" * len(header))
    for r in rows:
        print(
            f"{r['program_id']:<{width}}  {r['degree']:>6}  "
            f"{str(r['verified']):>8}  {r['polynomial']}"
        )
    wall = time.time() - t_start

    # delimited output + JSON
    csv_path = outdir / "variants.csv"
    with csv_path.open("w") as f:
        f.write("program_id,degree,verified,polynomial,trace\n")
        for r in rows:
            trace = " / ".join(t["detail"] for t in r["trace"])
            f.write(
                f"{r['program_id']},{r['degree']},{r['verified']},"
                f"\"{r['polynomial']}\",\"{trace}\"\n"
            )
    prof_path = outdir / "profiles.csv"
    with prof_path.open("w") as f:
        f.write("program,N,ops\n")
        for pid, prof in profiles.items():
            for n, ops in prof:
                f.write(f"{pid},{n},{ops}\n")
    (outdir / "report.json").write_text(
        json.dumps(
            {
                "program": str(args.program),
                "original": {
                    "degree": orig_rep.degree,
                    "polynomial": orig_rep.total.render(),
                },
                "variants": rows,
                "profiles": {k: v for k, v in profiles.items()},
                "budget_exceeded": res.budget_exceeded,
                "explored": res.explored,
                "wall_seconds": wall,
                "seed": args.seed,
            },
            indent=2,
        )
    )
    stem = Path(args.program).stem
    for v, row in zip(res.variants, rows):
        (outdir / f"{stem}.{row['program_id']}.red").write_text(
            frontend.print_program(v.program)
        )
    if not args.no_plots:
        _render_figures(outdir, profiles, rows)
    print(f"report written to {outdir} ({wall:.1f}s)")
    return 0


def _render_figures(outdir: Path, profiles: dict, rows: list) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4.5))
    for pid, prof in profiles.items():
        ns = [n for n, _ in prof]
        ops = [max(o, 1) for _, o in prof]
        ax.plot(ns, ops, marker="o", label=pid)
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("problem size N")
    ax.set_ylabel("operator applications")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(outdir / "ops_vs_n.png", dpi=150)
    plt.close(fig)

    if rows:
        top = max(n for prof in profiles.values() for n, _ in prof)
        base = dict(profiles[rows[0]["program_id"]]).get(top)
        fig, ax = plt.subplots(figsize=(6, 4.5))
        ids = [r["program_id"] for r in rows]
        rel = [
            dict(profiles[i]).get(top, 0) / base if base else 0.0 for i in ids
        ]
        ax.bar(ids, rel)
        ax.set_ylabel(f"ops at N={top}, relative to {ids[0]}")
        ax.tick_params(axis="x", rotation=45)
        fig.tight_layout()
        fig.savefig(outdir / "relative_ops.png", dpi=150)
        plt.close(fig)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="redsimpl",
        description="simplify polyhedral reductions: lower asymptotic complexity by exploiting reuse",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, search=False):
        p.add_argument("program", help="input .red program")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--tol", type=float, default=1e-6)
        if search:
            p.add_argument("--all", action="store_true", default=True, help="exhaustive search (default)")
            p.add_argument("--first", action="store_true", help="stop the search at the first variant")
            p.add_argument("--budget-nodes", type=int, default=20000)
            p.add_argument("--budget-seconds", type=float, default=300.0)
            p.add_argument("--substitute", metavar="USE=DEF", help="inline DEF into USE before searching")

    p = sub.add_parser("check", help="parse and validate a program")
    p.add_argument("program")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("lattice", help="print the face lattice of each reduction body")
    p.add_argument("program")
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_lattice)

    p = sub.add_parser("simplify", help="search for simplified variants")
    common(p, search=True)
    p.add_argument("--emit-dir", help="write one .red per variant plus variants.json")
    p.set_defaults(fn=cmd_simplify)

    p = sub.add_parser("count", help="exact operation-count polynomials")
    p.add_argument("program")
    p.add_argument("--json", action="store_true")
    p.add_argument("--substitute", metavar="USE=DEF")
    p.set_defaults(fn=cmd_count)

    p = sub.add_parser("run", help="evaluate a program")
    p.add_argument("program")
    p.add_argument("-n", type=int, required=True)
    p.add_argument("--inputs", help="JSON file {var: [values in lexicographic point order]}")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("verify", help="compare two programs on random inputs")
    p.add_argument("program")
    p.add_argument("candidate")
    p.add_argument("--sizes", default="4,6,8")
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("profile", help="exact operation counts per size")
    p.add_argument("program")
    p.add_argument("--sizes", default="8,12,16,24,32")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_profile)

    p = sub.add_parser("emit-c", help="emit demand-driven C")
    p.add_argument("program")
    p.add_argument("--out", help="output .c path (default stdout)")
    p.set_defaults(fn=cmd_emit_c)

    p = sub.add_parser("report", help="simplify + count + verify end to end")
    common(p, search=True)
    p.add_argument("--out-dir", default="report")
    p.add_argument("--sizes", default="4,6,8", help="verification sizes")
    p.add_argument("--profile-sizes", default="8,12,16,24")
    p.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    p.set_defaults(fn=cmd_report)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except RedsimplError as e:
        print(f"error[{e.code}]: {e.message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())

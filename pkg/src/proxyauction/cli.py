"""Command-line harness: generate | solve | run | verify | bench.

Reports are canonical JSON (sorted keys, fixed indentation) and contain no
wall-clock data, so identical flags and seed produce byte-identical output;
pass --timings to print stage durations to stderr instead. The bench command
is the exception: measuring time is its purpose, and its report says so.

Exit status: 0 on success, 1 when verify finds a failed asserted check,
2 on usage or input errors.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

from . import serialize as ser
from . import verify as ver
from .errors import AuctionError
from .generators import (
    DEFAULT_CORPUS_SEED,
    GENERATOR_KINDS,
    generate,
    standard_corpus,
    truthfulness_corpus,
)
from .lp import EXACT, FLOAT, LP_ITEM_CAP, build_full_lp, solve_column_generation, solve_exact
from .mechanism import (
    ATOM_CAP,
    MechanismConfig,
    Pipeline,
    Q_HALT,
    Q_OWN_ITEMS,
    SOLVER_COLGEN,
    SOLVER_FULL,
    default_params,
    realized_welfare,
)
from .rng import derive_seed
from .valuations import PROXY_SUBSET_CAP
from .verify import INTEGRAL_CAP

MANIFEST_SCHEMA = "corpus-manifest/1"
REPORT_SCHEMA = "run-report/1"
VERIFY_SCHEMA = "verify-report/1"

DEFAULT_CHECKS = "welfare,marginals,approximation,proxy-bound,lp"
ALL_CHECKS = (
    "welfare",
    "marginals",
    "approximation",
    "proxy-bound",
    "lp",
    "halt-freq",
    "monte-carlo",
    "truthfulness",
)


def _instance_digest(instance) -> str:
    return hashlib.sha256(
        ser.canonical_dumps(ser.instance_to_dict(instance)).encode("utf-8")
    ).hexdigest()[:16]


CAP_KEYS = ("proxy", "lp", "atoms", "integral")


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--c", help="keep probability, a rational like 1/267 (default: from m)")
    parser.add_argument("--p", help="survival probability, a rational like 1/20")
    parser.add_argument(
        "--q-variant", choices=[Q_HALT, Q_OWN_ITEMS], help="q event scope (default: halt)"
    )
    parser.add_argument("--mode", choices=[EXACT, FLOAT], help="arithmetic (default: exact)")
    parser.add_argument("--seed", type=int, help="master seed (default: 0)")
    parser.add_argument(
        "--solver", choices=[SOLVER_FULL, SOLVER_COLGEN], help="LP method (default: full)"
    )
    parser.add_argument(
        "--caps",
        help=f"enumeration caps as key=int pairs, comma separated; keys: {', '.join(CAP_KEYS)}",
    )


def _parse_caps(text: str | None) -> dict:
    caps: dict = {}
    if not text:
        return caps
    for part in text.split(","):
        key, _, value = part.partition("=")
        key, value = key.strip(), value.strip()
        if key not in CAP_KEYS or not value.isdigit():
            raise AuctionError(
                f"bad --caps entry {part!r}; expected key=integer with keys {CAP_KEYS}"
            )
        caps[key] = int(value)
    return caps


def _build_config(args, m: int, base: MechanismConfig | None = None) -> MechanismConfig:
    """Merge CLI flags over a manifest config over built-in defaults."""
    if base is not None:
        c, p = base.c, base.p
        q_variant, mode = base.q_variant, base.arithmetic
        seed, solver = base.seed, base.solver
    else:
        # p's default is the constant 1/20; only c's default needs m >= 4
        c = default_params(m)[0] if args.c is None else Fraction(args.c)
        p = Fraction(1, 20) if args.p is None else Fraction(args.p)
        q_variant, mode, seed, solver = Q_HALT, EXACT, 0, SOLVER_FULL
    if args.c is not None:
        c = Fraction(args.c)
    if args.p is not None:
        p = Fraction(args.p)
    if args.q_variant is not None:
        q_variant = args.q_variant
    if args.mode is not None:
        mode = args.mode
    if args.seed is not None:
        seed = args.seed
    if args.solver is not None:
        solver = args.solver
    return MechanismConfig(
        c=c, p=p, q_variant=q_variant, arithmetic=mode, seed=seed, solver=solver
    )


def _emit(args, report: dict, text: str | None = None) -> None:
    if getattr(args, "format", "json") == "table" and text is not None:
        payload = text if text.endswith("\n") else text + "\n"
    else:
        payload = ser.canonical_dumps(report)
    if getattr(args, "out", None):
        Path(args.out).write_text(payload, encoding="utf-8")
    else:
        sys.stdout.write(payload)


def _table(rows: list[list[str]]) -> str:
    if not rows:
        return ""
    widths = [max(len(str(row[i])) for row in rows) for i in range(len(rows[0]))]
    return "\n".join(
        "  ".join(str(cell).ljust(w) for cell, w in zip(row, widths)).rstrip() for row in rows
    )


# -- generate ----------------------------------------------------------------


def cmd_generate(args) -> int:
    if args.corpus:
        out_dir = Path(args.out_dir or args.corpus + "-corpus")
        out_dir.mkdir(parents=True, exist_ok=True)
        corpus = (
            standard_corpus(args.seed if args.seed is not None else DEFAULT_CORPUS_SEED)
            if args.corpus == "standard"
            else truthfulness_corpus(args.seed if args.seed is not None else DEFAULT_CORPUS_SEED)
        )
        manifest = {"schema": MANIFEST_SCHEMA, "instances": []}
        for item in corpus:
            fname = f"{item.label}.json"
            ser.save_instance(out_dir / fname, item.instance)
            manifest["instances"].append(
                {
                    "file": fname,
                    "label": item.label,
                    "config": ser.config_to_dict(item.config),
                }
            )
        ser.save_json(out_dir / "manifest.json", manifest)
        sys.stderr.write(f"wrote {len(corpus)} instances to {out_dir}/\n")
        return 0
    if args.kind is None or args.n is None or args.m is None:
        raise AuctionError("generate needs either --corpus or all of --kind/--n/--m")
    params = {}
    if args.clauses is not None:
        if args.kind != "xos":
            raise AuctionError("--clauses only applies to --kind xos")
        params["clauses"] = args.clauses
    if args.elements is not None:
        if args.kind != "coverage":
            raise AuctionError("--elements only applies to --kind coverage")
        params["elements"] = args.elements
    instance = generate(
        args.kind, args.n, args.m, args.seed if args.seed is not None else 0, **params
    )
    payload = ser.instance_to_dict(instance)
    if args.out:
        ser.save_json(args.out, payload)
    else:
        sys.stdout.write(ser.canonical_dumps(payload))
    return 0


# -- solve -------------------------------------------------------------------


def cmd_solve(args) -> int:
    instance = ser.load_instance(args.instance)
    caps = _parse_caps(args.caps)
    if args.valuations == "proxy":
        config = _build_config(args, instance.m)
        oracles = instance.proxies(config.c, subset_cap=caps.get("proxy", PROXY_SUBSET_CAP))
        objective_kind = "proxy"
    else:
        # the raw objective is the proxy objective at c = 1 (no thinning)
        ns = argparse.Namespace(**{**vars(args), "c": args.c if args.c is not None else "1"})
        config = _build_config(ns, instance.m)
        oracles = instance.valuations
        objective_kind = "raw"
    started = time.perf_counter()
    if config.solver == SOLVER_COLGEN:
        solution = solve_column_generation(instance, oracles, arithmetic=config.arithmetic)
    else:
        lp = build_full_lp(instance, oracles, item_cap=caps.get("lp", LP_ITEM_CAP))
        solution = solve_exact(lp, arithmetic=config.arithmetic)
    elapsed = time.perf_counter() - started
    if args.timings:
        sys.stderr.write(f"solve: {elapsed:.4f}s\n")
    report = {
        "schema": REPORT_SCHEMA,
        "command": "solve",
        "instance": {
            "path": str(args.instance),
            "digest": _instance_digest(instance),
            "n": instance.n,
            "m": instance.m,
        },
        "config": ser.config_to_dict(config),
        "objective_kind": objective_kind,
        "semantics": config.semantics(),
        "solution": ser.solution_to_dict(solution),
        "query_counts": instance.query_totals(),
    }
    rows = [["bidder", "bundle", "x"]]
    for i, bundle, x in solution.support():
        rows.append([str(i), repr(bundle), str(x)])
    text = f"objective ({objective_kind}): {solution.objective}\n" + _table(rows)
    _emit(args, report, text)
    return 0


# -- run ---------------------------------------------------------------------


def cmd_run(args) -> int:
    instance = ser.load_instance(args.instance)
    config = _build_config(args, instance.m)
    caps = _parse_caps(args.caps)
    started = time.perf_counter()
    pipeline = Pipeline(
        instance,
        config,
        atom_cap=caps.get("atoms", ATOM_CAP),
        proxy_cap=caps.get("proxy"),
    )
    if args.replications is None:
        seeds = [config.seed]
    else:
        seeds = [derive_seed(config.seed, "replication", r) for r in range(args.replications)]
    outcomes = [pipeline.sample(seed) for seed in seeds]
    payments = pipeline.payments() if args.payments else None
    elapsed = time.perf_counter() - started
    if args.timings:
        sys.stderr.write(f"run: {elapsed:.4f}s for {len(seeds)} outcome(s)\n")

    mode = config.arithmetic
    outcome_dicts = []
    for seed, outcome in zip(seeds, outcomes):
        entry = ser.outcome_to_dict(outcome, mode)
        entry["sample_seed"] = seed
        entry["welfare"] = ser.format_value(realized_welfare(instance, outcome), mode)
        outcome_dicts.append(entry)
    report = {
        "schema": REPORT_SCHEMA,
        "command": "run",
        "instance": {
            "path": str(args.instance),
            "digest": _instance_digest(instance),
            "n": instance.n,
            "m": instance.m,
        },
        "config": ser.config_to_dict(config),
        "semantics": config.semantics(),
        "lp": ser.solution_to_dict(pipeline.solution),
        "outcomes": outcome_dicts,
        "payments": None if payments is None else [ser.format_value(x, mode) for x in payments],
        "query_counts": instance.query_totals(),
    }
    rows = [["outcome", "halted", "final bundles", "welfare"]]
    for k, (outcome, entry) in enumerate(zip(outcomes, outcome_dicts)):
        rows.append(
            [
                str(k),
                "yes" if outcome.halted else "no",
                " ".join(repr(b) for b in outcome.final),
                entry["welfare"],
            ]
        )
    text = (
        f"LP objective (proxy): {pipeline.solution.objective}\n"
        + _table(rows)
        + (f"\npayments: {[str(x) for x in payments]}" if payments is not None else "")
    )
    _emit(args, report, text)
    return 0


# -- verify ------------------------------------------------------------------


def _checks_for(instance, config, checks: list[str], trials: int, caps: dict) -> list[dict]:
    atom_cap = caps.get("atoms", ATOM_CAP)
    results = []
    for name in checks:
        if name == "welfare":
            res = ver.check_welfare_identity(instance, config, atom_cap=atom_cap)
            asserted = True
        elif name == "marginals":
            res = ver.check_keep_marginals(instance, config, atom_cap=atom_cap)
            asserted = True
        elif name == "approximation":
            res = ver.check_approximation(
                instance, config, cap=caps.get("integral", INTEGRAL_CAP), atom_cap=atom_cap
            )
            asserted = True
        elif name == "proxy-bound":
            res, asserted = ver.check_proxy_bound(instance), True
        elif name == "lp":
            res, asserted = ver.check_lp_agreement(instance, config), True
        elif name == "halt-freq":
            res, asserted = ver.check_halt_frequency(instance, config, trials), True
        elif name == "monte-carlo":
            res, asserted = ver.check_monte_carlo(instance, config, trials), True
        elif name == "truthfulness":
            res = ver.check_truthfulness(instance, config)
            asserted = config.q_variant == Q_HALT
        else:
            raise AuctionError(f"unknown check {name!r}; choose from {ALL_CHECKS}")
        results.append(
            {
                "check": res.check,
                "passed": res.passed,
                "asserted": asserted,
                "details": res.details,
                "witness": res.witness,
            }
        )
    return results


def _verify_worker(payload: tuple) -> tuple[str, list[dict]]:
    path, config_dict, checks, trials, overrides, caps = payload
    instance = ser.load_instance(path)
    base = ser.config_from_dict(config_dict) if config_dict else None
    ns = argparse.Namespace(**overrides)
    config = _build_config(ns, instance.m, base=base)
    results = _checks_for(instance, config, checks, trials, caps)
    for r in results:
        r["instance"] = str(path)
        r["config"] = ser.config_to_dict(config)
    return str(path), results


def _verify_targets(args) -> list[tuple[str, dict | None]]:
    target = Path(args.target)
    if target.is_dir():
        manifest_path = target / "manifest.json"
        if manifest_path.exists():
            manifest = ser.load_json(manifest_path)
            return [
                (str(target / item["file"]), item.get("config"))
                for item in manifest.get("instances", [])
            ]
        return [
            (str(p), None)
            for p in sorted(target.glob("*.json"))
            if ser.load_json(p).get("schema") == ser.INSTANCE_SCHEMA
        ]
    return [(str(target), None)]


def cmd_verify(args) -> int:
    checks = [c.strip() for c in args.checks.split(",") if c.strip()]
    targets = _verify_targets(args)
    if not targets:
        raise AuctionError(f"no instances found under {args.target}")
    overrides = {
        "c": args.c,
        "p": args.p,
        "q_variant": args.q_variant,
        "mode": args.mode,
        "seed": args.seed,
        "solver": args.solver,
    }
    caps = _parse_caps(args.caps)
    payloads = [(path, cfg, checks, args.trials, overrides, caps) for path, cfg in targets]
    started = time.perf_counter()
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            collected = list(pool.map(_verify_worker, payloads))
    else:
        collected = [_verify_worker(p) for p in payloads]
    elapsed = time.perf_counter() - started
    if args.timings:
        sys.stderr.write(f"verify: {elapsed:.4f}s over {len(targets)} instance(s)\n")

    results = [r for _, rs in collected for r in rs]
    failed = [r for r in results if r["asserted"] and not r["passed"]]
    report = {
        "schema": VERIFY_SCHEMA,
        "command": "verify",
        "checks": checks,
        "results": results,
        "passed": not failed,
    }
    rows = [["result", "check", "instance"]]
    for r in results:
        status = "PASS" if r["passed"] else ("FAIL" if r["asserted"] else "info")
        rows.append([status, r["check"], Path(r["instance"]).name])
    text = _table(rows) + f"\noverall: {'PASS' if not failed else 'FAIL'}"
    _emit(args, report, text)
    return 0 if not failed else 1


# -- bench -------------------------------------------------------------------


def cmd_bench(args) -> int:
    sizes = [int(x) for x in args.m_list.split(",")]
    rows = [["m", "columns", "exact-full s", "exact-colgen s", "float-full s", "objectives"]]
    records = []
    for m in sizes:
        instance = generate(args.kind, args.n, m, args.seed)
        c, _ = default_params(m) if m >= 4 else (Fraction(1, 2), None)
        proxies = instance.proxies(c)

        def time_it(fn, repeat=args.repeat):
            best, value = None, None
            for _ in range(repeat):
                t0 = time.perf_counter()
                value = fn()
                dt = time.perf_counter() - t0
                best = dt if best is None else min(best, dt)
            return best, value

        lp = build_full_lp(instance, proxies)
        t_exact, sol_exact = time_it(lambda: solve_exact(lp, arithmetic=EXACT))
        t_colgen, sol_colgen = time_it(
            lambda: solve_column_generation(instance, proxies, arithmetic=EXACT)
        )
        t_float, sol_float = time_it(lambda: solve_exact(lp, arithmetic=FLOAT))
        agree = sol_exact.objective == sol_colgen.objective and abs(
            float(sol_exact.objective) - sol_float.objective
        ) <= 1e-6 * (1 + abs(sol_float.objective))
        rows.append(
            [
                str(m),
                str(len(lp.columns)),
                f"{t_exact:.4f}",
                f"{t_colgen:.4f}",
                f"{t_float:.4f}",
                "agree" if agree else "MISMATCH",
            ]
        )
        records.append(
            {
                "m": m,
                "columns": len(lp.columns),
                "exact_full_seconds": t_exact,
                "exact_colgen_seconds": t_colgen,
                "float_full_seconds": t_float,
                "objective": str(sol_exact.objective),
                "objectives_agree": agree,
            }
        )
    report = {
        "schema": "bench-report/1",
        "command": "bench",
        "kind": args.kind,
        "n": args.n,
        "seed": args.seed,
        "note": "timings are wall-clock; this report is not byte-reproducible",
        "rows": records,
    }
    _emit(args, report, _table(rows))
    return 0


# -- entry -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proxyauction",
        description=(
            "Truthful-in-expectation combinatorial auction mechanism: instance "
            "generation, configuration-LP solving, randomized allocation runs, "
            "and exact verification of the mechanism's probabilistic identities."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="create instance files or a bundled corpus")
    g.add_argument("--kind", choices=GENERATOR_KINDS)
    g.add_argument("--n", type=int, help="bidder count")
    g.add_argument("--m", type=int, help="item count")
    g.add_argument("--seed", type=int)
    g.add_argument("--clauses", type=int, help="xos only: additive clauses per bidder")
    g.add_argument("--elements", type=int, help="coverage only: ground-set size")
    g.add_argument("--out", help="instance file (default: stdout)")
    g.add_argument("--corpus", choices=["standard", "truthfulness"])
    g.add_argument("--out-dir", help="directory for --corpus output")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="solve the configuration LP for an instance")
    s.add_argument("instance")
    s.add_argument("--valuations", choices=["raw", "proxy"], default="raw")
    _add_config_flags(s)
    s.add_argument("--format", choices=["json", "table"], default="json")
    s.add_argument("--out")
    s.add_argument("--timings", action="store_true", help="print wall-clock to stderr")
    s.set_defaults(func=cmd_solve)

    r = sub.add_parser("run", help="execute the mechanism on an instance")
    r.add_argument("instance")
    _add_config_flags(r)
    r.add_argument("--replications", type=int, help="sample R outcomes over derived seeds")
    r.add_argument("--payments", action="store_true", help="also compute charges")
    r.add_argument("--format", choices=["json", "table"], default="json")
    r.add_argument("--out")
    r.add_argument("--timings", action="store_true")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="run certification checks on instances")
    v.add_argument("target", help="instance file, corpus directory, or manifest directory")
    v.add_argument("--checks", default=DEFAULT_CHECKS, help=f"comma list from {ALL_CHECKS}")
    v.add_argument("--trials", type=int, default=10_000, help="Monte Carlo trials")
    v.add_argument("--workers", type=int, default=1, help="parallel instance workers")
    _add_config_flags(v)
    v.add_argument("--format", choices=["json", "table"], default="json")
    v.add_argument("--out")
    v.add_argument("--timings", action="store_true")
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", help="compare exact/float and full/column-generation solving")
    b.add_argument("--kind", choices=GENERATOR_KINDS, default="xos")
    b.add_argument("--n", type=int, default=3)
    b.add_argument("--m-list", default="4,6,8")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--repeat", type=int, default=3)
    b.add_argument("--format", choices=["json", "table"], default="table")
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AuctionError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())

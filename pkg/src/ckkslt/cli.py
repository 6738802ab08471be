"""Command-line interface.

Subcommands:

    demo      end-to-end encrypted linear transform on random inputs
    analyze   key-size / compute trade-off sweep (CSV or JSON)
    simulate  six-phase datapath metering report (JSON)
    validate  simulator vs closed-form cross-check

Reports are deterministic for a fixed seed and configuration; timing
goes to stderr so saved output stays byte-identical. Exit codes:
0 success, 1 usage or configuration error, 2 tolerance or validation
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import costmodel as cm
from . import datapath as dp

BANNER = "# NOT FOR PRODUCTION CRYPTOGRAPHY: toy parameters, unhardened arithmetic"

TOY_PROFILES = {
    # name: (ring_dim, levels, alpha, prime_bits)
    "toy": (2**10, 5, 5, 44),
    "toy-small": (2**8, 3, 3, 30),
    "set-a": (2**13, 5, 5, 44),
}


def _parse_int_list(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(","))


def load_config_file(path: str) -> dict:
    """Flat key=value lines with optional [section] headers; section names
    prefix their keys as section.key."""
    out = {}
    section = ""
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                section = line[1:-1].strip()
                continue
            if "=" not in line:
                raise ValueError(f"bad config line: {raw!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            out[f"{section}.{key}" if section else key] = val
    return out


def _emit(text: str, out_path: str | None):
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _shape_params(args) -> cm.HeParams:
    if args.params in cm.NAMED_SETS:
        base = cm.NAMED_SETS[args.params]
        n = args.n or base.n
        return cm.HeParams(base.ring_dim, base.levels, base.alpha,
                           base.word_bits, n=n)
    if args.params in TOY_PROFILES:
        ring_dim, levels, alpha, bits = TOY_PROFILES[args.params]
        n = args.n or ring_dim // 2
        return cm.HeParams(ring_dim, levels, alpha, bits, n=n)
    raise SystemExit(f"unknown parameter set {args.params!r}")


# ---------------------------------------------------------------------------
# demo


def cmd_demo(args) -> int:
    from . import ckks, linear

    if args.params not in TOY_PROFILES:
        print(f"demo needs a toy-feasible profile, not {args.params!r}",
              file=sys.stderr)
        return 1
    ring_dim, levels, alpha, bits = TOY_PROFILES[args.params]
    if ring_dim > 2**13 and not args.force:
        print("ring dimension above the demo guard; pass --force", file=sys.stderr)
        return 1
    params = ckks.CkksParams.make(ring_dim=ring_dim, levels=levels,
                                  alpha=alpha, prime_bits=bits)
    n = args.n
    if n > params.slots:
        print(f"--n {n} exceeds slot count {params.slots}", file=sys.stderr)
        return 1
    rng = np.random.default_rng(args.seed)
    if args.identity:
        f_matrix = np.eye(n)
    else:
        f_matrix = rng.uniform(-1, 1, (n, n))
    v = rng.uniform(-1, 1, n)

    methods = ([m.value for m in linear.LtMethod] if args.method == "all"
               else [args.method])
    plans = []
    for name in methods:
        method = linear.LtMethod(name)
        if method == linear.LtMethod.DIAGONAL:
            plans.append(linear.LtPlan(method, n))
        elif method in (linear.LtMethod.BSGS, linear.LtMethod.DH_BSGS):
            fs = args.factors if args.factors and len(args.factors) == 2 \
                else cm.search_factors(name, cm.HeParams(
                    ring_dim, levels, alpha, bits, n=n), "min_compute")
            plans.append(linear.LtPlan(method, n, tuple(fs)))
        else:
            fs = args.factors if args.factors and len(args.factors) == 3 \
                else cm.search_factors(name, cm.HeParams(
                    ring_dim, levels, alpha, bits, n=n), "min_keys")
            plans.append(linear.LtPlan(method, n, tuple(fs)))

    t0 = time.time()
    report = linear.lt_equivalence_check(f_matrix, v, params, plans,
                                         seed=args.seed)
    elapsed = time.time() - t0
    worst = max(report["errors"].values())
    status = "PASS" if worst < args.tolerance else "FAIL"
    if args.save_output:
        from . import serialize
        for name, ct_out in report["ciphertexts"].items():
            path = (args.save_output if len(report["ciphertexts"]) == 1
                    else f"{args.save_output}.{name}")
            with open(path, "wb") as fh:
                fh.write(serialize.save_ciphertext(ct_out))
    rows = []
    for name in sorted(report["errors"]):
        tr = report["traces"][name]
        rows.append({
            "method": name,
            "error": report["errors"][name],
            "decompose": tr.decompose,
            "moddown": tr.moddown,
            "key_offsets": len(tr.key_offsets),
            "cwise_mult_limbs": tr.cwise_mult_limbs,
        })
    if args.format == "json":
        payload = {
            "banner": BANNER.lstrip("# "),
            "methods": rows,
            "tolerance": args.tolerance,
            "max_error": worst,
            "status": status,
        }
        if args.compare:
            payload["pairwise"] = report["pairwise"]
        text = json.dumps(payload, indent=2) + "\n"
    elif args.format == "csv":
        import csv as _csv
        import io as _io
        buf = _io.StringIO()
        buf.write(BANNER + "\n")
        writer = _csv.DictWriter(buf, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
        buf.write(f"# tolerance={args.tolerance:.1e} max_error={worst:.3e} "
                  f"{status}\n")
        text = buf.getvalue()
    else:
        lines = [BANNER]
        for row in rows:
            lines.append(
                "method={method} error={error:.3e} decompose={decompose} "
                "moddown={moddown} key_offsets={key_offsets} "
                "cwise_mult_limbs={cwise_mult_limbs}".format(**row))
        if args.compare and report["pairwise"]:
            for pair in sorted(report["pairwise"]):
                lines.append(
                    f"pairwise {pair} diff={report['pairwise'][pair]:.3e}")
            lines.append(f"max_pairwise={max(report['pairwise'].values()):.3e}")
        lines.append(
            f"tolerance={args.tolerance:.1e} max_error={worst:.3e} {status}")
        text = "\n".join(lines) + "\n"
    _emit(text, args.out)
    print(f"wall time: {elapsed:.2f}s", file=sys.stderr)
    return 0 if status == "PASS" else 2


# ---------------------------------------------------------------------------
# analyze


def cmd_analyze(args) -> int:
    params = _shape_params(args)
    methods = (["bsgs", "dh-bsgs", "th-bsgs"] if args.method == "all"
               else [args.method])
    points = cm.tradeoff_curve(methods, params)
    if args.format == "csv":
        text = cm.tradeoff_csv(points)
        if "dh-bsgs" in methods and "th-bsgs" in methods:
            ratio = cm.best_tradeoff_ratio(params)
            text += ("# dh_best={} th_best={} key_ratio={:.4f}\n".format(
                "x".join(map(str, ratio["dh_factors"])),
                "x".join(map(str, ratio["th_factors"])),
                ratio["ratio"]))
    else:
        payload = {
            "params": {"ring_dim": params.ring_dim, "levels": params.levels,
                       "alpha": params.alpha, "w": params.word_bits,
                       "n": params.n},
            "points": [
                {"method": p.method, "factors": list(p.factors),
                 "key_limbs": p.key_limbs, "key_bytes": p.key_bytes,
                 "modmul_total": p.modmul_total, "tag": p.tag}
                for p in points
            ],
        }
        if "dh-bsgs" in methods and "th-bsgs" in methods:
            payload["key_ratio"] = cm.best_tradeoff_ratio(params)
        text = json.dumps(payload, indent=2) + "\n"
    _emit(text, args.out)
    return 0


# ---------------------------------------------------------------------------
# simulate / validate


def _factors_and_config(args, params):
    if args.params in cm.REFERENCE_CONFIGS and not args.factors:
        _, factors, cfg = cm.reference_config(args.params)
    else:
        factors = tuple(args.factors) if args.factors else \
            cm.search_factors("th-bsgs", params, "min_keys")
        cfg = cm.ParallelismConfig(dp=args.dp)
    if args.parallelism:
        vals = args.parallelism
        if len(vals) != 11:
            raise SystemExit("--parallelism wants m1,...,m6,l1,...,l5")
        cfg = cm.ParallelismConfig(*vals[:6], *vals[6:], dp=args.dp)
    if args.budget_bytes:
        cfg = cm.search_parallelism(params, factors, args.budget_bytes,
                                    dp=args.dp)
    return factors, cfg


def cmd_simulate(args) -> int:
    params = _shape_params(args)
    factors, cfg = _factors_and_config(args, params)
    sim = dp.simulate(params, factors, cfg, mode="count_only")
    text = json.dumps(dp.report_json(params, factors, cfg, sim), indent=2) + "\n"
    _emit(text, args.out)
    return 0


def cmd_validate(args) -> int:
    params = _shape_params(args)
    factors, cfg = _factors_and_config(args, params)
    rows = dp.validate_against_model(params, factors, cfg)
    unexplained = [r for r in rows if not r["explained"]]
    payload = {"cells": rows, "unexplained": len(unexplained)}
    text = json.dumps(payload, indent=2) + "\n"
    _emit(text, args.out)
    if unexplained:
        print(f"{len(unexplained)} unexplained deltas", file=sys.stderr)
        return 2
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ckkslt",
        description="Encrypted linear transforms: demos, cost sweeps, and "
                    "datapath simulation (not for production cryptography).",
    )
    parser.add_argument("--config", help="key=value config file; flags override")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--params", default="toy",
                       help="toy | toy-small | set-a | set-b | set-c")
        p.add_argument("--n", type=int, default=0, help="transform dimension")
        p.add_argument("--factors", type=_parse_int_list, default=None)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--format", choices=("csv", "json"), default="json")
        p.add_argument("--out", default=None)

    d = sub.add_parser("demo", help="run encrypted transforms end to end")
    common(d)
    d.add_argument("--method", default="th-bsgs",
                   choices=("diagonal", "bsgs", "dh-bsgs", "th-bsgs", "all"))
    d.add_argument("--tolerance", type=float, default=1e-3)
    d.add_argument("--compare", action="store_true",
                   help="print pairwise output differences")
    d.add_argument("--identity", action="store_true",
                   help="use the identity matrix")
    d.add_argument("--force", action="store_true",
                   help="override the ring-dimension guard")
    d.add_argument("--save-output", default=None,
                   help="write the result ciphertext container(s) here")
    d.set_defaults(func=cmd_demo, n=64, format="text")

    a = sub.add_parser("analyze", help="key-size / compute trade-off sweep")
    common(a)
    a.add_argument("--method", default="all",
                   choices=("diagonal", "bsgs", "dh-bsgs", "th-bsgs", "all"))
    a.set_defaults(func=cmd_analyze)

    for name, fn in (("simulate", cmd_simulate), ("validate", cmd_validate)):
        s = sub.add_parser(name)
        common(s)
        s.add_argument("--parallelism", type=_parse_int_list, default=None,
                       help="m1,...,m6,l1,...,l5")
        s.add_argument("--dp", type=int, default=2)
        s.add_argument("--budget-bytes", type=int, default=0)
        s.set_defaults(func=fn)
    return parser


def _apply_config_file(args, parser):
    if not args.config:
        return args
    values = load_config_file(args.config)
    explicit = {a for a in sys.argv[1:] if a.startswith("--")}
    for key, val in values.items():
        name = key.split(".", 1)[-1].replace("-", "_")
        if not hasattr(args, name) or f"--{name.replace('_', '-')}" in explicit:
            continue
        current = getattr(args, name)
        if isinstance(current, bool):
            setattr(args, name, val.lower() in ("1", "true", "yes"))
        elif isinstance(current, int):
            setattr(args, name, int(val))
        elif isinstance(current, float):
            setattr(args, name, float(val))
        elif isinstance(current, tuple) or name == "factors":
            setattr(args, name, _parse_int_list(val))
        else:
            setattr(args, name, val)
    return args


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _apply_config_file(args, parser)
        return args.func(args)
    except (cm.ConfigOutOfRange, cm.BadFactors, cm.Infeasible, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

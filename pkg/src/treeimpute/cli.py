"""Command-line surface: impute, ampute, generate and the Monte Carlo
benchmark harness.

The benchmark emits one records CSV (a row per dataset, mechanism, rate,
method, run and metric) and one summary CSV with per-cell statistics and
one-sided Brunner-Munzel comparisons, ready for any plotting tool.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .ampute import AmputeConfig, MECHANISMS, ampute
from .datamodel import DataError, DataMatrix, load_csv, save_csv, save_schema
from .imputer import DEFAULT_MAX_ITER, METHOD_NAMES, impute, method_spec
from .metrics import DegenerateTestError, UndefinedMetricError, brunner_munzel, \
    nrmse, pfc, star_code
from .rngdist import stream, sub_seed
from .synthdata import DESIGNS, DesignSpec, generate

_MECHANISM_ALIASES = {"mcar": "mcar_exact"}


def _mechanism(name: str) -> str:
    name = name.strip().lower()
    name = _MECHANISM_ALIASES.get(name, name)
    if name not in MECHANISMS:
        raise ValueError(f"unknown mechanism {name!r}")
    return name


def _fail(msg: str, code: int = 1) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


# ---------------------------------------------------------------------------
# impute / ampute / generate
# ---------------------------------------------------------------------------

def cmd_impute(args) -> int:
    if args.method not in METHOD_NAMES:
        return _fail(f"unknown method {args.method!r}; choose from "
                     f"{', '.join(METHOD_NAMES)}", 2)
    try:
        d = load_csv(args.data, args.schema, na_token=args.na_token)
        spec = method_spec(args.method, n_trees=args.trees,
                          gbm_iter=args.gbm_iter, gbm_step=args.gbm_step)
        result = impute(d, spec, max_iter=args.max_iter, seed=args.seed,
                        threads=args.threads)
        save_csv(result.data, args.output, na_token=args.na_token)
    except (DataError, ValueError, OSError) as e:
        return _fail(str(e))
    print(f"imputed {d.missing_count()} cells in {result.iterations} pass(es) "
          f"-> {args.output}")
    return 0


def cmd_ampute(args) -> int:
    try:
        mech = _mechanism(args.mechanism)
        d = load_csv(args.data, args.schema, na_token=args.na_token)
        out, mask = ampute(d, AmputeConfig(mech, args.rate, args.seed))
        save_csv(out, args.output, na_token=args.na_token)
        if args.mask_out:
            np.savetxt(args.mask_out, mask.astype(int), fmt="%d", delimiter=",")
    except (DataError, ValueError, OSError) as e:
        return _fail(str(e))
    print(f"amputed {int(mask.sum())} cells -> {args.output}")
    return 0


def cmd_generate(args) -> int:
    try:
        spec = DesignSpec(args.design, n=args.n, seed=args.seed, rho07=args.rho07)
        d = generate(spec)
        save_csv(d, args.output, na_token=args.na_token)
        save_schema(d.schema, args.schema_out)
    except ValueError as e:
        return _fail(str(e))
    print(f"generated {d.n}x{d.p} {args.design} -> {args.output}")
    return 0


# ---------------------------------------------------------------------------
# benchmark
# ---------------------------------------------------------------------------

@dataclass
class BenchmarkPlan:
    datasets: list  # (name, DesignSpec | (csv, schema) paths)
    mechanisms: list
    rates: list
    methods: list
    runs: int = 10
    seed: int = 0
    trees: int | None = None
    gbm_iter: int | None = None
    gbm_step: float | None = None
    max_iter: int = DEFAULT_MAX_ITER
    compare: list = field(default_factory=list)  # (method_a, method_b) pairs
    n: int = 250

    def __post_init__(self):
        if not (self.datasets and self.mechanisms and self.rates and self.methods):
            raise ValueError("plan needs datasets, mechanisms, rates and methods")
        if self.runs < 2:
            raise ValueError("plan needs runs >= 2")


def parse_plan(text: str) -> BenchmarkPlan:
    """Flat key = value lines; comma-separated lists; '#' comments."""
    kv = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"plan line {lineno}: expected key = value")
        key, val = line.split("=", 1)
        kv[key.strip().lower()] = val.strip()

    def split(key, default=""):
        raw = kv.get(key, default)
        return [s.strip() for s in raw.split(",") if s.strip()]

    seed = int(kv.get("seed", "0"))
    n = int(kv.get("n", "250"))
    datasets = []
    for name in split("designs"):
        if name not in DESIGNS:
            raise ValueError(f"unknown design {name!r}")
        datasets.append((name, DesignSpec(name, n=n)))
    for pair in split("files"):
        if ";" not in pair:
            raise ValueError("files entries are 'data.csv;data.schema'")
        csv_path, schema_path = (s.strip() for s in pair.split(";", 1))
        datasets.append((Path(csv_path).stem, (csv_path, schema_path)))

    mechanisms = [_mechanism(m) for m in split("mechanisms")]
    rates = [float(r) for r in split("rates")]
    methods = split("methods")
    for m in methods:
        if m not in METHOD_NAMES:
            raise ValueError(f"unknown method {m!r}")
    compare = []
    for pair in split("compare"):
        if ":" not in pair:
            raise ValueError("compare entries are 'methodA:methodB'")
        a, b = (s.strip() for s in pair.split(":", 1))
        compare.append((a, b))

    return BenchmarkPlan(
        datasets=datasets, mechanisms=mechanisms, rates=rates, methods=methods,
        runs=int(kv.get("runs", "10")), seed=seed,
        trees=int(kv["trees"]) if "trees" in kv else None,
        gbm_iter=int(kv["gbm_iter"]) if "gbm_iter" in kv else None,
        gbm_step=float(kv["gbm_step"]) if "gbm_step" in kv else None,
        max_iter=int(kv.get("max_iter", str(DEFAULT_MAX_ITER))),
        compare=compare, n=n)


def _dataset_for_run(entry, plan: BenchmarkPlan, run: int,
                     na_token: str) -> DataMatrix:
    name, src = entry
    if isinstance(src, DesignSpec):
        run_seed = sub_seed(stream(plan.seed, "bench-data", run))
        return generate(DesignSpec(src.design, n=src.n, seed=run_seed))
    csv_path, schema_path = src
    return load_csv(csv_path, schema_path, na_token=na_token)


def run_benchmark(plan: BenchmarkPlan, na_token: str = "NA",
                  threads: int = 1, log=print) -> tuple[list, list]:
    """Execute the plan; returns (record rows, summary rows)."""
    records = []
    cells = [(di, mech, rate)
             for di in range(len(plan.datasets))
             for mech in plan.mechanisms
             for rate in plan.rates]

    def one_run(task):
        ci, run = task
        di, mech, rate = cells[ci]
        entry = plan.datasets[di]
        name = entry[0]
        rows = []
        try:
            truth = _dataset_for_run(entry, plan, run, na_token)
            amp_seed = sub_seed(stream(plan.seed, "bench-ampute", ci, run))
            amputed, mask = ampute(truth, AmputeConfig(mech, rate, amp_seed))
        except Exception as e:  # noqa: BLE001 - recorded, harness continues
            for method in plan.methods:
                for metric in ("NRMSE", "PFC"):
                    rows.append((name, mech, rate, method, run, metric, "NA",
                                 "", str(e)))
            return rows
        mask_hash = hashlib.sha256(mask.tobytes()).hexdigest()[:12]
        for method in plan.methods:
            spec = method_spec(method, n_trees=plan.trees,
                               gbm_iter=plan.gbm_iter, gbm_step=plan.gbm_step)
            # keyed by method name, so a duplicated method reproduces itself
            imp_seed = sub_seed(stream(plan.seed, "bench-impute-" + method,
                                       ci, run))
            try:
                result = impute(amputed, spec, max_iter=plan.max_iter,
                                seed=imp_seed)
                for metric, fn in (("NRMSE", nrmse), ("PFC", pfc)):
                    try:
                        value = fn(truth, result.data, mask)
                    except UndefinedMetricError:
                        continue
                    rows.append((name, mech, rate, method, run, metric,
                                 repr(float(value)), mask_hash, ""))
            except Exception as e:  # noqa: BLE001
                for metric in ("NRMSE", "PFC"):
                    rows.append((name, mech, rate, method, run, metric, "NA",
                                 mask_hash, str(e)))
        log(f"run {name}/{mech}/r={rate} #{run} done")
        return rows

    tasks = [(ci, run) for ci in range(len(cells)) for run in range(plan.runs)]
    if threads <= 1:
        results = [one_run(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one_run, tasks))
    for rows in results:
        records.extend(rows)

    summary = _summarize(plan, records)
    return records, summary


def _summarize(plan: BenchmarkPlan, records: list) -> list:
    by_cell = {}
    for name, mech, rate, method, run, metric, value, _h, _r in records:
        if value == "NA":
            continue
        by_cell.setdefault((name, mech, rate, metric, method), {})[run] = float(value)

    summary = []
    seen_cells = sorted({k[:4] for k in by_cell})
    for name, mech, rate, metric in seen_cells:
        for method in plan.methods:
            vals = by_cell.get((name, mech, rate, metric, method))
            if not vals:
                continue
            v = np.array(sorted(vals.values()))
            q1, med, q3 = np.percentile(v, [25, 50, 75])
            summary.append(("stats", name, mech, rate, metric, method, "",
                            len(v), repr(float(v.mean())),
                            repr(float(v.std(ddof=1))) if len(v) > 1 else "0.0",
                            repr(float(v.min())), repr(float(q1)),
                            repr(float(med)), repr(float(q3)),
                            repr(float(v.max())), "", "", ""))
        for a, b in plan.compare:
            va = by_cell.get((name, mech, rate, metric, a), {})
            vb = by_cell.get((name, mech, rate, metric, b), {})
            shared = sorted(set(va) & set(vb))
            if len(shared) < 2:
                continue
            sa = np.array([va[r] for r in shared])
            sb = np.array([vb[r] for r in shared])
            # one-sided test in favor of the lower-mean (better) method
            favored, worse, fa, fb = (a, b, sa, sb) if sa.mean() <= sb.mean() \
                else (b, a, sb, sa)
            try:
                res = brunner_munzel(fa, fb, alternative="greater")
                p_val, p_hat, stars = res.p_value, res.p_hat, star_code(res.p_value)
            except DegenerateTestError as e:
                p_val, p_hat, stars = float("nan"), e.p_hat, ""
            summary.append(("bm_test", name, mech, rate, metric,
                            f"{favored}<{worse}", favored, len(shared),
                            "", "", "", "", "", "", "", repr(float(p_hat)),
                            repr(float(p_val)) if p_val == p_val else "NA",
                            stars))
    return summary


RECORD_HEADER = ("dataset", "mechanism", "rate", "method", "run", "metric",
                 "value", "mask_hash", "reason")
SUMMARY_HEADER = ("kind", "dataset", "mechanism", "rate", "metric", "method",
                  "favored", "n", "mean", "sd", "min", "q1", "median", "q3",
                  "max", "p_hat", "p_value", "stars")


def _write_csv(path, header, rows) -> None:
    import csv as _csv
    with open(path, "w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def cmd_benchmark(args) -> int:
    try:
        plan = parse_plan(Path(args.plan).read_text())
    except (OSError, ValueError) as e:
        return _fail(f"bad plan: {e}", 2)
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)
    log = (lambda *_: None) if args.quiet else print
    try:
        records, summary = run_benchmark(plan, na_token=args.na_token,
                                         threads=args.threads, log=log)
    except Exception as e:  # noqa: BLE001
        return _fail(str(e))
    _write_csv(outdir / "records.csv", RECORD_HEADER, records)
    _write_csv(outdir / "summary.csv", SUMMARY_HEADER, summary)
    print(f"wrote {outdir / 'records.csv'} and {outdir / 'summary.csv'}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_common(p) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--na-token", default="NA")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="treeimpute",
                                     description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("impute", help="fill missing values in a CSV")
    p.add_argument("data")
    p.add_argument("schema")
    p.add_argument("--method", default="missforest")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    p.add_argument("--trees", type=int, default=None)
    p.add_argument("--gbm-iter", type=int, default=None)
    p.add_argument("--gbm-step", type=float, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_impute)

    p = sub.add_parser("ampute", help="insert artificial missing values")
    p.add_argument("data")
    p.add_argument("schema")
    p.add_argument("--mechanism", required=True)
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--mask-out", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_ampute)

    p = sub.add_parser("generate", help="generate a synthetic design")
    p.add_argument("--design", required=True, choices=DESIGNS)
    p.add_argument("-n", type=int, default=250)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--schema-out", required=True)
    p.add_argument("--rho07", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("benchmark", help="run a Monte Carlo benchmark plan")
    p.add_argument("plan")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--quiet", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_benchmark)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line surface: reproducible, file-based runs of the pipeline.

Every artifact-writing subcommand writes its outputs atomically and drops a
``<out>.manifest.json`` next to the primary output recording the resolved
flags, the master seed, and digests of the input files. All randomness flows
from ``--seed``; re-running a command with the same flags reproduces the
outputs byte for byte. Environment variables are never consulted.

Exit codes: 0 success, 1 validation error, 2 internal error, 64 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .analysis import (
    DynamicBN,
    StratumSpec,
    learn_consensus,
    stratified_share,
    tune_penalty,
    variance_decomposition,
)
from .averaging import BootstrapSpec
from .errors import PanelDbnError, ValidationError
from .gaussian import PenaltyConfig
from .graphs import fold, folded_to_dot
from .impute import (
    MissingnessSpec,
    evaluate_imputation,
    impute_panel,
    inject_missing,
)
from .panel import (
    ConditionMapping,
    load_panel,
    make_transition_table,
    save_panel,
)
from .search import SearchOptions, hill_climb
from .simulate import GroundTruthSpec, random_dbn, sample_panel

USAGE_EXIT = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        self.exit(USAGE_EXIT, f"{self.prog}: error: {message}\n")


def _atomic_write(path: str | Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


def _write_manifest(args: argparse.Namespace, inputs: list[str], outputs: list[str]) -> None:
    flags = {
        k: v for k, v in sorted(vars(args).items()) if k not in ("func", "command")
    }
    manifest = {
        "tool": "paneldbn",
        "version": __version__,
        "command": args.command,
        "flags": flags,
        "seed": getattr(args, "seed", None),
        "inputs": {p: _digest(p) for p in inputs},
        "outputs": outputs,
        "created_utc": datetime.now(timezone.utc).isoformat(),
    }
    _atomic_write(
        outputs[0] + ".manifest.json", json.dumps(manifest, indent=2, sort_keys=True)
    )


def _load_input_panel(args: argparse.Namespace):
    mapping = None
    if getattr(args, "mapping", None):
        mapping = ConditionMapping.from_json(args.mapping)
    aggregate = getattr(args, "aggregate", "sum")
    return load_panel(args.input, mapping=mapping, aggregate=aggregate)


def _panel_csv(panel) -> str:
    import io

    buf = io.StringIO()
    save_panel(panel, buf)
    return buf.getvalue()


def _cmd_impute(args) -> None:
    panel = _load_input_panel(args)
    imputed, summary = impute_panel(panel, k=args.k)
    _atomic_write(args.out, _panel_csv(imputed))
    outputs = [args.out]
    if args.report:
        _atomic_write(args.report, json.dumps(summary.to_dict(), indent=2))
        outputs.append(args.report)
    inputs = [args.input] + ([args.mapping] if args.mapping else [])
    _write_manifest(args, inputs, outputs)


def _cmd_impute_eval(args) -> None:
    panel = _load_input_panel(args)
    spec = MissingnessSpec(pattern=args.pattern, fraction=args.fraction, seed=args.seed)
    masked, mask = inject_missing(panel, spec)
    imputed, _ = impute_panel(masked, k=args.k)
    report = evaluate_imputation(panel, imputed, mask)
    _atomic_write(args.report, json.dumps(report.to_dict(), indent=2, sort_keys=True))
    inputs = [args.input] + ([args.mapping] if args.mapping else [])
    _write_manifest(args, inputs, [args.report])


def _search_options(args) -> SearchOptions:
    return SearchOptions(
        max_parents=args.max_parents, seed=args.seed, restarts=args.restarts
    )


def _cmd_learn(args) -> None:
    panel = _load_input_panel(args)
    table = make_transition_table(panel)
    penalty = PenaltyConfig(w=args.w, convention=args.penalty_convention)
    spec = BootstrapSpec(
        replicates=args.bootstrap,
        sample_fraction=args.sample_frac,
        randomize_order=not args.no_randomize_order,
        master_seed=args.seed,
    )
    dbn, strengths = learn_consensus(
        table, penalty, opts=_search_options(args), spec=spec, n_jobs=args.threads
    )
    _atomic_write(args.out, json.dumps(dbn.to_dict(), indent=2, sort_keys=True))
    strengths_path = args.strengths_out or f"{args.out}.strengths.csv"
    import io

    buf = io.StringIO()
    strengths.write_csv(buf)
    _atomic_write(strengths_path, buf.getvalue())
    sidecar = dict(strengths.metadata())
    sidecar.update(
        {
            "sample_fraction": spec.sample_fraction,
            "master_seed": spec.master_seed,
            "randomize_order": spec.randomize_order,
        }
    )
    sidecar_path = strengths_path + ".json"
    _atomic_write(sidecar_path, json.dumps(sidecar, indent=2, sort_keys=True))
    inputs = [args.input] + ([args.mapping] if args.mapping else [])
    _write_manifest(args, inputs, [args.out, strengths_path, sidecar_path])


def _cmd_tune_w(args) -> None:
    panel = _load_input_panel(args)
    grid = [float(w) for w in args.grid.split(",") if w.strip()]
    results = tune_penalty(
        panel,
        split_week=args.split_week,
        w_grid=grid,
        convention=args.penalty_convention,
        opts=_search_options(args),
        n_jobs=args.threads,
    )
    lines = ["w,train_r2,validation_r2,arc_count"]
    for r in results:
        lines.append(f"{r.w!r},{r.train_r2!r},{r.validation_r2!r},{r.arc_count}")
    _atomic_write(args.out, "\n".join(lines) + "\n")
    inputs = [args.input] + ([args.mapping] if args.mapping else [])
    _write_manifest(args, inputs, [args.out])


def _load_model(path: str) -> DynamicBN:
    with open(path, encoding="utf-8") as fh:
        return DynamicBN.from_dict(json.load(fh))


def _cmd_fold(args) -> None:
    dbn = _load_model(args.model)
    folded = fold(dbn.graph)
    _atomic_write(args.out, json.dumps(folded.to_dict(), indent=2, sort_keys=True))
    _write_manifest(args, [args.model], [args.out])


def _cmd_export_dot(args) -> None:
    dbn = _load_model(args.model)
    _atomic_write(args.out, folded_to_dot(fold(dbn.graph)))
    _write_manifest(args, [args.model], [args.out])


def _cmd_varprop(args) -> None:
    dbn = _load_model(args.model)
    panel = load_panel(
        args.data,
        mapping=ConditionMapping.from_json(args.mapping) if args.mapping else None,
    )
    table = make_transition_table(panel)
    if args.stratify:
        if not args.driver:
            raise ValidationError("--stratify requires --driver")
        shares = stratified_share(
            dbn,
            table,
            target=args.target,
            driver=args.driver,
            stratum=StratumSpec(stratifier=args.stratify),
            method=args.method,
            seed=args.seed,
        )
        lines = [
            "level,share",
            f"low,{shares.low!r}",
            f"average,{shares.average!r}",
            f"high,{shares.high!r}",
            f"unstratified,{shares.unstratified!r}",
        ]
    else:
        decomp = variance_decomposition(dbn, table, args.target)
        lines = ["parent,raw_share,normalized_share"]
        for e in decomp.entries:
            lines.append(f"{e.parent},{e.raw_share!r},{e.normalized_share!r}")
    _atomic_write(args.out, "\n".join(lines) + "\n")
    inputs = [args.model, args.data] + ([args.mapping] if args.mapping else [])
    _write_manifest(args, inputs, [args.out])


def _cmd_simulate(args) -> None:
    with open(args.spec, encoding="utf-8") as fh:
        raw = json.load(fh)
    raw.setdefault("seed", args.seed)
    if "coefficient_range" in raw:
        raw["coefficient_range"] = tuple(raw["coefficient_range"])
    if "noise_sd_range" in raw:
        raw["noise_sd_range"] = tuple(raw["noise_sd_range"])
    spec = GroundTruthSpec(**raw)
    dbn = random_dbn(spec)
    panel = sample_panel(
        dbn,
        n_counties=args.counties,
        n_weeks=args.weeks,
        county_intercept_sd=spec.county_intercept_sd,
        seed=args.seed,
        n_states=args.states,
    )
    _atomic_write(args.out, _panel_csv(panel))
    outputs = [args.out]
    if args.truth:
        _atomic_write(args.truth, json.dumps(dbn.to_dict(), indent=2, sort_keys=True))
        outputs.append(args.truth)
    _write_manifest(args, [args.spec], outputs)


def _cmd_compare_static(args) -> None:
    from .analysis import compare_static, detrend

    dbn = _load_model(args.model)
    panel = _load_input_panel(args)
    if args.detrend:
        panel = detrend(panel)
    table = make_transition_table(panel)
    static = hill_climb(
        table,
        PenaltyConfig(w=args.w, convention=args.penalty_convention),
        SearchOptions(seed=args.seed, restarts=args.restarts, mode="static_dag"),
    )
    result = compare_static(static, fold(dbn.graph))
    report = {
        "counts": result.counts,
        "proportions": result.proportions,
        "n_static_arcs": result.n_static_arcs,
        "static_arcs": [{"from": a, "to": b} for a, b in sorted(static.arcs)],
        "detrended": bool(args.detrend),
    }
    _atomic_write(args.out, json.dumps(report, indent=2, sort_keys=True))
    inputs = [args.input, args.model] + ([args.mapping] if args.mapping else [])
    _write_manifest(args, inputs, [args.out])


def _add_panel_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="panel CSV")
    p.add_argument("--mapping", help="JSON mapping: condition -> raw columns")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--threads", type=int, default=1, help="worker cap; never changes output")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="paneldbn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("impute", help="fill missing panel values with two-sided EWMA")
    _add_panel_args(p)
    p.add_argument("--k", type=int, default=4, help="window half-width (default 4)")
    p.add_argument("--aggregate", choices=("sum", "mean"), default="sum")
    p.add_argument("--out", required=True, help="imputed panel CSV")
    p.add_argument("--report", help="imputation summary JSON")
    _add_common(p)
    p.set_defaults(func=_cmd_impute)

    p = sub.add_parser("impute-eval", help="inject missingness, impute, report error")
    _add_panel_args(p)
    p.add_argument("--pattern", choices=("single", "batch4"), required=True)
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--report", required=True, help="evaluation report JSON")
    _add_common(p)
    p.set_defaults(func=_cmd_impute_eval)

    p = sub.add_parser("learn", help="bootstrap-averaged structure + parameters")
    _add_panel_args(p)
    p.add_argument("--w", type=float, default=4.0, help="penalty coefficient")
    p.add_argument(
        "--penalty-convention", choices=("bic_half", "paper_literal"), default="bic_half"
    )
    p.add_argument("--bootstrap", type=int, default=500, help="replicates (default 500)")
    p.add_argument("--sample-frac", type=float, default=0.75)
    p.add_argument("--no-randomize-order", action="store_true")
    p.add_argument("--restarts", type=int, default=0)
    p.add_argument("--max-parents", type=int, default=None)
    p.add_argument("--out", required=True, help="model JSON")
    p.add_argument("--strengths-out", help="arc strengths CSV (default <out>.strengths.csv)")
    _add_common(p)
    p.set_defaults(func=_cmd_learn)

    p = sub.add_parser("tune-w", help="penalty tuning on a train/validation week split")
    _add_panel_args(p)
    p.add_argument("--grid", default="1,2,4,8,16,32,64,128")
    p.add_argument("--split-week", type=int, default=52)
    p.add_argument(
        "--penalty-convention", choices=("bic_half", "paper_literal"), default="bic_half"
    )
    p.add_argument("--restarts", type=int, default=0)
    p.add_argument("--max-parents", type=int, default=None)
    p.add_argument("--out", required=True, help="CSV of (w, train_r2, validation_r2, arcs)")
    _add_common(p)
    p.set_defaults(func=_cmd_tune_w)

    p = sub.add_parser("fold", help="fold a model's two-slice graph into a cyclic graph")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="folded graph JSON")
    _add_common(p)
    p.set_defaults(func=_cmd_fold)

    p = sub.add_parser("export-dot", help="folded graph as Graphviz DOT")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_export_dot)

    p = sub.add_parser("varprop", help="explained-variance shares of a node's parents")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="panel CSV to evaluate on")
    p.add_argument("--mapping")
    p.add_argument("--target", required=True)
    p.add_argument("--stratify", help="stratifier condition (quartile strata)")
    p.add_argument("--driver", help="driver condition (required with --stratify)")
    p.add_argument("--method", choices=("regression", "simulation"), default="regression")
    p.add_argument("--out", required=True, help="CSV of shares")
    _add_common(p)
    p.set_defaults(func=_cmd_varprop)

    p = sub.add_parser("simulate", help="sample a panel from a random ground truth")
    p.add_argument("--spec", required=True, help="GroundTruthSpec JSON")
    p.add_argument("--counties", type=int, required=True)
    p.add_argument("--weeks", type=int, required=True)
    p.add_argument("--states", type=int, default=1)
    p.add_argument("--out", required=True, help="panel CSV")
    p.add_argument("--truth", help="ground-truth model JSON")
    _add_common(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser(
        "compare-static", help="classify static-DAG arcs against a dynamic model"
    )
    _add_panel_args(p)
    p.add_argument("--model", required=True, help="dynamic model JSON")
    p.add_argument("--w", type=float, default=4.0)
    p.add_argument(
        "--penalty-convention", choices=("bic_half", "paper_literal"), default="bic_half"
    )
    p.add_argument("--restarts", type=int, default=0)
    p.add_argument("--detrend", action="store_true", help="remove spatio-temporal structure first")
    p.add_argument("--out", required=True, help="category report JSON")
    _add_common(p)
    p.set_defaults(func=_cmd_compare_static)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (ValidationError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except PanelDbnError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

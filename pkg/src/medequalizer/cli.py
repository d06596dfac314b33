"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data or validation error,
3 augmentation finished with at least one partially filled subgroup.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .dataset import (
    DataValidationError,
    SchemaError,
    demo_cohort_spec,
    generate_demo_cohort,
    load_csv,
    load_schema,
    save_csv,
    save_schema,
)
from .disparity import DEFAULT_RING_ORDER
from .equalizer import DEFAULT_KEY, AugmentationError, EqualizerConfig, Strategy, run
from .filtering import DEFAULT_ALPHA, DEFAULT_NU, ConvergenceError
from .generators import GENERATORS, GeneratorError, make_generator
from .report import (
    ReportError,
    build_audit,
    canonical_json,
    compare_reports,
    emit_audit_json,
    load_audit_json,
    render_histogram_svg,
    render_sunburst_svg,
)

log = logging.getLogger("medequalizer")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_PARTIAL = 0, 1, 2, 3
DATA_ERRORS = (SchemaError, DataValidationError, FileNotFoundError, ReportError,
               GeneratorError, AugmentationError, ConvergenceError, ValueError,
               json.JSONDecodeError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _columns(text: str | None) -> tuple[str, ...] | None:
    if text is None:
        return None
    return tuple(c.strip() for c in text.split(",") if c.strip())


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="medequalizer", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("demo-data", help="write a seeded demo cohort CSV and its schema")
    s.add_argument("--n", type=int, default=10000)
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--out", type=Path, required=True)
    s.add_argument("--schema-out", type=Path,
                   help="schema sidecar path (default: <out>.schema.json)")

    s = sub.add_parser("audit", help="log-disparity audit of synthetic vs real data")
    s.add_argument("--real", type=Path, required=True)
    s.add_argument("--synthetic", type=Path, required=True)
    s.add_argument("--schema", type=Path, required=True)
    s.add_argument("--synthetic-schema", type=Path,
                   help="schema of the synthetic CSV, must equal --schema")
    s.add_argument("--attrs", help="comma-separated attributes (default: protected columns)")
    s.add_argument("--ring-order", help="comma-separated sunburst rings "
                   f"(default: {','.join(DEFAULT_RING_ORDER)})")
    s.add_argument("--tau", type=int, default=150)
    s.add_argument("--out-json", type=Path)
    s.add_argument("--out-svg", type=Path)
    s.add_argument("--out-hist-svg", type=Path)

    s = sub.add_parser("augment", help="fill under-covered subgroups with filtered synthetic rows")
    s.add_argument("--real", type=Path, required=True)
    s.add_argument("--schema", type=Path, required=True)
    s.add_argument("--tau", type=int, default=150)
    s.add_argument("--batch-size", type=int, default=50)
    s.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    s.add_argument("--nu", type=float, default=DEFAULT_NU)
    s.add_argument("--gamma", type=float, help="RBF width (default: 1/encoded dimension)")
    s.add_argument("--generator", choices=[*GENERATORS, "external"], default="chowliu")
    s.add_argument("--pool", type=Path, help="CSV pool for --generator external")
    s.add_argument("--strategy", choices=[x.value for x in Strategy], default="conditional")
    s.add_argument("--key", help=f"subgroup key columns (default: {','.join(DEFAULT_KEY)})")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-attempts", type=int, default=50)
    s.add_argument("--overshoot", action="store_true",
                   help="keep whole accepted batches instead of truncating at the gap")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out", type=Path, required=True)
    s.add_argument("--log-json", type=Path)

    s = sub.add_parser("generate", help="fit a generator on a CSV and sample from it")
    s.add_argument("--model-from", type=Path, required=True)
    s.add_argument("--schema", type=Path, required=True)
    s.add_argument("--generator", choices=list(GENERATORS), default="chowliu")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", type=Path, required=True)

    s = sub.add_parser("compare", help="tier changes between two audit reports")
    s.add_argument("--before", type=Path, required=True)
    s.add_argument("--after", type=Path, required=True)
    s.add_argument("--out", type=Path, required=True)
    s.add_argument("--out-svg", type=Path)
    return p


def cmd_demo_data(a) -> int:
    spec = demo_cohort_spec(n=a.n, seed=a.seed)
    log.info("config: n=%d seed=%d", a.n, a.seed)
    d = generate_demo_cohort(spec)
    save_csv(d, a.out)
    schema_out = a.schema_out or a.out.with_suffix(".schema.json")
    save_schema(d.schema, schema_out)
    log.info("wrote %d rows to %s, schema to %s", len(d), a.out, schema_out)
    return EXIT_OK


def cmd_audit(a) -> int:
    schema = load_schema(a.schema)
    if a.synthetic_schema is not None and load_schema(a.synthetic_schema) != schema:
        raise SchemaError(f"{a.synthetic_schema} does not match {a.schema}")
    real = load_csv(a.real, schema)
    synth = load_csv(a.synthetic, schema)
    attrs = _columns(a.attrs)
    rings = _columns(a.ring_order)
    config = {"tau": a.tau, "attributes": list(attrs or schema.require_protected()),
              "ring_order": list(rings) if rings else None}
    log.info("config: %s", json.dumps(config, sort_keys=True))
    report = build_audit(real, synth, attrs, rings, a.tau, metadata={
        "real": a.real.name, "synthetic": a.synthetic.name, "config": config,
    })
    if a.out_json:
        emit_audit_json(report, a.out_json)
    if a.out_svg:
        render_sunburst_svg(report.sunburst, a.out_svg, title=f"{a.synthetic.name} vs {a.real.name}")
    if a.out_hist_svg:
        render_histogram_svg({a.synthetic.name: report.histogram}, a.out_hist_svg)
    counts = {t.value: c for t, c in report.histogram.counts.items() if c}
    print(json.dumps(counts, sort_keys=True))
    return EXIT_OK


def cmd_augment(a) -> int:
    schema = load_schema(a.schema)
    real = load_csv(a.real, schema)
    cfg = EqualizerConfig(
        tau=a.tau, batch_size=a.batch_size, alpha=a.alpha, strategy=Strategy(a.strategy),
        max_attempts=a.max_attempts, master_seed=a.seed,
        subgroup_key=_columns(a.key) or DEFAULT_KEY, nu=a.nu, gamma=a.gamma,
        overshoot=a.overshoot,
    )
    echo = {**cfg.to_dict(), "generator": a.generator}
    log.info("config: %s", json.dumps(echo, sort_keys=True))
    g = make_generator(a.generator, a.pool)
    result = run(real, g, cfg, jobs=max(1, a.jobs))
    save_csv(result.augmented, a.out)
    if a.log_json:
        doc = result.to_dict()
        doc["config"]["generator"] = a.generator
        a.log_json.write_text(canonical_json(doc), encoding="utf-8")
    log.info("accepted %d synthetic rows over %d subgroups", len(result.accepted), len(result.logs))
    if result.partial:
        for lg in result.partial:
            log.warning("partial: %s (%d/%d)", lg.pattern.label(cfg.subgroup_key),
                        lg.final_accepted_count, lg.gap)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_generate(a) -> int:
    schema = load_schema(a.schema)
    d = load_csv(a.model_from, schema)
    log.info("config: generator=%s n=%d seed=%d", a.generator, a.n, a.seed)
    g = make_generator(a.generator).fit(d)
    save_csv(g.sample(a.n, a.seed).as_dataset(schema), a.out)
    return EXIT_OK


def cmd_compare(a) -> int:
    before, after = load_audit_json(a.before), load_audit_json(a.after)
    cmp = compare_reports(before, after)
    doc = cmp.to_dict()
    doc["metadata"] = {"before": before.metadata, "after": after.metadata}
    a.out.write_text(canonical_json(doc), encoding="utf-8")
    if a.out_svg:
        render_histogram_svg({"before": before.histogram, "after": after.histogram}, a.out_svg)
    print(json.dumps({k: v for k, v in doc["deltas"].items() if v}, sort_keys=True))
    return EXIT_OK


COMMANDS = {
    "demo-data": cmd_demo_data,
    "audit": cmd_audit,
    "augment": cmd_augment,
    "generate": cmd_generate,
    "compare": cmd_compare,
}


def _setup_logging() -> None:
    level = os.environ.get("EQUALIZER_LOG", "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def parse_and_dispatch(argv: list[str] | None = None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except DATA_ERRORS as exc:
        log.error("%s", exc)
        return EXIT_DATA


def main() -> None:
    sys.exit(parse_and_dispatch())


if __name__ == "__main__":
    main()

"""Command-line entry point.

Subcommands: ``run``, ``eval``, ``sample-size``, ``synth``, ``stats``.

Exit codes: 0 success, 1 unexpected failure, 2 malformed input data,
3 invalid configuration. Diagnostics go to stderr; only ``sample-size`` and
``stats`` write data to stdout.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .errors import ConfigError, InputError, MissingSnapshot
from .evaluation import (SamplingParameters, compare_to_ground_truth, sample_size,
                         tag_fn_causes, z_for_confidence)
from .ingest import (AddressResolver, IngestConfig, load_address_vocabulary, load_category_map,
                     parse_publications, parse_registry)
from .matcher import MatchConfig
from .pipeline import PipelineConfig, run_pipeline
from .reports import (audit_header, config_hash, format_stats_table, read_mapping_csv,
                      read_stats_json, read_truth_csv, write_mapping_csv, write_stats_json,
                      file_checksum)
from .synthetic import SyntheticConfig, generate_synthetic_corpus

log = logging.getLogger("nomina")

CONFIG_ENV = "NOMINA_CONFIG"

EXIT_OK, EXIT_FAILURE, EXIT_INPUT, EXIT_CONFIG = 0, 1, 2, 3

INPUT_FLAGS = {
    "publications": "--publications",
    "registry": "--registry",
    "vocabulary": "--vocabulary",
    "category_map": "--category-map",
}


@dataclass
class RunConfig:
    publications: Path
    registry: Path
    vocabulary: Path
    category_map: Path
    output_dir: Path
    match: MatchConfig = field(default_factory=MatchConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    ingest: IngestConfig = field(default_factory=IngestConfig)
    threads: int = 1
    verbosity: int = 0

    def algorithm_settings(self) -> dict[str, Any]:
        """Settings that can change results (hashed into the audit header)."""
        ingest = asdict(self.ingest)
        ingest["allowed_doc_types"] = sorted(ingest["allowed_doc_types"])
        return {"match": asdict(self.match), "pipeline": asdict(self.pipeline), "ingest": ingest}


def load_config_file(path: str | os.PathLike[str]) -> dict[str, Any]:
    """A flat JSON object whose keys mirror the long flag names."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON config: {exc.msg}") from None
    if not isinstance(data, dict) or any(isinstance(v, dict) for v in data.values()):
        raise ConfigError(f"{path}: config must be a flat JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def _setting(args: argparse.Namespace, file_cfg: dict[str, Any], key: str, default: Any) -> Any:
    value = getattr(args, key, None)
    if value is not None:
        return value
    return file_cfg.get(key, default)


def build_run_config(args: argparse.Namespace) -> RunConfig:
    config_path = args.config or os.environ.get(CONFIG_ENV)
    file_cfg = load_config_file(config_path) if config_path else {}
    unknown = set(file_cfg) - {
        *INPUT_FLAGS, "output_dir", "edit_threshold", "join_offset", "missing_snapshot",
        "force_resolution", "keep_unresolved_address", "lenient_categories", "max_authors",
        "doc_types", "threads"}
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")

    paths: dict[str, Path] = {}
    for key, flag in INPUT_FLAGS.items():
        value = _setting(args, file_cfg, key, None)
        if not value:
            raise ConfigError(f"{flag} is required")
        path = Path(value)
        if not path.is_file() or not os.access(path, os.R_OK):
            raise ConfigError(f"{flag}: cannot read {path}")
        paths[key] = path
    out = Path(_setting(args, file_cfg, "output_dir", "nomina-out"))
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"--output-dir: cannot create {out}: {exc.strerror}") from None
    if not os.access(out, os.W_OK):
        raise ConfigError(f"--output-dir: {out} is not writable")

    doc_types = _setting(args, file_cfg, "doc_types", None)
    if isinstance(doc_types, str):
        doc_types = [d.strip() for d in doc_types.split(",") if d.strip()]
    threads = int(_setting(args, file_cfg, "threads", 1))
    if threads < 1:
        raise ConfigError("--threads must be >= 1")
    max_authors = int(_setting(args, file_cfg, "max_authors", 50))
    if max_authors < 1:
        raise ConfigError("--max-authors must be >= 1")
    return RunConfig(
        output_dir=out,
        match=MatchConfig(
            surname_edit_threshold=int(_setting(args, file_cfg, "edit_threshold", 0)),
            join_offset=int(_setting(args, file_cfg, "join_offset", -1)),
            missing_snapshot=_setting(args, file_cfg, "missing_snapshot", "empty")),
        pipeline=PipelineConfig(
            force_resolution=bool(_setting(args, file_cfg, "force_resolution", True)),
            keep_on_unresolved_address=bool(_setting(args, file_cfg, "keep_unresolved_address", True)),
            lenient_unknown_category=bool(_setting(args, file_cfg, "lenient_categories", True))),
        ingest=IngestConfig(
            max_authors=max_authors,
            allowed_doc_types=frozenset(doc_types) if doc_types else IngestConfig().allowed_doc_types),
        threads=threads,
        verbosity=args.verbose,
        **paths,
    )


def execute_run(cfg: RunConfig) -> dict[str, Path]:
    """Load inputs, run the pipeline and write all outputs; returns their paths."""
    pubs, exclusions = parse_publications(cfg.publications, cfg.ingest)
    registry = parse_registry(cfg.registry)
    rules = load_address_vocabulary(cfg.vocabulary)
    compat = load_category_map(cfg.category_map)
    log.info("loaded %d publications (%d excluded), %d identities, %d address rules, "
             "%d categories", len(pubs), exclusions.total - exclusions.included, len(registry),
             len(rules), len(compat))

    mapping, stats = run_pipeline(pubs, registry, AddressResolver(rules), compat,
                                  cfg.pipeline, cfg.match, threads=cfg.threads)

    inputs = {"publications": cfg.publications, "registry": cfg.registry,
              "vocabulary": cfg.vocabulary, "category_map": cfg.category_map}
    settings = cfg.algorithm_settings()
    out = cfg.output_dir
    paths = {
        "mapping": out / "mapping.csv",
        "stats": out / "stage_stats.json",
        "exclusions": out / "exclusions.json",
        "manifest": out / "run_manifest.json",
    }
    write_mapping_csv(mapping, paths["mapping"], header=audit_header(settings, inputs))
    write_stats_json(stats, paths["stats"])
    paths["exclusions"].write_text(json.dumps(exclusions.as_dict(), indent=2) + "\n", encoding="utf-8")
    manifest = {
        "engine": f"nomina {__version__}",
        "config_hash": config_hash(settings),
        "settings": settings,
        "inputs": {k: {"path": str(v), "sha256": file_checksum(v)} for k, v in sorted(inputs.items())},
        "accepted": len(mapping.pairs),
        "tie_broken": sum(1 for p in mapping.pairs if p.tie_broken),
        "unresolved_clusters": len(mapping.unresolved_clusters),
        "orphans": len(mapping.orphans),
        "address_unresolved_publications": len(mapping.address_unresolved),
        "perfect_homonym_incidence": registry.perfect_homonym_incidence,
        "perfect_homonym_amalgamations": [
            {"snapshot_year": a.snapshot_year, "identity_id": a.identity_id,
             "member_ids": list(a.member_ids)} for a in registry.amalgamations],
    }
    paths["manifest"].write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    log.info("accepted %d pairs (%d tie-broken), %d orphan authors -> %s", len(mapping.pairs),
             manifest["tie_broken"], len(mapping.orphans), out)
    return paths


def cmd_run(args: argparse.Namespace) -> int:
    execute_run(build_run_config(args))
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    for flag, value in (("--mapping", args.mapping), ("--truth", args.truth)):
        if not Path(value).is_file():
            raise ConfigError(f"{flag}: cannot read {value}")
    rows = read_mapping_csv(args.mapping)
    truth = read_truth_csv(args.truth)
    ledger = None
    if args.ledger:
        try:
            ledger = json.loads(Path(args.ledger).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"--ledger: cannot read {args.ledger}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"invalid ledger JSON: {exc.msg}", args.ledger, exc.lineno) from None
    try:
        comparison = compare_to_ground_truth(rows, truth)
    except ValueError as exc:
        raise InputError(str(exc), args.mapping) from None
    report = comparison.report(tag_fn_causes(comparison.detail, ledger))
    output = Path(args.output) if args.output else Path(args.mapping).with_name("evaluation.json")
    output.write_text(json.dumps(report.as_dict(), indent=2) + "\n", encoding="utf-8")
    print(report.summary(), file=sys.stderr)
    return EXIT_OK


def cmd_sample_size(args: argparse.Namespace) -> int:
    if args.z is not None:
        z = args.z
    elif args.confidence is not None:
        z = z_for_confidence(args.confidence)
    else:
        raise ConfigError("give either --confidence or --z")
    params = SamplingParameters(N=args.population, Z=z, e=args.error, p=args.heterogeneity)
    n = sample_size(params)
    print(f"population N={params.N} Z={params.Z} error e={params.e} "
          f"heterogeneity p={params.p}", file=sys.stderr)
    print(n)
    return EXIT_OK


SYNTH_FLAGS = {
    "identities": "n_identities",
    "publications": "n_publications",
    "external_homonym_rate": "external_homonym_rate",
    "inter_address_homonym_rate": "inter_address_homonym_rate",
    "intra_address_homonym_rate": "intra_address_homonym_rate",
    "perfect_homonym_rate": "perfect_homonym_rate",
    "compound_surname_rate": "compound_surname_rate",
    "multi_first_name_rate": "multi_first_name_rate",
    "wrong_affiliation_rate": "wrong_affiliation_rate",
    "cross_category_rate": "cross_category_publish_rate",
    "vocabulary_gap_rate": "vocabulary_gap_rate",
    "source_address_error_rate": "source_address_error_rate",
    "source_name_error_rate": "source_name_error_rate",
    "name_variant_error_rate": "name_variant_error_rate",
    "external_author_rate": "external_author_rate",
    "universities": "n_universities",
    "areas": "n_areas",
    "max_authors": "max_authors",
    "year": "year",
}


def cmd_synth(args: argparse.Namespace) -> int:
    kwargs = {field_name: getattr(args, flag) for flag, field_name in SYNTH_FLAGS.items()
              if getattr(args, flag) is not None}
    cfg = SyntheticConfig(rng_seed=args.seed, **kwargs)
    bundle = generate_synthetic_corpus(cfg)
    paths = bundle.write(args.output_dir)
    log.info("wrote %d publications, %d identities, %d truth pairs, %d corruptions, "
             "%d perfect homonym groups to %s", len(bundle.publications), len(bundle.identities),
             len(bundle.truth), len(bundle.ledger["corruptions"]),
             bundle.ledger["perfect_homonym_groups"], paths["publications"].parent)
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    sys.stdout.write(format_stats_table(read_stats_json(args.stats)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nomina", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"nomina {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="more diagnostics on stderr (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="disambiguate a publication corpus")
    run.add_argument("--config", help=f"flat JSON config file (default: ${CONFIG_ENV})")
    run.add_argument("--publications")
    run.add_argument("--registry")
    run.add_argument("--vocabulary", help="address controlled vocabulary CSV")
    run.add_argument("--category-map", dest="category_map", help="subject category / SDS CSV")
    run.add_argument("--output-dir", dest="output_dir")
    run.add_argument("--edit-threshold", dest="edit_threshold", type=int,
                     help="max summed surname edit distance (0-2, default 0)")
    run.add_argument("--join-offset", dest="join_offset", type=int,
                     help="registry snapshot year relative to publication year (default -1)")
    run.add_argument("--missing-snapshot", dest="missing_snapshot", choices=["empty", "error"])
    run.add_argument("--force-resolution", dest="force_resolution",
                     action=argparse.BooleanOptionalAction, default=None)
    run.add_argument("--keep-unresolved-address", dest="keep_unresolved_address",
                     action=argparse.BooleanOptionalAction, default=None)
    run.add_argument("--lenient-categories", dest="lenient_categories",
                     action=argparse.BooleanOptionalAction, default=None)
    run.add_argument("--max-authors", dest="max_authors", type=int)
    run.add_argument("--doc-types", dest="doc_types", help="comma-separated allowlist")
    run.add_argument("--threads", type=int)
    run.set_defaults(func=cmd_run)

    ev = sub.add_parser("eval", help="score a mapping against ground truth")
    ev.add_argument("--mapping", required=True)
    ev.add_argument("--truth", required=True)
    ev.add_argument("--ledger", help="synthetic ledger JSON, for false-negative causes")
    ev.add_argument("--output", help="report path (default: evaluation.json beside the mapping)")
    ev.set_defaults(func=cmd_eval)

    ss = sub.add_parser("sample-size", help="sample size for estimating an error proportion")
    ss.add_argument("--population", type=int, required=True)
    ss.add_argument("--confidence", type=float, help="one of 0.90, 0.95, 0.98, 0.99")
    ss.add_argument("--z", type=float, help="standard-normal quantile, overrides --confidence")
    ss.add_argument("--error", type=float, required=True)
    ss.add_argument("--heterogeneity", type=float, required=True)
    ss.set_defaults(func=cmd_sample_size)

    syn = sub.add_parser("synth", help="generate a synthetic corpus with planted truth")
    syn.add_argument("--output-dir", dest="output_dir", required=True)
    syn.add_argument("--seed", type=int, required=True)
    for flag, field_name in SYNTH_FLAGS.items():
        kind = float if field_name.endswith("_rate") else int
        syn.add_argument(f"--{flag.replace('_', '-')}", dest=flag, type=kind)
    syn.set_defaults(func=cmd_synth)

    st = sub.add_parser("stats", help="print stage statistics as a funnel table")
    st.add_argument("stats", help="stage_stats.json from a run")
    st.set_defaults(func=cmd_stats)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"nomina: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InputError, MissingSnapshot) as exc:
        print(f"nomina: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

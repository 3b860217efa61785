"""Serialized outputs: mapping CSV, stage statistics JSON, ground-truth CSV.

CSV outputs may start with ``#`` comment lines carrying the audit header
(engine version, config hash, input checksums); the readers skip them.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from . import __version__
from .errors import FormatError
from .ingest import Source, _csv_records, _open, _source_name
from .model import MappingSet, PairStatus, StageStats, funnel

MAPPING_FIELDS = ("pub_id", "author_index", "raw_token", "identity_id", "sds_code",
                  "university_id", "status", "eliminating_stage", "member_ids", "accepted_stage")
TRUTH_FIELDS = ("pub_id", "author_index", "identity_id")
STATS_FIELDS = ("stage", "papers", "pairs", "pairs_per_paper", "pct_delta_papers",
                "pct_delta_pairs", "pct_delta_pairs_per_paper")

STAGE_LABELS = {
    "mapping_generation": "Mapping generation",
    "address_filter": "Address filter",
    "wos_sds_filter": "WoS-SDS filter",
    "shared_sds_filter": "Shared SDS filter",
    "max_correspondence_filter": "Max correspondence filter",
}

ACCEPTED_STATUSES = frozenset({"accepted", "tie_broken"})
MAPPING_STATUSES = frozenset({"accepted", "tie_broken", "unresolved", "orphan", "eliminated"})


@dataclass(frozen=True)
class MappingRow:
    pub_id: str
    author_index: int
    raw_token: str
    identity_id: str
    sds_code: str
    university_id: str
    status: str
    eliminating_stage: str = ""
    member_ids: tuple[str, ...] = ()  # registry ids folded into an amalgamated identity, else empty
    accepted_stage: str = ""

    @property
    def key(self) -> tuple[str, int]:
        return (self.pub_id, self.author_index)

    @property
    def is_accepted(self) -> bool:
        return self.status in ACCEPTED_STATUSES

    def denotes(self, identity_id: str) -> bool:
        return identity_id == self.identity_id or identity_id in self.member_ids


def mapping_rows(mapping: MappingSet) -> list[MappingRow]:
    """Flatten a mapping into rows: every generated pair, plus one ``orphan``
    row for each author instance left without a surviving pair."""
    rows: list[MappingRow] = []
    for cluster in mapping.clusters:
        a = cluster.author
        for pair in sorted(cluster.pairs, key=lambda p: p.identity_id):
            ident = pair.identity
            if pair.status is PairStatus.ACCEPTED:
                status = "tie_broken" if pair.tie_broken else "accepted"
            elif pair.status is PairStatus.ELIMINATED:
                status = "eliminated"
            else:
                status = "unresolved"
            rows.append(MappingRow(
                a.pub_id, a.author_index, a.raw_token, ident.identity_id, ident.sds_code,
                ident.university_id, status,
                eliminating_stage=(pair.stage or "") if status == "eliminated" else "",
                member_ids=ident.member_ids if ident.is_amalgamated else (),
                accepted_stage=(pair.stage or "") if status in ACCEPTED_STATUSES else ""))
        if cluster.cardinality == 0:
            rows.append(MappingRow(a.pub_id, a.author_index, a.raw_token, "", "", "", "orphan"))
    rows.sort(key=lambda r: (r.pub_id, r.author_index))
    return rows


def _write_header(out, header: Sequence[str]) -> None:
    for line in header:
        out.write(f"# {line}\n")


def write_mapping_csv(rows: MappingSet | Iterable[MappingRow], dest: Source,
                      header: Sequence[str] = ()) -> None:
    if isinstance(rows, MappingSet):
        rows = mapping_rows(rows)
    with _open(dest, "w") as (out, _):
        _write_header(out, header)
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(MAPPING_FIELDS)
        for r in rows:
            writer.writerow([r.pub_id, r.author_index, r.raw_token, r.identity_id, r.sds_code,
                             r.university_id, r.status, r.eliminating_stage,
                             ";".join(r.member_ids),
                             r.accepted_stage])


def _index(value: str, name: str, line: int) -> int:
    try:
        idx = int(value)
    except ValueError:
        raise FormatError(f"author_index is not an integer: {value!r}", name, line) from None
    if idx < 0:
        raise FormatError(f"negative author_index {idx}", name, line)
    return idx


def read_mapping_csv(source: Source) -> list[MappingRow]:
    """Read a mapping file. A plain truth file (no ``status`` column) is
    read as a mapping in which every row is accepted."""
    rows: list[MappingRow] = []
    with _open(source) as (stream, name):
        for line, rec in _csv_records(stream, name, TRUTH_FIELDS):
            status = rec.get("status", "accepted") or "accepted"
            if status not in MAPPING_STATUSES:
                raise FormatError(f"unknown status {status!r}", name, line)
            members = tuple(m for m in rec.get("member_ids", "").split(";") if m)
            rows.append(MappingRow(
                rec["pub_id"], _index(rec["author_index"], name, line), rec.get("raw_token", ""),
                rec["identity_id"], rec.get("sds_code", ""), rec.get("university_id", ""), status,
                rec.get("eliminating_stage", ""), members, rec.get("accepted_stage", "")))
    return rows


@dataclass(frozen=True)
class TruthPair:
    pub_id: str
    author_index: int
    identity_id: str

    @property
    def key(self) -> tuple[str, int]:
        return (self.pub_id, self.author_index)


def read_truth_csv(source: Source) -> list[TruthPair]:
    """Read ground truth. If the file is a mapping output, only its
    accepted rows count as truth."""
    truth: list[TruthPair] = []
    seen: dict[tuple[str, int], int] = {}
    with _open(source) as (stream, name):
        for line, rec in _csv_records(stream, name, TRUTH_FIELDS):
            if "status" in rec and rec["status"] not in ACCEPTED_STATUSES:
                continue
            if not rec["identity_id"]:
                raise FormatError("empty identity_id", name, line)
            pair = TruthPair(rec["pub_id"], _index(rec["author_index"], name, line), rec["identity_id"])
            if pair.key in seen:
                raise FormatError(f"author {pair.key} has two truth identities "
                                  f"(see line {seen[pair.key]})", name, line)
            seen[pair.key] = line
            truth.append(pair)
    return truth


def write_truth_csv(truth: Iterable[TruthPair], dest: Source) -> None:
    with _open(dest, "w") as (out, _):
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(TRUTH_FIELDS)
        for t in sorted(truth, key=lambda t: (t.pub_id, t.author_index)):
            writer.writerow([t.pub_id, t.author_index, t.identity_id])


def stats_to_json(stats: Sequence[StageStats]) -> str:
    return json.dumps([s.as_dict() for s in stats], indent=2) + "\n"


def write_stats_json(stats: Sequence[StageStats], dest: Source) -> None:
    with _open(dest, "w") as (out, _):
        out.write(stats_to_json(stats))


def read_stats_json(source: Source) -> list[StageStats]:
    name = _source_name(source)
    with _open(source) as (stream, _):
        try:
            data = json.load(stream)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON: {exc.msg}", name, exc.lineno) from None
    if not isinstance(data, list):
        raise FormatError("stage statistics must be a JSON array", name)
    out = []
    for i, rec in enumerate(data):
        if not isinstance(rec, dict) or any(k not in rec for k in STATS_FIELDS[:3]):
            raise FormatError(f"entry {i} lacks stage/papers/pairs", name)
        out.append(StageStats(**{k: rec.get(k) for k in STATS_FIELDS}))
    return out


def format_stats_table(stats: Sequence[StageStats]) -> str:
    """Render stage statistics as a funnel table (papers, pairs, pairs per paper)."""

    def cell(value, delta) -> str:
        if value is None:
            return "-"
        text = f"{value:,}" if isinstance(value, int) else f"{value:.3f}"
        if delta is not None:
            text += f" ({delta:+.1f}%)"
        return text

    header = ("Step", "Papers", "Pairs", "Pairs per paper")
    body = [(STAGE_LABELS.get(s.stage, s.stage),
             cell(s.papers, s.pct_delta_papers),
             cell(s.pairs, s.pct_delta_pairs),
             cell(s.pairs_per_paper, s.pct_delta_pairs_per_paper)) for s in stats]
    widths = [max(len(r[i]) for r in [header, *body]) for i in range(4)]
    lines = ["  ".join(h.ljust(w) if i == 0 else h.rjust(w) for i, (h, w) in enumerate(zip(row, widths)))
             for row in [header, *body]]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def recompute_funnel(stats: Sequence[StageStats]) -> list[StageStats]:
    return funnel([(s.stage, s.papers, s.pairs) for s in stats])


def file_checksum(path: str | os.PathLike[str]) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def config_hash(config: Mapping[str, object]) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def audit_header(config: Mapping[str, object], inputs: Mapping[str, str | os.PathLike[str]]) -> list[str]:
    lines = [f"nomina {__version__} config={config_hash(config)}"]
    for label in sorted(inputs):
        lines.append(f"input {label} sha256={file_checksum(inputs[label])}")
    return lines

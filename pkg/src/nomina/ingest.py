"""Readers and writers for the four input artifacts.

* publications: CSV (or JSON lines when the file ends in ``.jsonl``)
* identity registry: CSV, one row per identity per yearly snapshot
* address vocabulary: CSV of substring rules mapping addresses to institutions
* category map: CSV of (subject category, SDS code) compatibility pairs

Every reader accepts a path or an already-open text stream. Leading lines
starting with ``#`` are skipped, so files written with an audit header can
be read back directly.
"""

from __future__ import annotations

import contextlib
import csv
import io
import json
import logging
import os
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Union

from .errors import (ConflictingRule, DuplicateIdentityYear, DuplicatePubId,
                     FormatError, MissingField)
from .model import IdentityRecord, Publication
from .text import address_words, category_key, name_words

log = logging.getLogger(__name__)

Source = Union[str, "os.PathLike[str]", IO[str]]

PUBLICATION_FIELDS = ("pub_id", "year", "doc_type", "authors", "addresses", "subject_categories")
REGISTRY_FIELDS = ("identity_id", "surname", "first_names", "sds_code", "university_id",
                   "snapshot_year", "rank", "department")
VOCABULARY_FIELDS = ("rule_id", "pattern", "institution_id", "priority")
CATEGORY_FIELDS = ("subject_category", "sds_code")

AUTHOR_SEP = ";"
ADDRESS_SEP = "|"
CATEGORY_SEP = ";"


@contextlib.contextmanager
def _open(source: Source, mode: str = "r") -> Iterator[tuple[IO[str], str]]:
    if hasattr(source, "read") or hasattr(source, "write"):
        yield source, getattr(source, "name", "<stream>")  # type: ignore[misc]
        return
    path = os.fspath(source)  # type: ignore[arg-type]
    with open(path, mode, encoding="utf-8", newline="") as fh:
        yield fh, path


def _source_name(source: Source) -> str:
    if hasattr(source, "read"):
        return str(getattr(source, "name", "<stream>"))
    return os.fspath(source)  # type: ignore[arg-type]


class _LineCounter:
    """Feeds lines to the csv module while tracking physical line numbers."""

    def __init__(self, stream: IO[str]):
        self._stream = stream
        self.line = 0
        self._header_seen = False

    def __iter__(self) -> Iterator[str]:
        for line in self._stream:
            self.line += 1
            if not self._header_seen:
                if line.startswith("#") or not line.strip():
                    continue
                self._header_seen = True
            yield line


def _csv_records(stream: IO[str], name: str, required: Iterable[str]) -> Iterator[tuple[int, dict[str, str]]]:
    counter = _LineCounter(stream)
    reader = csv.DictReader(counter)
    try:
        header = reader.fieldnames
    except csv.Error as exc:
        raise FormatError(str(exc), name, counter.line) from None
    if header is None:
        return
    missing = [c for c in required if c not in header]
    if missing:
        raise FormatError(f"missing column(s) {', '.join(missing)}", name, counter.line)
    try:
        for row in reader:
            if None in row:
                raise FormatError("more fields than header columns", name, counter.line)
            yield counter.line, {k: (v if v is not None else "") for k, v in row.items()}
    except csv.Error as exc:
        raise FormatError(str(exc), name, counter.line) from None


def _split(value: str, sep: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in value.split(sep) if part.strip())


def _as_int(value: str, what: str, name: str, line: int) -> int:
    try:
        return int(str(value).strip())
    except ValueError:
        raise FormatError(f"{what} is not an integer: {value!r}", name, line) from None


# -- publications -----------------------------------------------------------

@dataclass(frozen=True)
class IngestConfig:
    max_authors: int = 50
    allowed_doc_types: frozenset[str] = frozenset({"article", "review"})


@dataclass
class ExclusionReport:
    total: int = 0
    included: int = 0
    excluded: Counter = field(default_factory=Counter)

    def as_dict(self) -> dict:
        return {"total": self.total, "included": self.included,
                "excluded": dict(sorted(self.excluded.items()))}


def _publication_from_fields(rec: dict, name: str, line: int, listy: bool) -> tuple[dict, dict]:
    for col in PUBLICATION_FIELDS:
        if col not in rec:
            raise FormatError(f"missing field {col!r}", name, line)

    def seq(key: str, sep: str) -> tuple[str, ...]:
        value = rec[key]
        if listy and isinstance(value, list):
            return tuple(str(v).strip() for v in value if str(v).strip())
        return _split(str(value or ""), sep)

    pub_id = str(rec["pub_id"]).strip()
    if not pub_id:
        raise MissingField("empty pub_id", name, line)
    fields = {
        "pub_id": pub_id,
        "year": _as_int(rec["year"], "year", name, line),
        "doc_type": str(rec["doc_type"]).strip(),
        "author_tokens": seq("authors", AUTHOR_SEP),
        "addresses": seq("addresses", ADDRESS_SEP),
        "subject_categories": seq("subject_categories", CATEGORY_SEP),
    }
    extra = {k: v for k, v in rec.items() if k not in PUBLICATION_FIELDS and v not in ("", None)}
    return fields, extra


def _publication_records(stream: IO[str], name: str, jsonl: bool) -> Iterator[tuple[int, dict, dict]]:
    if not jsonl:
        for line, row in _csv_records(stream, name, PUBLICATION_FIELDS):
            fields, extra = _publication_from_fields(row, name, line, listy=False)
            yield line, fields, extra
        return
    for line, text in enumerate(stream, start=1):
        if not text.strip() or text.startswith("#"):
            continue
        try:
            rec = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FormatError(f"invalid JSON: {exc.msg}", name, line) from None
        if not isinstance(rec, dict):
            raise FormatError("expected a JSON object", name, line)
        fields, extra = _publication_from_fields(rec, name, line, listy=True)
        yield line, fields, extra


def parse_publications(source: Source, cfg: IngestConfig | None = None,
                       fmt: str | None = None) -> tuple[list[Publication], ExclusionReport]:
    """Read a publication file, dropping non-research doc types and
    records with more than ``cfg.max_authors`` authors.

    ``fmt`` is ``"csv"`` or ``"jsonl"``; by default it is inferred from the
    file extension.
    """
    cfg = cfg or IngestConfig()
    allowed = {d.casefold() for d in cfg.allowed_doc_types}
    name = _source_name(source)
    jsonl = (fmt == "jsonl") if fmt else name.endswith(".jsonl")
    report = ExclusionReport()
    seen: dict[str, int] = {}
    pubs: list[Publication] = []
    with _open(source) as (stream, name):
        for line, fields, extra in _publication_records(stream, name, jsonl):
            report.total += 1
            pub_id = fields["pub_id"]
            if pub_id in seen:
                raise DuplicatePubId(f"pub_id {pub_id!r} already defined on line {seen[pub_id]}",
                                     name, line)
            seen[pub_id] = line
            if fields["doc_type"].casefold() not in allowed:
                report.excluded["doc_type"] += 1
                continue
            if len(fields["author_tokens"]) > cfg.max_authors:
                report.excluded["author_count"] += 1
                continue
            if not fields["author_tokens"]:
                raise FormatError(f"publication {pub_id!r} has no authors", name, line)
            if not fields["subject_categories"]:
                raise FormatError(f"publication {pub_id!r} has no subject category", name, line)
            pubs.append(Publication(passthrough=extra, **fields))
            report.included += 1
    return pubs, report


def write_publications(pubs: Iterable[Publication], dest: Source, fmt: str = "csv") -> None:
    pubs = list(pubs)
    with _open(dest, "w") as (out, _):
        if fmt == "jsonl":
            for p in pubs:
                rec = {"pub_id": p.pub_id, "year": p.year, "doc_type": p.doc_type,
                       "authors": list(p.author_tokens), "addresses": list(p.addresses),
                       "subject_categories": list(p.subject_categories), **p.passthrough}
                out.write(json.dumps(rec, ensure_ascii=False, sort_keys=False) + "\n")
            return
        extra = sorted({k for p in pubs for k in p.passthrough})
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow([*PUBLICATION_FIELDS, *extra])
        for p in pubs:
            writer.writerow([p.pub_id, p.year, p.doc_type, AUTHOR_SEP.join(p.author_tokens),
                             ADDRESS_SEP.join(p.addresses), CATEGORY_SEP.join(p.subject_categories),
                             *(p.passthrough.get(k, "") for k in extra)])


# -- registry ---------------------------------------------------------------

@dataclass(frozen=True)
class Amalgamation:
    snapshot_year: int
    identity_id: str
    member_ids: tuple[str, ...]


class Registry:
    """Yearly snapshots of identities, indexed by surname word.

    Every identity is reachable through each of its surname words, so a
    token carrying only the second half of a compound surname still finds
    its candidates.
    """

    def __init__(self, identities: Iterable[IdentityRecord] = (),
                 amalgamations: Iterable[Amalgamation] = ()):
        self._by_year: dict[int, list[IdentityRecord]] = defaultdict(list)
        self._by_word: dict[tuple[str, int], list[IdentityRecord]] = defaultdict(list)
        self._by_first: dict[tuple[str, int], list[IdentityRecord]] = defaultdict(list)
        self._by_id: dict[tuple[str, int], IdentityRecord] = {}
        for ident in sorted(identities, key=lambda r: (r.snapshot_year, r.identity_id)):
            year = ident.snapshot_year
            self._by_year[year].append(ident)
            self._by_id[(ident.identity_id, year)] = ident
            self._by_first[(ident.surname_tokens[0], year)].append(ident)
            for word in dict.fromkeys(ident.surname_tokens):
                self._by_word[(word, year)].append(ident)
        self.amalgamations = list(amalgamations)
        self._words_by_year: dict[int, tuple[str, ...]] = {}

    def __len__(self) -> int:
        return len(self._by_id)

    def __iter__(self) -> Iterator[IdentityRecord]:
        for year in sorted(self._by_year):
            yield from self._by_year[year]

    @property
    def years(self) -> list[int]:
        return sorted(self._by_year)

    @property
    def record_count(self) -> int:
        """Registry rows as loaded, before perfect homonyms were merged."""
        return sum(len(r.member_ids) for r in self)

    @property
    def perfect_homonym_incidence(self) -> float:
        """Share of loaded rows that were amalgamated into a perfect-homonym group."""
        n = self.record_count
        return len(self.amalgamations) / n if n else 0.0

    def has_year(self, year: int) -> bool:
        return year in self._by_year

    def snapshot(self, year: int) -> list[IdentityRecord]:
        return list(self._by_year.get(year, ()))

    def get(self, identity_id: str, year: int) -> IdentityRecord | None:
        return self._by_id.get((identity_id, year))

    def lookup(self, word: str, year: int) -> list[IdentityRecord]:
        """Identities of ``year`` having ``word`` anywhere in their surname."""
        return self._by_word.get((word, year), [])

    def lookup_first(self, word: str, year: int) -> list[IdentityRecord]:
        return self._by_first.get((word, year), [])

    def surname_words(self, year: int) -> tuple[str, ...]:
        if year not in self._words_by_year:
            self._words_by_year[year] = tuple(sorted(w for (w, y) in self._by_word if y == year))
        return self._words_by_year[year]


def _homonym_key(r: IdentityRecord) -> tuple:
    given = tuple(w for n in r.first_names for w in name_words(n))
    return (r.snapshot_year, r.surname_tokens, given, r.university_id, r.sds_code)


def build_registry(records: Iterable[IdentityRecord], amalgamate: bool = True) -> Registry:
    """Index registry rows, merging perfect homonyms.

    Identities with the same name, university and SDS in the same snapshot
    cannot be told apart by any filter; they are folded into one record
    whose ``member_ids`` carries all the original ids.
    """
    records = list(records)
    seen: set[tuple[str, int]] = set()
    for r in records:
        key = (r.identity_id, r.snapshot_year)
        if key in seen:
            raise DuplicateIdentityYear(f"identity {r.identity_id} appears twice in {r.snapshot_year}")
        seen.add(key)
    if not amalgamate:
        return Registry(records)

    groups: dict[tuple, list[IdentityRecord]] = defaultdict(list)
    for r in records:
        groups[_homonym_key(r)].append(r)
    merged: list[IdentityRecord] = []
    amalgamations: list[Amalgamation] = []
    for group in groups.values():
        if len(group) == 1:
            merged.append(group[0])
            continue
        group.sort(key=lambda r: r.identity_id)
        ids = tuple(sorted({m for r in group for m in r.member_ids}))
        head = group[0]
        merged.append(IdentityRecord(
            identity_id=head.identity_id, surname=head.surname, first_names=head.first_names,
            sds_code=head.sds_code, university_id=head.university_id,
            snapshot_year=head.snapshot_year, rank=head.rank, department=head.department,
            member_ids=ids))
        amalgamations.append(Amalgamation(head.snapshot_year, head.identity_id, ids))
        log.info("perfect homonyms amalgamated in %d: %s", head.snapshot_year, ", ".join(ids))
    amalgamations.sort(key=lambda a: (a.snapshot_year, a.identity_id))
    return Registry(merged, amalgamations)


def read_registry_records(source: Source) -> list[IdentityRecord]:
    records: list[IdentityRecord] = []
    seen: dict[tuple[str, int], int] = {}
    with _open(source) as (stream, name):
        for line, row in _csv_records(stream, name, REGISTRY_FIELDS[:6]):
            for col in REGISTRY_FIELDS[:6]:
                if not row[col].strip():
                    raise MissingField(f"empty {col}", name, line)
            year = _as_int(row["snapshot_year"], "snapshot_year", name, line)
            ident_id = row["identity_id"].strip()
            if (ident_id, year) in seen:
                raise DuplicateIdentityYear(
                    f"identity {ident_id} already listed for {year} on line {seen[(ident_id, year)]}",
                    name, line)
            seen[(ident_id, year)] = line
            try:
                records.append(IdentityRecord(
                    identity_id=ident_id,
                    surname=row["surname"].strip(),
                    first_names=tuple(row["first_names"].split()),
                    sds_code=row["sds_code"].strip(),
                    university_id=row["university_id"].strip(),
                    snapshot_year=year,
                    rank=row.get("rank", "").strip() or None,
                    department=row.get("department", "").strip() or None,
                ))
            except ValueError as exc:
                raise FormatError(str(exc), name, line) from None
    return records


def parse_registry(source: Source, amalgamate: bool = True) -> Registry:
    records = read_registry_records(source)
    if not records:
        log.warning("registry %s is empty", _source_name(source))
    return build_registry(records, amalgamate=amalgamate)


def write_registry(records: Iterable[IdentityRecord], dest: Source) -> None:
    with _open(dest, "w") as (out, _):
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(REGISTRY_FIELDS)
        for r in records:
            writer.writerow([r.identity_id, r.surname, " ".join(r.first_names), r.sds_code,
                             r.university_id, r.snapshot_year, r.rank or "", r.department or ""])


# -- address vocabulary -----------------------------------------------------

@dataclass(frozen=True)
class AddressRule:
    rule_id: str
    pattern: str
    institution_id: str
    priority: int = 0
    tokens: tuple[str, ...] = field(init=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        tokens = tuple(address_words(self.pattern))
        if not tokens:
            raise ValueError(f"rule {self.rule_id}: empty pattern")
        if not self.institution_id:
            raise ValueError(f"rule {self.rule_id}: empty institution_id")
        object.__setattr__(self, "tokens", tokens)


def _rule_order(rule: AddressRule) -> tuple[int, str]:
    return (-rule.priority, rule.rule_id)


def load_address_vocabulary(source: Source) -> list[AddressRule]:
    rules: list[AddressRule] = []
    by_pattern: dict[tuple[str, ...], list[tuple[AddressRule, int]]] = defaultdict(list)
    with _open(source) as (stream, name):
        for line, row in _csv_records(stream, name, VOCABULARY_FIELDS):
            try:
                rule = AddressRule(row["rule_id"].strip(), row["pattern"].strip(),
                                   row["institution_id"].strip(),
                                   _as_int(row["priority"] or "0", "priority", name, line))
            except ValueError as exc:
                raise FormatError(str(exc), name, line) from None
            for other, other_line in by_pattern[rule.tokens]:
                if other.institution_id == rule.institution_id:
                    raise FormatError(f"duplicate rule for pattern {rule.pattern!r} -> "
                                      f"{rule.institution_id} (line {other_line})", name, line)
                if other.priority == rule.priority:
                    raise ConflictingRule(
                        f"pattern {rule.pattern!r} maps to {other.institution_id} (line "
                        f"{other_line}) and {rule.institution_id} at the same priority", name, line)
            by_pattern[rule.tokens].append((rule, line))
            rules.append(rule)
    rules.sort(key=_rule_order)
    return rules


def write_address_vocabulary(rules: Iterable[AddressRule], dest: Source) -> None:
    with _open(dest, "w") as (out, _):
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(VOCABULARY_FIELDS)
        for r in rules:
            writer.writerow([r.rule_id, r.pattern, r.institution_id, r.priority])


class AddressResolver:
    """Resolves free-text affiliation strings to institution ids.

    A rule matches when its normalized token sequence occurs contiguously in
    the normalized address. When several rules match one address the
    highest-priority rule wins (ties: smallest rule_id).
    """

    def __init__(self, rules: Iterable[AddressRule]):
        self.rules = sorted(rules, key=_rule_order)
        self._index: dict[str, list[tuple[int, AddressRule]]] = defaultdict(list)
        for rank, rule in enumerate(self.rules):
            self._index[rule.tokens[0]].append((rank, rule))
        self._cache: dict[str, str | None] = {}

    def resolve(self, address: str) -> str | None:
        if address in self._cache:
            return self._cache[address]
        tokens = address_words(address)
        best: tuple[int, AddressRule] | None = None
        for i, tok in enumerate(tokens):
            for rank, rule in self._index.get(tok, ()):
                if best is not None and rank >= best[0]:
                    break
                n = len(rule.tokens)
                if tuple(tokens[i:i + n]) == rule.tokens:
                    best = (rank, rule)
                    break
        result = best[1].institution_id if best else None
        self._cache[address] = result
        return result

    def resolve_all(self, addresses: Iterable[str]) -> set[str]:
        return {inst for a in addresses if (inst := self.resolve(a)) is not None}


# -- category map -----------------------------------------------------------

class CategoryCompatibility:
    """Subject category -> set of compatible SDS codes.

    Category labels are compared case- and whitespace-insensitively.
    """

    def __init__(self, pairs: Iterable[tuple[str, str]] = ()):
        self._map: dict[str, set[str]] = defaultdict(set)
        self._labels: dict[str, str] = {}
        for category, sds in pairs:
            key = category_key(category)
            self._labels.setdefault(key, category)
            self._map[key].add(sds)

    def __len__(self) -> int:
        return len(self._map)

    def __contains__(self, category: str) -> bool:
        return category_key(category) in self._map

    @property
    def pair_count(self) -> int:
        return sum(len(s) for s in self._map.values())

    def sds_for(self, category: str) -> frozenset[str] | None:
        found = self._map.get(category_key(category))
        return frozenset(found) if found is not None else None

    def items(self) -> Iterator[tuple[str, str]]:
        for key in sorted(self._map):
            for sds in sorted(self._map[key]):
                yield self._labels[key], sds


def load_category_map(source: Source) -> CategoryCompatibility:
    pairs: list[tuple[str, str]] = []
    with _open(source) as (stream, name):
        for line, row in _csv_records(stream, name, CATEGORY_FIELDS):
            category, sds = row["subject_category"].strip(), row["sds_code"].strip()
            if not category or not sds:
                raise FormatError("empty subject_category or sds_code", name, line)
            pairs.append((category, sds))
    return CategoryCompatibility(pairs)


def write_category_map(compat: CategoryCompatibility | Iterable[tuple[str, str]], dest: Source) -> None:
    items = compat.items() if isinstance(compat, CategoryCompatibility) else compat
    with _open(dest, "w") as (out, _):
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(CATEGORY_FIELDS)
        for category, sds in items:
            writer.writerow([category, sds])


def read_text(text: str) -> io.StringIO:
    """Wrap literal file content as a readable stream (handy in tests)."""
    return io.StringIO(text)

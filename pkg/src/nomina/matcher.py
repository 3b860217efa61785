"""Mapping generation: every identity an author token could plausibly denote.

An identity is turned into the set of surname/initials forms under which it
may be indexed in a bibliographic record. For a compound surname
``S1 S2`` with given-name initials ``I`` the forms are::

    S1 S2 + I     S1 + I     S2 + I     S1 + (S2[0], *I)     S2 + (*I, S1[0])

the last two covering indexers that mistook one surname for a given name.
A token matches an identity when its surname equals the surname of some
form (within the edit threshold) and at least one of its initials occurs
among that form's initials. Matching is deliberately generous; the filter
cascade removes the homonyms.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Iterable

from rapidfuzz.distance import Levenshtein

from .errors import ConfigError, MissingSnapshot, NormalizationError
from .ingest import Registry
from .model import AuthorInstance, CandidatePair, Cluster, IdentityRecord, NormalizedName, Publication
from .names import DEFAULT_NORMALIZATION, NormalizationConfig, normalize_token

MAX_EDIT_THRESHOLD = 2


@dataclass(frozen=True)
class MatchConfig:
    surname_edit_threshold: int = 0
    compound_form_set: str = "five_forms"
    initials_rule: str = "at_least_one"
    join_offset: int = -1
    # "empty": a missing registry year orphans every author; "error": raise.
    missing_snapshot: str = "empty"

    def __post_init__(self) -> None:
        if not 0 <= self.surname_edit_threshold <= MAX_EDIT_THRESHOLD:
            raise ConfigError(
                f"surname_edit_threshold must be in [0, {MAX_EDIT_THRESHOLD}], "
                f"got {self.surname_edit_threshold}")
        if self.compound_form_set != "five_forms":
            raise ConfigError(f"unsupported compound_form_set {self.compound_form_set!r}")
        if self.initials_rule != "at_least_one":
            raise ConfigError(f"unsupported initials_rule {self.initials_rule!r}")
        if self.missing_snapshot not in ("empty", "error"):
            raise ConfigError(f"missing_snapshot must be 'empty' or 'error', "
                              f"got {self.missing_snapshot!r}")


DEFAULT_MATCH = MatchConfig()


@dataclass(frozen=True)
class AuthorForm:
    """One way an identity may appear as an author token."""

    label: str
    name: NormalizedName

    @property
    def surname_words(self) -> tuple[str, ...]:
        return self.name.surname_words

    @property
    def initials(self) -> tuple[str, ...]:
        return self.name.initials


@dataclass(frozen=True)
class MatchDetail:
    form: AuthorForm
    matched_initials: tuple[str, ...]
    distance: int


@functools.lru_cache(maxsize=1 << 16)
def enumerate_author_forms(identity: IdentityRecord) -> tuple[AuthorForm, ...]:
    """All author-token forms of ``identity``, in a fixed canonical order.

    One surname word gives a single form; two give the five forms listed in
    the module docstring. Longer surnames generalize to the full sequence,
    each word alone, and each word with the other words' initials prepended
    (for the first word) or appended (for the others).
    """
    words = identity.surname_tokens
    initials = identity.given_initials
    forms: list[AuthorForm] = [AuthorForm("full", NormalizedName(words, initials))]
    if len(words) > 1:
        for i, w in enumerate(words):
            forms.append(AuthorForm(f"word{i + 1}", NormalizedName((w,), initials)))
        for i, w in enumerate(words):
            others = tuple(o[0] for j, o in enumerate(words) if j != i)
            merged = others + initials if i == 0 else initials + others
            forms.append(AuthorForm(f"word{i + 1}+initials", NormalizedName((w,), merged)))
    unique: dict[NormalizedName, AuthorForm] = {}
    for f in forms:
        unique.setdefault(f.name, f)
    return tuple(unique.values())


def surname_distance(a: tuple[str, ...], b: tuple[str, ...], limit: int) -> int | None:
    """Summed per-word Levenshtein distance, or None beyond ``limit``.

    Sequences of different length never match.
    """
    if len(a) != len(b):
        return None
    if limit == 0:
        return 0 if a == b else None
    total = 0
    for x, y in zip(a, b):
        if x != y:
            remaining = limit - total
            d = Levenshtein.distance(x, y, score_cutoff=remaining)
            if d > remaining:
                return None
            total += d
    return total


def match(author: NormalizedName, identity: IdentityRecord,
          cfg: MatchConfig = DEFAULT_MATCH) -> MatchDetail | None:
    """Best form of ``identity`` matching ``author``, if any.

    Initial order is irrelevant; one shared initial suffices. Among matching
    forms the smallest surname distance wins, then the form explaining more
    of the author's initials, then the earlier form.
    """
    best: MatchDetail | None = None
    own = set(author.initials)
    for form in enumerate_author_forms(identity):
        dist = surname_distance(author.surname_words, form.surname_words, cfg.surname_edit_threshold)
        if dist is None:
            continue
        if not own.intersection(form.initials):
            continue
        common = tuple(i for i in dict.fromkeys(author.initials) if i in form.initials)
        if best is None or (dist, -len(common)) < (best.distance, -len(best.matched_initials)):
            best = MatchDetail(form, common, dist)
    return best


def _blocking_words(word: str, registry: Registry, year: int, threshold: int) -> Iterable[str]:
    if threshold == 0:
        return (word,)
    return [w for w in registry.surname_words(year)
            if abs(len(w) - len(word)) <= threshold
            and Levenshtein.distance(w, word, score_cutoff=threshold) <= threshold]


def candidate_identities(name: NormalizedName, registry: Registry, year: int,
                         cfg: MatchConfig = DEFAULT_MATCH) -> list[IdentityRecord]:
    """Identities sharing (approximately) a surname word with ``name``."""
    found: dict[str, IdentityRecord] = {}
    for word in name.surname_words:
        for near in _blocking_words(word, registry, year, cfg.surname_edit_threshold):
            for ident in registry.lookup(near, year):
                found.setdefault(ident.identity_id, ident)
    return [found[k] for k in sorted(found)]


def author_instances(pub: Publication,
                     rules: NormalizationConfig = DEFAULT_NORMALIZATION) -> list[AuthorInstance]:
    out = []
    for idx, token in enumerate(pub.author_tokens):
        try:
            normalized: NormalizedName | None = normalize_token(token, rules)
        except NormalizationError:
            normalized = None
        out.append(AuthorInstance(pub.pub_id, idx, token, normalized))
    return out


def generate_candidates(pub: Publication, reg: Registry, cfg: MatchConfig = DEFAULT_MATCH,
                        rules: NormalizationConfig = DEFAULT_NORMALIZATION) -> list[Cluster]:
    """One cluster per author instance, holding a pair per matching identity.

    The publication of year Y is matched against registry snapshot
    ``Y + cfg.join_offset``. Authors whose token cannot be parsed or that
    match nothing get an empty cluster (orphans).
    """
    year = pub.year + cfg.join_offset
    if not reg.has_year(year) and cfg.missing_snapshot == "error":
        raise MissingSnapshot(year)
    clusters = []
    for author in author_instances(pub, rules):
        cluster = Cluster(author)
        if author.normalized is not None:
            for ident in candidate_identities(author.normalized, reg, year, cfg):
                detail = match(author.normalized, ident, cfg)
                if detail is not None:
                    cluster.pairs.append(
                        CandidatePair(author, ident, detail.form.label, detail.matched_initials))
        clusters.append(cluster)
    return clusters

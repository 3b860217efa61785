"""Shared domain types.

Everything here is immutable except :attr:`CandidatePair.status`, whose
transitions are guarded: a pair moves from ``candidate`` to either
``accepted`` or ``eliminated`` exactly once.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Mapping

from .errors import StatusTransitionError
from .text import name_words


@dataclass(frozen=True)
class Publication:
    pub_id: str
    year: int
    doc_type: str
    author_tokens: tuple[str, ...]
    addresses: tuple[str, ...]
    subject_categories: tuple[str, ...]
    passthrough: Mapping[str, Any] = field(default_factory=dict, hash=False)

    def __post_init__(self) -> None:
        if not self.pub_id:
            raise ValueError("pub_id must be non-empty")
        if not self.author_tokens:
            raise ValueError(f"publication {self.pub_id}: empty author list")
        if not self.subject_categories:
            raise ValueError(f"publication {self.pub_id}: no subject category")


RANKS = frozenset({"assistant", "associate", "full"})


@dataclass(frozen=True)
class IdentityRecord:
    """One registry row: a researcher as of one yearly snapshot.

    ``member_ids`` lists every registry id folded into this record; it has
    more than one entry only for amalgamated perfect homonyms.
    """

    identity_id: str
    surname: str
    first_names: tuple[str, ...]
    sds_code: str
    university_id: str
    snapshot_year: int
    rank: str | None = None
    department: str | None = None
    member_ids: tuple[str, ...] = ()
    surname_tokens: tuple[str, ...] = field(init=False, compare=False, repr=False)
    given_initials: tuple[str, ...] = field(init=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        surname_tokens = tuple(name_words(self.surname))
        given = tuple(w[0] for name in self.first_names for w in name_words(name))
        if not surname_tokens:
            raise ValueError(f"identity {self.identity_id}: empty surname")
        if not given:
            raise ValueError(f"identity {self.identity_id}: no usable first name")
        if self.rank is not None and self.rank not in RANKS:
            raise ValueError(f"identity {self.identity_id}: rank must be one of "
                             f"{', '.join(sorted(RANKS))}, got {self.rank!r}")
        object.__setattr__(self, "surname_tokens", surname_tokens)
        object.__setattr__(self, "given_initials", given)
        if not self.member_ids:
            object.__setattr__(self, "member_ids", (self.identity_id,))

    @property
    def is_amalgamated(self) -> bool:
        return len(self.member_ids) > 1

    @property
    def display_name(self) -> str:
        return f"{self.surname} {' '.join(self.first_names)}"


@dataclass(frozen=True)
class NormalizedName:
    surname_words: tuple[str, ...]
    initials: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.surname_words or not self.initials:
            raise ValueError("surname_words and initials must be non-empty")

    def render(self) -> str:
        surname = " ".join(self.surname_words)
        initials = " ".join(self.initials)
        # A short trailing surname word would be re-read as initials.
        if len(self.surname_words[-1]) <= 2:
            return f"{surname}, {initials}"
        return f"{surname} {initials}"

    def __str__(self) -> str:
        return f"{' '.join(self.surname_words)} {''.join(self.initials)}"


@dataclass(frozen=True)
class AuthorInstance:
    pub_id: str
    author_index: int
    raw_token: str
    normalized: NormalizedName | None

    @property
    def key(self) -> tuple[str, int]:
        return (self.pub_id, self.author_index)


class PairStatus(enum.Enum):
    CANDIDATE = "candidate"
    ACCEPTED = "accepted"
    ELIMINATED = "eliminated"


class CandidatePair:
    """An (author instance, identity) hypothesis.

    ``stage`` records the pipeline stage that settled the pair, i.e. the
    eliminating stage or the stage at which it was accepted.
    """

    __slots__ = ("author", "identity", "match_form", "matched_initials",
                 "status", "stage", "tie_broken")

    def __init__(self, author: AuthorInstance, identity: IdentityRecord,
                 match_form: str, matched_initials: tuple[str, ...] = ()):
        self.author = author
        self.identity = identity
        self.match_form = match_form
        self.matched_initials = matched_initials
        self.status = PairStatus.CANDIDATE
        self.stage: str | None = None
        self.tie_broken = False

    @property
    def identity_id(self) -> str:
        return self.identity.identity_id

    @property
    def alive(self) -> bool:
        return self.status is not PairStatus.ELIMINATED

    def accept(self, stage: str, tie_broken: bool = False) -> None:
        if self.status is PairStatus.ACCEPTED:
            return
        if self.status is not PairStatus.CANDIDATE:
            raise StatusTransitionError(
                f"cannot accept {self!r}: already {self.status.value} at {self.stage}")
        self.status = PairStatus.ACCEPTED
        self.stage = stage
        self.tie_broken = tie_broken

    def eliminate(self, stage: str) -> None:
        if self.status is not PairStatus.CANDIDATE:
            raise StatusTransitionError(
                f"cannot eliminate {self!r}: already {self.status.value} at {self.stage}")
        self.status = PairStatus.ELIMINATED
        self.stage = stage

    def __repr__(self) -> str:
        return (f"CandidatePair({self.author.pub_id}#{self.author.author_index} "
                f"{self.author.raw_token!r} -> {self.identity_id}, {self.status.value})")


@dataclass
class Cluster:
    """All hypotheses generated for one author instance.

    ``pairs`` keeps eliminated pairs too, so the history stays auditable;
    :attr:`live` is the cluster in the narrow sense.
    """

    author: AuthorInstance
    pairs: list[CandidatePair] = field(default_factory=list)
    unresolved: bool = False

    @property
    def live(self) -> list[CandidatePair]:
        return [p for p in self.pairs if p.alive]

    @property
    def cardinality(self) -> int:
        return sum(1 for p in self.pairs if p.alive)

    @property
    def accepted(self) -> CandidatePair | None:
        for p in self.pairs:
            if p.status is PairStatus.ACCEPTED:
                return p
        return None

    @property
    def is_frozen(self) -> bool:
        return self.accepted is not None


@dataclass
class MappingSet:
    pairs: list[CandidatePair]
    unresolved_clusters: list[Cluster]
    orphans: list[AuthorInstance]
    clusters: list[Cluster] = field(default_factory=list)
    address_unresolved: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        seen: set[tuple[str, int]] = set()
        for p in self.pairs:
            if p.author.key in seen:
                raise ValueError(f"more than one accepted pair for author {p.author.key}")
            seen.add(p.author.key)


@dataclass(frozen=True)
class StageStats:
    stage: str
    papers: int
    pairs: int
    pairs_per_paper: float | None
    pct_delta_papers: float | None = None
    pct_delta_pairs: float | None = None
    pct_delta_pairs_per_paper: float | None = None

    def as_dict(self) -> dict[str, Any]:
        return {
            "stage": self.stage,
            "papers": self.papers,
            "pairs": self.pairs,
            "pairs_per_paper": self.pairs_per_paper,
            "pct_delta_papers": self.pct_delta_papers,
            "pct_delta_pairs": self.pct_delta_pairs,
            "pct_delta_pairs_per_paper": self.pct_delta_pairs_per_paper,
        }


def _pct(new: float | None, old: float | None) -> float | None:
    if new is None or not old:
        return None
    return round(100.0 * (new - old) / old, 4)


def funnel(rows: list[tuple[str, int, int]]) -> list[StageStats]:
    """Turn ``(stage, papers, pairs)`` counts into stage statistics with deltas."""
    out: list[StageStats] = []
    prev: StageStats | None = None
    for stage, papers, pairs in rows:
        ppp = round(pairs / papers, 6) if papers else None
        if prev is None:
            cur = StageStats(stage, papers, pairs, ppp)
        else:
            cur = StageStats(stage, papers, pairs, ppp,
                             _pct(papers, prev.papers), _pct(pairs, prev.pairs),
                             _pct(ppp, prev.pairs_per_paper))
        out.append(cur)
        prev = cur
    return out

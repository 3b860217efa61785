"""The elimination cascade that reduces candidate clusters to one identity.

Stages, in order:

1. address filter: drop identities whose university is not among the
   institutions resolved from the publication's address list;
2. WoS-SDS filter: drop identities whose SDS is incompatible with every
   subject category of the publication, then accept (freeze) singletons;
3. shared SDS filter: in a still ambiguous cluster, keep the single pair
   whose SDS is shared with a pair already accepted on the same publication;
4. maximum correspondence filter: keep the pair whose SDS has the most
   distinct accepted identities publishing in the publication's categories.

Stages 1-3 look at one publication at a time. Stage 4 needs the
correspondence table, a corpus-wide reduction over everything accepted by
the end of stage 3, so it runs as a second pass.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import ConfigError
from .ingest import AddressResolver, AddressRule, CategoryCompatibility, Registry
from .matcher import DEFAULT_MATCH, MatchConfig, generate_candidates
from .model import CandidatePair, Cluster, MappingSet, PairStatus, Publication, StageStats, funnel
from .names import DEFAULT_NORMALIZATION, NormalizationConfig
from .text import category_key

log = logging.getLogger(__name__)

MAPPING_GENERATION = "mapping_generation"
ADDRESS_FILTER = "address_filter"
WOS_SDS_FILTER = "wos_sds_filter"
SHARED_SDS_FILTER = "shared_sds_filter"
MAX_CORRESPONDENCE_FILTER = "max_correspondence_filter"
STAGES = (MAPPING_GENERATION, ADDRESS_FILTER, WOS_SDS_FILTER, SHARED_SDS_FILTER,
          MAX_CORRESPONDENCE_FILTER)


@dataclass(frozen=True)
class PipelineConfig:
    force_resolution: bool = True
    keep_on_unresolved_address: bool = True
    lenient_unknown_category: bool = True
    tie_break: str = "lexicographic_identity_id"

    def __post_init__(self) -> None:
        if self.tie_break != "lexicographic_identity_id":
            raise ConfigError(f"unsupported tie_break {self.tie_break!r}")


DEFAULT_PIPELINE = PipelineConfig()


def _resolver(rules: AddressResolver | Iterable[AddressRule]) -> AddressResolver:
    return rules if isinstance(rules, AddressResolver) else AddressResolver(rules)


def resolve_institutions(pub: Publication, rules: AddressResolver | Iterable[AddressRule]) -> set[str]:
    return _resolver(rules).resolve_all(pub.addresses)


def address_filter(clusters: list[Cluster], pub: Publication,
                   rules: AddressResolver | Iterable[AddressRule],
                   cfg: PipelineConfig = DEFAULT_PIPELINE) -> list[Cluster]:
    resolved = resolve_institutions(pub, rules)
    if not resolved and cfg.keep_on_unresolved_address:
        return clusters
    for cluster in clusters:
        for pair in cluster.live:
            if pair.status is PairStatus.CANDIDATE and pair.identity.university_id not in resolved:
                pair.eliminate(ADDRESS_FILTER)
    return clusters


def _category_compatible(sds: str, categories: Sequence[str], compat: CategoryCompatibility,
                         lenient: bool) -> bool:
    for category in categories:
        allowed = compat.sds_for(category)
        if allowed is None:
            if lenient:
                return True
        elif sds in allowed:
            return True
    return False


def category_filter(clusters: list[Cluster], pub: Publication, compat: CategoryCompatibility,
                    cfg: PipelineConfig = DEFAULT_PIPELINE) -> list[Cluster]:
    """WoS-SDS filter; afterwards every singleton cluster is accepted."""
    for cluster in clusters:
        for pair in cluster.live:
            if pair.status is PairStatus.CANDIDATE and not _category_compatible(
                    pair.identity.sds_code, pub.subject_categories, compat,
                    cfg.lenient_unknown_category):
                pair.eliminate(WOS_SDS_FILTER)
        live = cluster.live
        if len(live) == 1:
            live[0].accept(WOS_SDS_FILTER)
    return clusters


def shared_sds_filter(article_clusters: list[Cluster],
                      accepted: Iterable[CandidatePair]) -> list[Cluster]:
    """Resolve clusters where exactly one candidate shares an SDS with an
    already accepted pair of the same publication.

    The shared set is fixed on entry, so the result does not depend on the
    order of clusters. Clusters with zero or several such candidates are
    left for the next stage.
    """
    shared = {p.identity.sds_code for p in accepted if p.status is PairStatus.ACCEPTED}
    if not shared:
        return article_clusters
    for cluster in article_clusters:
        if cluster.is_frozen:
            continue
        live = cluster.live
        if len(live) < 2:
            continue
        winners = [p for p in live if p.identity.sds_code in shared]
        if len(winners) != 1:
            continue
        for pair in live:
            if pair is not winners[0]:
                pair.eliminate(SHARED_SDS_FILTER)
        winners[0].accept(SHARED_SDS_FILTER)
    return article_clusters


class CorrespondenceTable:
    """Distinct accepted identities per (SDS, subject category)."""

    def __init__(self, counts: Mapping[tuple[str, str], int] | None = None):
        self.counts: dict[tuple[str, str], int] = {
            (sds, category_key(cat)): n for (sds, cat), n in (counts or {}).items()}

    def __len__(self) -> int:
        return len(self.counts)

    def count(self, sds: str, category: str) -> int:
        return self.counts.get((sds, category_key(category)), 0)

    def score(self, sds: str, categories: Iterable[str]) -> int:
        return max((self.count(sds, c) for c in categories), default=0)


def build_correspondence_table(accepted: Iterable[CandidatePair],
                               pubs: Mapping[str, Publication] | Iterable[Publication]) -> CorrespondenceTable:
    if not isinstance(pubs, Mapping):
        pubs = {p.pub_id: p for p in pubs}
    members: dict[tuple[str, str], set[str]] = defaultdict(set)
    for pair in accepted:
        if pair.status is not PairStatus.ACCEPTED:
            continue
        pub = pubs[pair.author.pub_id]
        for category in dict.fromkeys(category_key(c) for c in pub.subject_categories):
            members[(pair.identity.sds_code, category)].add(pair.identity_id)
    table = CorrespondenceTable()
    table.counts = {key: len(ids) for key, ids in sorted(members.items())}
    return table


def max_correspondence_filter(clusters: list[Cluster], pub: Publication, table: CorrespondenceTable,
                              cfg: PipelineConfig = DEFAULT_PIPELINE) -> list[Cluster]:
    for cluster in clusters:
        if cluster.is_frozen:
            continue
        live = cluster.live
        if len(live) < 2:
            continue
        scores = {id(p): table.score(p.identity.sds_code, pub.subject_categories) for p in live}
        best = max(scores.values())
        top = [p for p in live if scores[id(p)] == best]
        if len(top) == 1:
            winner, tie = top[0], False
        elif cfg.force_resolution:
            winner, tie = min(top, key=lambda p: p.identity_id), True
        else:
            cluster.unresolved = True
            continue
        for pair in live:
            if pair is not winner:
                pair.eliminate(MAX_CORRESPONDENCE_FILTER)
        winner.accept(MAX_CORRESPONDENCE_FILTER, tie_broken=tie)
    return clusters


def _alive(clusters: Iterable[Cluster]) -> int:
    return sum(c.cardinality for c in clusters)


@dataclass
class _PubState:
    pub: Publication
    clusters: list[Cluster]
    counts: list[int]
    address_unresolved: bool


def _early_stages(pub: Publication, reg: Registry, resolver: AddressResolver,
                  compat: CategoryCompatibility, cfg: PipelineConfig, match_cfg: MatchConfig,
                  norm: NormalizationConfig) -> _PubState:
    clusters = generate_candidates(pub, reg, match_cfg, norm)
    counts = [_alive(clusters)]
    unresolved = not resolver.resolve_all(pub.addresses)
    address_filter(clusters, pub, resolver, cfg)
    counts.append(_alive(clusters))
    category_filter(clusters, pub, compat, cfg)
    counts.append(_alive(clusters))
    accepted = [c.accepted for c in clusters if c.accepted is not None]
    shared_sds_filter(clusters, accepted)
    counts.append(_alive(clusters))
    return _PubState(pub, clusters, counts, unresolved)


def run_pipeline(pubs: Sequence[Publication], reg: Registry,
                 rules: AddressResolver | Iterable[AddressRule], compat: CategoryCompatibility,
                 cfg: PipelineConfig = DEFAULT_PIPELINE, match_cfg: MatchConfig = DEFAULT_MATCH,
                 norm: NormalizationConfig = DEFAULT_NORMALIZATION,
                 threads: int = 1) -> tuple[MappingSet, list[StageStats]]:
    """Generate candidates for every publication and run the four filters.

    Returns the mapping and one :class:`StageStats` row per stage, starting
    with the mapping-generation baseline. Output order is canonical
    (pub_id, author_index) and does not depend on ``threads``.
    """
    resolver = _resolver(rules)
    # Resolver and form caches are filled lazily; a race only recomputes a value.
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            states = list(pool.map(
                lambda p: _early_stages(p, reg, resolver, compat, cfg, match_cfg, norm), pubs))
    else:
        states = [_early_stages(p, reg, resolver, compat, cfg, match_cfg, norm) for p in pubs]

    accepted = [c.accepted for s in states for c in s.clusters if c.accepted is not None]
    table = build_correspondence_table(accepted, {s.pub.pub_id: s.pub for s in states})
    log.debug("correspondence table: %d cells from %d accepted pairs", len(table), len(accepted))

    for s in states:
        max_correspondence_filter(s.clusters, s.pub, table, cfg)
        s.counts.append(_alive(s.clusters))

    rows = []
    for k, stage in enumerate(STAGES):
        papers = sum(1 for s in states if s.counts[k] > 0)
        pairs = sum(s.counts[k] for s in states)
        rows.append((stage, papers, pairs))
    stats = funnel(rows)

    clusters = sorted((c for s in states for c in s.clusters),
                      key=lambda c: (c.author.pub_id, c.author.author_index))
    mapping = MappingSet(
        pairs=[c.accepted for c in clusters if c.accepted is not None],  # type: ignore[misc]
        unresolved_clusters=[c for c in clusters if c.unresolved],
        orphans=[c.author for c in clusters if c.cardinality == 0],
        clusters=clusters,
        address_unresolved=frozenset(s.pub.pub_id for s in states if s.address_unresolved),
    )
    return mapping, stats

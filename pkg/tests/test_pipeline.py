import itertools

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from nomina.errors import ConfigError
from nomina.ingest import AddressResolver, AddressRule, CategoryCompatibility, build_registry
from nomina.matcher import generate_candidates
from nomina.model import AuthorInstance, CandidatePair, Cluster, IdentityRecord, PairStatus, Publication
from nomina.names import normalize_token
from nomina.pipeline import (ADDRESS_FILTER, MAX_CORRESPONDENCE_FILTER, SHARED_SDS_FILTER, STAGES,
                             WOS_SDS_FILTER, CorrespondenceTable, PipelineConfig, address_filter,
                             build_correspondence_table, category_filter, max_correspondence_filter,
                             run_pipeline, shared_sds_filter)
from nomina.reports import mapping_rows
from nomina.synthetic import SyntheticConfig, generate_synthetic_corpus

from conftest import WORKED_PUB


def ident(identity_id, sds="FIS/01", uni="U1", surname="ROSSI", first="Giulia"):
    return IdentityRecord(identity_id, surname, (first,), sds, uni, 2003)


def cluster(*identities, token="ROSSI G", pub_id="P1", index=0):
    author = AuthorInstance(pub_id, index, token, normalize_token(token))
    return Cluster(author, [CandidatePair(author, i, "full", ("G",)) for i in identities])


def pub(addresses=("Univ Alpha, Fis",), categories=("Physics",), pub_id="P1"):
    return Publication(pub_id, 2004, "article", ("ROSSI G",), tuple(addresses), tuple(categories))


RULES = AddressResolver([AddressRule("V1", "Univ Alpha", "U1", 1), AddressRule("V2", "Univ Beta", "U2", 1)])


def statuses(c):
    return {p.identity_id: (p.status.value, p.stage) for p in c.pairs}


# -- address filter ---------------------------------------------------------

def test_address_filter_eliminates_other_institutions():
    c = cluster(ident("A", uni="U1"), ident("B", uni="U2"), ident("C", uni="U3"))
    address_filter([c], pub(("Univ Alpha, Fis", "Univ Beta, Chim")), RULES)
    assert [p.identity_id for p in c.live] == ["A", "B"]
    assert c.pairs[2].stage == ADDRESS_FILTER


def test_address_filter_vacuous_when_nothing_resolves():
    c = cluster(ident("A", uni="U1"), ident("B", uni="U2"))
    address_filter([c], pub(("Osped Maggiore",)), RULES)
    assert c.cardinality == 2
    address_filter([c], pub(("Osped Maggiore",)), RULES, PipelineConfig(keep_on_unresolved_address=False))
    assert c.cardinality == 0


# -- category filter --------------------------------------------------------

COMPAT = CategoryCompatibility([("Physics", "FIS/01"), ("Chemistry", "CHIM/02")])


def test_category_filter_and_singleton_freeze():
    c = cluster(ident("A", sds="FIS/01"), ident("B", sds="SECS-P/12"))
    category_filter([c], pub(), COMPAT)
    assert statuses(c) == {"A": ("accepted", WOS_SDS_FILTER), "B": ("eliminated", WOS_SDS_FILTER)}


def test_category_filter_second_category_and_unknown():
    c = cluster(ident("A", sds="CHIM/02"), ident("B", sds="MED/09"))
    category_filter([c], pub(categories=("Physics", "Chemistry")), COMPAT)
    assert [p.identity_id for p in c.live] == ["A"]

    lenient = cluster(ident("A", sds="MED/09"), ident("B", sds="SECS-P/12"))
    category_filter([lenient], pub(categories=("Astronomy",)), COMPAT)
    assert lenient.cardinality == 2 and lenient.accepted is None

    strict = cluster(ident("A", sds="MED/09"), ident("B", sds="SECS-P/12"))
    category_filter([strict], pub(categories=("Astronomy",)), COMPAT,
                    PipelineConfig(lenient_unknown_category=False))
    assert strict.cardinality == 0


def test_empty_compat_is_pass_through():
    c = cluster(ident("A", sds="MED/09"), ident("B", sds="SECS-P/12"))
    category_filter([c], pub(), CategoryCompatibility())
    assert c.cardinality == 2


# -- shared SDS filter ------------------------------------------------------

def _accepted(sds, identity_id="Z"):
    c = cluster(ident(identity_id, sds=sds), index=9)
    c.pairs[0].accept(WOS_SDS_FILTER)
    return c.pairs[0]


def test_shared_sds_single_winner():
    c = cluster(ident("A", sds="MED/09"), ident("B", sds="FIS/01"))
    shared_sds_filter([c], [_accepted("FIS/01")])
    assert statuses(c) == {"A": ("eliminated", SHARED_SDS_FILTER), "B": ("accepted", SHARED_SDS_FILTER)}


@pytest.mark.parametrize("accepted", [[], ["CHIM/02"], ["FIS/01", "MED/09"]])
def test_shared_sds_defers(accepted):
    c = cluster(ident("A", sds="MED/09"), ident("B", sds="FIS/01"))
    shared_sds_filter([c], [_accepted(s, f"Z{i}") for i, s in enumerate(accepted)])
    assert c.cardinality == 2 and c.accepted is None


def test_shared_sds_ignores_order_of_clusters():
    # A pair accepted by this stage does not feed the shared set of a later cluster.
    first = cluster(ident("A", sds="MED/09"), ident("B", sds="FIS/01"), index=0)
    second = cluster(ident("C", sds="MED/09"), ident("D", sds="CHIM/02"), index=1)
    for order in ([first, second], [second, first]):
        for c in (first, second):
            for p in c.pairs:
                p.status, p.stage = PairStatus.CANDIDATE, None
        shared_sds_filter(order, [_accepted("FIS/01")])
        assert first.accepted.identity_id == "B" and second.accepted is None


# -- correspondence ---------------------------------------------------------

def test_correspondence_counts_distinct_identities():
    pubs = [pub(pub_id="P1", categories=("Physics", "Optics")), pub(pub_id="P2")]
    same = ident("A")
    pairs = []
    for pid in ("P1", "P2"):
        c = cluster(same, pub_id=pid)
        c.pairs[0].accept(WOS_SDS_FILTER)
        pairs.append(c.pairs[0])
    table = build_correspondence_table(pairs, pubs)
    assert table.count("FIS/01", "Physics") == 1
    assert table.count("FIS/01", "optics") == 1
    assert table.count("CHIM/02", "Physics") == 0

    three = []
    for k in "XYZ":
        c = cluster(ident(k), pub_id="P1")
        c.pairs[0].accept(WOS_SDS_FILTER)
        three.append(c.pairs[0])
    assert build_correspondence_table(three, pubs).count("FIS/01", "Physics") == 3
    assert len(build_correspondence_table([], pubs)) == 0


def test_correspondence_ignores_unaccepted_pairs():
    c = cluster(ident("A"), ident("B", sds="CHIM/02"))
    assert len(build_correspondence_table(c.pairs, [pub()])) == 0


def test_max_correspondence_unique_argmax():
    table = CorrespondenceTable({("CHIM/02", "Physics"): 2, ("ING-INF/06", "Physics"): 1})
    c = cluster(ident("R004", sds="ING-INF/06"), ident("R005", sds="CHIM/02"))
    max_correspondence_filter([c], pub(), table)
    assert statuses(c) == {"R004": ("eliminated", MAX_CORRESPONDENCE_FILTER),
                           "R005": ("accepted", MAX_CORRESPONDENCE_FILTER)}
    assert not c.accepted.tie_broken


def test_max_correspondence_uses_best_category():
    table = CorrespondenceTable({("CHIM/02", "Chemistry"): 5, ("FIS/01", "Physics"): 3})
    c = cluster(ident("A", sds="FIS/01"), ident("B", sds="CHIM/02"))
    max_correspondence_filter([c], pub(categories=("Physics", "Chemistry")), table)
    assert c.accepted.identity_id == "B"


def test_max_correspondence_ties():
    table = CorrespondenceTable({("FIS/01", "Physics"): 4, ("CHIM/02", "Physics"): 4, ("MED/09", "Physics"): 1})
    c = cluster(ident("B", sds="FIS/01"), ident("A", sds="CHIM/02"), ident("0", sds="MED/09"))
    max_correspondence_filter([c], pub(), table)
    assert c.accepted.identity_id == "A" and c.accepted.tie_broken

    c = cluster(ident("B", sds="FIS/01"), ident("A", sds="CHIM/02"))
    max_correspondence_filter([c], pub(), CorrespondenceTable(), PipelineConfig(force_resolution=False))
    assert c.unresolved and c.cardinality == 2 and c.accepted is None


def test_pipeline_config_validation():
    with pytest.raises(ConfigError):
        PipelineConfig(tie_break="random")


# -- whole pipeline on the worked example -----------------------------------

def test_worked_example_end_to_end(worked):
    mapping, stats = run_pipeline(worked.publications, worked.registry, worked.resolver, worked.compat)
    accepted = {(p.author.raw_token, p.identity.display_name, p.identity.sds_code, p.identity.university_id)
                for p in mapping.pairs if p.author.pub_id == WORKED_PUB}
    assert accepted == {
        ("BOSCHERINI F", "BOSCHERINI Federico", "FIS/01", "UNIBO"),
        ("DADDATO S", "D'ADDATO Sergio", "FIS/01", "UNIMORE"),
        ("VALERI S", "VALERI Sergio", "FIS/01", "UNIMORE"),
        ("LAMBERTI C", "LAMBERTI Carlo", "CHIM/02", "UNITO"),
    }
    eliminated = {r.identity_id: r.eliminating_stage for r in mapping_rows(mapping) if r.status == "eliminated"}
    assert eliminated == {"R008": ADDRESS_FILTER, "R006": WOS_SDS_FILTER, "R002": SHARED_SDS_FILTER,
                          "R004": MAX_CORRESPONDENCE_FILTER}
    assert [s.stage for s in stats] == list(STAGES)
    assert [s.pairs for s in stats] == [11, 10, 9, 8, 7]
    assert [a.raw_token for a in mapping.orphans] == ["GROppo E", "LUCHES P", "PRESTIPINO C"]
    assert not mapping.unresolved_clusters and not mapping.address_unresolved


def test_worked_example_without_seed_articles_ties(worked):
    # Alone, the article seeds only FIS/01; the LAMBERTI cluster is then a tie.
    prb = [p for p in worked.publications if p.pub_id == WORKED_PUB]
    mapping, _ = run_pipeline(prb, worked.registry, worked.resolver, worked.compat,
                              PipelineConfig(force_resolution=False))
    assert [c.author.raw_token for c in mapping.unresolved_clusters] == ["LAMBERTI C"]
    assert len(mapping.pairs) == 3


def test_empty_registry_orphans_everyone(worked):
    mapping, stats = run_pipeline(worked.publications, build_registry([]), worked.resolver, worked.compat)
    assert mapping.pairs == [] and len(mapping.orphans) == 10
    assert all(s.pairs == 0 and s.papers == 0 for s in stats)


# -- invariants on synthetic corpora ----------------------------------------

def corpus(seed, **kw):
    base = dict(n_identities=250, n_publications=250, external_homonym_rate=0.05,
                inter_address_homonym_rate=0.05, intra_address_homonym_rate=0.05,
                perfect_homonym_rate=0.02, compound_surname_rate=0.3, multi_first_name_rate=0.3,
                wrong_affiliation_rate=0.03, cross_category_publish_rate=0.02, vocabulary_gap_rate=0.02,
                source_address_error_rate=0.02)
    base.update(kw)
    return generate_synthetic_corpus(SyntheticConfig(rng_seed=seed, **base))


@settings(max_examples=8, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.integers(0, 10_000), st.booleans())
def test_pipeline_invariants(seed, force):
    b = corpus(seed)
    cfg = PipelineConfig(force_resolution=force)
    reg, resolver = b.registry(), AddressResolver(b.vocabulary)

    # Record what stage 2 froze, to check later stages leave it alone.
    frozen = {}
    for p in b.publications:
        clusters = generate_candidates(p, reg)
        address_filter(clusters, p, resolver, cfg)
        category_filter(clusters, p, b.compat, cfg)
        frozen.update({c.author.key: c.accepted.identity_id for c in clusters if c.accepted})

    mapping, stats = run_pipeline(b.publications, reg, resolver, b.compat, cfg)
    for a, z in itertools.pairwise(stats):
        assert z.pairs <= a.pairs and z.papers <= a.papers
    for s in stats:
        if s.papers:
            assert s.pairs_per_paper == pytest.approx(s.pairs / s.papers, abs=1e-6)

    accepted = {}
    for c in mapping.clusters:
        if c.cardinality == 0:
            continue
        if force:
            assert c.cardinality == 1 and c.accepted is not None
        else:
            assert c.cardinality == 1 or (c.unresolved and c.accepted is None)
        if c.accepted is not None:
            assert c.author.key not in accepted
            accepted[c.author.key] = c.accepted.identity_id
    for key, identity_id in frozen.items():
        assert accepted[key] == identity_id
        assert next(c for c in mapping.clusters if c.author.key == key).accepted.stage == WOS_SDS_FILTER


def test_pipeline_thread_invariant():
    b = corpus(3)
    reg, resolver = b.registry(), AddressResolver(b.vocabulary)
    runs = [run_pipeline(b.publications, reg, resolver, b.compat, threads=t) for t in (1, 4)]
    assert mapping_rows(runs[0][0]) == mapping_rows(runs[1][0])
    assert runs[0][1] == runs[1][1]


def test_filter_locality(worked):
    # Stages 1-3 on one publication do not depend on the rest of the corpus.
    prb = next(p for p in worked.publications if p.pub_id == WORKED_PUB)
    alone, _ = run_pipeline([prb], worked.registry, worked.resolver, worked.compat,
                            PipelineConfig(force_resolution=False))
    together, _ = run_pipeline(worked.publications, worked.registry, worked.resolver, worked.compat,
                               PipelineConfig(force_resolution=False))

    def early(m):
        return {(p.author.key, p.identity_id) for p in m.pairs if p.stage != MAX_CORRESPONDENCE_FILTER
                and p.author.pub_id == WORKED_PUB}
    assert early(alone) == early(together)

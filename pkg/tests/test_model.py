import pytest
from hypothesis import given, strategies as st

from nomina.errors import EmptyToken, NoInitials, StatusTransitionError
from nomina.model import (AuthorInstance, CandidatePair, Cluster, IdentityRecord, MappingSet,
                          NormalizedName, PairStatus, Publication, funnel)
from nomina.names import identity_name, normalize_token


@pytest.mark.parametrize("raw, surname, initials", [
    ("DADDATO S", ["DADDATO"], ["S"]),
    ("ROSSI GM", ["ROSSI"], ["G", "M"]),
    ("rossi gm", ["ROSSI"], ["G", "M"]),
    ("LEVIALDI GHIRON N", ["LEVIALDI", "GHIRON"], ["N"]),
    ("D'ADDATO S", ["DADDATO"], ["S"]),
    ("D’Addato S", ["DADDATO"], ["S"]),
    ("MÜLLER-LÜDENSCHEIDT H", ["MULLER", "LUDENSCHEIDT"], ["H"]),
    ("NICCOLÒ G M", ["NICCOLO"], ["G", "M"]),
    ("GROppo E", ["GROPPO"], ["E"]),
    ("DE ROSA, GM", ["DE", "ROSA"], ["G", "M"]),
    ("DE ROSA, Giovanni", ["DE", "ROSA"], ["G"]),
    ("  VALERI   S  ", ["VALERI"], ["S"]),
])
def test_normalize_examples(raw, surname, initials):
    name = normalize_token(raw)
    assert list(name.surname_words) == surname
    assert list(name.initials) == initials


def test_single_letter_surname_word_kept():
    # The walk back over single letters never consumes the whole surname.
    assert normalize_token("O A B") == NormalizedName(("O",), ("A", "B"))


@pytest.mark.parametrize("raw, exc", [
    ("", EmptyToken), ("   ", EmptyToken), ("'' ,", EmptyToken), ("123", EmptyToken),
    ("ROSSI", NoInitials), ("ROSSI GIOVANNI", NoInitials), ("ROSSI,", NoInitials),
])
def test_normalize_errors(raw, exc):
    with pytest.raises(exc):
        normalize_token(raw)


words = st.text(alphabet="ABCDEFGHIJKLMNOPQRSTUVWXYZ", min_size=3, max_size=10)
tokens = st.builds(
    lambda s, i, spaced: " ".join(s) + " " + (" ".join(i) if spaced else "".join(i)),
    st.lists(words, min_size=1, max_size=3),
    st.lists(st.sampled_from("ABCDEFGHIJKLMNOPQRSTUVWXYZ"), min_size=1, max_size=2),
    st.booleans())


@given(tokens)
def test_normalize_idempotent(raw):
    name = normalize_token(raw)
    assert normalize_token(name.render()) == name


@given(st.lists(st.text(alphabet="ABCDEFGHIJKLMNOPQRSTUVWXYZ", min_size=1, max_size=6), min_size=1, max_size=3),
       st.lists(st.sampled_from("ABCDEFGHIJKLMNOPQRSTUVWXYZ"), min_size=1, max_size=3))
def test_render_round_trips_any_name(surname, initials):
    name = NormalizedName(tuple(surname), tuple(initials))
    assert normalize_token(name.render()) == name


@given(tokens, st.randoms(use_true_random=False))
def test_normalize_case_insensitive(raw, rnd):
    mixed = "".join(c.lower() if rnd.random() < 0.5 else c for c in raw)
    assert normalize_token(mixed) == normalize_token(raw) == normalize_token(raw.lower())


def ident(identity_id="R1", surname="ROSSI", first=("Giovanni",), sds="FIS/01", uni="U1", year=2003):
    return IdentityRecord(identity_id, surname, tuple(first), sds, uni, year)


def test_identity_record_derived_fields():
    r = ident(surname="D'Addato", first=("Maria Carla",))
    assert r.surname_tokens == ("DADDATO",)
    assert r.given_initials == ("M", "C")
    assert r.member_ids == ("R1",)
    assert not r.is_amalgamated
    assert identity_name(r) == NormalizedName(("DADDATO",), ("M", "C"))


def test_identity_record_requires_names():
    with pytest.raises(ValueError):
        ident(surname="''")
    with pytest.raises(ValueError):
        ident(first=())


def test_publication_invariants():
    with pytest.raises(ValueError):
        Publication("P", 2004, "article", (), ("A",), ("Physics",))
    with pytest.raises(ValueError):
        Publication("P", 2004, "article", ("ROSSI G",), ("A",), ())


def _pair(identity_id="R1"):
    author = AuthorInstance("P1", 0, "ROSSI G", normalize_token("ROSSI G"))
    return CandidatePair(author, ident(identity_id), "full", ("G",))


def test_pair_transitions():
    p = _pair()
    assert p.status is PairStatus.CANDIDATE
    p.accept("wos_sds_filter")
    p.accept("wos_sds_filter")  # idempotent
    assert p.status is PairStatus.ACCEPTED and p.stage == "wos_sds_filter"
    with pytest.raises(StatusTransitionError):
        p.eliminate("address_filter")

    q = _pair()
    q.eliminate("address_filter")
    with pytest.raises(StatusTransitionError):
        q.accept("max_correspondence_filter")
    with pytest.raises(StatusTransitionError):
        q.eliminate("wos_sds_filter")
    assert q.stage == "address_filter" and not q.alive


def test_cluster_cardinality():
    a, b = _pair("R1"), _pair("R2")
    c = Cluster(a.author, [a, b])
    assert c.cardinality == 2 and c.accepted is None and not c.is_frozen
    b.eliminate("address_filter")
    assert c.cardinality == 1 and c.live == [a]
    a.accept("wos_sds_filter")
    assert c.is_frozen and c.accepted is a
    a2 = _pair("R3")
    a2.eliminate("wos_sds_filter")
    assert Cluster(a2.author, [a2]).cardinality == 0


def test_mapping_set_rejects_two_accepted_pairs_per_author():
    a, b = _pair("R1"), _pair("R2")
    a.accept("x")
    b.accept("x")
    with pytest.raises(ValueError):
        MappingSet(pairs=[a, b], unresolved_clusters=[], orphans=[])


def test_funnel_deltas():
    rows = funnel([("a", 10, 40), ("b", 8, 20), ("c", 0, 0), ("d", 0, 0)])
    assert rows[0].pct_delta_pairs is None
    assert rows[1].pairs_per_paper == 2.5
    assert rows[1].pct_delta_papers == -20.0
    assert rows[1].pct_delta_pairs == -50.0
    assert rows[1].pct_delta_pairs_per_paper == pytest.approx(-37.5)
    assert rows[2].pairs_per_paper is None and rows[2].pct_delta_pairs == -100.0
    assert rows[3].pct_delta_pairs is None
    assert set(rows[0].as_dict()) == {"stage", "papers", "pairs", "pairs_per_paper", "pct_delta_papers",
                                      "pct_delta_pairs", "pct_delta_pairs_per_paper"}

import math

import pytest
from hypothesis import assume, given, strategies as st

from nomina.errors import DomainError
from nomina.evaluation import (CAUSE_LABELS, ErrorDetail, SamplingParameters, compare_to_ground_truth,
                               compute_metrics, f_measure, sample_size, tag_fn_causes, z_for_confidence)
from nomina.model import MappingSet
from nomina.pipeline import run_pipeline
from nomina.reports import MappingRow, TruthPair
from nomina.synthetic import CORRUPTIONS

from conftest import WORKED_PUB


def closed_form(N, Z, e, p):
    # Unrounded value, written out independently of the implementation.
    v = Z ** 2 * p * (1 - p)
    return N * v / ((N - 1) * e ** 2 + v) if v else 0.0


@pytest.mark.parametrize("N, Z, e, p, n", [
    (406534, 2.33, 0.03, 0.12, 636),
    (10000, 1.96, 0.05, 0.5, 370),
    (500, 1.96, 0.05, 0.0, 0),
    (500, 1.96, 0.05, 1.0, 0),
    (1, 1.96, 0.05, 0.5, 1),
])
def test_sample_size_examples(N, Z, e, p, n):
    assert sample_size(SamplingParameters(N, Z, e, p)) == n


@pytest.mark.parametrize("kwargs", [
    dict(N=0, Z=1.96, e=0.05, p=0.5), dict(N=10, Z=0, e=0.05, p=0.5), dict(N=10, Z=1.96, e=0, p=0.5),
    dict(N=10, Z=1.96, e=1.0, p=0.5), dict(N=10, Z=1.96, e=0.05, p=1.1), dict(N=10, Z=1.96, e=0.05, p=-0.1),
])
def test_sampling_domain(kwargs):
    with pytest.raises(DomainError):
        SamplingParameters(**kwargs)


def test_z_for_confidence():
    assert z_for_confidence(0.98) == 2.33 and z_for_confidence(0.95) == 1.96
    with pytest.raises(DomainError):
        z_for_confidence(0.97)


pop = st.integers(1, 10**7)
z = st.sampled_from([1.645, 1.96, 2.33, 2.576])
err = st.floats(0.005, 0.2)
het = st.floats(0.0, 1.0)


@given(pop, z, err, het)
def test_sample_size_matches_closed_form(N, Z, e, p):
    n = sample_size(SamplingParameters(N, Z, e, p))
    expected = closed_form(N, Z, e, p)
    assert n == (0 if expected == 0 else math.ceil(expected))
    assert 0 <= n <= N


@given(pop, z, err, st.floats(0.0, 0.5), st.floats(0.0, 0.5))
def test_sample_size_monotone_in_p(N, Z, e, p1, p2):
    lo, hi = sorted((p1, p2))
    assert sample_size(SamplingParameters(N, Z, e, lo)) <= sample_size(SamplingParameters(N, Z, e, hi))


@given(pop, z, err, st.floats(0.0, 1.0))
def test_sample_size_symmetric_about_half(N, Z, e, p):
    a = closed_form(N, Z, e, p)
    b = closed_form(N, Z, e, 1 - p)
    assert a == pytest.approx(b, rel=1e-12, abs=1e-12)


@given(pop, z, st.floats(0.005, 0.2), st.floats(0.005, 0.2), het)
def test_sample_size_monotone_in_e(N, Z, e1, e2, p):
    lo, hi = sorted((e1, e2))
    assert sample_size(SamplingParameters(N, Z, hi, p)) <= sample_size(SamplingParameters(N, Z, lo, p))


@given(z, st.floats(0.01, 0.2), st.floats(0.01, 0.99))
def test_sample_size_infinite_population_limit(Z, e, p):
    limit = Z * Z * p * (1 - p) / (e * e)
    # At N = 1e9 the exact value sits below the limit by about limit^2 / N.
    assume(limit - math.floor(limit) > 2 * limit ** 2 / 10**9 + 1e-9)
    assert sample_size(SamplingParameters(10**9, Z, e, p)) == math.ceil(limit)


def test_metrics_examples():
    r = compute_metrics(596, 28, 40)
    assert (round(100 * r.precision, 1), round(100 * r.recall, 1), round(100 * r.f_measure, 1)) == (95.5, 93.7, 94.6)
    r = compute_metrics(10, 0, 0)
    assert r.precision == r.recall == r.f_measure == 1.0
    assert f_measure(0.964, 0.943) == pytest.approx(0.9534, abs=5e-5)


def test_metrics_undefined():
    r = compute_metrics(0, 0, 0)
    assert r.precision is None and r.recall is None and r.f_measure is None and not r.defined
    assert "undefined" in r.summary()
    r = compute_metrics(0, 5, 0)
    assert r.precision == 0.0 and r.recall is None and r.f_measure is None
    with pytest.raises(ValueError):
        compute_metrics(-1, 0, 0)


@given(st.integers(1, 10**6), st.integers(0, 10**6), st.integers(0, 10**6))
def test_metrics_reconstruct_tp(tp, fp, fn):
    r = compute_metrics(tp, fp, fn)
    assert round(r.precision * fp / (1 - r.precision)) == tp if fp else r.precision == 1.0
    assert round(r.recall * fn / (1 - r.recall)) == tp if fn else r.recall == 1.0


def row(pub_id, idx, identity_id, status="accepted", stage="", members=()):
    return MappingRow(pub_id, idx, "TOKEN X", identity_id, "", "", status,
                      stage if status == "eliminated" else "", members,
                      stage if status in ("accepted", "tie_broken") else "")


def test_compare_partition_and_detail():
    rows = [row("P", 0, "A", stage="wos_sds_filter"),
            row("P", 1, "B", "eliminated", "address_filter"), row("P", 1, "C", stage="max_correspondence_filter"),
            row("P", 2, "D", "unresolved"), row("P", 2, "E", "unresolved"),
            row("P", 3, "", "orphan"),
            row("P", 4, "M1", members=("M1", "M2"), stage="wos_sds_filter")]
    truth = [TruthPair("P", 0, "A"), TruthPair("P", 1, "B"), TruthPair("P", 2, "E"),
             TruthPair("P", 3, "Q"), TruthPair("P", 4, "M2")]
    c = compare_to_ground_truth(rows, truth)
    assert (c.tp, c.fp, c.fn) == (2, 1, 3)
    assert c.tp + c.fn == len(truth) and c.tp + c.fp == 3
    assert {(d.kind, d.author_index, d.stage) for d in c.detail} == {
        ("fp", 1, "max_correspondence_filter"), ("fn", 1, "address_filter"),
        ("fn", 2, "unresolved"), ("fn", 3, "never_generated")}


def test_compare_empty_mapping():
    truth = [TruthPair("P", i, f"I{i}") for i in range(10)]
    c = compare_to_ground_truth([], truth)
    assert (c.tp, c.fp, c.fn) == (0, 0, 10)


def test_compare_rejects_two_accepted_rows():
    with pytest.raises(ValueError):
        compare_to_ground_truth([row("P", 0, "A"), row("P", 0, "B")], [])


def test_compare_on_worked_example(worked):
    mapping, _ = run_pipeline(worked.publications, worked.registry, worked.resolver, worked.compat)
    truth = [t for t in worked.truth if t.pub_id == WORKED_PUB]
    only_prb = [r for r in mapping.pairs if r.author.pub_id == WORKED_PUB]
    sub = MappingSet(only_prb, [], [], [c for c in mapping.clusters if c.author.pub_id == WORKED_PUB])
    c = compare_to_ground_truth(sub, truth)
    assert (c.tp, c.fp, c.fn) == (4, 0, 0)
    c = compare_to_ground_truth(mapping, worked.truth)
    assert (c.tp, c.fp, c.fn) == (7, 0, 0)


def test_tag_fn_causes_with_ledger():
    detail = [ErrorDetail("fn", "P", 0, "A", "address_filter"),
              ErrorDetail("fn", "P", 1, "B", "max_correspondence_filter"),
              ErrorDetail("fn", "P", 2, "C", "shared_sds_filter"),
              ErrorDetail("fp", "P", 3, "D", "wos_sds_filter")]
    ledger = {"corruptions": [{"pub_id": "P", "author_index": 0, "kind": "wrong_affiliation"}],
              "homonyms": [{"class": "intra_address", "identity_id": "X", "twin_id": "B"}]}
    assert tag_fn_causes(detail, ledger) == {"author address error": 1, "homonym (intra_address)": 1,
                                             "unexplained (shared_sds_filter)": 1}
    assert tag_fn_causes(detail) == {"address filtering": 1, "max correspondence filtering": 1,
                                     "shared SDS filtering": 1}
    assert tag_fn_causes([]) == {}


def test_cause_labels_cover_every_corruption():
    assert set(CAUSE_LABELS) == set(CORRUPTIONS)

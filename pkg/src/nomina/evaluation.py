"""Precision/recall harness and sample sizing."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import DomainError
from .model import MappingSet
from .reports import MappingRow, TruthPair, mapping_rows

# Two-sided standard-normal quantiles for the usual confidence levels.
Z_BY_CONFIDENCE = {0.90: 1.645, 0.95: 1.96, 0.98: 2.33, 0.99: 2.576}


@dataclass(frozen=True)
class SamplingParameters:
    N: int
    Z: float
    e: float
    p: float

    def __post_init__(self) -> None:
        if self.N < 1:
            raise DomainError(f"population N must be >= 1, got {self.N}")
        if not self.Z > 0:
            raise DomainError(f"Z must be positive, got {self.Z}")
        if not 0 < self.e < 1:
            raise DomainError(f"sampling error e must be in (0, 1), got {self.e}")
        if not 0 <= self.p <= 1:
            raise DomainError(f"heterogeneity p must be in [0, 1], got {self.p}")


def sample_size(params: SamplingParameters) -> int:
    """Finite-population sample size for estimating a proportion:

        n = N Z^2 p (1-p) / ((N-1) e^2 + Z^2 p (1-p))

    rounded up.
    """
    N, Z, e, p = params.N, params.Z, params.e, params.p
    variance = Z * Z * p * (1 - p)
    if variance == 0:
        return 0
    n = N * variance / ((N - 1) * e * e + variance)
    return math.ceil(n)


def z_for_confidence(confidence: float) -> float:
    for level, z in Z_BY_CONFIDENCE.items():
        if math.isclose(confidence, level):
            return z
    raise DomainError(f"unsupported confidence level {confidence}; "
                      f"use one of {sorted(Z_BY_CONFIDENCE)} or give Z directly")


@dataclass
class EvaluationReport:
    tp: int
    fp: int
    fn: int
    precision: float | None
    recall: float | None
    f_measure: float | None
    fn_causes: dict[str, int] = field(default_factory=dict)

    @property
    def defined(self) -> bool:
        return self.precision is not None or self.recall is not None

    def as_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "precision": self.precision,
                "recall": self.recall, "f_measure": self.f_measure,
                "fn_causes": dict(sorted(self.fn_causes.items()))}

    def summary(self) -> str:
        def pct(x: float | None) -> str:
            return "undefined" if x is None else f"{100 * x:.1f}%"
        return (f"tp={self.tp} fp={self.fp} fn={self.fn} precision={pct(self.precision)} "
                f"recall={pct(self.recall)} f-measure={pct(self.f_measure)}")


def compute_metrics(tp: int, fp: int, fn: int) -> EvaluationReport:
    """Precision, recall and balanced F-measure.

    Metrics with a zero denominator are ``None`` rather than 0; with
    ``tp = fp = fn = 0`` all three are undefined.
    """
    for name, v in (("tp", tp), ("fp", fp), ("fn", fn)):
        if v < 0:
            raise ValueError(f"{name} must be non-negative, got {v}")
    precision = tp / (tp + fp) if tp + fp else None
    recall = tp / (tp + fn) if tp + fn else None
    f_measure = None
    if precision is not None and recall is not None and precision + recall > 0:
        f_measure = 2 * precision * recall / (precision + recall)
    return EvaluationReport(tp, fp, fn, precision, recall, f_measure)


def f_measure(precision: float, recall: float) -> float:
    return 2 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class ErrorDetail:
    kind: str  # "fp" or "fn"
    pub_id: str
    author_index: int
    identity_id: str
    stage: str


@dataclass
class Comparison:
    tp: int
    fp: int
    fn: int
    detail: list[ErrorDetail]

    def report(self, fn_causes: Mapping[str, int] | None = None) -> EvaluationReport:
        rep = compute_metrics(self.tp, self.fp, self.fn)
        rep.fn_causes = dict(fn_causes or {})
        return rep


def _truth_map(truth: Mapping[tuple[str, int], str] | Iterable[TruthPair]) -> dict[tuple[str, int], str]:
    if isinstance(truth, Mapping):
        return dict(truth)
    out: dict[tuple[str, int], str] = {}
    for t in truth:
        if t.key in out:
            raise ValueError(f"author {t.key} has more than one truth identity")
        out[t.key] = t.identity_id
    return out


def compare_to_ground_truth(mapping: MappingSet | Iterable[MappingRow],
                            truth: Mapping[tuple[str, int], str] | Iterable[TruthPair]) -> Comparison:
    """Score accepted pairs against known (author instance -> identity) truth.

    An accepted amalgamated identity counts as correct when the true id is
    any of its members. Each false negative is labelled with the stage that
    eliminated the true pair, ``unresolved``, or ``never_generated``; each
    false positive with the stage that accepted it.
    """
    rows = mapping_rows(mapping) if isinstance(mapping, MappingSet) else list(mapping)
    truth_by_key = _truth_map(truth)

    accepted: dict[tuple[str, int], MappingRow] = {}
    generated: dict[tuple[str, int], list[MappingRow]] = {}
    for r in rows:
        if r.status == "orphan":
            continue
        generated.setdefault(r.key, []).append(r)
        if r.is_accepted:
            if r.key in accepted:
                raise ValueError(f"author {r.key} has more than one accepted identity")
            accepted[r.key] = r

    tp = fp = 0
    detail: list[ErrorDetail] = []
    for key in sorted(accepted):
        row = accepted[key]
        true_id = truth_by_key.get(key)
        if true_id is not None and row.denotes(true_id):
            tp += 1
        else:
            fp += 1
            detail.append(ErrorDetail("fp", key[0], key[1], row.identity_id,
                                      row.accepted_stage or "accepted"))
    fn = 0
    for key in sorted(truth_by_key):
        true_id = truth_by_key[key]
        row = accepted.get(key)
        if row is not None and row.denotes(true_id):
            continue
        fn += 1
        stage = "never_generated"
        for r in generated.get(key, ()):
            if r.denotes(true_id):
                stage = r.eliminating_stage if r.status == "eliminated" else r.status
                break
        detail.append(ErrorDetail("fn", key[0], key[1], true_id, stage))
    return Comparison(tp, fp, fn, detail)


# Causes of false negatives, by the corruption kind that plants them.
CAUSE_LABELS = {
    "wrong_affiliation": "author address error",
    "cross_category": "WoS-SDS filtering",
    "vocabulary_gap": "address recognition error",
    "source_address": "source address listing error",
    "source_name": "source author name listing error",
    "name_variant": "name matching error",
}

# Fallback when no ledger is available: the stage that lost the true pair.
STAGE_CAUSES = {
    "address_filter": "address filtering",
    "wos_sds_filter": "WoS-SDS filtering",
    "shared_sds_filter": "shared SDS filtering",
    "max_correspondence_filter": "max correspondence filtering",
    "unresolved": "unresolved cluster",
    "never_generated": "name matching error",
}

UNEXPLAINED = "unexplained"


def tag_fn_causes(detail: Iterable[ErrorDetail], ledger: Mapping | None = None) -> dict[str, int]:
    """Count false negatives per cause.

    With a synthetic-corpus ledger the cause is what was planted: the
    corruption recorded for that author instance, else the homonym class of
    the true identity. Without one, the eliminating stage is reported.
    """
    corruptions: dict[tuple[str, int], str] = {}
    homonyms: dict[str, str] = {}
    if ledger is not None:
        for c in ledger.get("corruptions", ()):
            corruptions[(c["pub_id"], int(c["author_index"]))] = c["kind"]
        for h in ledger.get("homonyms", ()):
            for ident in (h.get("identity_id"), h.get("twin_id")):
                if ident:
                    homonyms.setdefault(ident, h["class"])
    counts: Counter[str] = Counter()
    for d in detail:
        if d.kind != "fn":
            continue
        if ledger is None:
            counts[STAGE_CAUSES.get(d.stage, d.stage)] += 1
        elif (d.pub_id, d.author_index) in corruptions:
            kind = corruptions[(d.pub_id, d.author_index)]
            counts[CAUSE_LABELS.get(kind, kind)] += 1
        elif d.identity_id in homonyms:
            counts[f"homonym ({homonyms[d.identity_id]})"] += 1
        else:
            counts[f"{UNEXPLAINED} ({d.stage})"] += 1
    return dict(sorted(counts.items()))

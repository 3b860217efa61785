"""Synthetic corpora with planted ground truth.

The generator builds its own population of people (registry researchers and
outsiders), writes publications about them, and records in a ledger every
planted fact: the true identity behind each author token, each homonym by
class, and each corruption meant to defeat the engine. Truth comes from
the person model alone, never from the matching or filtering code.

Surname words are unique per person, so the only name collisions are the
homonyms the ledger plants. Corruption rates are per registry author
instance. At most one corruption is applied per publication, and only where
it is guaranteed to lose the true pair.
"""

from __future__ import annotations

import json
import os
import random
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigError
from .ingest import (AddressRule, CategoryCompatibility, Registry, build_registry,
                     write_address_vocabulary, write_category_map, write_publications,
                     write_registry)
from .model import IdentityRecord, Publication
from .reports import TruthPair, write_truth_csv

CONSONANTS = "BCDFGLMNPRSTVZ"
VOWELS = "AEIOU"

FIRST_NAMES = [
    "Alberto", "Alessandra", "Andrea", "Anna", "Barbara", "Bruno", "Carla", "Carlo", "Chiara",
    "Claudio", "Daniela", "Davide", "Elena", "Enrico", "Fabio", "Federica", "Federico", "Franco",
    "Giorgio", "Giovanni", "Giulia", "Ilaria", "Irene", "Laura", "Leonardo", "Lorenzo", "Luca",
    "Lucia", "Marco", "Maria", "Matteo", "Nadia", "Nicola", "Olga", "Paola", "Paolo", "Roberto",
    "Rosa", "Sergio", "Silvia", "Simone", "Stefano", "Teresa", "Tommaso", "Ugo", "Valeria",
    "Vittorio", "Zeno",
]

CITIES = [
    "Bologna", "Torino", "Modena", "Padova", "Pisa", "Firenze", "Genova", "Napoli", "Bari",
    "Palermo", "Catania", "Cagliari", "Perugia", "Parma", "Pavia", "Siena", "Trieste", "Verona",
    "Ferrara", "Salerno",
]

# (area, SDS codes, subject categories); categories are compatible with every
# SDS of their own area and nothing else.
AREAS = [
    ("physics", ["FIS/01", "FIS/02", "FIS/03", "FIS/05"],
     ["Physics, condensed matter", "Physics, applied", "Optics"]),
    ("chemistry", ["CHIM/01", "CHIM/02", "CHIM/03", "CHIM/06"],
     ["Chemistry, physical", "Chemistry, organic", "Electrochemistry"]),
    ("medicine", ["MED/04", "MED/09", "MED/13", "MED/38"],
     ["Medicine, general & internal", "Endocrinology & metabolism", "Pediatrics"]),
    ("engineering", ["ING-INF/01", "ING-INF/05", "ING-INF/06", "ING-IND/31"],
     ["Engineering, electrical & electronic", "Computer science, theory & methods",
      "Engineering, biomedical"]),
    ("mathematics", ["MAT/02", "MAT/03", "MAT/05", "MAT/08"],
     ["Mathematics", "Mathematics, applied", "Statistics & probability"]),
    ("biology", ["BIO/09", "BIO/10", "BIO/11", "BIO/18"],
     ["Biochemistry & molecular biology", "Genetics & heredity", "Cell biology"]),
    ("earth", ["GEO/02", "GEO/04", "GEO/08", "GEO/10"],
     ["Geosciences, multidisciplinary", "Geochemistry & geophysics", "Mineralogy"]),
    ("economics", ["SECS-P/01", "SECS-P/06", "SECS-P/12", "SECS-S/01"],
     ["Economics", "Business, finance", "History of social sciences"]),
]

DEPARTMENTS = ["Dipartimento Fis", "Dipartimento Chim", "Dipartimento Med Interna",
               "Dipartimento Ingn", "Dipartimento Matemat", "Dipartimento Biol",
               "Dipartimento Sci Terra", "Dipartimento Econ"]

HOMONYM_CLASSES = ("external", "inter_address", "intra_address", "perfect")
CORRUPTIONS = ("wrong_affiliation", "cross_category", "vocabulary_gap", "source_address",
               "source_name", "name_variant")
CNR_INSTITUTION = "CNR"


@dataclass(frozen=True)
class SyntheticConfig:
    rng_seed: int
    n_identities: int = 300
    n_publications: int = 500
    external_homonym_rate: float = 0.0
    inter_address_homonym_rate: float = 0.0
    intra_address_homonym_rate: float = 0.0
    perfect_homonym_rate: float = 0.0
    compound_surname_rate: float = 0.0
    multi_first_name_rate: float = 0.0
    wrong_affiliation_rate: float = 0.0
    cross_category_publish_rate: float = 0.0
    vocabulary_gap_rate: float = 0.0
    source_address_error_rate: float = 0.0
    source_name_error_rate: float = 0.0
    name_variant_error_rate: float = 0.0
    # Share of author slots filled by people outside the registry.
    external_author_rate: float = 0.2
    n_universities: int = 12
    n_areas: int = 6
    max_authors: int = 6
    year: int = 2005

    def __post_init__(self) -> None:
        for name, value in asdict(self).items():
            if name.endswith("_rate") and not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {value}")
        if self.n_identities < 1 or self.n_publications < 0:
            raise ConfigError("n_identities must be >= 1 and n_publications >= 0")
        if not 2 <= self.n_universities <= len(CITIES):
            raise ConfigError(f"n_universities must be in [2, {len(CITIES)}]")
        if not 2 <= self.n_areas <= len(AREAS):
            raise ConfigError(f"n_areas must be in [2, {len(AREAS)}]")
        if self.max_authors < 1:
            raise ConfigError("max_authors must be >= 1")
        if self.corruption_rate_total > 1.0:
            raise ConfigError("corruption rates sum to more than 1")

    @property
    def corruption_rates(self) -> dict[str, float]:
        return {
            "wrong_affiliation": self.wrong_affiliation_rate,
            "cross_category": self.cross_category_publish_rate,
            "vocabulary_gap": self.vocabulary_gap_rate,
            "source_address": self.source_address_error_rate,
            "source_name": self.source_name_error_rate,
            "name_variant": self.name_variant_error_rate,
        }

    @property
    def corruption_rate_total(self) -> float:
        return sum(self.corruption_rates.values())


@dataclass
class _Person:
    key: str
    surname: tuple[str, ...]
    first_names: tuple[str, ...]
    area: int
    sds: str | None  # None for people outside the registry
    institution: str  # university id, or an outside organization label
    registry: bool
    identity_id: str | None = None


@dataclass
class SyntheticBundle:
    config: SyntheticConfig
    publications: list[Publication]
    identities: list[IdentityRecord]
    vocabulary: list[AddressRule]
    compat: CategoryCompatibility
    truth: list[TruthPair]
    ledger: dict[str, Any] = field(default_factory=dict)

    def registry(self) -> Registry:
        return build_registry(self.identities)

    def write(self, directory: str | os.PathLike[str]) -> dict[str, Path]:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "publications": out / "publications.csv",
            "registry": out / "registry.csv",
            "vocabulary": out / "vocabulary.csv",
            "category_map": out / "category_map.csv",
            "truth": out / "truth.csv",
            "ledger": out / "ledger.json",
        }
        write_publications(self.publications, paths["publications"])
        write_registry(self.identities, paths["registry"])
        write_address_vocabulary(self.vocabulary, paths["vocabulary"])
        write_category_map(self.compat, paths["category_map"])
        write_truth_csv(self.truth, paths["truth"])
        paths["ledger"].write_text(json.dumps(self.ledger, indent=2, sort_keys=True) + "\n",
                                   encoding="utf-8")
        return paths


def _syllables_needed(n_people: int) -> int:
    """Syllables per surname word so that unique words stay cheap to draw.

    Each person may need two words (compound surnames), and the pool is kept
    at least three times larger than that to bound rejection sampling.
    """
    syl = len(CONSONANTS) * len(VOWELS)
    k = 3
    while syl ** k < 6 * n_people:
        k += 1
    return k


class _Generator:
    def __init__(self, cfg: SyntheticConfig):
        self.cfg = cfg
        self.rng = random.Random(cfg.rng_seed)
        self.words: set[str] = set()
        self.areas = AREAS[:cfg.n_areas]
        cities = CITIES[:cfg.n_universities]
        self.universities = [(f"UNI{idx + 1:02d}", city) for idx, city in enumerate(cities)]
        self.uni_city = dict(self.universities)
        self.persons: list[_Person] = []
        self.homonyms: list[dict[str, str]] = []

    # -- names ---------------------------------------------------------------

    def _new_word(self) -> str:
        rng = self.rng
        while True:
            word = "".join(rng.choice(CONSONANTS) + rng.choice(VOWELS) for _ in range(self.syllables))
            if word not in self.words:
                self.words.add(word)
                return word

    def _new_surname(self) -> tuple[str, ...]:
        if self.rng.random() < self.cfg.compound_surname_rate:
            return (self._new_word(), self._new_word())
        return (self._new_word(),)

    def _new_first_names(self) -> tuple[str, ...]:
        first = self.rng.choice(FIRST_NAMES)
        if self.rng.random() < self.cfg.multi_first_name_rate:
            second = self.rng.choice([n for n in FIRST_NAMES if n[0] != first[0]])
            return (first, second)
        return (first,)

    def _same_initial_name(self, name: str) -> str:
        return self.rng.choice([n for n in FIRST_NAMES if n[0] == name[0]])

    # -- population ----------------------------------------------------------

    def build_population(self) -> None:
        cfg, rng = self.cfg, self.rng
        planted = {c: round(getattr(cfg, f"{c}_homonym_rate") * cfg.n_identities)
                   for c in ("inter_address", "intra_address", "perfect")}
        n_external_twins = round(cfg.external_homonym_rate * cfg.n_identities)
        n_base = cfg.n_identities - sum(planted.values())
        if n_base < 1 or sum(planted.values()) + n_external_twins > n_base:
            raise ConfigError("homonym rates too high: every planted homonym needs its own "
                              "base identity")
        n_externals = max(1, cfg.n_identities // 2)
        self.syllables = _syllables_needed(n_base + n_externals)

        base: list[_Person] = []
        for i in range(n_base):
            area = rng.randrange(len(self.areas))
            uni = rng.choice(self.universities)[0]
            base.append(_Person(f"P{i:05d}", self._new_surname(), self._new_first_names(), area,
                                rng.choice(self.areas[area][1]), uni, True))

        # Each planted twin gets a distinct base person.
        order = list(range(n_base))
        rng.shuffle(order)
        cursor = 0
        twins: list[_Person] = []
        for cls in ("inter_address", "intra_address", "perfect"):
            for _ in range(planted[cls]):
                b = base[order[cursor]]
                cursor += 1
                twin = self._twin(b, cls, len(twins))
                twins.append(twin)
                self.homonyms.append({"class": cls, "base": b.key, "twin": twin.key})
        ext_twins: list[_Person] = []
        for _ in range(n_external_twins):
            b = base[order[cursor]]
            cursor += 1
            twin = _Person(f"E{len(ext_twins):05d}T", b.surname,
                           (self._same_initial_name(b.first_names[0]),),
                           rng.randrange(len(self.areas)), None, self._outside_org(), False)
            ext_twins.append(twin)
            self.homonyms.append({"class": "external", "base": b.key, "twin": twin.key})

        registry = base + twins
        registry.sort(key=lambda p: p.key)
        ids = list(range(1, len(registry) + 1))
        rng.shuffle(ids)
        for p, n in zip(registry, ids):
            p.identity_id = f"ID{n:06d}"

        externals = [
            _Person(f"E{i:05d}", self._new_surname(), self._new_first_names(),
                    rng.randrange(len(self.areas)), None, self._outside_org(), False)
            for i in range(n_externals)]
        self.registry_people = registry
        self.external_people = externals + ext_twins
        self.persons = registry + self.external_people
        self.by_key = {p.key: p for p in self.persons}
        self.by_area: list[list[_Person]] = [[] for _ in self.areas]
        for p in registry:
            self.by_area[p.area].append(p)

    def _twin(self, b: _Person, cls: str, n: int) -> _Person:
        rng = self.rng
        if cls == "perfect":
            return _Person(f"T{n:05d}", b.surname, b.first_names, b.area, b.sds, b.institution, True)
        first = (self._same_initial_name(b.first_names[0]),)
        area = rng.randrange(len(self.areas))
        if cls == "inter_address":
            uni = rng.choice([u for u, _ in self.universities if u != b.institution])
            return _Person(f"T{n:05d}", b.surname, first, area, rng.choice(self.areas[area][1]), uni, True)
        # intra_address: same university, different SDS
        choices = [s for a in self.areas for s in a[1] if s != b.sds]
        sds = rng.choice(choices)
        area = next(i for i, a in enumerate(self.areas) if sds in a[1])
        return _Person(f"T{n:05d}", b.surname, first, area, sds, b.institution, True)

    def _outside_org(self) -> str:
        rng = self.rng
        city = rng.choice(CITIES)
        if rng.random() < 0.5:
            return f"CNR, Ist {rng.choice(['Struttura Mat', 'Fis Appl', 'Biol Cellulare', 'Sci Marine'])}, {city}, Italy"
        return f"Osped {city}, Div {rng.choice(['Cardiol', 'Neurol', 'Chirurg'])}, {city}, Italy"

    # -- addresses & tokens -------------------------------------------------

    def _uni_address(self, uni: str) -> str:
        city = self.uni_city[uni]
        return f"Univ {city}, {self.rng.choice(DEPARTMENTS)}, {city}, Italy"

    def _unrecognized_address(self, uni: str) -> str:
        city = self.uni_city[uni]
        return f"Ateneo {city}, {self.rng.choice(DEPARTMENTS)}, {city}, Italy"

    def _hospital_address(self) -> str:
        city = self.rng.choice(CITIES)
        return f"Osped {city}, Div Clin, {city}, Italy"

    @staticmethod
    def _initials_text(initials: list[str]) -> str:
        # Blocks longer than two letters would read as a surname word.
        return "".join(initials) if len(initials) <= 2 else " ".join(initials)

    def _token(self, p: _Person) -> tuple[str, str]:
        """A "SURNAME INITIALS" token for ``p`` and the name form used."""
        rng = self.rng
        initials = [n[0].upper() for n in p.first_names]
        if len(initials) > 1:
            variant = rng.choice(["all", "reversed", "first", "last"])
            initials = {"all": initials, "reversed": initials[::-1],
                        "first": initials[:1], "last": initials[-1:]}[variant]
        if len(p.surname) == 1:
            return f"{p.surname[0]} {self._initials_text(initials)}", "single"
        s1, s2 = p.surname
        form = rng.choice(["full", "word1", "word2", "word1+initials", "word2+initials"])
        if form == "full":
            surname, inits = f"{s1} {s2}", initials
        elif form == "word1":
            surname, inits = s1, initials
        elif form == "word2":
            surname, inits = s2, initials
        elif form == "word1+initials":
            surname, inits = s1, [s2[0]] + initials
        else:
            surname, inits = s2, initials + [s1[0]]
        return f"{surname} {self._initials_text(inits)}", form

    def _misspelled(self, word: str) -> str:
        rng = self.rng
        while True:
            i = rng.randrange(1, len(word), 2)  # vowel positions
            new = word[:i] + rng.choice([v for v in VOWELS if v != word[i]]) + word[i + 1:]
            if new not in self.words:
                return new

    def _foreign_initial(self, p: _Person) -> str:
        taken = {n[0].upper() for q in self.persons if set(q.surname) & set(p.surname)
                 for n in q.first_names}
        taken |= {w[0] for w in p.surname}
        letters = [c for c in "ABCDEFGHILMNOPRSTUVZ" if c not in taken]
        return self.rng.choice(letters)

    # -- publications -------------------------------------------------------

    def _pick_authors(self, lead: _Person) -> list[_Person]:
        cfg, rng = self.cfg, self.rng
        n = rng.randint(1, cfg.max_authors)
        chosen = [lead]
        used_words = set(lead.surname)
        attempts = 0
        while len(chosen) < n and attempts < 20 * n:
            attempts += 1
            if rng.random() < cfg.external_author_rate:
                cand = rng.choice(self.external_people)
            else:
                pool = self.by_area[lead.area]
                if rng.random() < 0.3:
                    same = [p for p in pool if p.institution == lead.institution]
                    pool = same or pool
                cand = rng.choice(pool)
            if used_words & set(cand.surname):
                continue
            chosen.append(cand)
            used_words |= set(cand.surname)
        rng.shuffle(chosen)
        return chosen

    def _cross_area_substitute(self, authors: list[_Person], area: int) -> _Person | None:
        used = {w for p in authors for w in p.surname}
        pool = [p for p in self.registry_people if p.area != area and not used & set(p.surname)]
        return self.rng.choice(pool) if pool else None

    def build_publications(self) -> tuple[list[Publication], list[TruthPair], list[dict], Counter]:
        cfg, rng = self.cfg, self.rng
        pubs: list[Publication] = []
        truth: list[TruthPair] = []
        corruptions: list[dict] = []
        forms: Counter[str] = Counter()
        kinds = [k for k in CORRUPTIONS if cfg.corruption_rates[k] > 0]
        for i in range(cfg.n_publications):
            pub_id = f"SYN{i + 1:06d}"
            lead = rng.choice(self.registry_people)
            area = lead.area
            categories = rng.sample(self.areas[area][2], rng.randint(1, 2))
            authors = self._pick_authors(lead)
            addresses: list[str | None] = [
                self._uni_address(p.institution) if p.registry else p.institution for p in authors]
            tokens: list[str] = []
            for p in authors:
                token, form = self._token(p)
                tokens.append(token)
                forms[form] += 1

            corruption = self._corrupt(pub_id, authors, addresses, tokens, area, kinds)
            if corruption is not None:
                corruptions.append(corruption)

            unique_addresses = list(dict.fromkeys(a for a in addresses if a is not None))
            for idx, p in enumerate(authors):
                if p.registry:
                    truth.append(TruthPair(pub_id, idx, p.identity_id))
            pubs.append(Publication(
                pub_id=pub_id, year=cfg.year, doc_type=rng.choice(["article", "article", "review"]),
                author_tokens=tuple(tokens), addresses=tuple(unique_addresses),
                subject_categories=tuple(categories),
                passthrough={"title": f"Synthetic study {i + 1}"}))
        return pubs, truth, corruptions, forms

    def _corrupt(self, pub_id: str, authors: list[_Person], addresses: list[str | None],
                 tokens: list[str], area: int, kinds: list[str]) -> dict | None:
        """Apply at most one corruption to this publication, in place."""
        if not kinds:
            return None
        rates = self.cfg.corruption_rates
        for idx, p in enumerate(authors):
            if not p.registry:
                continue
            u = self.rng.random()
            acc = 0.0
            kind = None
            for k in kinds:
                acc += rates[k]
                if u < acc:
                    kind = k
                    break
            if kind is None:
                continue
            if self._apply(kind, idx, authors, addresses, tokens, area):
                p = authors[idx]
                return {"pub_id": pub_id, "author_index": idx, "identity_id": p.identity_id,
                        "kind": kind}
        return None

    def _apply(self, kind: str, idx: int, authors: list[_Person], addresses: list[str | None],
               tokens: list[str], area: int) -> bool:
        p = authors[idx]
        others = [q for j, q in enumerate(authors) if j != idx]
        uni_unique = not any(q.registry and q.institution == p.institution for q in others)
        # Another address that resolves, so the address filter is not vacuous.
        other_resolvable = any(q.registry or q.institution.startswith("CNR") for q in others)

        if kind == "wrong_affiliation":
            if not uni_unique:
                return False
            if other_resolvable:
                addresses[idx] = self._hospital_address()
            else:
                wrong = self.rng.choice([u for u, _ in self.universities if u != p.institution])
                addresses[idx] = self._uni_address(wrong)
            return True
        if kind == "vocabulary_gap":
            if not (uni_unique and other_resolvable):
                return False
            addresses[idx] = self._unrecognized_address(p.institution)
            return True
        if kind == "source_address":
            if not (uni_unique and other_resolvable):
                return False
            addresses[idx] = None
            return True
        if kind == "cross_category":
            sub = self._cross_area_substitute(others, area)
            if sub is None:
                return False
            authors[idx] = sub
            addresses[idx] = self._uni_address(sub.institution)
            tokens[idx] = self._token(sub)[0]
            return True
        if kind == "source_name":
            words = list(p.surname)
            words[0] = self._misspelled(words[0])
            initials = [n[0].upper() for n in p.first_names]
            tokens[idx] = f"{' '.join(words)} {self._initials_text(initials)}"
            return True
        if kind == "name_variant":
            tokens[idx] = f"{' '.join(p.surname)} {self._foreign_initial(p)}"
            return True
        raise AssertionError(kind)

    # -- static tables ------------------------------------------------------

    def vocabulary(self) -> list[AddressRule]:
        rules = [AddressRule(f"V{i + 1:03d}", f"UNIV {city.upper()}", uni, 10)
                 for i, (uni, city) in enumerate(self.universities)]
        rules.append(AddressRule(f"V{len(rules) + 1:03d}", "CNR", CNR_INSTITUTION, 5))
        return rules

    def compat(self) -> CategoryCompatibility:
        return CategoryCompatibility(
            (cat, sds) for _, sds_codes, cats in self.areas for cat in cats for sds in sds_codes)


def generate_synthetic_corpus(cfg: SyntheticConfig) -> SyntheticBundle:
    """Build a deterministic corpus, registry, vocabulary, category map and
    truth, plus a ledger of everything planted."""
    gen = _Generator(cfg)
    gen.build_population()
    pubs, truth, corruptions, forms = gen.build_publications()

    identities = [
        IdentityRecord(identity_id=p.identity_id, surname=" ".join(p.surname),
                       first_names=p.first_names, sds_code=p.sds, university_id=p.institution,
                       snapshot_year=cfg.year - 1, rank=gen.rng.choice(["assistant", "associate", "full"]))
        for p in sorted(gen.registry_people, key=lambda p: p.identity_id)]

    homonyms = []
    for h in gen.homonyms:
        base, twin = gen.by_key[h["base"]], gen.by_key[h["twin"]]
        homonyms.append({"class": h["class"], "identity_id": base.identity_id,
                         "twin_id": twin.identity_id, "twin_key": twin.key})
    by_class = Counter(h["class"] for h in homonyms)
    ledger = {
        "seed": cfg.rng_seed,
        "config": asdict(cfg),
        "planted_pairs": len(truth),
        "homonyms": homonyms,
        "homonym_counts": {c: by_class.get(c, 0) for c in HOMONYM_CLASSES},
        "perfect_homonym_groups": by_class.get("perfect", 0),
        "perfect_homonym_incidence": by_class.get("perfect", 0) / cfg.n_identities,
        "corruptions": corruptions,
        "corruption_counts": dict(sorted(Counter(c["kind"] for c in corruptions).items())),
        "name_forms": dict(sorted(forms.items())),
    }
    return SyntheticBundle(cfg, pubs, identities, gen.vocabulary(), gen.compat(), truth, ledger)

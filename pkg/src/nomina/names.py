"""Normalization of "SURNAME INITIALS" author tokens and registry names."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import EmptyToken, NoInitials
from .model import IdentityRecord, NormalizedName
from .text import name_words


@dataclass(frozen=True)
class NormalizationConfig:
    # A final word this short (or shorter) is an initials block ("GM").
    initials_block_max: int = 2


DEFAULT_NORMALIZATION = NormalizationConfig()


def _initials_of(word: str, block_max: int) -> list[str]:
    # After an explicit comma: "GM" is a block of initials, "GIOVANNI" a given name.
    return list(word) if len(word) <= block_max else [word[0]]


def normalize_token(raw: str, rules: NormalizationConfig = DEFAULT_NORMALIZATION) -> NormalizedName:
    """Parse a bibliographic author token such as ``"ROSSI GM"``.

    The surname is everything before the trailing initials: a final word of
    at most ``rules.initials_block_max`` letters, plus any single letters
    immediately before it. A comma, when present, separates surname from
    given names explicitly (``"DE ROSA, G"``).

    Raises:
        EmptyToken: nothing usable remains after folding.
        NoInitials: no initials component can be isolated.
    """
    if not raw or not raw.strip():
        raise EmptyToken(f"empty author token {raw!r}")
    block_max = rules.initials_block_max

    if "," in raw:
        surname_part, given_part = raw.split(",", 1)
        surname = name_words(surname_part)
        if not surname:
            raise EmptyToken(f"no surname in {raw!r}")
        initials = [c for w in name_words(given_part) for c in _initials_of(w, block_max)]
        if not initials:
            raise NoInitials(f"no initials in {raw!r}")
        return NormalizedName(tuple(surname), tuple(initials))

    words = name_words(raw)
    if not words:
        raise EmptyToken(f"nothing left of {raw!r} after normalization")
    if len(words) < 2 or len(words[-1]) > block_max:
        raise NoInitials(f"no initials block in {raw!r}")
    i = len(words) - 1
    while i > 1 and len(words[i - 1]) == 1:
        i -= 1
    initials = [c for w in words[i:] for c in w]
    return NormalizedName(tuple(words[:i]), tuple(initials))


def identity_name(identity: IdentityRecord) -> NormalizedName:
    """The registry-side name reduced to surname words plus one initial per given name."""
    return NormalizedName(identity.surname_tokens, identity.given_initials)

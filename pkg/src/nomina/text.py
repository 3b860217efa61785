"""Low-level string folding shared by name and address normalization."""

from __future__ import annotations

import re
import unicodedata

# Letters NFKD leaves intact but that have an obvious ASCII base.
_SPECIAL = str.maketrans({
    "Ø": "O", "ø": "o", "Ł": "L", "ł": "l", "Đ": "D", "đ": "d",
    "Æ": "AE", "æ": "ae", "Œ": "OE", "œ": "oe", "ß": "ss", "Þ": "TH", "þ": "th",
})
_APOSTROPHES = re.compile(r"['‘’ʼ`´]")
_NON_ALNUM = re.compile(r"[^A-Z0-9]+")
_NON_ALPHA = re.compile(r"[^A-Z]+")


def fold(text: str) -> str:
    """Uppercase ASCII fold: diacritics stripped, apostrophes deleted."""
    text = _APOSTROPHES.sub("", text.translate(_SPECIAL))
    text = unicodedata.normalize("NFKD", text)
    text = "".join(c for c in text if not unicodedata.combining(c))
    return text.upper()


def name_words(text: str) -> list[str]:
    """Split a name fragment into folded alphabetic words.

    Hyphens, dots and any other non-letter act as separators.
    """
    return [w for w in _NON_ALPHA.split(fold(text)) if w]


def address_words(text: str) -> list[str]:
    return [w for w in _NON_ALNUM.split(fold(text)) if w]


def category_key(label: str) -> str:
    return " ".join(label.casefold().split())

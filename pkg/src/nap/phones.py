"""ARPAbet phone inventory tables.

The 39-phone CMUdict inventory partitioned into the sets the scoring
pipeline needs: vowels, nasal consonants, voiced oral consonants and
unvoiced consonants. Stress digits (0/1/2) are stripped before lookup.
"""

VOWELS = frozenset(
    "AA AE AH AO AW AY EH ER EY IH IY OW OY UH UW".split()
)

NASALS = frozenset("M N NG".split())

VOICED_ORAL_CONSONANTS = frozenset(
    "B D DH G JH L R V W Y Z ZH".split()
)

UNVOICED_CONSONANTS = frozenset(
    "CH F HH K P S SH T TH".split()
)

VOICED = VOWELS | NASALS | VOICED_ORAL_CONSONANTS

# Voiced, non-nasal phones whose nasalization scores are exported as features.
NASALIZATION_EXPORT_PHONES = (
    "AA", "AE", "AH", "AO", "AW", "AY", "B", "D", "DH",
    "EH", "ER", "EY", "G", "IY", "JH", "V", "Z",
)

_STRESS_DIGITS = "012"


def strip_stress(label: str) -> str:
    """Remove a trailing ARPAbet stress digit, e.g. ``IY1`` -> ``IY``."""
    if label and label[-1] in _STRESS_DIGITS:
        return label[:-1]
    return label


def is_vowel(label: str) -> bool:
    return label in VOWELS


def is_nasal(label: str) -> bool:
    return label in NASALS


def is_voiced(label: str) -> bool:
    return label in VOICED


def is_unvoiced(label: str) -> bool:
    return label in UNVOICED_CONSONANTS

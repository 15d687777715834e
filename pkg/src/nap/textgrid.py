"""Praat TextGrid parsing and phone-level alignment utilities.

Handles both long and short TextGrid variants, UTF-8 or UTF-16 with BOM
detection. Empty, "sil" and "sp" intervals are dropped from the phones
tier and ARPAbet stress digits are stripped.
"""

import enum
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import phones as phone_tables
from .errors import (
    EmptySegmentError,
    InvalidIntervalError,
    MalformedTextGridError,
    MissingTierError,
    OverlappingIntervalsError,
)
from .frontend import FrameMatrix

_DROPPED_LABELS = {"", "sil", "sp", "spn", "<unk>"}


class NasalClass(enum.Enum):
    NAS = "NAS"
    ORL = "ORL"
    UNVOICED = "UNVOICED"
    EXCLUDED = "EXCLUDED"


@dataclass(frozen=True)
class PhoneSegment:
    """A time-aligned phone; label is stress-stripped ARPAbet."""

    label: str
    t_start: float
    t_end: float
    word_index: int = -1
    nasal_class: NasalClass = NasalClass.EXCLUDED

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise InvalidIntervalError(
                f"phone {self.label}: start {self.t_start} !< end {self.t_end}"
            )

    @property
    def center(self) -> float:
        return 0.5 * (self.t_start + self.t_end)

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


@dataclass(frozen=True)
class Word:
    text: str
    t_start: float
    t_end: float


@dataclass(frozen=True)
class AlignedUtterance:
    phones: tuple
    words: tuple
    audio_duration: float


@dataclass
class _Tier:
    name: str
    intervals: list = field(default_factory=list)  # (xmin, xmax, text)


def _decode(raw: bytes) -> str:
    if raw.startswith(b"\xff\xfe") or raw.startswith(b"\xfe\xff"):
        return raw.decode("utf-16")
    if raw.startswith(b"\xef\xbb\xbf"):
        return raw.decode("utf-8-sig")
    return raw.decode("utf-8")


_QUOTED = re.compile(r'"((?:[^"]|"")*)"')


def _unquote(text: str) -> str:
    return text.replace('""', '"')


class _LineReader:
    def __init__(self, lines):
        self.lines = lines
        self.pos = 0

    @property
    def line_no(self) -> int:
        return self.pos  # 1-based number of the last line consumed

    def next_data_line(self) -> str:
        while self.pos < len(self.lines):
            line = self.lines[self.pos]
            self.pos += 1
            if line.strip():
                return line
        raise MalformedTextGridError(f"unexpected end of file at line {self.pos}")

    def fail(self, message: str):
        raise MalformedTextGridError(f"line {self.pos}: {message}")


def _parse_number(reader: _LineReader, line: str) -> float:
    token = line.split("=")[-1].strip() if "=" in line else line.strip()
    try:
        return float(token)
    except ValueError:
        reader.fail(f"expected a number, got {token!r}")


def _parse_string(reader: _LineReader, line: str) -> str:
    match = _QUOTED.search(line)
    if match is None:
        reader.fail(f"expected a quoted string, got {line.strip()!r}")
    return _unquote(match.group(1))


def _parse_tiers(text: str) -> tuple[list[_Tier], float]:
    lines = text.splitlines()
    reader = _LineReader(lines)
    header = reader.next_data_line()
    if "ooTextFile" not in header:
        reader.fail("missing ooTextFile header")
    object_class = reader.next_data_line()
    if "TextGrid" not in object_class:
        reader.fail("not a TextGrid object")

    body = [line for line in lines[reader.pos:] if line.strip()]
    is_long = any("item" in line and "[" in line for line in body)

    _parse_number(reader, reader.next_data_line())            # global xmin
    xmax = _parse_number(reader, reader.next_data_line())     # global xmax
    exists_line = reader.next_data_line()                     # tiers? / <exists>
    if "exists" not in exists_line:
        reader.fail("expected tier existence flag")
    n_tiers = int(_parse_number(reader, reader.next_data_line()))

    tiers = []
    if is_long:
        reader.next_data_line()  # item []:
    for _ in range(n_tiers):
        if is_long:
            reader.next_data_line()  # item [k]:
        tier_class = _parse_string(reader, reader.next_data_line())
        name = _parse_string(reader, reader.next_data_line())
        _parse_number(reader, reader.next_data_line())  # tier xmin
        _parse_number(reader, reader.next_data_line())  # tier xmax
        n_intervals = int(_parse_number(reader, reader.next_data_line()))
        tier = _Tier(name=name)
        for _ in range(n_intervals):
            if is_long:
                reader.next_data_line()  # intervals [k]:
            if tier_class != "IntervalTier":
                # point tiers: consume number + mark, then skip
                reader.next_data_line()
                reader.next_data_line()
                continue
            xmin = _parse_number(reader, reader.next_data_line())
            xmax_i = _parse_number(reader, reader.next_data_line())
            label = _parse_string(reader, reader.next_data_line())
            tier.intervals.append((xmin, xmax_i, label))
        if tier_class == "IntervalTier":
            tiers.append(tier)
    return tiers, xmax


def _check_monotone(tier: _Tier, path) -> None:
    previous_end = None
    for xmin, xmax, label in tier.intervals:
        if xmin >= xmax and label.strip():
            raise InvalidIntervalError(
                f"{path}: interval {label!r} has xmin {xmin} >= xmax {xmax}"
            )
        if previous_end is not None and xmin < previous_end - 1e-9:
            raise OverlappingIntervalsError(
                f"{path}: tier {tier.name!r} intervals overlap at t={xmin}"
            )
        previous_end = xmax if previous_end is None else max(previous_end, xmax)


def parse_textgrid(path, words_tier: str = "words",
                   phones_tier: str = "phones") -> AlignedUtterance:
    """Parse a TextGrid into word and phone tiers.

    Raises MissingTierError if either named tier is absent,
    MalformedTextGridError (with line number) on syntax errors, and
    OverlappingIntervalsError when intervals within a tier overlap.
    """
    text = _decode(Path(path).read_bytes())
    tiers, xmax = _parse_tiers(text)
    by_name = {tier.name: tier for tier in tiers}
    for required in (words_tier, phones_tier):
        if required not in by_name:
            raise MissingTierError(f"{path}: no tier named {required!r}")

    for tier in (by_name[words_tier], by_name[phones_tier]):
        _check_monotone(tier, path)

    words = tuple(
        Word(text=label, t_start=xmin, t_end=xmax_i)
        for xmin, xmax_i, label in by_name[words_tier].intervals
        if label.strip() and label.strip().lower() not in _DROPPED_LABELS
    )

    phones = []
    for xmin, xmax_i, label in by_name[phones_tier].intervals:
        label = label.strip()
        if label.lower() in _DROPPED_LABELS:
            continue
        clean = phone_tables.strip_stress(label.upper())
        center = 0.5 * (xmin + xmax_i)
        word_index = -1
        for k, word in enumerate(words):
            if word.t_start <= center < word.t_end:
                word_index = k
                break
        phones.append(PhoneSegment(label=clean, t_start=xmin, t_end=xmax_i,
                                   word_index=word_index))
    return AlignedUtterance(phones=tuple(phones), words=words, audio_duration=xmax)


def write_textgrid(utterance: AlignedUtterance, path,
                   words_tier: str = "words", phones_tier: str = "phones") -> None:
    """Write a long-format TextGrid; gaps are filled with empty intervals."""

    def tile(intervals, xmax):
        full = []
        cursor = 0.0
        for start, end, label in intervals:
            if start > cursor + 1e-12:
                full.append((cursor, start, ""))
            full.append((start, end, label))
            cursor = end
        if cursor < xmax - 1e-12:
            full.append((cursor, xmax, ""))
        return full

    xmax = utterance.audio_duration
    tiers = [
        (words_tier, tile([(w.t_start, w.t_end, w.text) for w in utterance.words], xmax)),
        (phones_tier, tile([(p.t_start, p.t_end, p.label) for p in utterance.phones], xmax)),
    ]
    lines = [
        'File type = "ooTextFile"',
        'Object class = "TextGrid"',
        "",
        "xmin = 0",
        f"xmax = {xmax!r}",
        "tiers? <exists>",
        f"size = {len(tiers)}",
        "item []:",
    ]
    for k, (name, intervals) in enumerate(tiers, start=1):
        lines += [
            f"    item [{k}]:",
            '        class = "IntervalTier"',
            f'        name = "{name}"',
            "        xmin = 0",
            f"        xmax = {xmax!r}",
            f"        intervals: size = {len(intervals)}",
        ]
        for i, (xmin, xmax_i, label) in enumerate(intervals, start=1):
            escaped = label.replace('"', '""')
            lines += [
                f"        intervals [{i}]:",
                f"            xmin = {xmin!r}",
                f"            xmax = {xmax_i!r}",
                f'            text = "{escaped}"',
            ]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _classify_plain(label: str) -> NasalClass:
    if phone_tables.is_nasal(label):
        return NasalClass.NAS
    if phone_tables.is_unvoiced(label):
        return NasalClass.UNVOICED
    if label in phone_tables.VOICED_ORAL_CONSONANTS or phone_tables.is_vowel(label):
        return NasalClass.ORL
    return NasalClass.EXCLUDED


def assign_nasal_classes(utterance: AlignedUtterance) -> AlignedUtterance:
    """Partition phones into NAS / ORL / UNVOICED / EXCLUDED classes.

    Nasal consonants are NAS. A vowel immediately adjacent to a nasal within
    the same word is split at its temporal midpoint with the nasal-side half
    tagged NAS and the other half ORL; a vowel flanked by nasals on both
    sides is entirely NAS. Remaining voiced material is ORL, unvoiced
    consonants UNVOICED, anything else EXCLUDED.
    """
    phones = utterance.phones
    out = []
    for i, phone in enumerate(phones):
        base = _classify_plain(phone.label)
        if base != NasalClass.ORL or not phone_tables.is_vowel(phone.label):
            out.append(replace(phone, nasal_class=base))
            continue

        def nasal_neighbor(j):
            return (
                0 <= j < len(phones)
                and phones[j].word_index == phone.word_index
                and phone_tables.is_nasal(phones[j].label)
            )

        before = nasal_neighbor(i - 1)
        after = nasal_neighbor(i + 1)
        if before and after:
            out.append(replace(phone, nasal_class=NasalClass.NAS))
        elif before or after:
            midpoint = phone.center
            first_class = NasalClass.NAS if before else NasalClass.ORL
            second_class = NasalClass.ORL if before else NasalClass.NAS
            out.append(PhoneSegment(phone.label, phone.t_start, midpoint,
                                    phone.word_index, first_class))
            out.append(PhoneSegment(phone.label, midpoint, phone.t_end,
                                    phone.word_index, second_class))
        else:
            out.append(replace(phone, nasal_class=NasalClass.ORL))
    return AlignedUtterance(phones=tuple(out), words=utterance.words,
                            audio_duration=utterance.audio_duration)


def frames_for_segment(segment: PhoneSegment, matrix: FrameMatrix) -> np.ndarray:
    """Rows of the feature matrix whose frame centers fall in
    [t_start, t_end). Raises EmptySegmentError when no center is inside."""
    centers = matrix.frame_centers()
    mask = (centers >= segment.t_start) & (centers < segment.t_end)
    if not np.any(mask):
        raise EmptySegmentError(
            f"phone {segment.label} [{segment.t_start:.3f}, {segment.t_end:.3f}) "
            "covers no frame centers"
        )
    return matrix.data[mask]


def alignment_error(auto_phone_center: float, manual_start: float,
                    manual_end: float) -> float:
    """Distance from an automatic phone center to the nearest boundary of
    its manual interval, zero if the center lies inside."""
    if not manual_start < manual_end:
        raise InvalidIntervalError(
            f"manual interval [{manual_start}, {manual_end}] is empty"
        )
    return max(0.0, manual_start - auto_phone_center, auto_phone_center - manual_end)


def audit_alignment(auto: AlignedUtterance, manual: AlignedUtterance) -> float:
    """Mean alignment error of auto phones matched in order to the manual
    tier's intervals; unmatched phones are scored against the whole
    utterance interval."""
    if not auto.phones:
        return 0.0
    errors = []
    for i, phone in enumerate(auto.phones):
        if i < len(manual.phones):
            interval = (manual.phones[i].t_start, manual.phones[i].t_end)
        else:
            interval = (0.0, manual.audio_duration)
        errors.append(alignment_error(phone.center, *interval))
    return float(np.mean(errors))

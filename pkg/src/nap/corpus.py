"""Corpus manifests and clinician ratings tables.

Both are plain CSV with mandatory headers. Manifest paths are resolved
against the manifest's own directory so corpora stay relocatable.
"""

import csv
import enum
from dataclasses import dataclass
from pathlib import Path

from .errors import (
    DuplicateSpeakerError,
    DuplicateUtteranceError,
    MalformedRowError,
    MissingFileError,
    OutOfRangeRatingError,
    UnknownDiseaseError,
)

MANIFEST_HEADER = ["speaker_id", "disease", "utterance_id", "wav_path", "textgrid_path"]

RATING_MIN = 1.0
RATING_MAX = 7.0


class Disease(enum.Enum):
    PD = "PD"
    A = "A"
    ALS = "ALS"
    HD = "HD"
    HEALTHY = "HEALTHY"
    CLP = "CLP"
    OTHER = "OTHER"


@dataclass(frozen=True)
class ManifestEntry:
    speaker_id: str
    disease: Disease
    utterance_id: str
    wav_path: Path
    textgrid_path: Path


@dataclass(frozen=True)
class CorpusManifest:
    entries: tuple

    def speakers(self) -> list:
        seen = []
        for entry in self.entries:
            if entry.speaker_id not in seen:
                seen.append(entry.speaker_id)
        return seen

    def disease_of(self) -> dict:
        return {entry.speaker_id: entry.disease for entry in self.entries}

    def by_speaker(self) -> dict:
        grouped = {}
        for entry in self.entries:
            grouped.setdefault(entry.speaker_id, []).append(entry)
        return grouped


def load_manifest(path, check_paths: bool = True) -> CorpusManifest:
    """Load a corpus manifest CSV.

    Relative wav/textgrid paths are resolved against the manifest directory.
    Raises MalformedRowError (with line number), DuplicateUtteranceError,
    UnknownDiseaseError, and MissingFileError for dangling paths.
    """
    path = Path(path)
    base = path.parent
    entries = []
    seen = set()
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != MANIFEST_HEADER:
            raise MalformedRowError(
                f"{path}: line 1: expected header {','.join(MANIFEST_HEADER)}"
            )
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(MANIFEST_HEADER):
                raise MalformedRowError(
                    f"{path}: line {line_no}: expected {len(MANIFEST_HEADER)} fields, got {len(row)}"
                )
            speaker_id, disease_raw, utterance_id, wav_raw, tg_raw = (c.strip() for c in row)
            try:
                disease = Disease(disease_raw)
            except ValueError:
                raise UnknownDiseaseError(
                    f"{path}: line {line_no}: unknown disease {disease_raw!r}"
                ) from None
            key = (speaker_id, utterance_id)
            if key in seen:
                raise DuplicateUtteranceError(
                    f"{path}: line {line_no}: duplicate utterance {key}"
                )
            seen.add(key)
            wav_path = (base / wav_raw).resolve() if not Path(wav_raw).is_absolute() else Path(wav_raw)
            tg_path = (base / tg_raw).resolve() if not Path(tg_raw).is_absolute() else Path(tg_raw)
            if check_paths:
                for file_path in (wav_path, tg_path):
                    if not file_path.exists():
                        raise MissingFileError(
                            f"{path}: line {line_no}: referenced file not found: {file_path}"
                        )
            entries.append(ManifestEntry(speaker_id, disease, utterance_id, wav_path, tg_path))
    return CorpusManifest(entries=tuple(entries))


def write_manifest(manifest: CorpusManifest, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(MANIFEST_HEADER)
        for entry in manifest.entries:
            writer.writerow([
                entry.speaker_id,
                entry.disease.value,
                entry.utterance_id,
                str(entry.wav_path),
                str(entry.textgrid_path),
            ])


@dataclass(frozen=True)
class RatingsTable:
    hypernasality: dict
    articulatory_precision: dict

    def __contains__(self, speaker_id):
        return speaker_id in self.hypernasality

    def __getitem__(self, speaker_id) -> float:
        return self.hypernasality[speaker_id]


def _check_range(value: float, path, line_no: int, column: str) -> float:
    if not RATING_MIN <= value <= RATING_MAX:
        raise OutOfRangeRatingError(
            f"{path}: line {line_no}: {column} {value} outside [{RATING_MIN}, {RATING_MAX}]"
        )
    return value


def load_ratings(path) -> RatingsTable:
    """Load per-speaker clinician ratings (pre-averaged, one row per speaker).

    Header is speaker_id,hypernasality with an optional
    articulatory_precision column. Values must lie in [1, 7].
    """
    path = Path(path)
    hypernasality = {}
    articulation = {}
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise MalformedRowError(f"{path}: empty ratings file")
        header = [h.strip() for h in header]
        if header[:2] != ["speaker_id", "hypernasality"]:
            raise MalformedRowError(
                f"{path}: line 1: expected header speaker_id,hypernasality[,articulatory_precision]"
            )
        has_ap = len(header) >= 3 and header[2] == "articulatory_precision"
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            speaker_id = row[0].strip()
            if speaker_id in hypernasality:
                raise DuplicateSpeakerError(f"{path}: line {line_no}: duplicate speaker {speaker_id!r}")
            try:
                rating = float(row[1])
            except (ValueError, IndexError):
                raise MalformedRowError(
                    f"{path}: line {line_no}: bad hypernasality value"
                ) from None
            hypernasality[speaker_id] = _check_range(rating, path, line_no, "hypernasality")
            if has_ap and len(row) > 2 and row[2].strip():
                ap_value = float(row[2])
                articulation[speaker_id] = _check_range(ap_value, path, line_no,
                                                        "articulatory_precision")
    return RatingsTable(hypernasality=hypernasality, articulatory_precision=articulation)


def write_ratings(ratings: RatingsTable, path) -> None:
    has_ap = bool(ratings.articulatory_precision)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        header = ["speaker_id", "hypernasality"]
        if has_ap:
            header.append("articulatory_precision")
        writer.writerow(header)
        for speaker_id, value in ratings.hypernasality.items():
            row = [speaker_id, repr(float(value))]
            if has_ap:
                ap = ratings.articulatory_precision.get(speaker_id)
                row.append("" if ap is None else repr(float(ap)))
            writer.writerow(row)

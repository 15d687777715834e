"""Aggregation of phone scores into per-speaker feature vectors.

Feature names are ``N(<phone>)`` for nasalization scores and ``AP(<phone>)``
for articulatory precision. Phones a speaker never produced are flagged as
missing, never zero-filled; imputation is a separate, fold-aware step.
"""

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import MissingFeatureError
from .phones import NASALIZATION_EXPORT_PHONES, UNVOICED_CONSONANTS

MISSING_TOKEN = "NA"

# Most predictive six-feature subset; preset name kept stable for the CLI.
PAPER_TOP6 = ("N(AA)", "N(IY)", "N(B)", "N(D)", "AP(T)", "AP(F)")

PRESETS = {"paper-top6": PAPER_TOP6}


def nasalization_feature(phone: str) -> str:
    return f"N({phone})"


def articulation_feature(phone: str) -> str:
    return f"AP({phone})"


def feature_name_for(phone: str) -> str:
    if phone in UNVOICED_CONSONANTS:
        return articulation_feature(phone)
    return nasalization_feature(phone)


@dataclass
class SpeakerFeatureVector:
    """Per-speaker phone-averaged scores with instance counts."""

    speaker_id: str
    nasalization: dict = field(default_factory=dict)
    articulation: dict = field(default_factory=dict)
    coverage: dict = field(default_factory=dict)

    def get(self, feature: str):
        """Value of a named feature, or None when missing."""
        if feature.startswith("N(") and feature.endswith(")"):
            return self.nasalization.get(feature[2:-1])
        if feature.startswith("AP(") and feature.endswith(")"):
            return self.articulation.get(feature[3:-1])
        raise ValueError(f"unparseable feature name {feature!r}")

    def feature_names(self) -> list:
        names = [nasalization_feature(p) for p in sorted(self.nasalization)]
        names += [articulation_feature(p) for p in sorted(self.articulation)]
        return names


def aggregate(scores, speaker_id: str) -> SpeakerFeatureVector:
    """Pool one speaker's phone scores into per-phone arithmetic means.

    Voiced export phones land in the nasalization map, unvoiced consonants
    in the articulation map; all instances across utterances pool together.
    """
    sums = {}
    counts = {}
    for record in scores:
        sums[record.phone] = sums.get(record.phone, 0.0) + record.score
        counts[record.phone] = counts.get(record.phone, 0) + 1
    vector = SpeakerFeatureVector(speaker_id=speaker_id)
    for phone, total in sums.items():
        mean = total / counts[phone]
        if phone in UNVOICED_CONSONANTS:
            vector.articulation[phone] = mean
        else:
            vector.nasalization[phone] = mean
    vector.coverage = dict(counts)
    return vector


def all_feature_names(vectors) -> list:
    """Union of observed feature names: nasalization first, then
    articulation, each in the canonical phone order."""
    nas_seen = set()
    ap_seen = set()
    for vector in vectors:
        nas_seen.update(vector.nasalization)
        ap_seen.update(vector.articulation)
    names = [nasalization_feature(p) for p in NASALIZATION_EXPORT_PHONES if p in nas_seen]
    names += [nasalization_feature(p) for p in sorted(nas_seen - set(NASALIZATION_EXPORT_PHONES))]
    names += [articulation_feature(p) for p in sorted(ap_seen)]
    return names


def resolve_preset(name: str, vectors) -> list:
    if name == "all":
        return all_feature_names(vectors)
    if name in PRESETS:
        return list(PRESETS[name])
    raise ValueError(f"unknown feature preset {name!r}; choose from "
                     f"{sorted(PRESETS)} or 'all'")


def to_design_matrix(vectors, feature_names, impute: bool = False):
    """Stack speaker vectors into a (speakers x features) matrix.

    Missing cells become the column mean of present rows when impute is
    true, otherwise MissingFeatureError is raised. Returns (matrix, ids).
    """
    ids = [vector.speaker_id for vector in vectors]
    matrix = np.full((len(ids), len(feature_names)), np.nan)
    for i, vector in enumerate(vectors):
        for j, feature in enumerate(feature_names):
            value = vector.get(feature)
            if value is not None:
                matrix[i, j] = value
    missing = np.isnan(matrix)
    if missing.any():
        if not impute:
            i, j = np.argwhere(missing)[0]
            raise MissingFeatureError(
                f"speaker {ids[i]!r} is missing feature {feature_names[j]!r} "
                "and imputation is disabled"
            )
        matrix = impute_columns(matrix, feature_names)
    return matrix, ids


def impute_columns(matrix: np.ndarray, feature_names, reference: np.ndarray = None):
    """Fill NaN cells with column means of `reference` (defaults to the
    matrix itself). A column with no observed values at all is an error."""
    matrix = matrix.copy()
    source = matrix if reference is None else reference
    for j in range(matrix.shape[1]):
        observed = source[:, j][~np.isnan(source[:, j])]
        column_missing = np.isnan(matrix[:, j])
        if not column_missing.any():
            continue
        if observed.size == 0:
            raise MissingFeatureError(
                f"feature {feature_names[j]!r} has no observed values to impute from"
            )
        matrix[column_missing, j] = observed.mean()
    return matrix


def write_feature_table(vectors, path, feature_names=None) -> None:
    """CSV export: speaker_id plus one column per feature, NA for missing."""
    if feature_names is None:
        feature_names = all_feature_names(vectors)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["speaker_id"] + list(feature_names))
        for vector in vectors:
            row = [vector.speaker_id]
            for feature in feature_names:
                value = vector.get(feature)
                row.append(MISSING_TOKEN if value is None else repr(float(value)))
            writer.writerow(row)


def read_feature_table(path) -> list:
    """Read a feature table back into SpeakerFeatureVector records.

    Instance counts are not stored in the CSV; present features get
    coverage 1, missing ones 0.
    """
    vectors = []
    with open(Path(path), newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        feature_names = header[1:]
        for row in reader:
            if not row:
                continue
            vector = SpeakerFeatureVector(speaker_id=row[0])
            for feature, cell in zip(feature_names, row[1:]):
                if cell == MISSING_TOKEN or not cell.strip():
                    continue
                value = float(cell)
                if math.isnan(value):
                    continue
                if feature.startswith("AP("):
                    phone = feature[3:-1]
                    vector.articulation[phone] = value
                else:
                    phone = feature[2:-1]
                    vector.nasalization[phone] = value
                vector.coverage[phone] = 1
            vectors.append(vector)
    return vectors

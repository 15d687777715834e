"""Per-phone score records and their CSV export format."""

import csv
from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class PhoneScore:
    """One scored phone instance: a per-frame-normalized log-likelihood ratio."""

    utterance_id: str
    phone: str
    score: float
    n_frames: int


SCORES_HEADER = ["utterance_id", "phone", "score", "n_frames"]


def write_scores_csv(scores, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(SCORES_HEADER)
        for record in scores:
            writer.writerow([record.utterance_id, record.phone,
                             repr(float(record.score)), int(record.n_frames)])


def read_scores_csv(path) -> list:
    scores = []
    with open(Path(path), newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        next(reader)  # header
        for row in reader:
            if not row:
                continue
            scores.append(PhoneScore(
                utterance_id=row[0],
                phone=row[1],
                score=float(row[2]),
                n_frames=int(row[3]),
            ))
    return scores

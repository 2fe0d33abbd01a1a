"""Diary ingestion and episode extraction.

Daily bleeding diaries use a three-letter alphabet: ``B`` (bleeding), ``S``
(spotting), ``N`` (neither).  A subject's record is a contiguous string of
day statuses plus a treatment arm code in {1, 2, 3}.  For modelling, the
daily record is reduced to an alternating sequence of episodes: maximal runs
of ``N`` days, and maximal bleeding/spotting runs lumped into a single
episode classified ``S`` (spotting only), ``B`` (bleeding only) or ``SB``
(both).  The final episode is always right-censored by the end of the
observation period; a censored bleeding/spotting episode may be ambiguous
between classes, which is recorded as a candidate set.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable

from .errors import (
    BadTreatmentCode,
    DataFormatError,
    DuplicateSubjectDay,
    EmptyDataset,
    EmptySeries,
    NonContiguousDays,
    UnknownStatusChar,
)

VALID_STATUS_CHARS = frozenset("BSN")
TREATMENTS = (1, 2, 3)


class DayStatus(Enum):
    B = "B"
    S = "S"
    N = "N"


class Phase(Enum):
    N = "N"
    NON_N = "nonN"


class NonNClass(Enum):
    """Classes of a bleeding/spotting episode, integer-coded S=1, SB=2, B=3."""

    S = 1
    SB = 2
    B = 3


CLASS_ORDER = (NonNClass.S, NonNClass.SB, NonNClass.B)


@dataclass(frozen=True)
class DiarySeries:
    """One subject's daily record: status string over days 1..D."""

    subject_id: str
    treatment: int
    diary: str

    def __post_init__(self):
        if len(self.diary) < 1:
            raise EmptySeries(f"subject {self.subject_id!r}: empty diary")
        bad = set(self.diary) - VALID_STATUS_CHARS
        if bad:
            raise UnknownStatusChar(
                f"subject {self.subject_id!r}: invalid status {sorted(bad)}"
            )
        if self.treatment not in TREATMENTS:
            raise BadTreatmentCode(
                f"subject {self.subject_id!r}: treatment {self.treatment!r}"
            )

    @property
    def observation_end(self) -> int:
        return len(self.diary)

    @property
    def days(self) -> tuple[DayStatus, ...]:
        return tuple(DayStatus(c) for c in self.diary)


@dataclass(frozen=True)
class Episode:
    """One maximal same-phase interval.

    ``observed_class`` is set only for uncensored non-N episodes.  A censored
    non-N episode instead carries ``candidates``, the set of classes
    compatible with the symbols seen before the cut; ``latent_class`` is the
    1-based latent state of an N episode, filled in during inference.
    """

    phase: Phase
    duration_days: float
    observed_class: NonNClass | None = None
    latent_class: int | None = None
    censored: bool = False
    candidates: frozenset[NonNClass] | None = None

    def __post_init__(self):
        if not self.duration_days > 0:
            raise DataFormatError(f"episode duration {self.duration_days} must be > 0")
        if self.observed_class is not None and self.latent_class is not None:
            raise DataFormatError("observed_class and latent_class are exclusive")
        if self.phase is Phase.N:
            if self.observed_class is not None or self.candidates is not None:
                raise DataFormatError("N episode cannot carry a non-N class")
        else:
            if self.latent_class is not None:
                raise DataFormatError("non-N episode cannot carry a latent state")
            if self.censored:
                if not self.candidates:
                    raise DataFormatError("censored non-N episode needs candidates")
                if self.observed_class is not None:
                    raise DataFormatError("censored non-N class is not observed")
            elif self.observed_class is None:
                raise DataFormatError("uncensored non-N episode needs a class")


@dataclass(frozen=True)
class EpisodeSequence:
    """Alternating episodes of one subject, at most the last one censored."""

    subject_id: str
    treatment: int
    episodes: tuple[Episode, ...]

    def __post_init__(self):
        if not self.episodes:
            raise EmptySeries(f"subject {self.subject_id!r}: no episodes")
        if self.treatment not in TREATMENTS:
            raise BadTreatmentCode(
                f"subject {self.subject_id!r}: treatment {self.treatment!r}"
            )
        for prev, cur in zip(self.episodes, self.episodes[1:]):
            if prev.phase is cur.phase:
                raise DataFormatError(
                    f"subject {self.subject_id!r}: phases must alternate"
                )
        for ep in self.episodes[:-1]:
            if ep.censored:
                raise DataFormatError(
                    f"subject {self.subject_id!r}: only the final episode may be censored"
                )

    @property
    def total_duration(self) -> float:
        return sum(ep.duration_days for ep in self.episodes)


@dataclass(frozen=True)
class DiaryDataset:
    subjects: tuple[DiarySeries, ...]

    def __post_init__(self):
        seen = set()
        for s in self.subjects:
            if s.subject_id in seen:
                raise DuplicateSubjectDay(f"duplicate subject id {s.subject_id!r}")
            seen.add(s.subject_id)

    @property
    def arms(self) -> dict[int, int]:
        counts = {tr: 0 for tr in TREATMENTS}
        for s in self.subjects:
            counts[s.treatment] += 1
        return counts


@dataclass(frozen=True)
class SubjectSummary:
    subject_id: str
    total_days: int
    days_b: int
    days_s: int
    days_n: int
    pct_b: float
    pct_s: float
    pct_n: float
    n_episodes: int


def _classify_run(symbols: set[str]) -> NonNClass:
    has_b = "B" in symbols
    has_s = "S" in symbols
    if has_b and has_s:
        return NonNClass.SB
    return NonNClass.B if has_b else NonNClass.S


def _censored_candidates(symbols: set[str]) -> frozenset[NonNClass]:
    has_b = "B" in symbols
    has_s = "S" in symbols
    if has_b and has_s:
        return frozenset({NonNClass.SB})
    if has_s:
        return frozenset({NonNClass.S, NonNClass.SB})
    return frozenset({NonNClass.B, NonNClass.SB})


def extract_episodes(series: DiarySeries) -> EpisodeSequence:
    """Lump the daily record into alternating N / non-N episodes.

    Maximal runs of N days become N episodes; maximal runs of B/S days
    between them become one combined episode classified by the set of
    symbols in the run.  The final episode is flagged censored, and if it is
    a non-N run its class candidates are restricted to what the seen symbols
    still allow.
    """
    diary = series.diary
    runs: list[tuple[bool, int, set[str]]] = []
    start = 0
    for i in range(1, len(diary) + 1):
        if i == len(diary) or (diary[i] == "N") != (diary[start] == "N"):
            runs.append((diary[start] == "N", i - start, set(diary[start:i])))
            start = i
    episodes = []
    for idx, (is_n, length, symbols) in enumerate(runs):
        last = idx == len(runs) - 1
        if is_n:
            episodes.append(
                Episode(phase=Phase.N, duration_days=float(length), censored=last)
            )
        elif last:
            episodes.append(
                Episode(
                    phase=Phase.NON_N,
                    duration_days=float(length),
                    censored=True,
                    candidates=_censored_candidates(symbols),
                )
            )
        else:
            episodes.append(
                Episode(
                    phase=Phase.NON_N,
                    duration_days=float(length),
                    observed_class=_classify_run(symbols),
                )
            )
    return EpisodeSequence(
        subject_id=series.subject_id,
        treatment=series.treatment,
        episodes=tuple(episodes),
    )


def summarize_subject(series: DiarySeries) -> SubjectSummary:
    """Per-subject day counts, percentages, and episode count."""
    d = series.diary
    nb, ns, nn = d.count("B"), d.count("S"), d.count("N")
    total = len(d)
    return SubjectSummary(
        subject_id=series.subject_id,
        total_days=total,
        days_b=nb,
        days_s=ns,
        days_n=nn,
        pct_b=100.0 * nb / total,
        pct_s=100.0 * ns / total,
        pct_n=100.0 * nn / total,
        n_episodes=len(extract_episodes(series).episodes),
    )


LONG_HEADER = ["subject_id", "treatment", "day", "status"]
COMPACT_HEADER = ["subject_id", "treatment", "diary"]
FORMATS = ("long_csv", "compact_csv")


def _parse_treatment(raw: str, subject_id: str) -> int:
    try:
        tr = int(raw)
    except ValueError:
        raise BadTreatmentCode(f"subject {subject_id!r}: treatment {raw!r}") from None
    if tr not in TREATMENTS:
        raise BadTreatmentCode(f"subject {subject_id!r}: treatment {raw!r}")
    return tr


def _check_header(got, want, path):
    if got != want:
        raise DataFormatError(f"{path}: expected header {want}, got {got}")


def parse_dataset(path, format: str = "long_csv") -> DiaryDataset:
    """Read and validate a diary CSV in ``long_csv`` or ``compact_csv`` form."""
    if format not in FORMATS:
        raise ValueError(f"unknown format {format!r}")
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDataset(f"{path}: empty file") from None
        rows = [row for row in reader if row]

    subjects: list[DiarySeries] = []
    if format == "compact_csv":
        _check_header(header, COMPACT_HEADER, path)
        for row in rows:
            if len(row) != 3:
                raise DataFormatError(f"{path}: malformed row {row}")
            sid, raw_tr, diary = row
            subjects.append(DiarySeries(sid, _parse_treatment(raw_tr, sid), diary))
    else:
        _check_header(header, LONG_HEADER, path)
        by_subject: dict[str, dict] = {}
        order: list[str] = []
        for row in rows:
            if len(row) != 4:
                raise DataFormatError(f"{path}: malformed row {row}")
            sid, raw_tr, raw_day, status = row
            tr = _parse_treatment(raw_tr, sid)
            try:
                day = int(raw_day)
            except ValueError:
                raise DataFormatError(f"subject {sid!r}: day {raw_day!r}") from None
            if status not in VALID_STATUS_CHARS:
                raise UnknownStatusChar(f"subject {sid!r} day {day}: {status!r}")
            if sid not in by_subject:
                by_subject[sid] = {"treatment": tr, "days": {}}
                order.append(sid)
            rec = by_subject[sid]
            if rec["treatment"] != tr:
                raise BadTreatmentCode(f"subject {sid!r}: inconsistent treatment")
            if day in rec["days"]:
                raise DuplicateSubjectDay(f"subject {sid!r}: duplicate day {day}")
            rec["days"][day] = status
        for sid in order:
            rec = by_subject[sid]
            days = rec["days"]
            want = set(range(1, len(days) + 1))
            if set(days) != want:
                raise NonContiguousDays(
                    f"subject {sid!r}: days must run 1..{len(days)} without gaps"
                )
            diary = "".join(days[d] for d in sorted(days))
            subjects.append(DiarySeries(sid, rec["treatment"], diary))

    if not subjects:
        raise EmptyDataset(f"{path}: no subjects")
    return DiaryDataset(subjects=tuple(subjects))


def write_dataset(dataset: DiaryDataset, path, format: str = "long_csv") -> None:
    """Write a dataset so that :func:`parse_dataset` round-trips it exactly."""
    if format not in FORMATS:
        raise ValueError(f"unknown format {format!r}")
    if not dataset.subjects:
        raise EmptyDataset("dataset has no subjects")
    path = Path(path)
    with path.open("w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if format == "compact_csv":
            writer.writerow(COMPACT_HEADER)
            for s in dataset.subjects:
                writer.writerow([s.subject_id, s.treatment, s.diary])
        else:
            writer.writerow(LONG_HEADER)
            for s in dataset.subjects:
                for day, status in enumerate(s.diary, start=1):
                    writer.writerow([s.subject_id, s.treatment, day, status])


def write_episode_csv(sequences: Iterable[EpisodeSequence], path) -> None:
    """Dump extracted episodes, one row per episode."""
    with Path(path).open("w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["subject_id", "index", "phase", "class", "duration", "censored", "candidates"]
        )
        for seq in sequences:
            for idx, ep in enumerate(seq.episodes, start=1):
                if ep.phase is Phase.N:
                    cls = ""
                elif ep.observed_class is not None:
                    cls = ep.observed_class.name
                else:
                    cls = ""
                cands = ""
                if ep.candidates:
                    cands = "|".join(
                        c.name for c in CLASS_ORDER if c in ep.candidates
                    )
                writer.writerow(
                    [
                        seq.subject_id,
                        idx,
                        ep.phase.value,
                        cls,
                        f"{ep.duration_days:g}",
                        int(ep.censored),
                        cands,
                    ]
                )

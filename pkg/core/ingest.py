"""
Review ingestion for the trip HMM toolkit.
Turns timestamped, area-labelled reviews into per-user timelines, cuts the
timelines into stays, merges interrupted stays and emits item sequences.
"""

import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from datetime import date, datetime
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Tuple

from .errors import ConfigError

_log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Review:
    """One timestamped note given by a user on an area."""

    user_id: str
    area_id: int
    timestamp: date
    rating: Optional[int] = None


@dataclass(frozen=True)
class Stay:
    """
    A run of review days of one user.

    visits is ordered by date; consecutive distinct dates are at most
    break_threshold_days apart unless the stay came out of a merge.
    """

    user_id: str
    visits: Tuple[Tuple[date, int], ...]

    @property
    def start(self) -> date:
        return self.visits[0][0]

    @property
    def end(self) -> date:
        return self.visits[-1][0]

    @property
    def duration(self) -> int:
        """Days covered, both endpoints included."""
        return (self.end - self.start).days + 1

    @property
    def first_area(self) -> int:
        return self.visits[0][1]

    @property
    def last_area(self) -> int:
        return self.visits[-1][1]

    def joined(self, other: "Stay") -> "Stay":
        return Stay(self.user_id, self.visits + other.visits)


@dataclass(frozen=True)
class Sequence:
    """Chronologically ordered items (area ids) of one stay."""

    items: Tuple[int, ...]

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def __str__(self) -> str:
        return " ".join(str(item) for item in self.items)


@dataclass(frozen=True)
class IngestConfig:
    break_threshold_days: int = 7
    min_sequence_length: int = 2
    dedupe_same_day: bool = True
    user_allow_list: Optional[FrozenSet[str]] = None

    def __post_init__(self):
        if self.break_threshold_days < 1:
            raise ConfigError("break_threshold_days must be >= 1")
        if self.min_sequence_length < 1:
            raise ConfigError("min_sequence_length must be >= 1")


@dataclass
class IngestReport:
    """Counters reported next to the sequence file."""

    reviews_read: int = 0
    reviews_skipped: int = 0
    malformed_lines: int = 0
    malformed_dates: int = 0
    missing_area: int = 0
    filtered_users: int = 0
    users: int = 0
    stays: int = 0
    merges: int = 0
    sequences_kept: int = 0
    sequences_dropped: int = 0
    diagnostics: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'reviews_read': self.reviews_read,
            'reviews_skipped': self.reviews_skipped,
            'malformed_lines': self.malformed_lines,
            'malformed_dates': self.malformed_dates,
            'missing_area': self.missing_area,
            'filtered_users': self.filtered_users,
            'users': self.users,
            'stays': self.stays,
            'merges': self.merges,
            'sequences_kept': self.sequences_kept,
            'sequences_dropped': self.sequences_dropped,
        }


class ItemDictionary:
    """
    Two-way mapping between area labels and dense integer items.

    New labels get the next free id in first-appearance order.
    """

    def __init__(self, labels: Optional[Dict[int, str]] = None):
        self._by_item: Dict[int, str] = {}
        self._by_label: Dict[str, int] = {}
        for item, label in (labels or {}).items():
            self.register(int(item), label)

    def register(self, item: int, label: str) -> None:
        known = self._by_item.get(item)
        if known is not None and known != label:
            raise ValueError(f"Item {item} already labelled '{known}'")
        self._by_item[item] = label
        self._by_label[label] = item

    def item_for(self, label: str) -> int:
        item = self._by_label.get(label)
        if item is None:
            item = len(self._by_label)
            while item in self._by_item:
                item += 1
            self.register(item, label)
        return item

    def label_for(self, item: int) -> str:
        return self._by_item.get(item, str(item))

    def __len__(self) -> int:
        return len(self._by_item)

    def __contains__(self, item: int) -> bool:
        return item in self._by_item

    def to_dict(self) -> Dict[str, str]:
        return {str(item): self._by_item[item] for item in sorted(self._by_item)}

    @classmethod
    def from_dict(cls, data: Dict[str, str]) -> "ItemDictionary":
        return cls({int(item): label for item, label in data.items()})


def _parse_day(raw: Any) -> date:
    if not isinstance(raw, str):
        raise ValueError(f"not a string: {raw!r}")
    try:
        return date.fromisoformat(raw)
    except ValueError:
        return datetime.fromisoformat(raw).date()


def _parse_area(raw: Any, dictionary: ItemDictionary) -> int:
    if isinstance(raw, bool):
        raise ValueError(f"bad area {raw!r}")
    if isinstance(raw, int):
        if raw < 0:
            raise ValueError(f"negative area {raw}")
        label = dictionary.label_for(raw)
        if raw in dictionary and label != str(raw):
            raise ValueError(f"area {raw} collides with area '{label}'")
        dictionary.register(raw, str(raw))
        return raw
    if isinstance(raw, str) and raw.strip():
        return dictionary.item_for(raw.strip())
    raise ValueError(f"bad area {raw!r}")


def parse_reviews(lines: Iterable[str], cfg: Optional[IngestConfig] = None,
                  dictionary: Optional[ItemDictionary] = None,
                  report: Optional[IngestReport] = None) -> List[Review]:
    """
    Parse JSON-lines review records.

    Malformed records are skipped; each one adds a diagnostic line and bumps
    the matching counter of the report.
    """
    cfg = cfg or IngestConfig()
    dictionary = dictionary if dictionary is not None else ItemDictionary()
    report = report if report is not None else IngestReport()
    reviews: List[Review] = []

    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        report.reviews_read += 1
        try:
            record = json.loads(line)
            if not isinstance(record, dict):
                raise ValueError("record is not an object")
        except ValueError as e:
            report.malformed_lines += 1
            report.reviews_skipped += 1
            report.diagnostics.append(f"line {line_no}: malformed record ({e})")
            continue

        user = record.get('user')
        if user is None or str(user) == '':
            report.malformed_lines += 1
            report.reviews_skipped += 1
            report.diagnostics.append(f"line {line_no}: missing user")
            continue
        user = str(user)

        if cfg.user_allow_list is not None and user not in cfg.user_allow_list:
            report.filtered_users += 1
            report.reviews_skipped += 1
            continue

        if record.get('area') is None:
            report.missing_area += 1
            report.reviews_skipped += 1
            report.diagnostics.append(f"line {line_no}: missing area")
            continue
        try:
            area = _parse_area(record['area'], dictionary)
        except ValueError as e:
            report.malformed_lines += 1
            report.reviews_skipped += 1
            report.diagnostics.append(f"line {line_no}: {e}")
            continue

        try:
            day = _parse_day(record.get('date'))
        except ValueError:
            report.malformed_dates += 1
            report.reviews_skipped += 1
            report.diagnostics.append(f"line {line_no}: malformed date {record.get('date')!r}")
            continue

        rating = record.get('rating')
        valid = isinstance(rating, int) and not isinstance(rating, bool) and 1 <= rating <= 5
        if rating is not None and not valid:
            _log.debug("line %d: ignoring rating %r", line_no, rating)
            rating = None

        reviews.append(Review(user, area, day, rating))

    if report.reviews_skipped:
        _log.warning("Skipped %d of %d review records", report.reviews_skipped, report.reviews_read)
    return reviews


def build_timelines(reviews: Iterable[Review]) -> Dict[str, List[Review]]:
    """Group reviews per user, each timeline sorted by date then input order."""
    grouped: Dict[str, List[Review]] = defaultdict(list)
    for review in reviews:
        grouped[review.user_id].append(review)
    # sorted() is stable, so same-day reviews keep their input order
    return {user: sorted(grouped[user], key=lambda r: r.timestamp)
            for user in sorted(grouped)}


def _make_stay(reviews: List[Review], cfg: IngestConfig) -> Stay:
    visits: List[Tuple[date, int]] = []
    seen = set()
    for review in reviews:
        key = (review.timestamp, review.area_id)
        if cfg.dedupe_same_day and key in seen:
            continue
        seen.add(key)
        visits.append(key)
    return Stay(reviews[0].user_id, tuple(visits))


def segment_stays(timeline: List[Review], cfg: Optional[IngestConfig] = None) -> List[Stay]:
    """
    Cut a date-sorted timeline into stays.

    A gap of more than break_threshold_days between consecutive reviews
    starts a new stay; a gap of exactly the threshold does not.
    """
    cfg = cfg or IngestConfig()
    stays: List[Stay] = []
    current: List[Review] = []
    for review in timeline:
        if current:
            gap = (review.timestamp - current[-1].timestamp).days
            if gap < 0:
                raise ValueError("timeline is not sorted by date")
            if gap > cfg.break_threshold_days:
                stays.append(_make_stay(current, cfg))
                current = []
        current.append(review)
    if current:
        stays.append(_make_stay(current, cfg))
    return stays


def break_duration(left: Stay, right: Stay) -> int:
    """Whole days strictly between the end of left and the start of right."""
    return (right.start - left.end).days - 1


def can_merge(left: Stay, right: Stay) -> bool:
    gap = break_duration(left, right)
    return (gap <= left.duration and gap <= right.duration
            and left.last_area == right.first_area)


def merge_stays(stays: List[Stay]) -> List[Stay]:
    """
    Merge interrupted stays of one user.

    Left-to-right cascading passes: after a merge the merged stay (with its
    new duration) is tested against the next one. Passes repeat until none
    merges anything, so the result is a fixpoint.
    """
    merged = list(stays)
    while True:
        out: List[Stay] = []
        changed = False
        for stay in merged:
            if out and out[-1].user_id == stay.user_id and can_merge(out[-1], stay):
                out[-1] = out[-1].joined(stay)
                changed = True
            else:
                out.append(stay)
        if not changed:
            return out
        merged = out


def extract_sequences(stays: Iterable[Stay], cfg: Optional[IngestConfig] = None) -> Tuple[List[Sequence], int]:
    """Return (kept sequences, number dropped for being too short)."""
    cfg = cfg or IngestConfig()
    kept: List[Sequence] = []
    dropped = 0
    for stay in stays:
        sequence = Sequence(tuple(area for _, area in stay.visits))
        if len(sequence) < cfg.min_sequence_length:
            dropped += 1
            continue
        kept.append(sequence)
    return kept, dropped


@dataclass
class IngestResult:
    sequences: List[Sequence]
    stays: List[Stay]
    report: IngestReport


def ingest_reviews(reviews: Iterable[Review], cfg: Optional[IngestConfig] = None,
                   report: Optional[IngestReport] = None) -> IngestResult:
    """Timelines -> stays -> merged stays -> sequences, ordered by user then stay start."""
    cfg = cfg or IngestConfig()
    report = report if report is not None else IngestReport()
    timelines = build_timelines(reviews)
    report.users = len(timelines)

    all_stays: List[Stay] = []
    for user, timeline in timelines.items():
        stays = segment_stays(timeline, cfg)
        merged = merge_stays(stays)
        report.merges += len(stays) - len(merged)
        all_stays.extend(merged)

    sequences, dropped = extract_sequences(all_stays, cfg)
    report.stays = len(all_stays)
    report.sequences_kept = len(sequences)
    report.sequences_dropped = dropped
    _log.info("%d users, %d stays (%d merges), %d sequences kept, %d dropped",
              report.users, report.stays, report.merges, len(sequences), dropped)
    return IngestResult(sequences, all_stays, report)

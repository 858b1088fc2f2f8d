#!/usr/bin/env python3
"""
Tests for review ingestion.
Timelines, stay segmentation, stay merging and sequence extraction.
"""

import json
import sys
from datetime import date, timedelta
from pathlib import Path

import numpy as np
import pytest

# Add repository root to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from core.errors import ConfigError
from core.ingest import (IngestConfig, IngestReport, ItemDictionary, Review, Stay, break_duration,
                         build_timelines, can_merge, extract_sequences, ingest_reviews, merge_stays,
                         parse_reviews, segment_stays)

D0 = date(2019, 5, 1)


def day(offset):
    return D0 + timedelta(days=offset)


def stay(user, *visits):
    """visits: (day offset, area) couples."""
    return Stay(user, tuple((day(offset), area) for offset, area in visits))


def review(user, offset, area):
    return Review(user, area, day(offset))


def test_build_timelines_sorts_per_user():
    reviews = [review('b', 3, 1), review('a', 5, 2), review('b', 1, 3), review('a', 2, 4), review('b', 2, 5)]
    timelines = build_timelines(reviews)

    assert list(timelines) == ['a', 'b']
    assert [r.area_id for r in timelines['a']] == [4, 2]
    assert [r.area_id for r in timelines['b']] == [3, 5, 1]
    assert sum(len(t) for t in timelines.values()) == len(reviews)
    assert build_timelines([]) == {}


def test_build_timelines_keeps_input_order_on_same_day():
    timelines = build_timelines([review('u', 4, 9), review('u', 4, 7), review('u', 1, 8)])
    assert [r.area_id for r in timelines['u']] == [8, 9, 7]


def test_segment_stays_splits_on_gap_above_threshold():
    timeline = [review('u', 0, 1), review('u', 1, 2), review('u', 9, 3)]
    stays = segment_stays(timeline, IngestConfig(break_threshold_days=7))
    assert [[area for _, area in s.visits] for s in stays] == [[1, 2], [3]]


def test_segment_stays_threshold_gap_keeps_stay():
    stays = segment_stays([review('u', 0, 1), review('u', 7, 2)], IngestConfig(break_threshold_days=7))
    assert len(stays) == 1
    assert stays[0].duration == 8


def test_segment_stays_matches_gap_scan():
    rng = np.random.default_rng(7)
    offsets = sorted(int(x) for x in rng.choice(120, size=20, replace=False))
    timeline = [review('u', offset, i) for i, offset in enumerate(offsets)]

    expected = [[offsets[0]]]
    for previous, current in zip(offsets, offsets[1:]):
        if current - previous > 7:
            expected.append([])
        expected[-1].append(current)

    stays = segment_stays(timeline)
    assert [[(d - D0).days for d, _ in s.visits] for s in stays] == expected


def test_segment_stays_dedupes_same_day_area():
    timeline = [review('u', 0, 4), review('u', 0, 4), review('u', 0, 5), review('u', 1, 4)]
    assert [a for _, a in segment_stays(timeline)[0].visits] == [4, 5, 4]
    kept = segment_stays(timeline, IngestConfig(dedupe_same_day=False))[0]
    assert [a for _, a in kept.visits] == [4, 4, 5, 4]


def test_segment_stays_rejects_unsorted_timeline():
    with pytest.raises(ValueError):
        segment_stays([review('u', 3, 1), review('u', 1, 2)])


def test_stay_duration_and_break():
    left = stay('u', (0, 1), (2, 5))
    right = stay('u', (5, 5), (8, 2))
    assert left.duration == 3
    assert right.duration == 4
    assert break_duration(left, right) == 2


def test_merge_interrupted_stay():
    left = stay('u', (0, 1), (2, 5))
    right = stay('u', (5, 5), (8, 2))
    assert can_merge(left, right)

    merged = merge_stays([left, right])
    assert len(merged) == 1
    assert [a for _, a in merged[0].visits] == [1, 5, 5, 2]
    assert merged[0].duration == 9


def test_no_merge_when_break_longer_than_stay():
    left = stay('u', (0, 1), (2, 5))
    right = stay('u', (8, 5), (20, 2))
    assert break_duration(left, right) == 5
    assert merge_stays([left, right]) == [left, right]


def test_no_merge_when_endpoints_differ():
    left = stay('u', (0, 1), (2, 5))
    right = stay('u', (4, 6), (6, 2))
    assert break_duration(left, right) == 1
    assert not can_merge(left, right)
    assert len(merge_stays([left, right])) == 2


def test_merge_cascades_with_new_duration():
    # the third stay only fits once the first two are joined
    first = stay('u', (0, 1), (1, 2))
    second = stay('u', (4, 2), (5, 3))
    third = stay('u', (9, 3), (12, 4))
    assert not can_merge(second, third)

    merged = merge_stays([first, second, third])
    assert len(merged) == 1
    assert [a for _, a in merged[0].visits] == [1, 2, 2, 3, 3, 4]


def test_merge_stays_is_idempotent_and_keeps_order():
    rng = np.random.default_rng(11)
    stays, offset = [], 0
    for _ in range(15):
        length = int(rng.integers(1, 5))
        visits = []
        for _ in range(length):
            visits.append((offset, int(rng.integers(0, 3))))
            offset += int(rng.integers(0, 3))
        stays.append(stay('u', *visits))
        offset += int(rng.integers(1, 6))

    once = merge_stays(stays)
    assert merge_stays(once) == once
    assert len(once) <= len(stays)
    flatten = lambda ss: [v for s in ss for v in s.visits]
    assert flatten(once) == flatten(stays)


def test_extract_sequences_drops_short():
    stays = [stay('u', (0, 0), (1, 5), (2, 2)), stay('u', (10, 3))]
    kept, dropped = extract_sequences(stays)
    assert [s.items for s in kept] == [(0, 5, 2)]
    assert dropped == 1
    assert str(kept[0]) == "0 5 2"


def test_extract_sequences_conserves_count():
    rng = np.random.default_rng(3)
    stays = [stay('u', *[(i, int(rng.integers(0, 4))) for i in range(int(rng.integers(1, 4)))])
             for _ in range(100)]
    kept, dropped = extract_sequences(stays)
    assert len(kept) + dropped == 100


def test_parse_reviews_skips_bad_records():
    lines = [
        json.dumps({'user': 'u1', 'area': 3, 'date': '2019-05-01', 'rating': 4}),
        'not json',
        json.dumps({'user': 'u1', 'date': '2019-05-02'}),
        json.dumps({'user': 'u1', 'area': 3, 'date': '2019-13-45'}),
        '',
        json.dumps({'user': 'u2', 'area': 'Louvre', 'date': '2019-05-03T10:00:00'}),
    ]
    report = IngestReport()
    dictionary = ItemDictionary()
    reviews = parse_reviews(lines, dictionary=dictionary, report=report)

    assert [(r.user_id, r.area_id, r.timestamp) for r in reviews] == [
        ('u1', 3, date(2019, 5, 1)), ('u2', 1, date(2019, 5, 3))]
    assert reviews[0].rating == 4
    assert report.reviews_read == 5
    assert report.reviews_skipped == 3
    assert report.malformed_lines == 1
    assert report.missing_area == 1
    assert report.malformed_dates == 1
    assert len(report.diagnostics) == 3
    assert dictionary.label_for(1) == 'Louvre'


def test_integer_area_cannot_reuse_a_named_id():
    lines = [
        json.dumps({'user': 'u1', 'area': 'Louvre', 'date': '2019-05-01'}),
        json.dumps({'user': 'u1', 'area': 0, 'date': '2019-05-02'}),
        json.dumps({'user': 'u1', 'area': 4, 'date': '2019-05-03'}),
        json.dumps({'user': 'u1', 'area': 'Orsay', 'date': '2019-05-04'}),
    ]
    report = IngestReport()
    dictionary = ItemDictionary()
    reviews = parse_reviews(lines, dictionary=dictionary, report=report)

    assert [r.area_id for r in reviews] == [0, 4, 2]
    assert dictionary.to_dict() == {'0': 'Louvre', '2': 'Orsay', '4': '4'}
    assert report.malformed_lines == 1
    assert report.reviews_skipped == 1
    assert 'line 2' in report.diagnostics[0]


def test_boolean_rating_is_ignored():
    lines = [
        json.dumps({'user': 'u1', 'area': 1, 'date': '2019-05-01', 'rating': True}),
        json.dumps({'user': 'u1', 'area': 2, 'date': '2019-05-02', 'rating': 5}),
    ]
    reviews = parse_reviews(lines)
    assert [r.rating for r in reviews] == [None, 5]


def test_item_dictionary_assigns_dense_ids():
    dictionary = ItemDictionary()
    assert dictionary.item_for('Louvre') == 0
    assert dictionary.item_for('Orsay') == 1
    assert dictionary.item_for('Louvre') == 0
    assert ItemDictionary.from_dict(dictionary.to_dict()).to_dict() == {'0': 'Louvre', '1': 'Orsay'}


def test_user_allow_list():
    lines = [json.dumps({'user': u, 'area': 1, 'date': '2019-05-01'}) for u in ('a', 'b', 'a')]
    report = IngestReport()
    reviews = parse_reviews(lines, IngestConfig(user_allow_list=frozenset({'a'})), report=report)
    assert [r.user_id for r in reviews] == ['a', 'a']
    assert report.filtered_users == 1


def test_ingest_reviews_end_to_end():
    reviews = [
        review('b', 0, 4), review('b', 1, 2),
        review('a', 0, 0), review('a', 2, 5), review('a', 3, 2),
        review('a', 30, 1),
        review('a', 50, 3), review('a', 52, 3),
    ]
    result = ingest_reviews(reviews)
    assert [s.items for s in result.sequences] == [(0, 5, 2), (3, 3), (4, 2)]
    assert result.report.users == 2
    assert result.report.stays == 4
    assert result.report.sequences_dropped == 1


def test_config_validation():
    with pytest.raises(ConfigError):
        IngestConfig(break_threshold_days=0)
    with pytest.raises(ConfigError):
        IngestConfig(min_sequence_length=0)


def main():
    """Run the ingestion tests."""
    print("Ingestion Test Suite")
    print("=" * 50)
    try:
        for name, test in sorted(globals().items()):
            if name.startswith('test_') and callable(test):
                test()
                print(f"  {name} passed")
        print("\nAll ingestion tests passed!")
    except Exception as e:
        print(f"\nTest failed with error: {e}")
        import traceback
        traceback.print_exc()
        sys.exit(1)


if __name__ == "__main__":
    main()

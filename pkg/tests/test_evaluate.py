import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wordfence.evaluate import DetectionReport, end_to_end_score, iou, is_scorable_word, match_detections
from wordfence.grid import Box
from wordfence.labelgen import WordAnnotation


def gt(x0, y0, x1, y1, text="word", ignore=False):
    return WordAnnotation(Box(x0, y0, x1, y1), text, ignore)


def test_iou_values():
    a = Box(0, 0, 10, 10)
    assert iou(a, a) == 1.0
    assert iou(a, Box(20, 20, 30, 30)) == 0.0
    assert iou(a, Box(10, 0, 20, 10)) == 0.0  # touching edges share no pixels
    assert iou(a, Box(5, 0, 15, 10)) == pytest.approx(1 / 3)


boxes = st.tuples(st.integers(0, 30), st.integers(0, 30), st.integers(1, 15), st.integers(1, 15)).map(
    lambda t: Box(t[0], t[1], t[0] + t[2], t[1] + t[3]))


@settings(max_examples=100, deadline=None)
@given(boxes, boxes, st.integers(1, 5))
def test_iou_symmetric_and_scale_free(a, b, k):
    assert iou(a, b) == iou(b, a)
    assert 0.0 <= iou(a, b) <= 1.0
    assert iou(a, a) == 1.0
    assert iou(a.scaled(k), b.scaled(k)) == pytest.approx(iou(a, b), abs=1e-15)


def test_exact_match():
    gts = [gt(0, 0, 10, 5), gt(20, 0, 30, 5)]
    r = match_detections([g.box for g in gts], gts)
    assert (r.true_positives, r.false_positives, r.false_negatives) == (2, 0, 0)
    assert r.precision == r.recall == r.f_score == 1.0


def test_one_detection_two_words():
    r = match_detections([Box(0, 0, 10, 5)], [gt(0, 0, 10, 5), gt(20, 0, 30, 5)])
    assert (r.true_positives, r.false_positives, r.false_negatives) == (1, 0, 1)
    assert r.precision == 1.0 and r.recall == 0.5 and r.f_score == pytest.approx(2 / 3)


def test_duplicate_detection_is_penalized():
    r = match_detections([Box(0, 0, 10, 10), Box(1, 0, 10, 10)], [gt(0, 0, 10, 10)])
    assert (r.true_positives, r.false_positives, r.false_negatives) == (1, 1, 0)
    assert r.matches == [(0, 0, 1.0)]


def test_greedy_prefers_higher_iou():
    # det 0 overlaps gt 0 at 0.6; det 1 overlaps gt 0 at 0.9 and nothing else
    g = [gt(0, 0, 10, 10)]
    d = [Box(0, 0, 6, 10), Box(0, 0, 9, 10)]
    r = match_detections(d, g)
    assert r.matches[0][:2] == (1, 0)


def test_ignored_word_absorbs_detection():
    gts = [gt(0, 0, 10, 10, "###", ignore=True), gt(20, 0, 30, 10)]
    r = match_detections([Box(0, 0, 10, 10), Box(20, 0, 30, 10)], gts)
    assert (r.true_positives, r.false_positives, r.false_negatives) == (1, 0, 0)
    assert r.discarded == [0]


def test_empty_inputs():
    r = match_detections([], [])
    assert (r.true_positives, r.false_positives, r.false_negatives) == (0, 0, 0)
    assert r.precision == r.recall == r.f_score == 0.0


def test_report_addition():
    total = DetectionReport(1, 2, 3) + DetectionReport(4, 0, 1)
    assert total.summary()["tp"] == 5 and total.recall == pytest.approx(5 / 9)


def brute_force_tp(dets, gts, thresh=0.5):
    best = 0
    for perm in itertools.permutations(range(len(dets)), min(len(dets), len(gts))):
        tp = sum(iou(dets[d], gts[g].box) >= thresh for g, d in enumerate(perm))
        best = max(best, tp)
    if len(dets) < len(gts):
        for perm in itertools.permutations(range(len(gts)), len(dets)):
            best = max(best, sum(iou(dets[d], gts[g].box) >= thresh for d, g in enumerate(perm)))
    return best


@pytest.mark.parametrize("seed", range(30))
def test_greedy_matches_optimal_assignment(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 7))
    gts = [gt(12 * i, 0, 12 * i + 8, 6) for i in range(n)]
    dets = []
    for g in gts[: int(rng.integers(0, n + 1))]:
        jx, jy = rng.integers(-2, 3, size=2)
        dets.append(Box(g.box.x0 + jx, g.box.y0 + jy, g.box.x1 + jx, g.box.y1 + jy))
    dets = dets[: 6]
    r = match_detections(dets, gts)
    assert r.true_positives == brute_force_tp(dets, gts)
    assert r.true_positives + r.false_positives == len(dets)
    assert r.true_positives + r.false_negatives == len(gts)


@settings(max_examples=50, deadline=None)
@given(st.lists(boxes, max_size=5), st.lists(boxes, max_size=5), st.integers(2, 4))
def test_count_identities_and_scaling(dets, gboxes, k):
    gts = [gt(b.x0, b.y0, b.x1, b.y1) for b in gboxes]
    r = match_detections(dets, gts)
    assert r.true_positives + r.false_positives == len(dets)
    assert r.true_positives + r.false_negatives == len(gts)
    scaled = match_detections([d.scaled(k) for d in dets],
                              [gt(*g.box.scaled(k).as_tuple()) for g in gts])
    assert scaled.summary() == r.summary()


@pytest.mark.parametrize("word, ok", [("the", False), ("hotel", True), ("HO-TEL", False), ("2017", True),
                                      ("café", False), ("ab1", False)])
def test_scorable_words(word, ok):
    assert is_scorable_word(word) is ok


def test_end_to_end_short_word_ignored():
    r = end_to_end_score([], [gt(0, 0, 10, 5, "the")])
    assert (r.true_positives, r.false_positives, r.false_negatives) == (0, 0, 0)
    r = end_to_end_score([(Box(0, 0, 10, 5), "the")], [gt(0, 0, 10, 5, "the")])
    assert (r.true_positives, r.false_positives, r.false_negatives) == (0, 0, 0)


def test_end_to_end_case_insensitive():
    r = end_to_end_score([(Box(0, 0, 10, 5), "HOTEL")], [gt(0, 0, 10, 5, "hotel")])
    assert (r.true_positives, r.false_positives, r.false_negatives) == (1, 0, 0)


def test_end_to_end_wrong_word():
    r = end_to_end_score([(Box(0, 0, 10, 5), "hotel")], [gt(0, 0, 10, 5, "motel")])
    assert (r.true_positives, r.false_positives, r.false_negatives) == (0, 1, 1)

"""Unit tests for R@K, λ@K and pair-excluded λ@K."""

import numpy as np
import pytest

from tests.conftest import make_set
from xmodal.core.exceptions import (
    InsufficientEntriesError,
    MetricError,
    UnknownClassError,
)
from xmodal.core.metrics import (
    evaluate,
    evaluate_ranked,
    recall_at_k,
    semantic_map_at_k,
    semantic_map_excluding_pairs,
)
from xmodal.core.retrieval import restrict_queries, retrieve
from xmodal.core.synthgen import oracle_similarity, semantic_miss_rate
from xmodal.schemas.embedding import Modality
from xmodal.schemas.metrics import MetricConfig, MetricReport, ReportScale
from xmodal.schemas.retrieval import Direction, RankedList
from xmodal.schemas.synth import SemanticOracle


def _single(similarities, query_id=0, first_gallery_id=100) -> list[RankedList]:
    ids = list(range(first_gallery_id, first_gallery_id + len(similarities)))
    return [RankedList(query_id=query_id, gallery_ids=ids, similarities=similarities)]


def test_semantic_map_first_worked_example():
    ranked = _single([0.82, 0.81, 0.78, 0.78, 0.77])
    value = semantic_map_at_k(ranked, 5)
    assert value == pytest.approx(0.792, abs=1e-9)
    assert f"{value:.2f}" == "0.79"


def test_semantic_map_second_worked_example():
    ranked = _single([0.82, 0.75, 0.69, 0.68, 0.64])
    assert semantic_map_at_k(ranked, 1) == pytest.approx(0.82, abs=1e-9)
    value = semantic_map_at_k(ranked, 5)
    assert value == pytest.approx(0.716, abs=1e-9)
    assert f"{value:.2f}" == "0.72"


def test_semantic_map_identical_gallery_is_one(perfect_set):
    ranked = retrieve("i2t", perfect_set, 1)
    assert semantic_map_at_k(ranked, 1) == pytest.approx(1.0)


def test_semantic_map_needs_enough_entries():
    with pytest.raises(InsufficientEntriesError):
        semantic_map_at_k(_single([0.9, 0.8]), 3)


def test_metrics_reject_empty_input_and_bad_k():
    with pytest.raises(MetricError):
        semantic_map_at_k([], 1)
    with pytest.raises(MetricError):
        recall_at_k([], {}, 1)
    with pytest.raises(MetricError):
        recall_at_k(_single([0.5]), {0: 0, 100: 0}, 0)


def test_recall_perfect_and_zero():
    ranked = _single([0.9, 0.1])
    assert recall_at_k(ranked, {0: 1, 100: 1, 101: 2}, 1) == 100.0
    classes = {0: 1, 100: 2, 101: 3}
    assert recall_at_k(ranked, classes, 1) == 0.0
    assert recall_at_k(ranked, classes, 5) == 0.0


def test_recall_hand_count():
    ranked, classes = [], {}
    for q in range(10):
        gallery = [1000 + 10 * q + m for m in range(6)]
        for m, g in enumerate(gallery):
            classes[g] = q if (q < 3 and m == 4) else 100 + m
        classes[q] = q
        ranked.append(
            RankedList(
                query_id=q, gallery_ids=gallery, similarities=np.linspace(1, 0, 6)
            )
        )
    assert recall_at_k(ranked, classes, 4) == 0.0
    assert recall_at_k(ranked, classes, 5) == 30.0


def test_recall_unknown_class():
    with pytest.raises(UnknownClassError):
        recall_at_k(_single([0.5]), {0: 0}, 1)


def test_pair_excluded_hand_filter():
    ranked = _single([0.9, 0.8, 0.7])
    classes = {0: 0, 100: 0, 101: 1, 102: 2}
    assert semantic_map_excluding_pairs(ranked, classes, 2) == pytest.approx(0.75)


def test_pair_excluded_equals_plain_without_same_class_entries():
    ranked = _single([0.9, 0.8, 0.7])
    classes = {0: 0, 100: 1, 101: 2, 102: 3}
    for k in (1, 2, 3):
        assert semantic_map_excluding_pairs(ranked, classes, k) == semantic_map_at_k(
            ranked, k
        )


def test_pair_excluded_with_only_own_class():
    ranked = _single([0.9, 0.8])
    with pytest.raises(InsufficientEntriesError):
        semantic_map_excluding_pairs(ranked, {0: 0, 100: 0, 101: 0}, 1)


def _naive_rankings(queries, gallery):
    """Double-loop cosine and a full sort over plain Python lists."""
    rankings = {}
    for qid, q in queries:
        scored = []
        for gid, g in gallery:
            dot = sum(a * b for a, b in zip(q, g))
            norm = (sum(a * a for a in q) * sum(b * b for b in g)) ** 0.5
            scored.append((-dot / norm, gid))
        scored.sort()
        rankings[qid] = [(gid, -s) for s, gid in scored]
    return rankings


def _naive_metrics(rankings, classes, k):
    lambda_sum = excluded_sum = 0.0
    hits = 0
    for qid, entries in rankings.items():
        lambda_sum += sum(s for _, s in entries[:k]) / k
        others = [s for gid, s in entries if classes[gid] != classes[qid]]
        excluded_sum += sum(others[:k]) / k
        hits += any(classes[gid] == classes[qid] for gid, _ in entries[:k])
    n = len(rankings)
    return 100.0 * hits / n, lambda_sum / n, excluded_sum / n


def test_metrics_match_naive_oracle():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n_images = int(rng.integers(1, 21))
        n_texts = int(rng.integers(20, 101))
        dim = int(rng.integers(2, 33))
        n_classes = int(rng.integers(2, 10))
        rows = [(i, int(rng.integers(n_classes)), Modality.IMAGE) for i in range(n_images)]
        rows += [
            (n_images + j, int(rng.integers(n_classes)), Modality.TEXT)
            for j in range(n_texts)
        ]
        embedding_set = make_set(rows, rng.normal(size=(len(rows), dim)))
        classes = embedding_set.class_map
        images = [(r.id, r.vector.tolist()) for r in embedding_set.records[:n_images]]
        texts = [(r.id, r.vector.tolist()) for r in embedding_set.records[n_images:]]
        rankings = _naive_rankings(images, texts)
        ranked = retrieve("i2t", embedding_set, embedding_set.total)

        for k in (1, 5, 10):
            cross = min(
                sum(1 for t, _ in texts if classes[t] != classes[i]) for i, _ in images
            )
            recall, lam, excluded = _naive_metrics(rankings, classes, k)
            assert recall_at_k(ranked, classes, k) == pytest.approx(recall, abs=1e-9)
            assert semantic_map_at_k(ranked, k) == pytest.approx(lam, abs=1e-9)
            if cross >= k:
                assert semantic_map_excluding_pairs(
                    ranked, classes, k
                ) == pytest.approx(excluded, abs=1e-9)


def test_monotonicity_over_random_lists():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        length = int(rng.integers(10, 30))
        sims = np.sort(rng.uniform(-1, 1, size=length))[::-1]
        gallery = list(range(1, length + 1))
        classes = {0: 0, **{g: int(rng.integers(0, 4)) for g in gallery}}
        ranked = [RankedList(query_id=0, gallery_ids=gallery, similarities=sims)]
        recalls = [recall_at_k(ranked, classes, k) for k in range(1, 11)]
        lambdas = [semantic_map_at_k(ranked, k) for k in range(1, 11)]
        assert all(a <= b for a, b in zip(recalls, recalls[1:]))
        assert all(a >= b - 1e-12 for a, b in zip(lambdas, lambdas[1:]))
        assert all(-1.0 <= v <= 1.0 for v in lambdas)


def test_metric_config_parsing():
    assert MetricConfig(ks="1,5,10").ks == (1, 5, 10)
    assert MetricConfig(ks="2").k_max == 2
    for bad in ("5,1", "0,1", "", "1,1"):
        with pytest.raises(ValueError):
            MetricConfig(ks=bad)


def test_evaluate_perfect_set(perfect_set):
    reports = evaluate(perfect_set, MetricConfig(ks=(1, 2)))
    assert set(reports) == {Direction.IMAGE_TO_TEXT, Direction.TEXT_TO_IMAGE}
    for report in reports.values():
        assert report.n_queries == 3
        assert report.recall[1] == 100.0
        assert report.semantic_map[1] == pytest.approx(1.0)
        assert report.semantic_map_excluded[1] == pytest.approx(0.0, abs=1e-12)


def test_evaluate_without_pair_exclusion(perfect_set):
    cfg = MetricConfig(ks=(1,), exclude_pairs=False)
    report = evaluate(perfect_set, cfg, [Direction.TEXT_TO_IMAGE])[
        Direction.TEXT_TO_IMAGE
    ]
    assert report.semantic_map_excluded is None


def test_percent_scale_is_unit_times_100(caption_set):
    unit = evaluate(caption_set, MetricConfig(ks=(1,)))
    percent = evaluate(
        caption_set, MetricConfig(ks=(1,), report_scale=ReportScale.PERCENT)
    )
    for direction in unit:
        assert percent[direction].scale == ReportScale.PERCENT
        assert percent[direction].recall == unit[direction].recall
        assert percent[direction].semantic_map[1] == pytest.approx(
            100.0 * unit[direction].semantic_map[1]
        )
        assert percent[direction].semantic_map_excluded[1] == pytest.approx(
            100.0 * unit[direction].semantic_map_excluded[1]
        )


def test_evaluate_ranked_and_rescale_round_trip(caption_set):
    ranked = retrieve("i2t", caption_set, caption_set.total)
    report = evaluate_ranked(
        "i2t", ranked, caption_set.class_map, MetricConfig(ks=(1, 5))
    )
    back = report.rescaled("percent").rescaled("unit")
    assert back.semantic_map == pytest.approx(report.semantic_map)


def test_report_rejects_recall_out_of_range():
    with pytest.raises(ValueError):
        MetricReport(
            direction="i2t", n_queries=1, recall={1: 101.0}, semantic_map={1: 0.5}
        )


@pytest.mark.parametrize("direction", list(Direction))
def test_pair_excluded_lambda_follows_oracle(direction):
    # classes 0 and 1 share a concept, class 2 is orthogonal to both
    oracle = SemanticOracle(
        class_ids=(0, 1, 2),
        similarity=[[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    )
    concepts = {0: [1.0, 0.0, 0.0], 1: [1.0, 0.0, 0.0], 2: [0.0, 1.0, 0.0]}
    rows, vectors = [], []
    for class_id in range(3):
        modalities = (Modality.IMAGE, Modality.TEXT, Modality.TEXT)
        for offset, modality in enumerate(modalities):
            rows.append((3 * class_id + offset, class_id, modality))
            vectors.append(concepts[class_id])
    embedding_set = make_set(rows, vectors)
    classes = embedding_set.class_map
    ranked = retrieve(direction, embedding_set, embedding_set.total)

    for class_id in range(3):
        ids = [r.query_id for r in ranked if classes[r.query_id] == class_id]
        others = [other for other in range(3) if other != class_id]
        expected = max(oracle_similarity(oracle, class_id, o) for o in others)
        value = semantic_map_excluding_pairs(restrict_queries(ranked, ids), classes, 1)
        assert value == pytest.approx(expected, abs=1e-12)
    assert semantic_map_at_k(ranked, 1) == pytest.approx(1.0)
    # class 1 queries meet the tied class 0 entries first
    assert semantic_miss_rate(ranked, classes, oracle, 1) == pytest.approx(1 / 3)


def test_report_rejects_lambda_out_of_range():
    with pytest.raises(ValueError):
        MetricReport(
            direction="i2t", n_queries=1, recall={1: 100.0}, semantic_map={1: 1.5}
        )
    with pytest.raises(ValueError):
        MetricReport(
            direction="t2i",
            n_queries=1,
            recall={1: 100.0},
            semantic_map={1: 0.5},
            semantic_map_excluded={1: -2.0},
        )
    percent = MetricReport(
        direction="i2t",
        n_queries=1,
        recall={1: 100.0},
        semantic_map={1: 67.24},
        scale=ReportScale.PERCENT,
    )
    assert percent.semantic_map[1] == 67.24

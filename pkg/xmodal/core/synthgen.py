"""Synthetic cross-modal datasets with controllable semantic overlap.

Every class is given a unit concept vector. Concepts of distinct classes are
mutually orthogonal, except that a chosen fraction of the class pairs
``(0, 1), (2, 3), ...`` share one concept. Two classes sharing a concept are
different pair groups with identical meaning: retrieving one for the other
is semantically right yet counts as a miss for R@K.

- Images are ``tiles × tiles`` grids of colored squares whose colors are a
  fixed random projection of the class concept plus per-image noise.
- Each concept owns a region of the vocabulary. Word vectors are a fixed
  random projection of the concept plus per-word noise, squashed into
  ``[-1, 1]``. A text is a sample of distinct words from its class's region.
"""

import logging
import math
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from xmodal.core.config import settings
from xmodal.core.dataset import write_encoder_config, write_manifest
from xmodal.core.encoder import encode_descriptions, save_vocabulary, write_ppm
from xmodal.core.exceptions import ConfigError, UnknownClassError
from xmodal.core.metrics import evaluate_ranked
from xmodal.core.report import report_rows
from xmodal.core.retrieval import restrict_queries, retrieve
from xmodal.core.seeding import stage_rng
from xmodal.models.training import embed_dataset, train
from xmodal.schemas.dataset import LabeledCanvas, ManifestEntry
from xmodal.schemas.embedding import Modality
from xmodal.schemas.encoder import EncoderConfig, Vocabulary, WordVector
from xmodal.schemas.metrics import MetricConfig
from xmodal.schemas.retrieval import Direction, RankedList
from xmodal.schemas.synth import (
    GroupMetrics,
    OverlapReport,
    SemanticOracle,
    SynthConfig,
    SynthDataset,
    TextSample,
)
from xmodal.schemas.training import TrainConfig

logger = logging.getLogger(__name__)

SEMANTIC_MATCH = 0.99


def _assign_concepts(cfg: SynthConfig) -> np.ndarray:
    """Concept index of every class; overlapped pairs share an index."""
    n_pairs = cfg.classes // 2
    n_overlap = math.floor(cfg.overlap_rho * n_pairs + 0.5)
    owner = np.arange(cfg.classes)
    if n_overlap:
        rng = stage_rng(cfg.seed, "synth.overlap")
        for pair in np.sort(rng.choice(n_pairs, size=n_overlap, replace=False)):
            owner[2 * pair + 1] = owner[2 * pair]
    _, concept_of = np.unique(owner, return_inverse=True)
    return concept_of


def _concepts(cfg: SynthConfig, count: int) -> np.ndarray:
    """``count`` orthonormal concept vectors, one per row."""
    rng = stage_rng(cfg.seed, "synth.concepts")
    q, _ = np.linalg.qr(rng.standard_normal((cfg.concept_dim, count)))
    return q.T


def _build_oracle(class_vectors: np.ndarray) -> SemanticOracle:
    gram = np.round(class_vectors @ class_vectors.T, 9)
    gram = (gram + gram.T) / 2.0
    np.fill_diagonal(gram, 1.0)
    return SemanticOracle(class_ids=tuple(range(len(class_vectors))), similarity=gram)


def _build_vocabulary(
    cfg: SynthConfig, concepts: np.ndarray
) -> tuple[Vocabulary, list[list[str]]]:
    regions = np.array_split(np.arange(cfg.vocab_size), len(concepts))
    smallest = min(len(r) for r in regions)
    if smallest < cfg.words_per_text:
        raise ConfigError(
            f"vocab_size {cfg.vocab_size} gives {smallest} words per concept, fewer "
            f"than words_per_text ({cfg.words_per_text})",
            key="synth.vocab_size",
        )
    rng = stage_rng(cfg.seed, "synth.vocabulary")
    projection = rng.standard_normal((cfg.word_dim, cfg.concept_dim))
    entries: dict[str, WordVector] = {}
    words_of: list[list[str]] = []
    for concept, region in zip(concepts, regions):
        words = []
        for index in region:
            word = f"w{index:04d}"
            noise = cfg.noise_sigma * rng.standard_normal(cfg.word_dim)
            entries[word] = WordVector(word=word, vector=np.tanh(projection @ concept + noise))
            words.append(word)
        words_of.append(words)
    return Vocabulary(dim=cfg.word_dim, entries=entries), words_of


def _render_image(
    base: np.ndarray, cfg: SynthConfig, encoder: EncoderConfig, rng: np.random.Generator
) -> np.ndarray:
    values = 127.5 * (1.0 + np.tanh(base + cfg.noise_sigma * rng.standard_normal(base.shape)))
    tiles = np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)
    tiles = tiles.reshape(cfg.tiles, cfg.tiles, 3)
    size_h, size_w = encoder.canvas_h // cfg.tiles, encoder.canvas_w // cfg.tiles
    return np.repeat(np.repeat(tiles, size_h, axis=0), size_w, axis=1)


def generate(cfg: SynthConfig, encoder: Optional[EncoderConfig] = None) -> SynthDataset:
    """Generate a dataset; identical configurations give identical datasets.

    Args:
        cfg: Dataset parameters.
        encoder: Text encoder settings; defaults to a square canvas of
            ``cfg.canvas_size``. Images are rendered at the same size.

    Raises:
        ConfigError: The vocabulary is too small for ``words_per_text`` or the
            canvas is not divisible into ``tiles``.
    """
    encoder = encoder or EncoderConfig(canvas_h=cfg.canvas_size, canvas_w=cfg.canvas_size)
    if encoder.canvas_h % cfg.tiles or encoder.canvas_w % cfg.tiles:
        raise ConfigError(
            f"canvas {encoder.canvas_h}×{encoder.canvas_w} is not divisible into "
            f"{cfg.tiles}×{cfg.tiles} tiles",
            key="synth.tiles",
        )
    if cfg.overlap_rho > 0 and cfg.classes < 2:
        logger.warning("overlap_rho has no effect with fewer than 2 classes")

    concept_of = _assign_concepts(cfg)
    concepts = _concepts(cfg, int(concept_of.max()) + 1)
    oracle = _build_oracle(concepts[concept_of])
    vocabulary, words_of = _build_vocabulary(cfg, concepts)
    image_projection = stage_rng(cfg.seed, "synth.image-projection").standard_normal(
        (cfg.tiles * cfg.tiles * 3, cfg.concept_dim)
    )

    images: list[LabeledCanvas] = []
    texts: list[TextSample] = []
    next_id = 0
    for class_id in range(cfg.classes):
        rng = stage_rng(cfg.seed, f"synth.class.{class_id}")
        concept = concept_of[class_id]
        base = image_projection @ concepts[concept]
        for _ in range(cfg.images_per_class):
            pixels = _render_image(base, cfg, encoder, rng)
            images.append(
                LabeledCanvas(
                    id=next_id, class_id=class_id, modality=Modality.IMAGE, pixels=pixels
                )
            )
            next_id += 1
        region = words_of[concept]
        for _ in range(cfg.texts_per_class):
            picks = rng.choice(len(region), size=cfg.words_per_text, replace=False)
            texts.append(
                TextSample(
                    id=next_id, class_id=class_id, tokens=tuple(region[i] for i in picks)
                )
            )
            next_id += 1

    logger.info(
        f"Generated {cfg.classes} classes ({int(concept_of.max()) + 1} concepts), "
        f"{len(images)} images, {len(texts)} texts, rho={cfg.overlap_rho}"
    )
    return SynthDataset(
        config=cfg,
        encoder=encoder,
        images=tuple(images),
        texts=tuple(texts),
        vocabulary=vocabulary,
        oracle=oracle,
    )


def oracle_similarity(oracle: SemanticOracle, class_a: int, class_b: int) -> float:
    """Semantic similarity of two classes.

    Raises:
        UnknownClassError: Either class is not in the oracle.
    """
    a, b = oracle.index(class_a), oracle.index(class_b)
    if a is None or b is None:
        missing = class_a if a is None else class_b
        raise UnknownClassError(f"class {missing} is not known to the oracle")
    return float(oracle.similarity[a, b])


def overlapped_classes(oracle: SemanticOracle) -> set[int]:
    """Classes that share their concept with at least one other class."""
    matches = oracle.similarity >= SEMANTIC_MATCH
    np.fill_diagonal(matches, False)
    return {oracle.class_ids[i] for i in np.flatnonzero(matches.any(axis=1))}


def materialize(dataset: SynthDataset, workers: Optional[int] = None) -> list[LabeledCanvas]:
    """Images and encoded texts as network inputs, ordered by id."""
    encoded = encode_descriptions(
        [t.tokens for t in dataset.texts],
        dataset.vocabulary,
        dataset.encoder,
        workers or settings.WORKERS,
    )
    items = list(dataset.images) + [
        LabeledCanvas(
            id=t.id, class_id=t.class_id, modality=Modality.TEXT, pixels=e.pixels
        )
        for t, e in zip(dataset.texts, encoded)
    ]
    return sorted(items, key=lambda item: item.id)


def write_dataset(dataset: SynthDataset, out_dir: str | Path) -> Path:
    """Write ``manifest.tsv``, ``images/<id>.ppm``, ``vocab.txt`` and ``encoder.env``.

    Returns:
        Path: The manifest path.
    """
    out_dir = Path(out_dir)
    entries = [
        ManifestEntry(
            id=image.id,
            class_id=image.class_id,
            modality=Modality.IMAGE,
            value=f"images/{image.id}.ppm",
        )
        for image in dataset.images
    ]
    for image in dataset.images:
        write_ppm(image.pixels, out_dir / "images" / f"{image.id}.ppm")
    entries += [
        ManifestEntry(
            id=t.id, class_id=t.class_id, modality=Modality.TEXT, value=" ".join(t.tokens)
        )
        for t in dataset.texts
    ]
    entries.sort(key=lambda e: e.id)
    manifest = out_dir / "manifest.tsv"
    write_manifest(entries, manifest)
    save_vocabulary(dataset.vocabulary, out_dir / "vocab.txt")
    write_encoder_config(dataset.encoder, out_dir)
    logger.info(f"Wrote synthetic dataset ({len(entries)} items) to {out_dir}")
    return manifest


def semantic_miss_rate(
    ranked: Sequence[RankedList],
    classes: Mapping[int, int],
    oracle: SemanticOracle,
    k: int,
) -> float:
    """Share of top-``k`` entries from another class that the oracle rates identical."""
    if not ranked:
        return 0.0
    misses = 0
    for ranked_list in ranked:
        query_class = classes[ranked_list.query_id]
        for gallery_id in ranked_list.gallery_ids[:k]:
            other = classes[int(gallery_id)]
            if (
                other != query_class
                and oracle_similarity(oracle, query_class, other) >= SEMANTIC_MATCH
            ):
                misses += 1
    return misses / (len(ranked) * k)


def overlap_experiment(
    cfg: SynthConfig,
    train_cfg: TrainConfig,
    metric_cfg: MetricConfig = MetricConfig(),
    workers: Optional[int] = None,
) -> OverlapReport:
    """Train on a synthetic dataset and compare metrics across query groups.

    Queries are split into those whose class overlaps another class and the
    rest. With ``overlap_rho = 0`` the run is a control: there is no
    overlapped group and the semantic miss rate is zero by construction.
    λ gaps are expressed at ``metric_cfg.report_scale``.
    """
    if cfg.overlap_rho == 0:
        logger.warning("overlap_rho is 0: running as a control without overlapping classes")
    metric_cfg = metric_cfg.model_copy(update={"exclude_pairs": True})
    dataset = generate(cfg)
    items = materialize(dataset, workers)
    result = train(items, train_cfg, workers)
    embeddings = embed_dataset(result.params, items, train_cfg.augmentation, workers)
    classes = embeddings.class_map
    overlapped = overlapped_classes(dataset.oracle)

    groups: list[GroupMetrics] = []
    miss: dict[Direction, dict[int, float]] = {}
    gaps: dict[Direction, Optional[dict[int, float]]] = {}
    for direction in Direction:
        ranked = retrieve(direction, embeddings, embeddings.total)
        members = {
            "overlapped": [r.query_id for r in ranked if classes[r.query_id] in overlapped],
            "other": [r.query_id for r in ranked if classes[r.query_id] not in overlapped],
            "all": [r.query_id for r in ranked],
        }
        reports = {}
        for group, ids in members.items():
            reports[group] = (
                evaluate_ranked(direction, restrict_queries(ranked, ids), classes, metric_cfg)
                if ids
                else None
            )
            groups.append(GroupMetrics(direction=direction, group=group, report=reports[group]))
        miss[direction] = {
            k: semantic_miss_rate(ranked, classes, dataset.oracle, k) for k in metric_cfg.ks
        }
        if reports["overlapped"] is not None and reports["other"] is not None:
            gaps[direction] = {
                k: reports["overlapped"].semantic_map_excluded[k]
                - reports["other"].semantic_map_excluded[k]
                for k in metric_cfg.ks
            }
        else:
            gaps[direction] = None

    return OverlapReport(
        rho=cfg.overlap_rho,
        seed=cfg.seed,
        overlapped_classes=tuple(sorted(overlapped)),
        groups=tuple(groups),
        semantic_miss_rate=miss,
        lambda_gap=gaps,
        final_epoch=result.log[-1],
    )


def render_overlap_report(report: OverlapReport) -> str:
    """Deterministic TSV rendering of an overlap experiment."""
    lines = [
        f"# rho\t{report.rho}",
        f"# seed\t{report.seed}",
        f"# overlapped_classes\t{','.join(str(c) for c in report.overlapped_classes)}",
        "direction\tgroup\tmetric\tK\tvalue",
    ]
    for entry in report.groups:
        if entry.report is None:
            continue
        for row in report_rows(entry.report):
            lines.append(
                f"{entry.direction.value}\t{entry.group}\t"
                f"{row.metric}\t{row.k}\t{row.value:.6f}"
            )
    for direction, values in report.semantic_miss_rate.items():
        for k, value in values.items():
            lines.append(f"{direction.value}\tall\tsemantic_miss\t{k}\t{value:.6f}")
    for direction, gap in report.lambda_gap.items():
        for k, value in (gap or {}).items():
            lines.append(
                f"{direction.value}\toverlapped-other\tlambda_excl_gap\t{k}\t{value:.6f}"
            )
    return "\n".join(lines) + "\n"

import concurrent.futures
import hashlib
import json
import logging
import math
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import fsspec
import numpy as np
from pydantic import BaseModel
from scipy.spatial.distance import pdist, squareform

from ssmfusion.impl.filesystem import DatasetFSSpec, DatasetItemFSSpec
from ssmfusion.models import (
    AudioClip,
    FilterBank,
    FrameSequence,
    LabeledCollection,
    PipelineConfig,
    PipelineName,
    RetrievalReport,
    SquareMatrix,
    TimeOrderedPointCloud,
)
from ssmfusion.ops.core import pairwise_distance_matrix, resize_matrix
from ssmfusion.ops.ingest import add_noise_at_psnr, frames_to_topc, mfcc
from ssmfusion.ops.kernel import gaussian_similarity
from ssmfusion.ops.retrieval import downstream_fuse, mean_average_precision, mean_pr_curve, per_class_map
from ssmfusion.ops.scattering import build_filter_bank, scattering_transform
from ssmfusion.ops.snf import snf_fuse
from ssmfusion.util.cache import FeatureCache, content_key, fits_in_memory
from ssmfusion.util.io import write_csv, write_matrix, write_pgm

logger = logging.getLogger(__name__)

Branch = Literal["audio", "video", "fused"]

REPORT_FILE = "report.json"
PR_FILE = "pr_curve.csv"


class PipelineVariant(BaseModel):
    """How a named pipeline turns items into object-level comparisons.

    Attributes:
        name: The pipeline name.
        features: "l2" compares resized similarity matrices directly, "scatter" compares their scattering
            coefficients.
        branches: Per-item matrices that are compared: one modality, the upstream fused matrix, or several of them
            fused downstream at the object level.
    """

    model_config = {"frozen": True}

    name: PipelineName
    features: Literal["l2", "scatter"]
    branches: Tuple[Branch, ...]

    @property
    def late(self) -> bool:
        """Whether object-level matrices are fused downstream."""
        return len(self.branches) > 1

    @property
    def modalities(self) -> Tuple[str, ...]:
        needed = set()
        for b in self.branches:
            needed.update(("audio", "video") if b == "fused" else (b,))
        return tuple(m for m in ("audio", "video") if m in needed)


PIPELINES: Dict[str, PipelineVariant] = {
    v.name: v
    for v in (
        PipelineVariant(name="AudioL2", features="l2", branches=("audio",)),
        PipelineVariant(name="VideoL2", features="l2", branches=("video",)),
        PipelineVariant(name="FusedL2", features="l2", branches=("fused",)),
        PipelineVariant(name="AudioScatter", features="scatter", branches=("audio",)),
        PipelineVariant(name="VideoScatter", features="scatter", branches=("video",)),
        PipelineVariant(name="FusedScatter", features="scatter", branches=("fused",)),
        PipelineVariant(name="AVLateFusedL2", features="l2", branches=("audio", "video")),
        PipelineVariant(name="AllFusedL2", features="l2", branches=("audio", "video", "fused")),
        PipelineVariant(name="AVLateFusedScatter", features="scatter", branches=("audio", "video")),
        PipelineVariant(name="AllFusedScatter", features="scatter", branches=("audio", "video", "fused")),
    )
}


def item_seed(seed: int, name: str, modality: str) -> int:
    """Noise seed of one item modality, independent of item order."""
    digest = hashlib.blake2b(f"{seed}/{name}/{modality}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def emit_heatmap(m: SquareMatrix, path: str) -> np.ndarray:
    """Render a matrix as an 8-bit PGM, min-max normalized to [0, 255]. A constant matrix renders as 128.

    Args:
        m: The matrix to render.
        path: Destination path or fsspec URL.

    Returns:
        np.ndarray: The written pixels.
    """
    v = m.values
    lo, hi = float(v.min()), float(v.max())
    if hi > lo:
        pixels = np.rint((v - lo) / (hi - lo) * 255.0).astype(np.uint8)
    else:
        pixels = np.full(v.shape, 128, dtype=np.uint8)

    write_pgm(pixels, path)
    return pixels


def _to_topc(
    raw: Union[AudioClip, FrameSequence, TimeOrderedPointCloud],
    config: PipelineConfig,
    seed: int,
) -> TimeOrderedPointCloud:
    """Inject noise into the raw signal, then extract the point cloud."""
    psnr_db = config.noise_psnr_db

    if isinstance(raw, AudioClip):
        if psnr_db is not None:
            raw = AudioClip(samples=add_noise_at_psnr(raw.samples, psnr_db, seed), sample_rate=raw.sample_rate)
        return mfcc(raw, config.mfcc)

    if isinstance(raw, FrameSequence):
        if psnr_db is not None:
            raw = FrameSequence(frames=add_noise_at_psnr(raw.frames, psnr_db, seed, clip=(0.0, 1.0)))
        return frames_to_topc(raw)

    if psnr_db is not None:
        return TimeOrderedPointCloud(points=add_noise_at_psnr(raw.points, psnr_db, seed))
    return raw


def item_matrices(
    topcs: Dict[str, TimeOrderedPointCloud],
    config: PipelineConfig,
    fuse: bool = True,
) -> Dict[str, SquareMatrix]:
    """Per-item similarity matrices at common_dim: one per modality, plus the upstream fused one.

    Args:
        topcs: Point cloud per modality.
        config: Pipeline configuration.
        fuse: Also compute the fused matrix. Requires both modalities.
    """
    ws = {
        m: resize_matrix(gaussian_similarity(pairwise_distance_matrix(t), config.kernel), config.common_dim)
        for m, t in topcs.items()
    }
    if fuse:
        ws["fused"] = snf_fuse([ws["audio"], ws["video"]], config.snf)
    return ws


def _feature_params(config: PipelineConfig, variant: PipelineVariant, branch: str) -> Dict:
    params = {
        "branch": branch,
        "features": variant.features,
        "common_dim": config.common_dim,
        "kernel": config.kernel.model_dump(),
        "mfcc": config.mfcc.model_dump(),
    }
    if branch == "fused":
        params["snf"] = config.snf.model_dump()
    if variant.features == "scatter":
        params["scattering"] = config.scattering.model_dump()
    return params


class _ItemWorker:
    """Computes the feature vectors of one item for every branch of a variant."""

    def __init__(
        self,
        config: PipelineConfig,
        variant: PipelineVariant,
        bank: Optional[FilterBank],
        cache: Optional[FeatureCache],
    ):
        self.config = config
        self.variant = variant
        self.bank = bank
        self.cache = cache

    def topcs(self, item: DatasetItemFSSpec) -> Dict[str, TimeOrderedPointCloud]:
        loaders = {"audio": item.load_audio, "video": item.load_video}
        return {
            m: _to_topc(loaders[m](), self.config, item_seed(self.config.seed, item.name, m))
            for m in self.variant.modalities
        }

    def _vectorize(self, w: SquareMatrix) -> np.ndarray:
        if self.variant.features == "l2":
            return w.values.ravel()
        return scattering_transform(w, self.bank).coefficients

    def _dump(self, item: DatasetItemFSSpec, ws: Dict[str, SquareMatrix]) -> None:
        base = f"{self.config.output_dir.rstrip('/')}/intermediates/{item.name}"
        for branch, w in ws.items():
            write_matrix(w, f"{base}/W_{branch}.ssmf")
            emit_heatmap(w, f"{base}/W_{branch}.pgm")

    def __call__(self, item: DatasetItemFSSpec) -> Dict[str, np.ndarray]:
        topcs = self.topcs(item)
        keys = {
            b: content_key(
                [topcs[m].points for m in self.variant.modalities if b in (m, "fused")],
                _feature_params(self.config, self.variant, b),
            )
            for b in self.variant.branches
        }

        out = {}
        if self.cache is not None and not self.config.dump_intermediates:
            for b, key in keys.items():
                hit = self.cache.get(key)
                if hit is not None:
                    out[b] = hit
            if len(out) == len(keys):
                return out

        ws = item_matrices(topcs, self.config, fuse="fused" in self.variant.branches)
        if self.config.dump_intermediates:
            self._dump(item, ws)

        for b in self.variant.branches:
            if b in out:
                continue
            out[b] = self._vectorize(ws[b])
            if self.cache is not None:
                self.cache.put(keys[b], out[b])

        logger.debug("Computed features of item %s", item.name)
        return out


def _n_features(config: PipelineConfig, variant: PipelineVariant) -> int:
    if variant.features == "l2":
        return config.common_dim**2
    return config.scattering.n_coefficients


def object_matrices(
    config: PipelineConfig,
    dataset: DatasetFSSpec,
) -> Dict[str, SquareMatrix]:
    """Object-level distance matrices, one per branch of the configured pipeline.

    Items are processed by a pool of config.workers threads. Every feature vector is written to its item's row, so
    the result does not depend on scheduling.

    Raises:
        MemoryError: If the feature matrix does not fit in the available memory.
    """
    variant = PIPELINES[config.pipeline]
    items = dataset.items
    n = len(items)
    if n < 2:
        raise ValueError(f"At least two items are required, found {n}.")

    n_features = _n_features(config, variant)
    fits, requested, available = fits_in_memory((len(variant.branches), n, n_features))
    if not fits:
        raise MemoryError(f"Feature matrix needs {requested} bytes, only {available} are available.")

    bank = build_filter_bank(config.scattering) if variant.features == "scatter" else None
    cache = FeatureCache(config.cache_dir) if config.cache_dir is not None else None
    worker = _ItemWorker(config, variant, bank, cache)

    features = {b: np.empty((n, n_features), dtype=np.float64) for b in variant.branches}

    def process(i: int) -> None:
        for b, vec in worker(items[i]).items():
            features[b][i] = vec

    with concurrent.futures.ThreadPoolExecutor(max_workers=config.workers) as executor:
        list(executor.map(process, range(n)))

    logger.info("Computed %s features of %d items", config.pipeline, n)
    return {b: SquareMatrix(values=squareform(pdist(f, "euclidean"), checks=False)) for b, f in features.items()}


def _write_text(text: str, path: str) -> None:
    with fsspec.open(path, "w", auto_mkdir=True) as f:
        f.write(text)


def write_report(report: RetrievalReport, path: str) -> None:
    """Write a report as JSON with sorted keys."""
    _write_text(json.dumps(report.model_dump(), indent=2, sort_keys=True) + "\n", path)


def evaluate(
    collection: LabeledCollection,
    pipeline: str,
    params: Optional[Dict] = None,
) -> RetrievalReport:
    """Summarize the retrieval quality of a labeled collection."""
    return RetrievalReport(
        pipeline=pipeline,
        map=mean_average_precision(collection),
        per_class_map=per_class_map(collection),
        params=params or {},
        n_items=collection.n,
        mean_curve=mean_pr_curve(collection),
    )


def write_outputs(report: RetrievalReport, matrix: SquareMatrix, output_dir: str) -> None:
    """Write the report, the mean PR curve and the object-level matrix with its heatmap."""
    out = output_dir.rstrip("/")
    write_report(report, f"{out}/{REPORT_FILE}")
    if report.mean_curve is not None:
        curve = np.column_stack([report.mean_curve.recalls, report.mean_curve.precisions])
        write_csv(curve, f"{out}/{PR_FILE}", header="recall,precision")

    stem = "object_similarity" if matrix.kind == "fused" else "object_distance"
    write_matrix(matrix, f"{out}/{stem}.ssmf")
    emit_heatmap(matrix, f"{out}/{stem}.pgm")


def run_pipeline(config: PipelineConfig, dataset: Optional[DatasetFSSpec] = None) -> RetrievalReport:
    """Run a named pipeline over a dataset directory and write its report and artifacts to config.output_dir.

    Per item, every needed modality yields an SSM, its autotuned Gaussian kernel is resized to common_dim, the two
    kernels are fused by SNF for the fused branch, and scattering variants transform the result. Items are compared
    by the Euclidean distance of their feature vectors. Late and all-fused variants fuse the per-branch distance
    matrices downstream and rank by descending fused similarity.

    Args:
        config: The pipeline configuration.
        dataset: The dataset. Default opens config.input_dir.

    Returns:
        RetrievalReport: The retrieval report that was written.
    """
    variant = PIPELINES[config.pipeline]
    dataset = dataset or DatasetFSSpec(config.input_dir, label_columns=config.label_columns)
    logger.info("Running %s on %s", config.pipeline, dataset.root)

    mus = object_matrices(config, dataset)

    if variant.late:
        if config.dump_intermediates:
            for b, mu in mus.items():
                write_matrix(mu, f"{config.output_dir.rstrip('/')}/intermediates/mu_{b}.ssmf")
        matrix = downstream_fuse([mus[b] for b in variant.branches], config.kernel, config.snf)
        collection = LabeledCollection(labels=dataset.labels, similarity=matrix)
    else:
        matrix = mus[variant.branches[0]]
        collection = LabeledCollection(labels=dataset.labels, distance=matrix)

    report = evaluate(collection, config.pipeline, config.report_params())
    write_outputs(report, matrix, config.output_dir)

    logger.info("%s: MAP %.4f over %d items", config.pipeline, report.map, report.n_items)
    return report


def _psnr_label(psnr_db: float) -> str:
    return "inf" if math.isinf(psnr_db) else f"{psnr_db:g}"


def run_noise_sweep(config: PipelineConfig, psnrs: Sequence[float]) -> List[Tuple[float, float]]:
    """Run one pipeline at several noise levels.

    Every level writes its outputs to <output_dir>/psnr_<level>, and the summary goes to <output_dir>/sweep.csv.

    Args:
        config: Base configuration. Its noise_psnr_db is replaced by each level.
        psnrs: pSNR levels in dB. Infinity disables noise.

    Returns:
        List[Tuple[float, float]]: (pSNR, MAP) per level, in the given order.
    """
    out = config.output_dir.rstrip("/")
    dataset = DatasetFSSpec(config.input_dir, label_columns=config.label_columns)

    results = []
    for psnr_db in psnrs:
        level = config.model_copy(
            update={
                "noise_psnr_db": None if math.isinf(psnr_db) else psnr_db,
                "output_dir": f"{out}/psnr_{_psnr_label(psnr_db)}",
            },
        )
        report = run_pipeline(level, dataset)
        results.append((float(psnr_db), report.map))

    _write_text("psnr,map\n" + "".join(f"{_psnr_label(p)},{m:.17g}\n" for p, m in results), f"{out}/sweep.csv")
    return results


def compare_pipelines(config: PipelineConfig, names: Sequence[str]) -> Dict[str, RetrievalReport]:
    """Run several pipelines on one dataset.

    Every pipeline writes to <output_dir>/<name>, and the summary goes to <output_dir>/compare.csv. Pipelines share
    the artifact cache when one is configured.

    Args:
        config: Base configuration. Its pipeline is replaced by each name.
        names: Pipeline names.

    Returns:
        Dict[str, RetrievalReport]: Report per pipeline.
    """
    unknown = [n for n in names if n not in PIPELINES]
    if unknown:
        raise ValueError(f"Unknown pipeline(s) {unknown}, expected one of {list(PIPELINES)}.")

    out = config.output_dir.rstrip("/")
    dataset = DatasetFSSpec(config.input_dir, label_columns=config.label_columns)

    reports = {}
    for name in names:
        # Revalidated so the scattering block follows the pipeline
        fields = {**config.model_dump(), "pipeline": name, "output_dir": f"{out}/{name}"}
        variant = PipelineConfig.model_validate(fields)
        reports[name] = run_pipeline(variant, dataset)

    _write_text("pipeline,map\n" + "".join(f"{n},{r.map:.17g}\n" for n, r in reports.items()), f"{out}/compare.csv")
    return reports

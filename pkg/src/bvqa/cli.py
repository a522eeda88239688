"""Batch command-line driver.

Subcommands: extract, train, evaluate, correlate, bench, visualize.
Exit codes: 0 success, 1 partial failure, 2 usage error.
"""

from __future__ import annotations

import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import numpy as np

from . import cache, correlation, evaluation, svr
from .dataset import (
    DatasetError,
    SamplingPolicy,
    load_manifest,
    resize_normalize,
    sample_frames,
)
from .features import dump_activations
from .fusion import ALL_KINDS, FeatureKind, GraphSet, build_feature
from .inference import InferenceGraph
from .saliency import score_cam

KIND_CHOICES = [k.name for k in ALL_KINDS]


def _load_graphs(models_dir: str | None, kind: FeatureKind | None = None) -> GraphSet:
    if models_dir is None:
        return GraphSet()
    models_dir = Path(models_dir)
    cnn = saliency = None
    cnn_path = models_dir / "resnet50_features.onnx"
    sal_path = models_dir / "vgg16_features.onnx"
    if cnn_path.exists() and (kind is None or kind.needs_cnn_graph):
        cnn = InferenceGraph.load(cnn_path)
    if sal_path.exists() and (kind is None or kind.needs_saliency_graph):
        saliency = InferenceGraph.load(sal_path)
    return GraphSet(cnn=cnn, saliency=saliency)


@click.group()
def main() -> None:
    """Blind video quality assessment toolkit."""


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--kind", required=True, type=click.Choice(KIND_CHOICES))
@click.option("--cache-dir", required=True, type=click.Path())
@click.option("--models-dir", type=click.Path(exists=True))
@click.option("--jobs", default=1, show_default=True)
def extract(manifest_path, kind, cache_dir, models_dir, jobs) -> None:
    """Extract features for every manifest video into the cache."""
    manifest = load_manifest(manifest_path)
    kind = FeatureKind[kind]
    graphs = _load_graphs(models_dir, kind)
    failures = []

    def job(video):
        if cache.has_valid_entry(cache_dir, kind, video.video_id):
            return "cached"
        cache.write_entry(cache_dir, build_feature(video, kind, graphs))
        return "extracted"

    with ThreadPoolExecutor(max_workers=max(jobs, 1)) as pool:
        futures = {pool.submit(job, v): v for v in manifest}
        for fut, video in futures.items():
            try:
                status = fut.result()
                click.echo(f"{video.video_id}: {status}")
            except Exception as exc:
                failures.append(video.video_id)
                click.echo(f"{video.video_id}: FAILED ({exc})", err=True)
    if failures:
        click.echo(f"{len(failures)} video(s) failed", err=True)
        sys.exit(1)


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--kind", required=True, type=click.Choice(KIND_CHOICES))
@click.option("--cache-dir", required=True, type=click.Path(exists=True))
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
def train(manifest_path, kind, cache_dir, seed, out) -> None:
    """Grid-search and train one SVR on all cached features; save the model."""
    manifest = load_manifest(manifest_path)
    kind = FeatureKind[kind]
    feats = cache.load_all(cache_dir, kind, [v.video_id for v in manifest])
    X = np.stack([feats[v.video_id] for v in manifest])
    y = np.array([v.mos for v in manifest])
    rng = np.random.Generator(np.random.PCG64(seed))
    c, gamma = svr.grid_search(X, y, svr.HyperGrid(), rng)
    model = svr.train_svr(X, y, c, gamma)
    svr.save_model(model, out)
    click.echo(f"trained C={c} gamma={gamma} -> {out}")


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--kind", required=True, type=click.Choice(KIND_CHOICES))
@click.option("--cache-dir", required=True, type=click.Path(exists=True))
@click.option("--iterations", default=100, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--grid-once", is_flag=True, help="Run grid search only on the first iteration.")
@click.option("--out", required=True, type=click.Path())
def evaluate(manifest_path, kind, cache_dir, iterations, seed, grid_once, out) -> None:
    """Run hold-out cross-validation and write JSON + text reports."""
    manifest = load_manifest(manifest_path)
    kind = FeatureKind[kind]
    feats = cache.load_all(cache_dir, kind, [v.video_id for v in manifest])
    report = evaluation.crossval_run(
        feats, manifest, kind.name, iterations=iterations, seed=seed,
        regrid_per_iteration=not grid_once,
    )
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.to_json() + "\n", encoding="utf-8")
    out.with_suffix(".txt").write_text(report.to_table() + "\n", encoding="utf-8")
    click.echo(report.to_table())


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--models-dir", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
def correlate(manifest_path, models_dir, out) -> None:
    """Deep-feature vs saliency windowed-cosine analysis (CSV + histogram)."""
    manifest = load_manifest(manifest_path)
    graphs = _load_graphs(models_dir)
    records, failures = correlation.dataset_correlation(manifest, graphs)
    correlation.write_outputs(records, out)
    click.echo(f"{len(records)} frame records -> {out}")
    if failures:
        for vid, msg in failures:
            click.echo(f"{vid}: FAILED ({msg})", err=True)
        sys.exit(1)


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--models-dir", required=True, type=click.Path(exists=True))
@click.option("--kinds", default=",".join(KIND_CHOICES), show_default=False,
              help="Comma-separated feature kinds (default: all eleven).")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", type=click.Path())
def bench(manifest_path, models_dir, kinds, seed, out) -> None:
    """Per-kind extraction and prediction runtime table."""
    manifest = load_manifest(manifest_path)
    kind_list = [FeatureKind[k.strip()] for k in kinds.split(",") if k.strip()]
    rows = run_bench(manifest, models_dir, kind_list, seed)
    table = format_bench(rows)
    click.echo(table)
    if out:
        Path(out).write_text(json.dumps(rows, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def run_bench(manifest, models_dir, kind_list, seed: int = 0) -> list[dict]:
    """Measure mean per-video extraction time and SVR prediction time."""
    rows = []
    rng = np.random.Generator(np.random.PCG64(seed))
    for kind in kind_list:
        graphs = _load_graphs(models_dir, kind)
        vectors = []
        start = time.perf_counter()
        for video in manifest:
            vectors.append(build_feature(video, kind, graphs).values)
        extract_s = (time.perf_counter() - start) / len(manifest)
        X = np.stack(vectors)
        y = np.clip(1.0 + 4.0 * rng.random(X.shape[0]), 1.0, 5.0)
        model = svr.train_svr(X, y, c=1.0, gamma=1.0 / X.shape[1])
        start = time.perf_counter()
        svr.predict(model, X)
        predict_s = (time.perf_counter() - start) / len(manifest)
        rows.append(
            {
                "kind": kind.name,
                "dim": kind.dim,
                "feature_extractor_s": extract_s,
                "quality_predictor_s": predict_s,
            }
        )
    return rows


def format_bench(rows: list[dict]) -> str:
    lines = [f"{'METRICS':24} {'DIM':>6} {'Feature Extractor':>18} {'Quality Predictor':>18}"]
    for row in rows:
        lines.append(
            f"{row['kind']:24} {row['dim']:>6} "
            f"{row['feature_extractor_s']:>18.4f} {row['quality_predictor_s']:>18.6f}"
        )
    return "\n".join(lines)


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--video-id", required=True)
@click.option("--models-dir", required=True, type=click.Path(exists=True))
@click.option("--graph", default="resnet50_features", show_default=True)
@click.option("--layer", default="conv_final", show_default=True)
@click.option("--overlay-saliency", is_flag=True, help="Also write a saliency overlay image.")
@click.option("--out", required=True, type=click.Path())
def visualize(manifest_path, video_id, models_dir, graph, layer, overlay_saliency, out) -> None:
    """Dump activation channel images (and optionally a saliency overlay)."""
    from PIL import Image

    manifest = load_manifest(manifest_path)
    try:
        video = next(v for v in manifest if v.video_id == video_id)
    except StopIteration:
        raise click.UsageError(f"unknown video_id {video_id!r}")
    g = InferenceGraph.load(Path(models_dir) / f"{graph}.onnx")
    frame = resize_normalize(sample_frames(video, SamplingPolicy.per_second(1))[0], 224, 224)
    result = dump_activations(frame, g, layer, out)
    click.echo(f"{len(result['channels'])} channel images, max channel {result['max_channel']}")
    if overlay_saliency:
        sal_graph = InferenceGraph.load(Path(models_dir) / "vgg16_features.onnx")
        smap = score_cam(frame, sal_graph)
        overlay = frame.data * 0.5 + np.stack([smap.values] * 3, axis=-1) * 0.5
        img = Image.fromarray((overlay * 255.0).round().astype(np.uint8))
        img.save(Path(out) / "saliency_overlay.png")
        click.echo("saliency overlay written")


if __name__ == "__main__":
    main()

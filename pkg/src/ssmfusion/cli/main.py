import functools
import json
import logging
from typing import Any, Callable, Dict, List, Optional, Tuple

import click
import numpy as np

from ssmfusion import __version__
from ssmfusion.cli.make_templates import create as templates
from ssmfusion.impl.filesystem import write_dataset
from ssmfusion.models import KernelParams, LabeledCollection, ScatteringParams, SnfParams, SquareMatrix
from ssmfusion.ops.core import pairwise_distance_matrix, resize_matrix
from ssmfusion.ops.kernel import gaussian_similarity
from ssmfusion.ops.open import from_dict, from_file
from ssmfusion.ops.pipeline import PIPELINES, compare_pipelines, emit_heatmap, evaluate, run_noise_sweep, run_pipeline
from ssmfusion.ops.pipeline import write_report as _write_report
from ssmfusion.ops.scattering import build_filter_bank, scattering_transform
from ssmfusion.ops.snf import snf_fuse
from ssmfusion.ops.synth import gen_blob_image, gen_clusters, gen_multimodal_dataset, gen_parametric_topc
from ssmfusion.util.io import load_array, read_labels, save_array, write_csv, write_labels

logger = logging.getLogger(__name__)

LOG_LEVELS = {0: logging.WARNING, 1: logging.INFO}


def handle_errors(func: Callable) -> Callable:
    """Report library errors as one line, `Error: <Type>: <message>`, with exit status 1."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (ValueError, OSError, MemoryError) as e:
            raise click.ClickException(f"{type(e).__name__}: {' '.join(str(e).split())}") from e

    return wrapper


def parse_ints(value: Optional[str]) -> Optional[List[int]]:
    if value is None:
        return None
    return [int(v) for v in value.split(",") if v.strip()]


def parse_floats(value: str) -> List[float]:
    return [float(v) for v in value.split(",") if v.strip()]


def _matrix(path: str, kind: str) -> SquareMatrix:
    return SquareMatrix(values=load_array(path), kind=kind)


def _save(m: SquareMatrix, output: str, heatmap: Optional[str]) -> None:
    save_array(m.values, output)
    if heatmap:
        emit_heatmap(m, heatmap)
    logger.info("Wrote %dx%d %s matrix to %s", m.n, m.n, m.kind, output)


@click.group()
@click.version_option(__version__)
@click.option("--verbose", "-v", count=True, help="Increase verbosity (-v for info, -vv for debug).")
@click.pass_context
def cli(ctx, verbose: int) -> None:
    """Self-similarity matrices, similarity network fusion and scattering features for multimodal retrieval."""
    logging.basicConfig(
        level=LOG_LEVELS.get(verbose, logging.DEBUG),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


@cli.command()
@click.argument("input_path", metavar="INPUT")
@click.argument("output")
@click.option("--heatmap", default=None, help="Also render the matrix as a PGM image.")
@handle_errors
def ssm(input_path: str, output: str, heatmap: Optional[str]) -> None:
    """Self-similarity matrix of the point cloud in INPUT (MatrixFile or .csv, one point per row)."""
    _save(pairwise_distance_matrix(load_array(input_path)), output, heatmap)


@cli.command()
@click.argument("input_path", metavar="INPUT")
@click.argument("output")
@click.option("--kappa", default=0.1, show_default=True, help="Proportion of nearest neighbors.")
@click.option("--beta", default=0.5, show_default=True, help="Bandwidth multiplier.")
@click.option("--heatmap", default=None, help="Also render the matrix as a PGM image.")
@handle_errors
def kernel(input_path: str, output: str, kappa: float, beta: float, heatmap: Optional[str]) -> None:
    """Autotuned Gaussian similarity of the distance matrix in INPUT."""
    params = KernelParams(kappa=kappa, beta=beta)
    _save(gaussian_similarity(_matrix(input_path, "distance"), params), output, heatmap)


@cli.command()
@click.argument("inputs", nargs=-1, required=True)
@click.option("--output", "-o", required=True, help="Destination of the fused matrix.")
@click.option("--kappa", default=0.1, show_default=True, help="Proportion of nearest neighbors.")
@click.option("--iterations", "-T", default=20, show_default=True, help="Number of diffusion iterations.")
@click.option("--reg", default=0.0, show_default=True, help="Identity weight added after every iteration.")
@click.option("--heatmap", default=None, help="Also render the matrix as a PGM image.")
@handle_errors
def snf(
    inputs: Tuple[str, ...],
    output: str,
    kappa: float,
    iterations: int,
    reg: float,
    heatmap: Optional[str],
) -> None:
    """Fuse two or more similarity matrices of equal size."""
    ws = [_matrix(p, "similarity") for p in inputs]
    _save(snf_fuse(ws, SnfParams(kappa=kappa, T=iterations, reg=reg)), output, heatmap)


@cli.command()
@click.argument("input_path", metavar="INPUT")
@click.argument("output")
@click.option("--scales", "--J", "J", default=4, show_default=True, help="Number of scales.")
@click.option("--directions", "--L", "L", default=8, show_default=True, help="Number of directions.")
@click.option("--input-n", default=256, show_default=True, help="Side length the matrix is resized to.")
@click.option(
    "--output-res",
    "--output-n",
    "output_n",
    default=32,
    show_default=True,
    help="Side length of every path after averaging.",
)
@click.option("--workers", default=1, show_default=True, help="Threads for the first-order branches.")
@handle_errors
def scatter(input_path: str, output: str, J: int, L: int, input_n: int, output_n: int, workers: int) -> None:
    """Scattering coefficients of the matrix or image in INPUT, written as a single row."""
    params = ScatteringParams(J=J, L=L, input_n=input_n, output_n=output_n)
    image = resize_matrix(_matrix(input_path, "similarity"), input_n)
    features = scattering_transform(image, build_filter_bank(params), workers=workers)
    save_array(features.coefficients[None, :], output)
    logger.info("Wrote %d coefficients to %s", features.coefficients.size, output)


@cli.command(name="eval")
@click.option("--distance", default=None, help="Object-level distance matrix (ranked ascending).")
@click.option("--similarity", default=None, help="Object-level similarity matrix (ranked descending).")
@click.option("--labels", required=True, help="Labels file, one line per item.")
@click.option("--label-columns", default=None, help="Comma separated label fields forming the class id.")
@click.option("--report", default=None, help="Write the report as JSON here instead of printing it.")
@click.option("--pr-csv", default=None, help="Write the mean precision-recall curve here.")
@handle_errors
def evaluate_cmd(
    distance: Optional[str],
    similarity: Optional[str],
    labels: str,
    label_columns: Optional[str],
    report: Optional[str],
    pr_csv: Optional[str],
) -> None:
    """Mean average precision of an object-level matrix."""
    if (distance is None) == (similarity is None):
        raise click.UsageError("Give exactly one of --distance or --similarity.")

    labs = read_labels(labels, parse_ints(label_columns))
    if distance is not None:
        collection = LabeledCollection(labels=labs, distance=_matrix(distance, "distance"))
    else:
        collection = LabeledCollection(labels=labs, similarity=_matrix(similarity, "similarity"))

    result = evaluate(collection, "eval")
    if pr_csv:
        curve = np.column_stack([result.mean_curve.recalls, result.mean_curve.precisions])
        write_csv(curve, pr_csv, header="recall,precision")
    if report:
        _write_report(result, report)
    else:
        click.echo(json.dumps(result.model_dump(exclude={"mean_curve"}), indent=2, sort_keys=True))


@cli.group()
def synth() -> None:
    """Generate synthetic data."""


@synth.command(name="dataset")
@click.argument("output_dir")
@click.option("--classes", default=10, show_default=True, help="Number of classes.")
@click.option("--per-class", default=6, show_default=True, help="Items per class.")
@click.option("--warp", default=0.3, show_default=True, help="Time warp strength in [0, 1).")
@click.option("--noise-sd", default=0.0, show_default=True, help="Additive noise standard deviation.")
@click.option("--seed", default=0, show_default=True, help="Generator seed.")
@handle_errors
def synth_dataset(output_dir: str, classes: int, per_class: int, warp: float, noise_sd: float, seed: int) -> None:
    """Labeled two-modality dataset directory."""
    write_dataset(gen_multimodal_dataset(classes, per_class, warp, seed, noise_sd=noise_sd), output_dir)


@synth.command(name="clusters")
@click.argument("output")
@click.option("--clusters", default=3, show_default=True, help="Number of clusters.")
@click.option("--per-cluster", default=100, show_default=True, help="Points per cluster.")
@click.option("--noise-sd", default=0.3, show_default=True, help="Noise standard deviation.")
@click.option("--seed", default=0, show_default=True, help="Generator seed.")
@click.option("--labels", default=None, help="Also write the cluster ids here.")
@handle_errors
def synth_clusters(
    output: str,
    clusters: int,
    per_cluster: int,
    noise_sd: float,
    seed: int,
    labels: Optional[str],
) -> None:
    """2D point cloud of noisy clusters."""
    points, ids = gen_clusters(clusters, per_cluster, noise_sd, seed)
    save_array(points.points, output)
    if labels:
        write_labels([str(i) for i in ids], labels)


@synth.command(name="blob")
@click.argument("output")
@click.option("--x", "x", default=0.5, show_default=True, help="Center column coordinate in [0, 1].")
@click.option("--y", "y", default=0.5, show_default=True, help="Center row coordinate in [0, 1].")
@click.option("--radius", default=0.1, show_default=True, help="Radius in unit-square coordinates.")
@click.option("--n", "n", default=256, show_default=True, help="Image side length.")
@handle_errors
def synth_blob(output: str, x: float, y: float, radius: float, n: int) -> None:
    """Image of one blob. A .pgm OUTPUT is rendered, anything else is saved as a matrix."""
    image = gen_blob_image((x, y), radius, n)
    if output.endswith(".pgm"):
        emit_heatmap(SquareMatrix(values=image, kind="similarity"), output)
    else:
        save_array(image, output)


@synth.command(name="topc")
@click.argument("output")
@click.option(
    "--kind",
    type=click.Choice(["cosine_1d", "ribbon_2d", "knot_3d"]),
    default="knot_3d",
    show_default=True,
    help="Curve to sample.",
)
@click.option("--samples", default=200, show_default=True, help="Number of samples.")
@click.option("--periods", default=2, show_default=True, help="Periods of the cosine and the ribbon.")
@click.option("--noise-sd", default=0.0, show_default=True, help="Jitter standard deviation.")
@click.option("--seed", default=0, show_default=True, help="Jitter seed.")
@handle_errors
def synth_topc(output: str, kind: str, samples: int, periods: int, noise_sd: float, seed: int) -> None:
    """Reference curve sampled uniformly in time."""
    topc = gen_parametric_topc(kind, samples, seed=seed, periods=periods, noise_sd=noise_sd)
    save_array(topc.points, output)


def config_options(func: Callable) -> Callable:
    """Options shared by the commands that run pipelines. Given flags override the config file."""
    options = [
        click.option("--config", "config_path", default=None, help="JSON config file."),
        click.option("--pipeline", type=click.Choice(list(PIPELINES)), default=None, help="Pipeline variant."),
        click.option("--input-dir", default=None, help="Dataset root."),
        click.option("--output-dir", default=None, help="Output root."),
        click.option("--common-dim", type=int, default=None, help="SSM resize target."),
        click.option("--kappa", type=float, default=None, help="Neighbor proportion of kernel and SNF."),
        click.option("--beta", type=float, default=None, help="Kernel bandwidth multiplier."),
        click.option("--iterations", "-T", type=int, default=None, help="SNF iterations."),
        click.option("--reg", type=float, default=None, help="SNF identity weight."),
        click.option("--scales", "--J", "J", type=int, default=None, help="Scattering scales."),
        click.option("--directions", "--L", "L", type=int, default=None, help="Scattering directions."),
        click.option("--output-res", "--output-n", "output_n", type=int, default=None, help="Scattering output size."),
        click.option("--noise-psnr-db", type=float, default=None, help="pSNR of injected noise (inf disables)."),
        click.option("--seed", type=int, default=None, help="Noise seed."),
        click.option("--workers", type=int, default=None, help="Per-item worker pool size."),
        click.option("--cache-dir", default=None, help="Artifact cache root."),
        click.option("--label-columns", default=None, help="Comma separated label fields forming the class id."),
        click.option("--dump-intermediates/--no-dump-intermediates", default=None, help="Write per-item matrices."),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def load_config(config_path: Optional[str], **flags: Any):
    flags["label_columns"] = parse_ints(flags.get("label_columns"))
    overrides: Dict[str, Any] = {k: v for k, v in flags.items() if v is not None}
    if config_path is None:
        overrides.setdefault("pipeline", "FusedScatter")
        return from_dict({}, overrides)
    return from_file(config_path, overrides)


@cli.command()
@config_options
@click.option("--compare", default=None, help='Comma separated pipelines to run and compare, or "all".')
@handle_errors
def pipeline(config_path: Optional[str], compare: Optional[str], **flags: Any) -> None:
    """Run a retrieval pipeline over a dataset directory."""
    config = load_config(config_path, **flags)

    if compare:
        names = list(PIPELINES) if compare == "all" else [n.strip() for n in compare.split(",") if n.strip()]
        for name, report in compare_pipelines(config, names).items():
            click.echo(f"{name}\t{report.map:.6f}")
        return

    report = run_pipeline(config)
    click.echo(f"{report.pipeline}\t{report.map:.6f}")


@cli.command()
@config_options
@click.option("--psnr", "psnrs", default="inf,20,10,5,0", show_default=True, help="Comma separated pSNR levels.")
@handle_errors
def sweep(config_path: Optional[str], psnrs: str, **flags: Any) -> None:
    """Run one pipeline at several noise levels."""
    config = load_config(config_path, **flags)
    for psnr_db, score in run_noise_sweep(config, parse_floats(psnrs)):
        click.echo(f"{psnr_db:g}\t{score:.6f}")


cli.add_command(templates, name="templates")


if __name__ == "__main__":
    cli()

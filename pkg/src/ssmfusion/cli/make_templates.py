import json

import click
import fsspec

from ssmfusion.models import PIPELINE_SNF_REG, KernelParams, PipelineConfig, ScatteringParams, SnfParams

LOCAL_DATASET = {
    "input_dir": "local:///path/to/dataset/",
    "output_dir": "local:///path/to/results/",
}

CACHED = {
    "cache_dir": "local:///path/to/cache/",
    "workers": 8,
}

NOISY_FIELDS = {"pipeline", "noise_psnr_db", "seed", "input_dir", "output_dir", "workers", "cache_dir"}

DESCRIPTIONS = {
    "AudioL2": "Audio SSM kernels compared by Frobenius distance.",
    "VideoL2": "Video SSM kernels compared by Frobenius distance.",
    "FusedL2": "Upstream SNF of audio and video, compared by Frobenius distance.",
    "AudioScatter": "Scattering coefficients of the audio SSM kernel.",
    "VideoScatter": "Scattering coefficients of the video SSM kernel.",
    "FusedScatter": "Scattering coefficients of the upstream fused SSM.",
    "AVLateFusedL2": "Downstream SNF of AudioL2 and VideoL2.",
    "AllFusedL2": "Downstream SNF of AudioL2, VideoL2 and FusedL2.",
    "AVLateFusedScatter": "Downstream SNF of AudioScatter and VideoScatter.",
    "AllFusedScatter": "Downstream SNF of AudioScatter, VideoScatter and FusedScatter.",
}


@click.command()
@click.option(
    "--outdir",
    "-o",
    default="docs/templates/configs/",
    help="Output directory for the templates.",
)
@click.pass_context
def create(ctx, outdir: str = "docs/templates/configs/") -> None:
    """Write one example config per pipeline, plus a cached multi-worker variant of the default pipeline."""
    outdir = outdir.rstrip("/")

    for name, description in DESCRIPTIONS.items():
        config = PipelineConfig(
            pipeline=name,
            common_dim=256,
            kernel=KernelParams(kappa=0.1, beta=0.5),
            snf=SnfParams(kappa=0.1, T=20, reg=PIPELINE_SNF_REG),
            scattering=ScatteringParams(J=4, L=8, input_n=256, output_n=32) if name.endswith("Scatter") else None,
            **LOCAL_DATASET,
        )
        data = {"description": description, **config.model_dump()}
        with fsspec.open(f"{outdir}/{name}.json", "w", auto_mkdir=True) as f:
            f.write(json.dumps(data, indent=4))

    # Noisy, cached, parallel
    config = PipelineConfig(pipeline="FusedScatter", noise_psnr_db=10.0, seed=1, **LOCAL_DATASET, **CACHED)
    description = "FusedScatter at 10 dB pSNR with a feature cache."
    data = {"description": description, **config.model_dump(include=NOISY_FIELDS)}
    with fsspec.open(f"{outdir}/FusedScatter_noisy_cached.json", "w", auto_mkdir=True) as f:
        f.write(json.dumps(data, indent=4))


if __name__ == "__main__":
    create()

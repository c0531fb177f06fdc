import json
import uuid
import warnings

import fsspec
import pytest
from pydantic import ValidationError
from ssmfusion.models import PIPELINE_SNF_REG, SnfParams
from ssmfusion.ops.open import from_dict, from_file, from_string, nest


def test_flat_and_nested_keys():
    config = from_dict({"pipeline": "FusedScatter", "beta": 0.8, "T": 5, "snf": {"kappa": 0.3}, "J": 3})
    assert config.kernel.beta == 0.8, "Flat beta should set the kernel bandwidth"
    assert config.snf.iterations == 5 and config.snf.kappa == 0.3, "Flat and nested SNF fields should combine"
    assert config.scattering.J == 3, "Flat J should set the scattering scales"
    assert config.scattering.input_n == config.common_dim, "input_n should follow common_dim"


def test_kappa_sets_both():
    config = from_dict({"pipeline": "FusedL2", "kappa": 0.2})
    assert config.kernel.kappa == 0.2 and config.snf.kappa == 0.2, "kappa should set kernel and SNF"

    config = from_dict({"pipeline": "FusedL2", "kappa": 0.2, "snf_kappa": 0.05})
    assert (config.kernel.kappa, config.snf.kappa) == (0.2, 0.05), "Specific keys should refine the shared one"


def test_pipeline_snf_regularized():
    assert SnfParams().reg == 0.0, "Plain fusion should run the unregularized recursion"
    assert from_dict({"pipeline": "FusedL2"}).snf.reg == PIPELINE_SNF_REG, "Pipelines should regularize SNF"
    assert from_dict({"pipeline": "FusedL2", "T": 3}).snf.reg == PIPELINE_SNF_REG, "Partial snf blocks keep reg"
    assert from_dict({"pipeline": "FusedL2", "reg": 0}).snf.reg == 0.0, "reg should be configurable"
    assert from_dict({"pipeline": "FusedL2", "snf": {"reg": 0.5}}).snf.reg == 0.5, "Nested reg should be kept"


def test_flat_keys_win_over_blocks():
    nested = nest({"kernel": {"beta": 0.1}, "beta": 0.9})
    assert nested == {"kernel": {"beta": 0.9}}, "Flat keys should win over the same nested field"


def test_overrides_win():
    base = {"pipeline": "AudioL2", "common_dim": 64, "snf": {"T": 7, "kappa": 0.2}}
    config = from_dict(base, {"pipeline": "VideoL2", "T": 3, "seed": None})
    assert config.pipeline == "VideoL2", "Flags should override the file"
    assert config.snf.iterations == 3 and config.snf.kappa == 0.2, "Overrides should merge into blocks field by field"
    assert config.seed == 0, "None overrides should be ignored"
    assert config.common_dim == 64, "Untouched values should be kept"


def test_missing_pipeline_warns():
    with pytest.warns(DeprecationWarning, match="pipeline not found"):
        config = from_dict({"common_dim": 32})
    assert config.pipeline == "FusedScatter", "Default pipeline should be FusedScatter"

    with warnings.catch_warnings():
        warnings.simplefilter("error")
        from_dict({"pipeline": "AudioL2", "common_dim": 32})


def test_from_string():
    config = from_string('{"pipeline": "AudioScatter", "noise_psnr_db": Infinity, "common_dim": 64}')
    assert config.noise_psnr_db is None, "Infinite pSNR should disable noise"
    assert config.scattering.input_n == 64, "input_n should follow common_dim"

    with pytest.raises(ValueError, match="JSON object"):
        from_string("[1, 2, 3]")


def test_invalid_values():
    with pytest.raises(ValidationError):
        from_dict({"pipeline": "NotAPipeline"})
    with pytest.raises(ValidationError):
        from_dict({"pipeline": "AudioL2", "noise_psnr_db": float("-inf")})
    with pytest.raises(ValidationError, match="must equal common_dim"):
        from_dict({"pipeline": "AudioScatter", "common_dim": 64, "scattering": {"input_n": 32, "output_n": 8}})


@pytest.mark.parametrize("common_dim", [16, 100])
def test_l2_pipelines_ignore_scattering(common_dim):
    config = from_dict({"pipeline": "FusedL2", "common_dim": common_dim})
    assert config.scattering is None, "L2 pipelines should carry no scattering parameters"
    assert config.report_params()["scattering"] is None, "Reports of L2 pipelines should record no scattering"

    config = from_dict({"pipeline": "AVLateFusedL2", "common_dim": common_dim, "J": 4, "output_n": 8})
    assert config.scattering is None, "Scattering flags should not constrain L2 pipelines"

    with pytest.raises(ValueError):
        from_dict({"pipeline": "FusedScatter", "common_dim": 100})


def test_from_file():
    path = f"memory://ssmfusion_{uuid.uuid1().hex}/config.json"
    with fsspec.open(path, "w") as f:
        f.write(json.dumps({"pipeline": "AllFusedL2", "common_dim": 16, "iterations": 4}))

    config = from_file(path, {"workers": 2})
    assert (config.pipeline, config.common_dim, config.snf.iterations, config.workers) == ("AllFusedL2", 16, 4, 2), (
        "Config should be read from any fsspec URL"
    )
    fsspec.filesystem("memory").rm(path.replace("memory://", "/").rsplit("/", 1)[0], recursive=True)

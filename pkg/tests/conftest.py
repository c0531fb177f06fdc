import os
import shutil
import tempfile
import uuid
from pathlib import Path

import fsspec
import pytest
from ssmfusion.impl.filesystem import write_dataset
from ssmfusion.ops.synth import gen_multimodal_dataset

# Determine if the slow reproductions should be run
RUN_SLOW = bool(int(os.environ.get("RUN_SLOW", 0)))

CLEANUP = True

COMMON_CASES = []


@pytest.fixture(scope="session")
def base_dataset():
    # Two classes of exact duplicates
    return gen_multimodal_dataset(n_classes=2, per_class=3, warp_strength=0.0, seed=7)


@pytest.fixture
def tmp_dir() -> Path:
    temp_dir = Path(tempfile.mkdtemp())
    yield temp_dir

    if CLEANUP:
        shutil.rmtree(temp_dir, ignore_errors=True)


@pytest.fixture
def local_dataset(base_dataset):
    # Write dataset to temp directory
    temp_dir = Path(tempfile.mkdtemp())
    dataset_directory = temp_dir / "dataset"
    write_dataset(base_dataset, "local://" + str(dataset_directory))

    payload = {
        "input_dir": "local://" + str(dataset_directory),
        "output_dir": "local://" + str(temp_dir / "output"),
        "testfs": fsspec.filesystem("local"),
        "testpath": str(temp_dir),
        "n_items": len(base_dataset.items),
    }

    yield payload

    if CLEANUP:
        shutil.rmtree(temp_dir)


@pytest.fixture
def memory_dataset(base_dataset):
    # To ensure that each test has a unique directory, generate UUID names
    root = f"memory://ssmfusion_{uuid.uuid1().hex}"
    write_dataset(base_dataset, f"{root}/dataset")

    fs = fsspec.filesystem("memory")
    payload = {
        "input_dir": f"{root}/dataset",
        "output_dir": f"{root}/output",
        "testfs": fs,
        "testpath": root.replace("memory://", "/"),
        "n_items": len(base_dataset.items),
    }

    yield payload

    if CLEANUP:
        fs.rm(payload["testpath"], recursive=True)


COMMON_CASES.extend(["local_dataset", "memory_dataset"])


def pytest_configure():
    pytest.common_cases = COMMON_CASES

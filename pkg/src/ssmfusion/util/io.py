import io
import logging
from typing import List, Optional, Sequence

import fsspec
import numpy as np
import soundfile
from PIL import Image

from ssmfusion.models import AudioClip, FrameSequence, MatrixKind, SquareMatrix

logger = logging.getLogger(__name__)

MAGIC = b"SSMF"
_HEADER = np.dtype("<u4")
_PAYLOAD = np.dtype("<f8")


def write_array(array: np.ndarray, path: str) -> None:
    """Write a 2D array as a MatrixFile: magic "SSMF", rows and cols as little-endian uint32, then row-major
    little-endian float64 values.

    Args:
        array: The array to write. 1D arrays are written as a single row.
        path: Destination path or fsspec URL.
    """
    arr = np.asarray(array, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError(f"Only 2D arrays can be written, got {arr.ndim} dimensions.")

    header = np.array(arr.shape, dtype=_HEADER).tobytes()
    with fsspec.open(path, "wb", auto_mkdir=True) as f:
        f.write(MAGIC)
        f.write(header)
        f.write(np.ascontiguousarray(arr, dtype=_PAYLOAD).tobytes())

    logger.debug("Wrote %dx%d matrix to %s", arr.shape[0], arr.shape[1], path)


def read_array(path: str) -> np.ndarray:
    """Read a MatrixFile into a 2D float64 array.

    Args:
        path: Source path or fsspec URL.

    Returns:
        np.ndarray: The stored (rows, cols) array.

    Raises:
        ValueError: If the magic is wrong or the payload does not match the header.
    """
    with fsspec.open(path, "rb") as f:
        data = f.read()

    if data[:4] != MAGIC:
        raise ValueError(f"bad magic in {path}: {data[:4]!r}")
    if len(data) < 12:
        raise ValueError(f"truncated header in {path}")

    rows, cols = np.frombuffer(data[4:12], dtype=_HEADER)
    expected = int(rows) * int(cols) * _PAYLOAD.itemsize
    payload = data[12:]
    if len(payload) < expected:
        raise ValueError(
            f"truncated payload in {path}: header says {rows}x{cols}, found {len(payload) // _PAYLOAD.itemsize} values",
        )
    if len(payload) > expected:
        raise ValueError(f"size mismatch in {path}: {len(payload) - expected} trailing bytes")

    return np.frombuffer(payload, dtype=_PAYLOAD).reshape(int(rows), int(cols)).astype(np.float64)


def write_matrix(m: SquareMatrix, path: str) -> None:
    """Write a square matrix as a MatrixFile."""
    write_array(m.values, path)


def read_matrix(path: str, kind: MatrixKind = "distance") -> SquareMatrix:
    """Read a square matrix from a MatrixFile.

    Args:
        path: Source path or fsspec URL.
        kind: Role to tag the matrix with.

    Raises:
        ValueError: If the file is malformed or not square.
    """
    arr = read_array(path)
    if arr.shape[0] != arr.shape[1]:
        raise ValueError(f"Expected a square matrix in {path}, got {arr.shape[0]}x{arr.shape[1]}.")
    return SquareMatrix(values=arr, kind=kind)


def write_csv(array: np.ndarray, path: str, header: Optional[str] = None) -> None:
    """Write a 2D array as comma separated values with full float64 precision, after an optional header line."""
    arr = np.atleast_2d(np.asarray(array, dtype=np.float64))
    with fsspec.open(path, "w", auto_mkdir=True) as f:
        np.savetxt(f, arr, delimiter=",", fmt="%.17g", header=header or "", comments="")


def read_csv(path: str, skiprows: int = 0) -> np.ndarray:
    """Read a comma separated 2D array, one row per line, after skipping the given number of header lines."""
    with fsspec.open(path, "r") as f:
        return np.loadtxt(f, delimiter=",", dtype=np.float64, ndmin=2, skiprows=skiprows)


def load_array(path: str) -> np.ndarray:
    """Read a 2D array from a MatrixFile, or from CSV if the path ends in .csv."""
    return read_csv(path) if str(path).endswith(".csv") else read_array(path)


def save_array(array: np.ndarray, path: str) -> None:
    """Write a 2D array as MatrixFile, or as CSV if the path ends in .csv."""
    if str(path).endswith(".csv"):
        write_csv(array, path)
    else:
        write_array(array, path)


def write_pgm(pixels: np.ndarray, path: str) -> None:
    """Write an 8-bit grayscale image as binary PGM (P5).

    Args:
        pixels: (h, w) uint8 array.
        path: Destination path or fsspec URL.
    """
    img = Image.fromarray(np.ascontiguousarray(pixels, dtype=np.uint8))
    with fsspec.open(path, "wb", auto_mkdir=True) as f:
        img.save(f, format="PPM")


def read_pgm(path: str) -> np.ndarray:
    """Read a grayscale PGM image, scaled to [0, 1]."""
    with fsspec.open(path, "rb") as f:
        img = Image.open(io.BytesIO(f.read()))
        img.load()

    maxval = 65535.0 if img.mode.startswith("I") else 255.0
    return np.asarray(img, dtype=np.float64) / maxval


def read_frames(paths: Sequence[str]) -> FrameSequence:
    """Read a list of PGM frames, in the given order, into a frame sequence."""
    return FrameSequence(frames=[read_pgm(p) for p in paths])


def read_wav(path: str) -> AudioClip:
    """Read a mono 16-bit or float WAV file.

    Raises:
        ValueError: If the file has more than one channel.
    """
    with fsspec.open(path, "rb") as f:
        samples, sample_rate = soundfile.read(io.BytesIO(f.read()), dtype="float64", always_2d=True)

    if samples.shape[1] != 1:
        raise ValueError(f"Only mono audio is supported, {path} has {samples.shape[1]} channels.")

    return AudioClip(samples=samples[:, 0], sample_rate=sample_rate)


def write_wav(clip: AudioClip, path: str, subtype: str = "FLOAT") -> None:
    """Write an audio clip as a mono WAV file."""
    buf = io.BytesIO()
    soundfile.write(buf, clip.samples, clip.sample_rate, format="WAV", subtype=subtype)
    with fsspec.open(path, "wb", auto_mkdir=True) as f:
        f.write(buf.getvalue())


def parse_label_line(line: str, columns: Optional[Sequence[int]] = None) -> str:
    """Turn one line of a labels file into a class id.

    Args:
        line: A line with one or more comma separated fields.
        columns: Fields that form the class id, joined with "/". None selects the first field.
    """
    fields = [f.strip() for f in line.split(",")]
    if columns is None:
        return fields[0]
    try:
        return "/".join(fields[c] for c in columns)
    except IndexError:
        raise ValueError(f"Label line {line!r} has no column among {list(columns)}.") from None


def read_labels(path: str, columns: Optional[Sequence[int]] = None) -> List[str]:
    """Read a labels file, one item per line. Blank lines are skipped.

    Args:
        path: Path or fsspec URL of the labels file.
        columns: Fields that form the class id, see `parse_label_line`.
    """
    with fsspec.open(path, "r") as f:
        lines = [line.strip() for line in f.read().splitlines()]

    return [parse_label_line(line, columns) for line in lines if line]


def write_labels(labels: Sequence[str], path: str) -> None:
    """Write one label per line."""
    with fsspec.open(path, "w", auto_mkdir=True) as f:
        f.write("".join(f"{lab}\n" for lab in labels))

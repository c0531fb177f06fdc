import math
from typing import Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

MatrixKind = Literal["distance", "similarity", "transition", "fused", "bandwidth"]

PipelineName = Literal[
    "AudioL2",
    "VideoL2",
    "FusedL2",
    "AudioScatter",
    "VideoScatter",
    "FusedScatter",
    "AVLateFusedL2",
    "AllFusedL2",
    "AVLateFusedScatter",
    "AllFusedScatter",
]

_ARRAYS = {"arbitrary_types_allowed": True, "frozen": True}

# Identity weight of SNF inside pipelines
PIPELINE_SNF_REG = 1.0


class TimeOrderedPointCloud(BaseModel):
    """An ordered sequence of N points in a d-dimensional Euclidean space, one per time sample.

    Attributes:
        points: (N, d) array of point coordinates. 1D input is read as N points in one dimension.
        timestamps: Optional strictly increasing sample times in seconds.
    """

    model_config = _ARRAYS

    points: np.ndarray
    timestamps: Optional[np.ndarray] = None

    @field_validator("points", mode="before")
    @classmethod
    def validate_points(cls, v) -> np.ndarray:
        """Validate the points."""
        arr = np.asarray(v, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        assert arr.ndim == 2, "Points must be a 2D array of shape (N, d)."
        assert arr.shape[0] >= 1, "empty input"
        assert arr.shape[1] >= 1, "Points must have at least one dimension."
        return arr

    @field_validator("timestamps", mode="before")
    @classmethod
    def validate_timestamps(cls, v) -> Optional[np.ndarray]:
        """Validate the timestamps."""
        if v is None:
            return None
        arr = np.asarray(v, dtype=np.float64)
        assert arr.ndim == 1, "Timestamps must be one-dimensional."
        assert np.all(np.diff(arr) > 0), "Timestamps must be strictly increasing."
        return arr

    @model_validator(mode="after")
    def validate_lengths(self) -> "TimeOrderedPointCloud":
        if self.timestamps is not None:
            assert len(self.timestamps) == self.n, "One timestamp per point is required."
        return self

    def __repr__(self):
        return f"TimeOrderedPointCloud(n={self.n}, d={self.d}) at {hex(id(self))}"

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


class SquareMatrix(BaseModel):
    """A dense n x n real matrix, tagged with the role it plays.

    Attributes:
        values: (n, n) float64 array.
        kind: One of distance, similarity, transition, fused or bandwidth (the positive σ matrix of the kernel).
    """

    model_config = _ARRAYS

    values: np.ndarray
    kind: MatrixKind = "distance"

    @field_validator("values", mode="before")
    @classmethod
    def validate_values(cls, v) -> np.ndarray:
        """Validate the values."""
        arr = np.array(v, dtype=np.float64)
        assert arr.ndim == 2 and arr.shape[0] == arr.shape[1], f"Matrix must be square, got shape {arr.shape}."
        assert arr.shape[0] >= 1, "empty input"
        arr.setflags(write=False)
        return arr

    def __repr__(self):
        return f"SquareMatrix(n={self.n}, kind={self.kind}) at {hex(id(self))}"

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def check(self, tol: float = 1e-12) -> None:
        """Check the invariants of this matrix's kind.

        Args:
            tol: Absolute tolerance for symmetry and row sums.

        Raises:
            ValueError: If an invariant does not hold.
        """
        v = self.values
        if not np.all(np.isfinite(v)):
            raise ValueError(f"{self.kind} matrix contains non-finite values.")

        if self.kind in ("distance", "similarity") and not np.allclose(v, v.T, rtol=0, atol=tol):
            raise ValueError(f"{self.kind} matrix is not symmetric.")

        if self.kind == "distance":
            if np.any(np.diag(v) != 0):
                raise ValueError("distance matrix must have a zero diagonal.")
            if np.any(v < 0):
                raise ValueError("distance matrix must be non-negative.")
        elif self.kind == "similarity":
            if np.any(v < 0) or np.any(v > 1):
                raise ValueError("similarity matrix entries must lie in [0, 1].")
        elif self.kind == "transition":
            if np.any(v < 0):
                raise ValueError("transition matrix must be non-negative.")
            if not np.allclose(v.sum(axis=1), 1.0, rtol=0, atol=tol):
                raise ValueError("transition matrix rows must sum to 1.")


class KernelParams(BaseModel):
    """Parameters of the autotuned Gaussian similarity kernel.

    Attributes:
        kappa: Proportion of points used as nearest neighbors when estimating the bandwidth.
        beta: Bandwidth multiplier, usually in [0.3, 0.8].
    """

    kappa: float = 0.1
    beta: float = 0.5

    @field_validator("kappa")
    @classmethod
    def validate_kappa(cls, v) -> float:
        assert 0 < v <= 1, "kappa must be in (0, 1]."
        return v

    @field_validator("beta")
    @classmethod
    def validate_beta(cls, v) -> float:
        assert v > 0, "beta must be positive."
        return v


class SnfParams(BaseModel):
    """Parameters of similarity network fusion.

    Attributes:
        kappa: Proportion of points in each masked neighborhood.
        iterations: Number of cross-diffusion iterations T.
        reg: Weight of the identity added to every transition matrix after each iteration. 0 runs the plain
            recursion, which mixes towards a uniform matrix when the neighborhoods of the inputs disagree.
    """

    kappa: float = 0.1
    iterations: int = Field(20, alias="T")
    reg: float = 0.0

    model_config = {"populate_by_name": True}

    @field_validator("kappa")
    @classmethod
    def validate_kappa(cls, v) -> float:
        assert 0 < v <= 1, "kappa must be in (0, 1]."
        return v

    @field_validator("iterations")
    @classmethod
    def validate_iterations(cls, v) -> int:
        assert v >= 1, "At least one iteration is required."
        return v

    @field_validator("reg")
    @classmethod
    def validate_reg(cls, v) -> float:
        assert v >= 0, "reg must be non-negative."
        return v


class ScatteringParams(BaseModel):
    """Parameters of the 2D Morlet scattering transform.

    Attributes:
        J: Number of dyadic scales.
        L: Number of directions, equally spaced in [0, pi).
        input_n: Side length of the input image. Must be a power of two and at least 2**J.
        output_n: Side length of every path after block averaging. Must divide input_n.
        sigma0: Width of the Gaussian envelope at scale 0, in pixels.
        xi0: Magnitude of the center frequency at scale 0, in radians per pixel.
    """

    J: int = 4
    L: int = 8
    input_n: int = 256
    output_n: int = 32
    xi0: float = 3 * math.pi / 4
    sigma0: float = 0.8 * 2 * math.pi / (3 * math.pi / 4)

    @field_validator("J", "L")
    @classmethod
    def validate_counts(cls, v) -> int:
        assert v >= 1, "J and L must be at least 1."
        return v

    @field_validator("sigma0", "xi0")
    @classmethod
    def validate_positive(cls, v) -> float:
        assert v > 0, "sigma0 and xi0 must be positive."
        return v

    @model_validator(mode="after")
    def validate_sizes(self) -> "ScatteringParams":
        n = self.input_n
        if n < 2 or n & (n - 1) != 0:
            raise ValueError(f"input_n must be a power of two, got {n}.")
        if 2**self.J > n:
            raise ValueError(f"2**J = {2 ** self.J} exceeds input_n = {n}.")
        assert self.output_n >= 1 and n % self.output_n == 0, "output_n must divide input_n."
        return self

    @property
    def n_paths(self) -> Tuple[int, int, int]:
        """Number of paths at orders 0, 1 and 2."""
        return 1, self.L * self.J, self.L**2 * self.J * (self.J - 1) // 2

    @property
    def n_coefficients(self) -> int:
        return self.output_n**2 * sum(self.n_paths)


class FilterBank(BaseModel):
    """Morlet wavelets and the Gaussian lowpass of a scattering transform, stored in the frequency domain.

    Attributes:
        params: The parameters the bank was built from.
        psi: (J, L, n, n) complex array, psi[j, l] is the wavelet at scale j and direction l * pi / L.
        phi: (n, n) real array, the normalized Gaussian lowpass at scale J.
    """

    model_config = _ARRAYS

    params: ScatteringParams
    psi: np.ndarray
    phi: np.ndarray

    def __repr__(self):
        p = self.params
        return f"FilterBank(J={p.J}, L={p.L}, n={p.input_n}) at {hex(id(self))}"

    @property
    def n(self) -> int:
        return self.phi.shape[0]

    @property
    def directions(self) -> np.ndarray:
        return np.arange(self.params.L) * np.pi / self.params.L

    def spatial(self, j: int, l: int) -> np.ndarray:  # noqa: E741
        """The wavelet psi[j, l] in the spatial domain, origin at index (0, 0)."""
        return np.fft.ifft2(self.psi[j, l])


class MfccParams(BaseModel):
    """Parameters of MFCC extraction.

    Attributes:
        window: Analysis window length in samples.
        hop: Hop size in samples.
        n_coeffs: Number of cepstral coefficients kept.
        n_mels: Number of triangular mel bands.
        sample_rate: Expected sample rate of the input clips in Hz.
    """

    window: int = 4096
    hop: int = 256
    n_coeffs: int = 20
    n_mels: int = 40
    sample_rate: int = 22050

    @model_validator(mode="after")
    def validate_sizes(self) -> "MfccParams":
        assert self.window >= 1 and self.hop >= 1, "window and hop must be positive."
        assert self.hop <= self.window, "hop must not exceed window."
        assert 1 <= self.n_coeffs <= self.n_mels, "n_coeffs must be in [1, n_mels]."
        assert self.sample_rate > 0, "sample_rate must be positive."
        return self


class AudioClip(BaseModel):
    """A mono audio signal.

    Attributes:
        samples: Sample values in [-1, 1].
        sample_rate: Sample rate in Hz.
    """

    model_config = _ARRAYS

    samples: np.ndarray
    sample_rate: int

    @field_validator("samples", mode="before")
    @classmethod
    def validate_samples(cls, v) -> np.ndarray:
        arr = np.asarray(v, dtype=np.float64)
        assert arr.ndim == 1, "Audio clips must be mono."
        assert arr.size > 0, "empty input"
        return arr

    @field_validator("sample_rate")
    @classmethod
    def validate_sample_rate(cls, v) -> int:
        assert v > 0, "sample_rate must be positive."
        return v


class FrameSequence(BaseModel):
    """An ordered sequence of equally sized grayscale frames with pixel values in [0, 1].

    Attributes:
        frames: (N, h, w) array.
    """

    model_config = _ARRAYS

    frames: np.ndarray

    @field_validator("frames", mode="before")
    @classmethod
    def validate_frames(cls, v) -> np.ndarray:
        if isinstance(v, (list, tuple)):
            shapes = {np.shape(f) for f in v}
            assert len(shapes) <= 1, f"inconsistent frame sizes: {sorted(shapes)}"
        arr = np.asarray(v, dtype=np.float64)
        assert arr.ndim == 3, "Frames must form an (N, h, w) array."
        assert arr.shape[0] >= 1, "empty input"
        return arr


class PathDescriptor(BaseModel):
    """One scattering path. Order 1 uses (j1, l1), order 2 additionally (j2, l2) with j2 < j1.

    Attributes:
        order: Number of wavelets along the path.
        j1: Scale of the first wavelet.
        l1: Direction of the first wavelet.
        j2: Scale of the second wavelet.
        l2: Direction of the second wavelet.
    """

    model_config = {"frozen": True}

    order: int
    j1: Optional[int] = None
    l1: Optional[int] = None
    j2: Optional[int] = None
    l2: Optional[int] = None


class ScatteringFeatures(BaseModel):
    """Flattened scattering coefficients with the path layout that produced them.

    Attributes:
        coefficients: All coefficients, one output_n x output_n block per path, in path_index order.
        path_index: Path descriptors aligned with the storage order.
        output_n: Side length of every block.
    """

    model_config = _ARRAYS

    coefficients: np.ndarray
    path_index: Tuple[PathDescriptor, ...]
    output_n: int

    @model_validator(mode="after")
    def validate_layout(self) -> "ScatteringFeatures":
        expected = len(self.path_index) * self.output_n**2
        assert self.coefficients.shape == (expected,), "Coefficient count does not match the path index."
        return self

    def __repr__(self):
        return f"ScatteringFeatures(paths={len(self.path_index)}, coefficients={self.coefficients.size})"

    def blocks(self, order: Optional[int] = None) -> np.ndarray:
        """Return the path blocks as an array of shape (paths, output_n, output_n).

        Args:
            order: Restrict to the paths of this order.
        """
        blocks = self.coefficients.reshape(-1, self.output_n, self.output_n)
        if order is None:
            return blocks
        mask = np.array([p.order == order for p in self.path_index])
        return blocks[mask]

    @property
    def order0(self) -> np.ndarray:
        return self.blocks(0)

    @property
    def order1(self) -> np.ndarray:
        return self.blocks(1)

    @property
    def order2(self) -> np.ndarray:
        return self.blocks(2)


class PRCurve(BaseModel):
    """Precision at each relevant item of one ranking.

    Attributes:
        recalls: i / R for i = 1..R.
        precisions: i / (rank of the i-th relevant item).
    """

    recalls: List[float]
    precisions: List[float]

    @model_validator(mode="after")
    def validate_curve(self) -> "PRCurve":
        assert len(self.recalls) == len(self.precisions), "recalls and precisions must align."
        assert all(a < b for a, b in zip(self.recalls, self.recalls[1:])), "recalls must be strictly increasing."
        assert all(0 < p <= 1 for p in self.precisions), "precisions must lie in (0, 1]."
        return self

    @property
    def average_precision(self) -> float:
        return float(np.mean(self.precisions))


class LabeledCollection(BaseModel):
    """Object-level comparisons of n labeled items, either as distances (ranked ascending) or similarities
    (ranked descending).

    Attributes:
        labels: One class id per item.
        distance: Object-level distance matrix.
        similarity: Object-level similarity matrix.
    """

    model_config = _ARRAYS

    labels: Tuple[str, ...]
    distance: Optional[SquareMatrix] = None
    similarity: Optional[SquareMatrix] = None

    @field_validator("labels", mode="before")
    @classmethod
    def validate_labels(cls, v) -> Tuple[str, ...]:
        return tuple(str(lab) for lab in v)

    @model_validator(mode="after")
    def validate_matrix(self) -> "LabeledCollection":
        assert (self.distance is None) != (self.similarity is None), "Supply exactly one of distance or similarity."
        assert self.matrix.n == len(self.labels), "size mismatch between labels and matrix."
        return self

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def matrix(self) -> SquareMatrix:
        return self.distance if self.distance is not None else self.similarity

    @property
    def ascending(self) -> bool:
        """Whether smaller values rank first."""
        return self.distance is not None

    def class_sizes(self) -> Dict[str, int]:
        classes, counts = np.unique(np.array(self.labels), return_counts=True)
        return dict(zip(classes.tolist(), counts.tolist()))


class RetrievalReport(BaseModel):
    """Summary of a retrieval evaluation.

    Attributes:
        pipeline: Name of the pipeline (or tool) that produced the comparisons.
        map: Mean average precision over all queries.
        per_class_map: Mean average precision over the queries of each class.
        params: Parameters that produced the comparisons.
        n_items: Number of items evaluated.
        mean_curve: Averaged precision-recall curve.
    """

    pipeline: str
    map: float
    per_class_map: Dict[str, float]
    params: Dict[str, Union[str, int, float, bool, None, list, dict]] = {}
    n_items: int
    mean_curve: Optional[PRCurve] = None


class PipelineConfig(BaseModel):
    """Configuration of one pipeline run.

    Attributes:
        pipeline: One of the ten named pipeline variants.
        common_dim: Side length every SSM is resized to before fusion and scattering.
        kernel: Similarity kernel parameters, shared by upstream and downstream kernels.
        snf: Similarity network fusion parameters, shared by upstream and downstream fusion. reg defaults to
            PIPELINE_SNF_REG here.
        scattering: Scattering transform parameters of the Scatter pipelines, None for L2 pipelines. input_n follows
            common_dim.
        mfcc: MFCC parameters for raw audio items.
        noise_psnr_db: pSNR of injected noise in dB. None (or infinity) disables noise.
        seed: Seed of the noise generator.
        input_dir: Dataset root (any fsspec URL).
        output_dir: Output root (any fsspec URL).
        label_columns: Fields of the labels file that form the class id. None uses the first field.
        workers: Size of the per-item worker pool.
        cache_dir: Root of the artifact cache. None disables caching.
        dump_intermediates: Write per-item SSMs and heatmaps.
    """

    pipeline: PipelineName = "FusedScatter"
    common_dim: int = 256
    kernel: KernelParams = KernelParams()
    snf: SnfParams = SnfParams(reg=PIPELINE_SNF_REG)
    scattering: Optional[ScatteringParams] = None
    mfcc: MfccParams = MfccParams()
    noise_psnr_db: Optional[float] = None
    seed: int = 0
    input_dir: str = "."
    output_dir: str = "./output"
    label_columns: Optional[List[int]] = None
    workers: int = 1
    cache_dir: Optional[str] = None
    dump_intermediates: bool = False

    @field_validator("common_dim")
    @classmethod
    def validate_common_dim(cls, v) -> int:
        assert v >= 2, "common_dim must be at least 2."
        return v

    @field_validator("noise_psnr_db")
    @classmethod
    def validate_noise(cls, v) -> Optional[float]:
        if v is None or math.isinf(v) and v > 0:
            return None
        assert math.isfinite(v), "noise_psnr_db must be finite or +infinity."
        return v

    @field_validator("workers")
    @classmethod
    def validate_workers(cls, v) -> int:
        assert v >= 1, "workers must be at least 1."
        return v

    @model_validator(mode="before")
    @classmethod
    def regularize_snf(cls, data):
        """An snf block without reg takes PIPELINE_SNF_REG."""
        if isinstance(data, dict) and isinstance(data.get("snf"), dict) and "reg" not in data["snf"]:
            data = {**data, "snf": {**data["snf"], "reg": PIPELINE_SNF_REG}}
        return data

    @model_validator(mode="before")
    @classmethod
    def inherit_input_n(cls, data):
        """A scattering block without input_n takes common_dim. L2 pipelines carry no scattering block."""
        if isinstance(data, dict):
            if not str(data.get("pipeline", "FusedScatter")).endswith("Scatter"):
                return {**data, "scattering": None}
            scat = data.get("scattering")
            if isinstance(scat, dict) and "input_n" not in scat:
                data = {**data, "scattering": {**scat, "input_n": data.get("common_dim", 256)}}
        return data

    @model_validator(mode="after")
    def validate_scattering(self) -> "PipelineConfig":
        if not self.pipeline.endswith("Scatter"):
            return self
        if self.scattering is None:
            self.scattering = ScatteringParams(input_n=self.common_dim)
        assert self.scattering.input_n == self.common_dim, "scattering.input_n must equal common_dim."
        return self

    def report_params(self) -> Dict[str, Union[str, int, float, bool, None, list, dict]]:
        """The parameters that determine the results, excluding scheduling and storage locations."""
        return self.model_dump(exclude={"input_dir", "output_dir", "workers", "cache_dir", "dump_intermediates"})

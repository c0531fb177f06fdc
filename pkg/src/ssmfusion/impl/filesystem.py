import logging
from typing import Any, Dict, List, Optional, Sequence, Union

import fsspec
from fsspec import AbstractFileSystem

from ssmfusion.models import AudioClip, FrameSequence, TimeOrderedPointCloud
from ssmfusion.ops.synth import SynthDataset
from ssmfusion.util.io import read_array, read_frames, read_labels, read_wav, write_array, write_labels

logger = logging.getLogger(__name__)

ITEMS_DIR = "items"
LABELS_FILE = "labels.txt"
ITEMS_FILE = "items.txt"


class DatasetItemFSSpec:
    """One item of a dataset directory, backed by fsspec storage.

    An item directory holds its audio as `audio.wav` (raw clip) or `audio.ssmf` (a precomputed point cloud), and its
    video as a `video/` directory of PGM frames (read in lexicographic order) or `video.ssmf`.

    Attributes:
        name (str): The item name.
        label (str): The item's class id.
        path (str): The item directory on the dataset filesystem.
    """

    def __init__(self, dataset: "DatasetFSSpec", name: str, label: str):
        self.dataset = dataset
        self.name = name
        self.label = label

    def __repr__(self):
        return f"DatasetItemFSSpec(name={self.name}, label={self.label}) at {hex(id(self))}"

    @property
    def path(self) -> str:
        return f"{self.dataset.root}/{ITEMS_DIR}/{self.name}"

    @property
    def fs(self) -> AbstractFileSystem:
        return self.dataset.fs

    def _url(self, path: str) -> str:
        return self.fs.unstrip_protocol(path)

    def load_audio(self) -> Union[AudioClip, TimeOrderedPointCloud]:
        """Load the audio modality.

        Returns:
            The raw clip if `audio.wav` exists, otherwise the point cloud stored in `audio.ssmf`.

        Raises:
            FileNotFoundError: If the item has no audio.
        """
        wav = f"{self.path}/audio.wav"
        if self.fs.exists(wav):
            return read_wav(self._url(wav))

        ssmf = f"{self.path}/audio.ssmf"
        if self.fs.exists(ssmf):
            return TimeOrderedPointCloud(points=read_array(self._url(ssmf)))

        raise FileNotFoundError(f"No audio.wav or audio.ssmf found for item {self.name} in {self.path}")

    def load_video(self) -> Union[FrameSequence, TimeOrderedPointCloud]:
        """Load the video modality.

        Returns:
            The frames under `video/` if any, otherwise the point cloud stored in `video.ssmf`.

        Raises:
            FileNotFoundError: If the item has no video.
        """
        frames = sorted(self.fs.glob(f"{self.path}/video/*.pgm"))
        if frames:
            return read_frames([self._url(p) for p in frames])

        ssmf = f"{self.path}/video.ssmf"
        if self.fs.exists(ssmf):
            return TimeOrderedPointCloud(points=read_array(self._url(ssmf)))

        raise FileNotFoundError(f"No video/*.pgm or video.ssmf found for item {self.name} in {self.path}")


class DatasetFSSpec:
    """A labeled dataset directory backed by fsspec storage.

    Layout::

        <root>/labels.txt           one line of comma separated label fields per item
        <root>/items.txt            optional, item names in the order of labels.txt
        <root>/items/<name>/...     modality files, see DatasetItemFSSpec

    Without items.txt, the item directories are taken in sorted order.

    Attributes:
        fs (AbstractFileSystem): The dataset filesystem.
        root (str): The root path on that filesystem.
        label_columns (Optional[List[int]]): Label fields that form the class id.
    """

    def __init__(
        self,
        root: str,
        label_columns: Optional[Sequence[int]] = None,
        fs_args: Optional[Dict[str, Any]] = None,
    ):
        """
        Args:
            root: The dataset root, any fsspec URL.
            label_columns: Label fields that form the class id. None uses the first field.
            fs_args: Additional arguments for the filesystem.
        """
        self.fs: AbstractFileSystem = fsspec.core.url_to_fs(root, **(fs_args or {}))[0]
        self.root: str = self.fs._strip_protocol(root).rstrip("/")
        self.label_columns = list(label_columns) if label_columns is not None else None
        self._items: Optional[List[DatasetItemFSSpec]] = None

    def __repr__(self):
        return f"DatasetFSSpec(root={self.root}, items={len(self.items)}) at {hex(id(self))}"

    def _query_names(self) -> List[str]:
        listing = f"{self.root}/{ITEMS_FILE}"
        if self.fs.exists(listing):
            with self.fs.open(listing, "r") as f:
                return [line.strip() for line in f.read().splitlines() if line.strip()]

        item_dir = f"{self.root}/{ITEMS_DIR}"
        if not self.fs.exists(item_dir):
            raise FileNotFoundError(f"Dataset {self.root} has no {ITEMS_DIR}/ directory.")

        paths = self.fs.ls(item_dir, detail=True)
        names = [p["name"].rstrip("/").rsplit("/", 1)[-1] for p in paths if p.get("type", "") == "directory"]

        # Remove any hidden directories
        return sorted(n for n in names if not n.startswith("."))

    def query(self) -> List[DatasetItemFSSpec]:
        """List the items with their labels.

        Raises:
            FileNotFoundError: If the labels file is missing.
            ValueError: If the number of labels differs from the number of items.
        """
        labels_path = f"{self.root}/{LABELS_FILE}"
        if not self.fs.exists(labels_path):
            raise FileNotFoundError(f"File not found: {labels_path}")

        names = self._query_names()
        labels = read_labels(self.fs.unstrip_protocol(labels_path), self.label_columns)
        if len(labels) != len(names):
            raise ValueError(f"inconsistent item counts: {len(names)} items but {len(labels)} labels in {self.root}")
        if len(set(names)) != len(names):
            raise ValueError(f"Duplicate item names in {self.root}.")

        logger.info("Found %d items in %s", len(names), self.root)
        return [DatasetItemFSSpec(self, name, label) for name, label in zip(names, labels)]

    @property
    def items(self) -> List[DatasetItemFSSpec]:
        if self._items is None:
            self._items = self.query()
        return self._items

    @property
    def labels(self) -> List[str]:
        return [it.label for it in self.items]

    def get_item(self, name: str) -> Optional[DatasetItemFSSpec]:
        """Get an item by name.

        Args:
            name: Name of the item to retrieve.

        Returns:
            DatasetItemFSSpec: The item with the given name, or None if it does not exist.
        """
        for item in self.items:
            if item.name == name:
                return item

        return None


def write_dataset(dataset: SynthDataset, root: str) -> DatasetFSSpec:
    """Write a synthetic dataset as a dataset directory of MatrixFiles.

    Args:
        dataset: The generated dataset.
        root: Destination root, any fsspec URL.

    Returns:
        DatasetFSSpec: The written dataset, opened for reading.
    """
    root = root.rstrip("/")
    for item in dataset.items:
        write_array(item.modality_a.points, f"{root}/{ITEMS_DIR}/{item.name}/audio.ssmf")
        write_array(item.modality_b.points, f"{root}/{ITEMS_DIR}/{item.name}/video.ssmf")

    write_labels(dataset.labels, f"{root}/{LABELS_FILE}")
    write_labels([item.name for item in dataset.items], f"{root}/{ITEMS_FILE}")

    logger.info("Wrote %d items to %s", len(dataset.items), root)
    return DatasetFSSpec(root)

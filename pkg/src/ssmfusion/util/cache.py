import hashlib
import json
import logging
import threading
import uuid
from typing import Any, Dict, Optional, Sequence, Tuple

import fsspec
import numpy as np
import psutil
import zarr
from fsspec import AbstractFileSystem

logger = logging.getLogger(__name__)


def content_key(arrays: Sequence[np.ndarray], params: Dict[str, Any]) -> str:
    """SHA-256 of the arrays' shapes and float64 bytes followed by the canonical JSON of the parameters.

    Args:
        arrays: Input data, in a fixed order.
        params: The configuration subset the cached result depends on.

    Returns:
        str: Hex digest.
    """
    h = hashlib.sha256()
    for arr in arrays:
        arr = np.ascontiguousarray(arr, dtype="<f8")
        h.update(json.dumps(list(arr.shape)).encode())
        h.update(arr.tobytes())
    h.update(json.dumps(params, sort_keys=True).encode())
    return h.hexdigest()


class FeatureCache:
    """Feature vectors stored as zarr arrays under a root directory, one array per content key.

    Writes go to a temporary key and are renamed into place under a lock, so concurrent readers either find a
    complete array or none.

    Attributes:
        fs (AbstractFileSystem): The filesystem holding the cache.
        root (str): Root path on that filesystem.
    """

    def __init__(self, root: str, fs_args: Optional[Dict[str, Any]] = None):
        """
        Args:
            root: Cache root, any fsspec URL.
            fs_args: Additional arguments for the filesystem.
        """
        self.fs: AbstractFileSystem = fsspec.core.url_to_fs(root, **(fs_args or {}))[0]
        self.root: str = self.fs._strip_protocol(root).rstrip("/")
        self._lock = threading.Lock()

    def path(self, key: str) -> str:
        return f"{self.root}/{key[:2]}/{key}.zarr"

    def _store(self, path: str, mode: str) -> zarr.storage.FSStore:
        return zarr.storage.FSStore(
            path,
            fs=self.fs,
            mode=mode,
            key_separator="/",
            dimension_separator="/",
            create=mode == "w",
        )

    def __contains__(self, key: str) -> bool:
        return self.fs.exists(f"{self.path(key)}/.zarray")

    def get(self, key: str) -> Optional[np.ndarray]:
        """Return the cached array, or None on a miss."""
        if key not in self:
            logger.debug("Cache miss %s", key[:12])
            return None

        logger.debug("Cache hit %s", key[:12])
        return zarr.open_array(store=self._store(self.path(key), "r"), mode="r")[:]

    def put(self, key: str, values: np.ndarray) -> None:
        """Store an array under a key. An existing entry is left untouched."""
        final = self.path(key)
        tmp = f"{self.root}/tmp/{key}-{uuid.uuid4().hex}.zarr"

        zarr.array(np.asarray(values), store=self._store(tmp, "w"), overwrite=True)

        with self._lock:
            if key in self:
                self.fs.rm(tmp, recursive=True)
                return
            self.fs.makedirs(final.rsplit("/", 1)[0], exist_ok=True)
            self.fs.mv(tmp, final, recursive=True)

        logger.debug("Cached %s", key[:12])


def fits_in_memory(shape: Tuple[int, ...], itemsize: int = 8) -> Tuple[bool, int, int]:
    """Check if an array of the given shape fits in the available memory.

    Args:
        shape: Shape of the array to allocate.
        itemsize: Bytes per element.

    Returns:
        A tuple containing:
            - A boolean indicating if the array fits in memory.
            - The number of bytes requested.
            - The number of bytes available.
    """
    requested = int(np.prod(np.array(shape, dtype=np.int64))) * itemsize
    available = psutil.virtual_memory().available
    fits = requested < available

    return fits, requested, available

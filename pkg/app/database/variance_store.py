import hashlib
import json
import logging
import os
import threading
from typing import Any, Dict, Optional, Tuple

from app.config.settings import VARIANCE_CACHE_PATH

logger = logging.getLogger(__name__)

CACHE_FORMAT = "fafd-variance-cache"
CACHE_VERSION = 1

# Singleton instance
_variance_store = None


def parameter_hash(key_params: Dict[str, Any]) -> str:
    """SHA-256 of the canonical JSON of the parameters that determine a variance."""
    canonical = json.dumps(key_params, sort_keys=True, separators=(",", ":"), default=repr)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class VarianceStore:
    """
    Parameter-hash to variance cache backed by a JSON-lines file.

    The first line is a header with format name and version; each further line
    is one record. Records are kept in memory and appended to the file as they
    are computed.
    """

    def __init__(self, path: Optional[str] = VARIANCE_CACHE_PATH):
        self.path = path
        self._records: Dict[str, Tuple[float, float]] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0
        if self.path:
            self._load()

    def _header(self) -> str:
        return json.dumps({"format": CACHE_FORMAT, "version": CACHE_VERSION})

    def _load(self):
        if not os.path.exists(self.path):
            return
        try:
            with open(self.path, "r", encoding="utf-8") as handle:
                header = json.loads(handle.readline() or "{}")
                if header.get("format") != CACHE_FORMAT or header.get("version") != CACHE_VERSION:
                    logger.warning(f"Ignoring variance cache {self.path}: unexpected header {header}")
                    self._rewrite()
                    return
                for line in handle:
                    if not line.strip():
                        continue
                    record = json.loads(line)
                    self._records[record["key"]] = (float(record["variance"]), float(record["error"]))
            logger.info(f"Loaded {len(self._records)} cached variances from {self.path}")
        except (OSError, ValueError, KeyError) as e:
            logger.error(f"Error reading variance cache {self.path}: {str(e)}")
            raise

    def _rewrite(self):
        directory = os.path.dirname(self.path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(self.path, "w", encoding="utf-8") as handle:
            handle.write(self._header() + "\n")

    def get(self, key: str) -> Optional[Tuple[float, float]]:
        with self._lock:
            value = self._records.get(key)
            if value is None:
                self.misses += 1
            else:
                self.hits += 1
            return value

    def put(self, key: str, key_params: Dict[str, Any], variance: float, error: float):
        with self._lock:
            if key in self._records:
                return
            self._records[key] = (variance, error)
            if not self.path:
                return
            if not os.path.exists(self.path):
                self._rewrite()
            record = {"key": key, "params": key_params, "variance": variance, "error": error}
            with open(self.path, "a", encoding="utf-8") as handle:
                handle.write(json.dumps(record, sort_keys=True, default=repr) + "\n")
            logger.debug(f"Cached variance {key[:12]} for {key_params.get('kind')}")

    def __len__(self) -> int:
        return len(self._records)


def get_variance_store() -> VarianceStore:
    """Process-wide variance cache, created on first use."""
    global _variance_store
    if _variance_store is None:
        _variance_store = VarianceStore(VARIANCE_CACHE_PATH)
        logger.info(f"Variance cache opened at {VARIANCE_CACHE_PATH}")
    return _variance_store


def reset_variance_store(path: Optional[str] = VARIANCE_CACHE_PATH) -> VarianceStore:
    """Replace the singleton, e.g. to point it at another file."""
    global _variance_store
    _variance_store = VarianceStore(path)
    return _variance_store

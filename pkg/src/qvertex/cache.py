"""Content-addressed on-disk cache for expensive series computations.

Keys are sha256 hashes of a canonical description string (family,
parameters, windows, artifact kind); payloads are the canonical text
serializations, so entries are bit-exact across platforms.  Writes go
through a temporary file and an atomic rename; a corrupt or mismatched
entry is ignored and recomputed.
"""

from __future__ import annotations

import hashlib
import logging
import os
import tempfile
from typing import Callable, Optional

log = logging.getLogger("qvertex.cache")


def content_key(*parts: str) -> str:
    digest = hashlib.sha256()
    for p in parts:
        digest.update(p.encode("utf-8"))
        digest.update(b"\x00")
    return digest.hexdigest()


class SeriesCache:
    """A directory of ``<sha256>.txt`` payloads with atomic writes."""

    def __init__(self, root: Optional[str]):
        self.root = root
        if root is not None:
            os.makedirs(root, exist_ok=True)

    def enabled(self) -> bool:
        return self.root is not None

    def _path(self, key: str) -> str:
        return os.path.join(self.root, key + ".txt")

    def get(self, key: str) -> Optional[str]:
        if not self.enabled():
            return None
        path = self._path(key)
        try:
            with open(path, "r", encoding="utf-8") as fh:
                head = fh.readline()
                if head.rstrip("\n") != f"key {key}":
                    log.warning("cache entry %s has a mismatched key; ignoring", key)
                    return None
                return fh.read()
        except FileNotFoundError:
            return None
        except OSError as exc:
            log.warning("cache entry %s unreadable (%s); ignoring", key, exc)
            return None

    def put(self, key: str, payload: str) -> None:
        if not self.enabled():
            return
        path = self._path(key)
        fd, tmp = tempfile.mkstemp(dir=self.root, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(f"key {key}\n")
                fh.write(payload)
            os.replace(tmp, path)
        except OSError:
            try:
                os.unlink(tmp)
            except OSError:
                pass
            raise

    def get_or_compute(self, key: str, compute: Callable[[], str]) -> str:
        got = self.get(key)
        if got is not None:
            return got
        payload = compute()
        self.put(key, payload)
        return payload

"""
Corpus Operations
-----------------
Create / read / list operations for the on-disk test corpus.

Layout: ``<corpus_dir>/<target-name>/<sha256 of contents>``. Every entry is
the raw byte string that drives the generators, so an entry is a complete
test case on its own. Entries are never modified once written; a write goes
to a temporary file in the same directory and is moved into place with
``os.replace``, so concurrent workers never leave a torn file behind.
"""

import hashlib
import logging
import os
import tempfile
from pathlib import Path
from typing import List, Optional, Union

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def compute_sha256_hash(data: bytes) -> str:
    """
    Lowercase hex SHA-256 of an entry's contents (also its file name).

    Example: b"" -> "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
    """
    return hashlib.sha256(data).hexdigest()


def _target_dir(corpus_dir: PathLike, target: str) -> Path:
    return Path(corpus_dir) / target


# ============================================================================
# CREATE Operations
# ============================================================================

def create_entry(corpus_dir: PathLike, target: str, data: bytes) -> str:
    """
    Store a corpus entry for a target.

    Writing the same bytes twice is a no-op.

    Args:
        corpus_dir: Corpus root directory
        target: Target name (sub-directory)
        data: Entry contents

    Returns:
        The entry's hash (its file name)

    Raises:
        OSError: If the directory cannot be created or written
    """
    digest = compute_sha256_hash(data)
    directory = _target_dir(corpus_dir, target)
    directory.mkdir(parents=True, exist_ok=True)
    destination = directory / digest
    if destination.exists():
        return digest

    fd, temporary = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(temporary, destination)
    except OSError:
        logger.error(f"Failed to write corpus entry {target}/{digest}")
        if os.path.exists(temporary):
            os.unlink(temporary)
        raise
    logger.info(f"Stored corpus entry {target}/{digest} ({len(data)} bytes)")
    return digest


# ============================================================================
# READ Operations
# ============================================================================

def get_entry(corpus_dir: PathLike, target: str, digest: str) -> Optional[bytes]:
    """Contents of an entry, or None if it does not exist."""
    path = _target_dir(corpus_dir, target) / digest
    if not path.is_file():
        return None
    data = path.read_bytes()
    if compute_sha256_hash(data) != digest:
        logger.warning(f"Corpus entry {target}/{digest} does not match its hash")
    return data


def get_all_entries(corpus_dir: PathLike, target: str) -> List[tuple[str, bytes]]:
    """
    All entries of a target as (hash, contents), sorted by hash.

    Temporary files left by an interrupted write are skipped. A missing
    target directory simply has no entries.
    """
    directory = _target_dir(corpus_dir, target)
    if not directory.is_dir():
        return []
    entries = []
    for path in sorted(directory.iterdir()):
        if not path.is_file() or path.name.startswith("."):
            continue
        data = path.read_bytes()
        if compute_sha256_hash(data) != path.name:
            logger.warning(f"Corpus entry {target}/{path.name} does not match its hash")
        entries.append((path.name, data))
    return entries


def get_all_targets(corpus_dir: PathLike) -> List[str]:
    """Names of the target directories present in the corpus."""
    root = Path(corpus_dir)
    if not root.is_dir():
        return []
    return sorted(path.name for path in root.iterdir() if path.is_dir())


# ============================================================================
# UTILITY Functions
# ============================================================================

def entry_exists(corpus_dir: PathLike, target: str, digest: str) -> bool:
    return (_target_dir(corpus_dir, target) / digest).is_file()


def count_entries(corpus_dir: PathLike, target: str) -> int:
    return len(get_all_entries(corpus_dir, target))

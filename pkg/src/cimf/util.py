"""Small shared helpers: deterministic sub-seeding and atomic file writes."""

from __future__ import annotations

import hashlib
import os
import tempfile


def derive_seed(base_seed: int, *names: str) -> int:
    """Derive a named sub-seed from a base seed.

    Every source of randomness in a run (fold assignment, per-cell factor
    initialization, corpus generation) draws its own seed through this so a
    single run seed reproduces everything, including partial reruns.
    """
    tag = str(base_seed) + "|" + "|".join(names)
    digest = hashlib.sha256(tag.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") % (2**63)


def atomic_write_text(path: str, text: str) -> None:
    """Write text to path via a temp file + rename so readers never see partial files."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise

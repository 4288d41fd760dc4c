"""Versioned prompt-template assets.

Templates ship as plain text files; their content hash goes into result
provenance and the run manifest so any byte-level drift is detectable.
"""

from __future__ import annotations

import hashlib
from functools import lru_cache
from importlib import resources


@lru_cache(maxsize=None)
def load_template(name: str) -> tuple[str, str]:
    """Return (template text, sha256 hex digest of the raw bytes)."""
    data = resources.files(__name__).joinpath(f"{name}.txt").read_bytes()
    return data.decode("utf-8"), hashlib.sha256(data).hexdigest()


def render(name: str, **fields: str) -> tuple[str, str]:
    """Render template ``name``; returns (prompt, template hash)."""
    text, digest = load_template(name)
    return text.format(**fields), digest

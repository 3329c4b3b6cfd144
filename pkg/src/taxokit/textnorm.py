"""String normalization and small hashing helpers used across modules."""

from __future__ import annotations

import hashlib
import json
from typing import Any


def normalize_term(text: str) -> str:
    """Canonical form used for matching terms across datasets.

    Case-fold, trim, collapse internal whitespace, underscores to spaces.
    """
    return " ".join(text.replace("_", " ").split()).casefold()


def definition_key(term: str) -> str:
    """Key under which imported definitions are stored: case-folded, trimmed."""
    return term.strip().casefold()


def canonical_json(obj: Any) -> str:
    """Deterministic JSON rendering (sorted keys, no whitespace jitter)."""
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def digest(*parts: str) -> str:
    """Stable hex digest over an ordered sequence of strings."""
    h = hashlib.sha256()
    for part in parts:
        h.update(part.encode("utf-8"))
        h.update(b"\x1f")
    return h.hexdigest()

"""Typed named-entity dictionaries and their resolution to embedding vectors.

Dictionary files are UTF-8 TSV: one entry per line as ``<type>\\t<surface>``
where type is ``Per``, ``Loc``, or ``Org`` and the surface holds one or more
space-separated tokens.  Lines starting with ``#`` are comments.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .embeddings import EmbeddingSpace, phrase_vector_stats
from .errors import FormatError

NE_TYPES = ("Per", "Loc", "Org")


@dataclass
class NeDictionary:
    """Deduplicated list of (surface tokens, entity type) entries."""

    entries: list[tuple[tuple[str, ...], str]] = field(default_factory=list)
    duplicates_skipped: int = 0

    def __len__(self) -> int:
        return len(self.entries)

    def by_type(self, ne_type: str) -> list[tuple[str, ...]]:
        return [surface for surface, t in self.entries if t == ne_type]


@dataclass
class ResolvedEntities:
    """Per-type surface/vector pairs plus the count of unresolvable entries."""

    by_type: dict[str, list[tuple[str, np.ndarray]]] = field(default_factory=dict)
    oov_count: dict[str, int] = field(default_factory=dict)
    skipped_tokens: int = 0

    def vectors(self, ne_type: str) -> list[np.ndarray]:
        return [v for _, v in self.by_type.get(ne_type, [])]


def load_dictionary(path: str) -> NeDictionary:
    """Parse a dictionary TSV, dropping duplicate (surface, type) pairs with a tally."""
    entries: list[tuple[tuple[str, ...], str]] = []
    seen: set[tuple[tuple[str, ...], str]] = set()
    duplicates = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            if "\t" not in line:
                raise FormatError(f"{path}:{lineno}: expected '<type>\\t<surface>'")
            tag, surface_text = line.split("\t", 1)
            if tag not in NE_TYPES:
                raise FormatError(
                    f"{path}:{lineno}: unknown type {tag!r}; expected one of {NE_TYPES}"
                )
            tokens = tuple(surface_text.split(" "))
            if not surface_text or any(not t for t in tokens):
                raise FormatError(f"{path}:{lineno}: empty surface token")
            key = (tokens, tag)
            if key in seen:
                duplicates += 1
                continue
            seen.add(key)
            entries.append(key)
    return NeDictionary(entries=entries, duplicates_skipped=duplicates)


def resolve(
    dictionary: NeDictionary,
    space: EmbeddingSpace,
    lowercase_fallback: bool = False,
) -> ResolvedEntities:
    """Map every entry to its phrase vector; entries with no in-vocabulary member
    are counted per type as OOV and excluded."""
    by_type: dict[str, list[tuple[str, np.ndarray]]] = {t: [] for t in NE_TYPES}
    oov: dict[str, int] = {t: 0 for t in NE_TYPES}
    skipped = 0
    for tokens, ne_type in dictionary.entries:
        vector, missing = phrase_vector_stats(space, list(tokens), lowercase_fallback)
        if vector is None:
            oov[ne_type] += 1
        else:
            skipped += missing
            by_type[ne_type].append((" ".join(tokens), vector))
    return ResolvedEntities(by_type=by_type, oov_count=oov, skipped_tokens=skipped)

"""Word-embedding spaces: loading, lookup, phrase composition, PCA projection.

The on-disk format is a plain-text table: a header line ``<count> <dim>``
followed by one line per token holding the token and ``dim`` decimal floats,
all whitespace-separated, UTF-8 encoded.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDataError, FormatError, UsageError


@dataclass
class EmbeddingSpace:
    """Immutable vocabulary-indexed table of dense vectors for one language."""

    dim: int
    entries: dict[str, np.ndarray]
    language_tag: str = ""
    duplicates_skipped: int = 0

    def __len__(self) -> int:
        return len(self.entries)

    def tokens(self) -> list[str]:
        return list(self.entries)

    def matrix(self) -> np.ndarray:
        """All vectors stacked in vocabulary (insertion) order, shape (V, dim)."""
        if not self.entries:
            return np.zeros((0, self.dim))
        return np.stack(list(self.entries.values()))


@dataclass
class ProjectedPoints:
    """Low-dimensional coordinates for labeled tokens, all the same length (2 or 3)."""

    rows: list[tuple[str, str, tuple[float, ...]]] = field(default_factory=list)

    @property
    def out_dim(self) -> int:
        return len(self.rows[0][2]) if self.rows else 0


def load_embeddings(
    path: str, limit: int | None = None, language_tag: str = ""
) -> EmbeddingSpace:
    """Read a text embedding file into an :class:`EmbeddingSpace`.

    At most ``limit`` entries are kept, in file order.  Duplicate tokens keep
    the first occurrence and are tallied in ``duplicates_skipped``.  Without a
    ``limit``, the number of rows must match the header count exactly.
    """
    entries: dict[str, np.ndarray] = {}
    duplicates = 0
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 2:
            raise FormatError(f"{path}: header must be '<count> <dim>', got {header!r}")
        try:
            count, dim = int(parts[0]), int(parts[1])
        except ValueError:
            raise FormatError(
                f"{path}: header must hold two integers, got {header!r}"
            ) from None
        if count < 0 or dim <= 0:
            raise FormatError(f"{path}: header count/dim out of range: {header!r}")

        rows_read = 0
        for lineno, line in enumerate(fh, start=2):
            if limit is not None and len(entries) >= limit:
                break
            fields = line.split()
            if not fields:
                raise FormatError(f"{path}:{lineno}: blank line inside table")
            token, raw_values = fields[0], fields[1:]
            if len(raw_values) != dim:
                raise FormatError(
                    f"{path}:{lineno}: expected {dim} components, got {len(raw_values)}"
                )
            try:
                vector = np.array([float(v) for v in raw_values])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: non-numeric component") from None
            if not np.all(np.isfinite(vector)):
                raise FormatError(f"{path}:{lineno}: non-finite component")
            rows_read += 1
            if token in entries:
                duplicates += 1
            else:
                entries[token] = vector

        if limit is None and rows_read != count:
            raise FormatError(
                f"{path}: header declares {count} rows but file holds {rows_read}"
            )
    return EmbeddingSpace(
        dim=dim,
        entries=entries,
        language_tag=language_tag,
        duplicates_skipped=duplicates,
    )


def save_embeddings(space: EmbeddingSpace, path: str) -> None:
    """Write a space in the text embedding format at full float precision.

    Values are printed with ``repr`` so a reload reproduces every vector
    bit-for-bit.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(space.entries)} {space.dim}\n")
        for token, vector in space.entries.items():
            values = " ".join(repr(float(v)) for v in vector)
            fh.write(f"{token} {values}\n")


def lookup(
    space: EmbeddingSpace, token: str, lowercase_fallback: bool = False
) -> np.ndarray | None:
    """Exact-match vector lookup, optionally retrying with the lowercased token."""
    vector = space.entries.get(token)
    if vector is None and lowercase_fallback:
        vector = space.entries.get(token.lower())
    return vector


def phrase_vector_stats(
    space: EmbeddingSpace, tokens: list[str], lowercase_fallback: bool = False
) -> tuple[np.ndarray | None, int]:
    """Mean vector of the found member tokens, plus how many were skipped as OOV.

    Returns ``(None, len(tokens))`` when no member token is in the space.
    """
    if not tokens:
        raise UsageError("phrase_vector requires at least one token")
    found = []
    for token in tokens:
        vector = lookup(space, token, lowercase_fallback)
        if vector is not None:
            found.append(vector)
    if not found:
        return None, len(tokens)
    return np.mean(found, axis=0), len(tokens) - len(found)


def phrase_vector(
    space: EmbeddingSpace, tokens: list[str], lowercase_fallback: bool = False
) -> np.ndarray | None:
    """Mean vector over the member tokens found in the space (OOV members skipped)."""
    vector, _ = phrase_vector_stats(space, tokens, lowercase_fallback)
    return vector


def project(
    points: list[tuple[str, str, np.ndarray]], out_dim: int
) -> ProjectedPoints:
    """Centered PCA projection of labeled vectors onto the top principal axes.

    The per-axis sign ambiguity is fixed by forcing the largest-magnitude
    loading of each component to be positive, making the output deterministic.
    """
    if out_dim not in (2, 3):
        raise UsageError(f"out_dim must be 2 or 3, got {out_dim}")
    if len(points) < out_dim + 1:
        raise UsageError(
            f"projection to {out_dim}-D needs at least {out_dim + 1} points, "
            f"got {len(points)}"
        )
    vectors = np.stack([np.asarray(v, dtype=float) for _, _, v in points])
    if vectors.shape[1] < out_dim:
        raise UsageError(
            f"input dimension {vectors.shape[1]} is below out_dim {out_dim}"
        )
    centered = vectors - vectors.mean(axis=0)
    if not np.any(np.abs(centered) > 0):
        raise DegenerateDataError("all points identical; nothing to project")
    # Right singular vectors of the centered data are the principal axes.
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[:out_dim]
    for k in range(out_dim):
        anchor = np.argmax(np.abs(components[k]))
        if components[k, anchor] < 0:
            components[k] = -components[k]
    coords = centered @ components.T
    rows = [
        (token, label, tuple(float(c) for c in coords[i]))
        for i, (token, label, _) in enumerate(points)
    ]
    return ProjectedPoints(rows=rows)

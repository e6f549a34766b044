"""Hypersphere z-score features: how far a vector sits from each entity
center, standardized against the vocabulary-wide distance distribution.

For each entity type the z-score is (distance - mu) / sigma where mu and
sigma are the mean and population standard deviation of distances from every
vocabulary vector to that type's center.  Tokens outside the vocabulary get
the neutral all-zero feature.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .embeddings import EmbeddingSpace, lookup
from .errors import DegenerateDataError, UsageError
from .hypersphere import Hypersphere, distances_to_center, euclidean_distance

FEATURE_TYPE_ORDER = ("Per", "Loc", "Org")


@dataclass
class HypersphereStats:
    """Per-type mean and population standard deviation of center distances."""

    mu: dict[str, float]
    sigma: dict[str, float]

    def types(self) -> list[str]:
        return [t for t in FEATURE_TYPE_ORDER if t in self.mu] + [
            t for t in self.mu if t not in FEATURE_TYPE_ORDER
        ]


@dataclass
class FeatureTable:
    """One z-score row per corpus token, with its position and surface form."""

    types: list[str]
    rows: list[tuple[int, int, str, np.ndarray]] = field(default_factory=list)

    def matrix(self) -> np.ndarray:
        if not self.rows:
            return np.zeros((0, len(self.types)))
        return np.stack([z for _, _, _, z in self.rows])


def compute_stats(
    space: EmbeddingSpace, spheres: dict[str, Hypersphere]
) -> HypersphereStats:
    """Distance mean/standard deviation per type over the full vocabulary.

    Uses the population formula (divisor N).  Rejects vocabularies of fewer
    than two tokens and types whose distances have zero spread.
    """
    if not spheres:
        raise UsageError("compute_stats requires at least one sphere")
    if len(space) < 2:
        raise UsageError("stats need a vocabulary of at least 2 tokens")
    matrix = space.matrix()
    mu: dict[str, float] = {}
    sigma: dict[str, float] = {}
    for ne_type, sphere in spheres.items():
        if sphere.dim != space.dim:
            raise UsageError(
                f"sphere {ne_type} dim {sphere.dim} != space dim {space.dim}"
            )
        distances = distances_to_center(matrix, sphere.center)
        m = float(distances.mean())
        s = float(np.sqrt(np.mean((distances - m) ** 2)))
        if s == 0.0:
            raise DegenerateDataError(
                f"all vocabulary tokens equidistant from the {ne_type} center"
            )
        mu[ne_type] = m
        sigma[ne_type] = s
    return HypersphereStats(mu=mu, sigma=sigma)


def featurize(
    v: np.ndarray, spheres: dict[str, Hypersphere], stats: HypersphereStats
) -> np.ndarray:
    """z-score of the vector's distance to each type center, in canonical
    type order (Per, Loc, Org, then any extras)."""
    values = []
    for ne_type in stats.types():
        sphere = spheres[ne_type]
        distance = euclidean_distance(v, sphere.center)
        values.append((distance - stats.mu[ne_type]) / stats.sigma[ne_type])
    return np.array(values)


def featurize_corpus(
    sentences: list[list[str]],
    space: EmbeddingSpace,
    spheres: dict[str, Hypersphere],
    stats: HypersphereStats,
    lowercase_fallback: bool = False,
) -> FeatureTable:
    """One feature row per token; out-of-vocabulary tokens get all zeros."""
    types = stats.types()
    zero = np.zeros(len(types))
    rows: list[tuple[int, int, str, np.ndarray]] = []
    for sent_idx, sentence in enumerate(sentences):
        for tok_idx, token in enumerate(sentence):
            vector = lookup(space, token, lowercase_fallback)
            z = zero if vector is None else featurize(vector, spheres, stats)
            rows.append((sent_idx, tok_idx, token, z))
    return FeatureTable(types=types, rows=rows)


def save_feature_table(table: FeatureTable, path: str) -> None:
    """TSV with columns sentence_idx, token_idx, token, then one z per type."""
    with open(path, "w", encoding="utf-8") as fh:
        header = ["sentence_idx", "token_idx", "token"] + [
            f"z_{t.lower()}" for t in table.types
        ]
        fh.write("\t".join(header) + "\n")
        for sent_idx, tok_idx, token, z in table.rows:
            cells = [str(sent_idx), str(tok_idx), token] + [repr(float(x)) for x in z]
            fh.write("\t".join(cells) + "\n")


def load_feature_table(path: str) -> FeatureTable:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        types = [h[2:].capitalize() for h in header[3:]]
        rows: list[tuple[int, int, str, np.ndarray]] = []
        for line in fh:
            cells = line.rstrip("\n").split("\t")
            rows.append(
                (
                    int(cells[0]),
                    int(cells[1]),
                    cells[2],
                    np.array([float(x) for x in cells[3:]]),
                )
            )
    return FeatureTable(types=types, rows=rows)

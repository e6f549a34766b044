"""Named-entity hyperspheres: a center vector plus a radius per entity type.

A token is predicted to be a named entity of a type when its embedding lies
strictly inside that type's hypersphere (Euclidean distance to the center is
less than the radius).  Fitting picks the centroid of the known entities as
the center and then sweeps every threshold between consecutive distinct
distances to maximize F1 against the labeled universe.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dictionary import NE_TYPES, ResolvedEntities
from .embeddings import EmbeddingSpace
from .errors import UsageError

SPHERE_TYPES = NE_TYPES + ("All",)


@dataclass
class Hypersphere:
    """Center C and radius R for one entity type."""

    ne_type: str
    center: np.ndarray
    radius: float

    @property
    def dim(self) -> int:
        return int(self.center.shape[0])


@dataclass
class PrfReport:
    """Counts and scores for set-membership prediction.

    ``true_count`` is the number of labeled entities, ``predicted_count`` the
    number of items inside the sphere, ``hit_count`` their intersection.
    """

    true_count: int
    predicted_count: int
    hit_count: int
    precision: float
    recall: float
    f1: float


@dataclass
class Universe:
    """Identified vectors with a subset marked as true entities."""

    items: list[tuple[str, np.ndarray]]
    positives: set[str] = field(default_factory=set)

    def __post_init__(self) -> None:
        ids = [identifier for identifier, _ in self.items]
        if len(set(ids)) != len(ids):
            raise UsageError("universe identifiers must be unique")
        unknown = self.positives - set(ids)
        if unknown:
            raise UsageError(
                f"positives not among universe items: {sorted(unknown)[:5]}"
            )

    def vectors(self) -> np.ndarray:
        return np.stack([v for _, v in self.items])

    def positive_mask(self) -> np.ndarray:
        return np.array([identifier in self.positives for identifier, _ in self.items])


def euclidean_distance(w: np.ndarray, c: np.ndarray) -> float:
    """Euclidean distance sqrt(sum_k (w_k - c_k)^2)."""
    w = np.asarray(w, dtype=float)
    c = np.asarray(c, dtype=float)
    if w.shape != c.shape:
        raise UsageError(f"dimension mismatch: {w.shape} vs {c.shape}")
    return float(np.sqrt(np.sum((w - c) ** 2)))


def distances_to_center(matrix: np.ndarray, center: np.ndarray) -> np.ndarray:
    """Row-wise Euclidean distances from ``matrix`` (N x dim) to ``center``."""
    diff = matrix - np.asarray(center, dtype=float)
    return np.sqrt(np.sum(diff * diff, axis=1))


def fit_center(positives: list[np.ndarray], method: str = "mean") -> np.ndarray:
    """Center of the positive vectors: componentwise mean (default) or median."""
    if len(positives) == 0:
        raise UsageError("fit_center requires at least one positive vector")
    stacked = np.stack([np.asarray(v, dtype=float) for v in positives])
    if method == "mean":
        return stacked.mean(axis=0)
    if method == "median":
        return np.median(stacked, axis=0)
    raise UsageError(f"unknown center method {method!r}; expected 'mean' or 'median'")


def prf_from_counts(true_count: int, predicted_count: int, hit_count: int) -> PrfReport:
    """Precision hit/predicted, recall hit/true, F1 their harmonic mean (0 at 0+0)."""
    precision = hit_count / predicted_count if predicted_count > 0 else 0.0
    recall = hit_count / true_count if true_count > 0 else 0.0
    if precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        f1 = 0.0
    return PrfReport(
        true_count=true_count,
        predicted_count=predicted_count,
        hit_count=hit_count,
        precision=precision,
        recall=recall,
        f1=f1,
    )


def sweep_candidates(distances: np.ndarray) -> np.ndarray:
    """All radius candidates: 0, midpoints between consecutive distinct sorted
    distances, and just above the maximum."""
    distinct = np.unique(distances)
    candidates = [0.0]
    candidates.extend((distinct[:-1] + distinct[1:]) / 2.0)
    candidates.append(float(np.nextafter(distinct[-1], np.inf)))
    return np.array(candidates)


def fit_radius(center: np.ndarray, universe: Universe) -> tuple[float, PrfReport]:
    """Exact F1-maximizing radius via an exhaustive threshold sweep.

    Returns the smallest candidate radius achieving the maximal F1, with its
    report.  Candidates are 0, the midpoints between consecutive distinct
    distances, and one step past the largest distance, so every achievable
    (predicted set) partition is visited.
    """
    if not universe.items:
        raise UsageError("fit_radius requires a non-empty universe")
    positive_mask = universe.positive_mask()
    true_count = int(positive_mask.sum())
    if true_count == 0:
        raise UsageError("fit_radius requires at least one positive in the universe")

    distances = distances_to_center(universe.vectors(), center)
    order = np.argsort(distances, kind="stable")
    sorted_dist = distances[order]
    sorted_pos = positive_mask[order]
    # prefix[i] = hits among the i closest items
    hit_prefix = np.concatenate([[0], np.cumsum(sorted_pos)])

    best_radius = 0.0
    best: PrfReport | None = None
    for radius in sweep_candidates(distances):
        predicted = int(np.searchsorted(sorted_dist, radius, side="left"))
        report = prf_from_counts(true_count, predicted, int(hit_prefix[predicted]))
        if best is None or report.f1 > best.f1:
            best = report
            best_radius = float(radius)
    assert best is not None
    return best_radius, best


def contains(sphere: Hypersphere, w: np.ndarray) -> bool:
    """Strict membership: distance to the center is less than the radius."""
    return euclidean_distance(w, sphere.center) < sphere.radius


def ne_likelihood(sphere: Hypersphere, w: np.ndarray) -> float:
    """Distance to the center; smaller means more entity-like (rank ascending)."""
    return euclidean_distance(w, sphere.center)


def evaluate(sphere: Hypersphere, universe: Universe) -> PrfReport:
    """Score the sphere's strict-membership predictions against the labeled universe."""
    distances = distances_to_center(universe.vectors(), sphere.center)
    inside = distances < sphere.radius
    positive_mask = universe.positive_mask()
    return prf_from_counts(
        true_count=int(positive_mask.sum()),
        predicted_count=int(inside.sum()),
        hit_count=int((inside & positive_mask).sum()),
    )


def build_universe(
    space: EmbeddingSpace, resolved: ResolvedEntities, ne_types: list[str]
) -> Universe:
    """Universe of all vocabulary tokens plus the resolved entries of the given
    types; positives are exactly those entries' surfaces.

    Multi-word (or otherwise out-of-vocabulary) surfaces are added as extra
    items carrying their phrase vectors.
    """
    items: dict[str, np.ndarray] = dict(space.entries)
    positives: set[str] = set()
    for ne_type in ne_types:
        for surface, vector in resolved.by_type.get(ne_type, []):
            if surface not in items:
                items[surface] = vector
            positives.add(surface)
    return Universe(items=list(items.items()), positives=positives)


def fit_sphere(
    space: EmbeddingSpace,
    resolved: ResolvedEntities,
    ne_type: str,
    center_method: str = "mean",
) -> tuple[Hypersphere, PrfReport]:
    """Fit one type's sphere against the vocabulary universe: centroid center,
    then the F1-optimal radius.  Type ``All`` pools every entity type."""
    if ne_type not in SPHERE_TYPES:
        raise UsageError(f"unknown sphere type {ne_type!r}; expected {SPHERE_TYPES}")
    member_types = list(NE_TYPES) if ne_type == "All" else [ne_type]
    positives = [v for t in member_types for v in resolved.vectors(t)]
    if not positives:
        raise UsageError(f"no resolved entries for type {ne_type}")
    center = fit_center(positives, method=center_method)
    universe = build_universe(space, resolved, member_types)
    radius, report = fit_radius(center, universe)
    return Hypersphere(ne_type=ne_type, center=center, radius=radius), report


def sphere_to_json(sphere: Hypersphere) -> str:
    """Serialize as JSON with full-precision floats (round-trip stable)."""
    payload = {
        "ne_type": sphere.ne_type,
        "radius": sphere.radius,
        "center": [float(c) for c in sphere.center],
    }
    return json.dumps(payload, indent=2)


def sphere_from_json(text: str) -> Hypersphere:
    payload = json.loads(text)
    return Hypersphere(
        ne_type=payload["ne_type"],
        center=np.array([float(c) for c in payload["center"]]),
        radius=float(payload["radius"]),
    )


def save_sphere(sphere: Hypersphere, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(sphere_to_json(sphere))
        fh.write("\n")


def load_sphere(path: str) -> Hypersphere:
    with open(path, encoding="utf-8") as fh:
        return sphere_from_json(fh.read())

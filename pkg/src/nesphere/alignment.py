"""Linear maps between embedding spaces, learned adversarially or in closed form.

The adversarial trainer pits a linear generator (the alignment matrix) against
a one-hidden-layer critic whose weights are clipped to a fixed box after every
update; the critic estimates the transport distance between the mapped source
cloud and the target cloud, and the generator descends that estimate.  The
Procrustes path instead solves for the best orthogonal map from known vector
pairs in closed form.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .embeddings import EmbeddingSpace
from .errors import DegenerateDataError, FormatError, TrainingError, UsageError
from .hypersphere import Hypersphere, distances_to_center


@dataclass
class AlignmentMap:
    """Dense linear map: target = matrix @ source (shape target_dim x source_dim)."""

    matrix: np.ndarray
    source_tag: str = ""
    target_tag: str = ""
    training_meta: dict = field(default_factory=dict)

    @property
    def target_dim(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def source_dim(self) -> int:
        return int(self.matrix.shape[1])


@dataclass
class AdversarialConfig:
    """Knobs for adversarial training; every value is configurable, none hard-coded."""

    critic_hidden_size: int = 500
    clip_value: float = 0.01
    steps: int = 20000
    critic_steps_per_generator_step: int = 5
    learning_rate: float = 1e-4
    batch_size: int = 128
    seed: int = 0
    normalize_inputs: bool = False
    orthogonality_strength: float = 0.0
    critic_learning_rate: float | None = None
    trace_every: int = 100

    def __post_init__(self) -> None:
        for name in (
            "critic_hidden_size",
            "clip_value",
            "steps",
            "critic_steps_per_generator_step",
            "learning_rate",
            "batch_size",
        ):
            value = getattr(self, name)
            if value < 0 or (value <= 0 and name != "steps"):
                raise UsageError(f"{name} must be positive, got {value}")


class _RmsProp:
    """Per-parameter scale-normalized gradient steps (decay 0.9, epsilon 1e-8)."""

    def __init__(self, shape: tuple[int, ...], learning_rate: float):
        self.cache = np.zeros(shape)
        self.learning_rate = learning_rate

    def step(self, param: np.ndarray, grad: np.ndarray) -> None:
        self.cache = 0.9 * self.cache + 0.1 * grad * grad
        param -= self.learning_rate * grad / (np.sqrt(self.cache) + 1e-8)


def _leaky_relu(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, x, 0.2 * x)


def _leaky_relu_grad(x: np.ndarray) -> np.ndarray:
    return np.where(x > 0, 1.0, 0.2)


def _normalized_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    safe = np.where(norms < 1e-12, 1.0, norms)
    return matrix / safe


def initial_matrix(target_dim: int, source_dim: int) -> np.ndarray:
    """Identity map when dimensions agree, zero-padded identity otherwise."""
    return np.eye(target_dim, source_dim)


def train_adversarial(
    source: EmbeddingSpace, target: EmbeddingSpace, cfg: AdversarialConfig
) -> AlignmentMap:
    """Learn the alignment matrix by alternating critic/generator updates.

    Per generator step the critic takes
    ``cfg.critic_steps_per_generator_step`` minibatch updates maximizing
    mean(critic(real)) - mean(critic(mapped source)), with every critic
    parameter clipped to [-clip_value, +clip_value]; then the generator takes
    one step lowering the critic's estimate, optionally pulled toward the
    orthogonal manifold.  Fully deterministic for a fixed seed.
    """
    if len(source) == 0 or len(target) == 0:
        raise UsageError("both embedding spaces must be non-empty")
    src = source.matrix()
    tgt = target.matrix()
    if cfg.normalize_inputs:
        src = _normalized_rows(src)
        tgt = _normalized_rows(tgt)
    n_src, source_dim = src.shape
    n_tgt, target_dim = tgt.shape

    rng = np.random.default_rng(cfg.seed)
    M = initial_matrix(target_dim, source_dim)
    hidden = cfg.critic_hidden_size
    clip = cfg.clip_value
    w1 = rng.uniform(-clip, clip, (hidden, target_dim))
    b1 = np.zeros(hidden)
    w2 = rng.uniform(-clip, clip, (1, hidden))
    b2 = np.zeros(1)

    critic_lr = (
        cfg.critic_learning_rate
        if cfg.critic_learning_rate is not None
        else cfg.learning_rate
    )
    opt_m = _RmsProp(M.shape, cfg.learning_rate)
    opt_w1 = _RmsProp(w1.shape, critic_lr)
    opt_b1 = _RmsProp(b1.shape, critic_lr)
    opt_w2 = _RmsProp(w2.shape, critic_lr)
    batch = cfg.batch_size

    def critic_forward(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        pre = x @ w1.T + b1
        post = _leaky_relu(pre)
        return (post @ w2.T + b2).ravel(), pre, post

    critic_estimate = 0.0
    trace: list[tuple[int, float]] = []
    for step in range(cfg.steps):
        for _ in range(cfg.critic_steps_per_generator_step):
            src_idx = rng.integers(0, n_src, batch)
            tgt_idx = rng.integers(0, n_tgt, batch)
            fake = src[src_idx] @ M.T
            real = tgt[tgt_idx]
            d_real, pre_real, post_real = critic_forward(real)
            d_fake, pre_fake, post_fake = critic_forward(fake)
            critic_estimate = float(d_real.mean() - d_fake.mean())
            # Minimize mean(fake) - mean(real): output-layer sensitivities.
            g_real = np.full(batch, -1.0 / batch)
            g_fake = np.full(batch, 1.0 / batch)
            grad_w2 = (g_real @ post_real + g_fake @ post_fake).reshape(1, -1)
            g_hidden_real = np.outer(g_real, w2.ravel()) * _leaky_relu_grad(pre_real)
            g_hidden_fake = np.outer(g_fake, w2.ravel()) * _leaky_relu_grad(pre_fake)
            grad_w1 = g_hidden_real.T @ real + g_hidden_fake.T @ fake
            grad_b1 = g_hidden_real.sum(axis=0) + g_hidden_fake.sum(axis=0)
            opt_w1.step(w1, grad_w1)
            opt_b1.step(b1, grad_b1)
            opt_w2.step(w2, grad_w2)
            np.clip(w1, -clip, clip, out=w1)
            np.clip(b1, -clip, clip, out=b1)
            np.clip(w2, -clip, clip, out=w2)
            np.clip(b2, -clip, clip, out=b2)

        src_idx = rng.integers(0, n_src, batch)
        x = src[src_idx]
        fake = x @ M.T
        d_fake, pre_fake, post_fake = critic_forward(fake)
        generator_loss = float(-d_fake.mean())
        # Raise mean critic output on mapped points: descend -mean(d_fake).
        g_fake = np.full(batch, -1.0 / batch)
        g_hidden_fake = np.outer(g_fake, w2.ravel()) * _leaky_relu_grad(pre_fake)
        grad_m = (g_hidden_fake @ w1).T @ x
        if cfg.orthogonality_strength > 0:
            grad_m = grad_m + cfg.orthogonality_strength * 4.0 * (
                M @ M.T @ M - M
            )
        opt_m.step(M, grad_m)

        if not np.isfinite(critic_estimate) or not np.isfinite(generator_loss):
            raise TrainingError(f"non-finite loss at generator step {step}")
        if step % cfg.trace_every == 0:
            trace.append((step, critic_estimate))

    meta = {
        "iterations": cfg.steps,
        "final_critic_loss": critic_estimate,
        "critic_trace": [[int(s), float(v)] for s, v in trace],
    }
    return AlignmentMap(
        matrix=M,
        source_tag=source.language_tag,
        target_tag=target.language_tag,
        training_meta=meta,
    )


def procrustes(pairs: list[tuple[np.ndarray, np.ndarray]]) -> AlignmentMap:
    """Closed-form orthogonal map minimizing the summed squared pair distances.

    Solves via SVD of the cross-covariance of the paired vectors; the result
    is exactly orthogonal and deterministic.
    """
    if not pairs:
        raise UsageError("procrustes requires at least one pair")
    src = np.stack([np.asarray(s, dtype=float) for s, _ in pairs])
    tgt = np.stack([np.asarray(t, dtype=float) for _, t in pairs])
    if src.shape[1] != tgt.shape[1]:
        raise UsageError(
            f"source dim {src.shape[1]} != target dim {tgt.shape[1]}"
        )
    dim = src.shape[1]
    if len(pairs) < dim:
        raise UsageError(f"need at least {dim} pairs for {dim}-D spaces, got {len(pairs)}")
    cross = src.T @ tgt
    u, sigma, vt = np.linalg.svd(cross)
    tol = sigma.max() * dim * np.finfo(float).eps if sigma.size else 0.0
    if sigma.min() <= tol:
        raise DegenerateDataError("cross-covariance of pairs is rank-deficient")
    matrix = vt.T @ u.T
    return AlignmentMap(
        matrix=matrix,
        training_meta={"iterations": 0, "final_critic_loss": None},
    )


def map_vector(m: AlignmentMap, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (m.source_dim,):
        raise UsageError(
            f"vector dimension {v.shape} does not match map source dim {m.source_dim}"
        )
    return m.matrix @ v


def transform_hypersphere(
    m: AlignmentMap, sphere: Hypersphere, sample: list[np.ndarray]
) -> Hypersphere:
    """Carry a hypersphere through the map: map the center, rescale the radius
    by the median ratio of mapped to original center distances over the sample.

    Sample points essentially at the center (distance below 1e-12) are skipped.
    """
    if len(sample) == 0:
        raise UsageError("transform_hypersphere requires a non-empty sample")
    vectors = np.stack([np.asarray(v, dtype=float) for v in sample])
    if vectors.shape[1] != m.source_dim:
        raise UsageError(
            f"sample dimension {vectors.shape[1]} does not match map source dim "
            f"{m.source_dim}"
        )
    center_mapped = m.matrix @ sphere.center
    source_dist = distances_to_center(vectors, sphere.center)
    keep = source_dist >= 1e-12
    if not np.any(keep):
        raise DegenerateDataError("all sample points coincide with the sphere center")
    mapped = vectors[keep] @ m.matrix.T
    target_dist = distances_to_center(mapped, center_mapped)
    ratio = float(np.median(target_dist / source_dist[keep]))
    return Hypersphere(
        ne_type=sphere.ne_type, center=center_mapped, radius=sphere.radius * ratio
    )


def translation_accuracy(
    m: AlignmentMap,
    lexicon: list[tuple[str, str]],
    source: EmbeddingSpace,
    target: EmbeddingSpace,
    k: int = 1,
) -> float:
    """Fraction of lexicon pairs whose mapped source vector has the gold target
    among its k nearest target-space neighbors (Euclidean).  Pairs missing from
    either vocabulary are skipped."""
    if k <= 0:
        raise UsageError(f"k must be positive, got {k}")
    target_tokens = target.tokens()
    target_index = {token: i for i, token in enumerate(target_tokens)}
    resolvable = [
        (s, t) for s, t in lexicon if s in source.entries and t in target_index
    ]
    if not resolvable:
        raise UsageError("no lexicon pair is resolvable in both spaces")
    mapped = np.stack([m.matrix @ source.entries[s] for s, _ in resolvable])
    tgt = target.matrix()
    # Squared distances suffice for ranking.
    d2 = (
        np.sum(mapped * mapped, axis=1)[:, None]
        - 2.0 * mapped @ tgt.T
        + np.sum(tgt * tgt, axis=1)[None, :]
    )
    hits = 0
    for row, (_, gold) in enumerate(resolvable):
        top = np.argsort(d2[row], kind="stable")[:k]
        if target_index[gold] in top:
            hits += 1
    return hits / len(resolvable)


def load_lexicon(path: str) -> list[tuple[str, str]]:
    """Read a bilingual lexicon TSV: one ``source<TAB>target`` pair per line."""
    pairs: list[tuple[str, str]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if "\t" not in line:
                raise FormatError(f"{path}:{lineno}: expected 'source<TAB>target'")
            s, t = line.split("\t", 1)
            pairs.append((s, t))
    return pairs


def map_to_json(m: AlignmentMap) -> str:
    payload = {
        "source_tag": m.source_tag,
        "target_tag": m.target_tag,
        "rows": m.target_dim,
        "cols": m.source_dim,
        "matrix": [float(x) for x in m.matrix.ravel()],
        "training_meta": m.training_meta,
    }
    return json.dumps(payload, indent=2)


def map_from_json(text: str) -> AlignmentMap:
    payload = json.loads(text)
    rows, cols = int(payload["rows"]), int(payload["cols"])
    matrix = np.array(payload["matrix"], dtype=float).reshape(rows, cols)
    return AlignmentMap(
        matrix=matrix,
        source_tag=payload.get("source_tag", ""),
        target_tag=payload.get("target_tag", ""),
        training_meta=payload.get("training_meta", {}),
    )


def save_map(m: AlignmentMap, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(map_to_json(m))
        fh.write("\n")


def load_map(path: str) -> AlignmentMap:
    with open(path, encoding="utf-8") as fh:
        return map_from_json(fh.read())

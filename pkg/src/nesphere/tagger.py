"""Linear-chain CRF tagger over BIO tags with pluggable feature blocks.

A sequence's score is the sum of tag-transition scores (including virtual
start/stop transitions) and per-token emission scores, where each emission is
a linear function of that token's feature vector.  Training maximizes the
log-likelihood by stochastic gradient ascent with forward-backward expected
counts; decoding is Viterbi with a deterministic lowest-index tie-break.

Feature vectors concatenate an embedding block, an optional hypersphere
z-score block, a lexical-shape block, and a constant bias.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass, field, replace

import numpy as np

from .embeddings import EmbeddingSpace, lookup
from .errors import FormatError, TrainingError, UsageError
from .hypersphere import PrfReport, prf_from_counts

LEXICAL_FEATURE_COUNT = 4
_PUNCT = set(string.punctuation)


@dataclass
class TaggedCorpus:
    """Parallel token and BIO tag sequences plus the ordered tag inventory."""

    sentences: list[list[str]]
    tags: list[list[str]]
    tag_set: list[str]
    repairs: int = 0


@dataclass
class FeatureSpec:
    """Which feature blocks are active and how long the vectors are."""

    embedding_dim: int
    use_embedding: bool = True
    use_hypersphere: bool = False
    hypersphere_dim: int = 3
    use_lexical: bool = True

    @property
    def length(self) -> int:
        total = 1  # constant bias
        if self.use_embedding:
            total += self.embedding_dim
        if self.use_hypersphere:
            total += self.hypersphere_dim
        if self.use_lexical:
            total += LEXICAL_FEATURE_COUNT
        return total


@dataclass
class CrfModel:
    """Transition matrix (with one virtual boundary tag) and per-tag emission weights."""

    tags: list[str]
    transitions: np.ndarray
    emission_weights: np.ndarray
    feature_spec: FeatureSpec
    training_history: list[float] = field(default_factory=list)

    @property
    def boundary(self) -> int:
        """Index of the virtual start/stop tag in the transition matrix."""
        return len(self.tags)

    def tag_index(self, tag: str) -> int:
        try:
            return self.tags.index(tag)
        except ValueError:
            raise UsageError(f"unknown tag {tag!r}; model tags are {self.tags}") from None


@dataclass
class TrainConfig:
    epochs: int = 5
    learning_rate: float = 0.1
    l2_strength: float = 0.0
    seed: int = 0
    shuffle: bool = True


def new_model(tags: list[str], feature_spec: FeatureSpec) -> CrfModel:
    """Zero-initialized model over the given tag inventory."""
    if not tags:
        raise UsageError("model needs at least one tag")
    if len(set(tags)) != len(tags):
        raise UsageError("tags must be unique")
    k = len(tags)
    return CrfModel(
        tags=list(tags),
        transitions=np.zeros((k + 1, k + 1)),
        emission_weights=np.zeros((k, feature_spec.length)),
        feature_spec=feature_spec,
    )


def repair_bio(tags: list[str]) -> tuple[list[str], int]:
    """Rewrite I-X tags lacking a same-type predecessor to B-X; count rewrites."""
    repaired: list[str] = []
    count = 0
    previous = "O"
    for tag in tags:
        if tag.startswith("I-"):
            entity = tag[2:]
            if previous not in (f"B-{entity}", f"I-{entity}"):
                tag = f"B-{entity}"
                count += 1
        repaired.append(tag)
        previous = tag
    return repaired, count


def make_corpus(sentences: list[list[str]], tags: list[list[str]]) -> TaggedCorpus:
    """Build a corpus from parallel sequences, repairing malformed BIO runs."""
    if len(sentences) != len(tags):
        raise UsageError("sentences and tags must be parallel")
    repaired_tags: list[list[str]] = []
    repairs = 0
    for sentence, tag_seq in zip(sentences, tags):
        if len(sentence) != len(tag_seq):
            raise UsageError("every sentence needs exactly one tag per token")
        fixed, n = repair_bio(tag_seq)
        repaired_tags.append(fixed)
        repairs += n
    tag_set: list[str] = []
    seen: set[str] = set()
    for tag_seq in repaired_tags:
        for tag in tag_seq:
            if tag not in seen:
                seen.add(tag)
                tag_set.append(tag)
    return TaggedCorpus(
        sentences=sentences, tags=repaired_tags, tag_set=tag_set, repairs=repairs
    )


def load_corpus(path: str) -> TaggedCorpus:
    """Read a tagged corpus: one ``token<TAB>tag`` per line, blank line between
    sentences."""
    sentences: list[list[str]] = []
    tags: list[list[str]] = []
    current_tokens: list[str] = []
    current_tags: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                if current_tokens:
                    sentences.append(current_tokens)
                    tags.append(current_tags)
                    current_tokens, current_tags = [], []
                continue
            if "\t" not in line:
                raise FormatError(f"{path}:{lineno}: expected 'token<TAB>tag'")
            token, tag = line.split("\t", 1)
            if not token or not tag:
                raise FormatError(f"{path}:{lineno}: empty token or tag")
            current_tokens.append(token)
            current_tags.append(tag)
    if current_tokens:
        sentences.append(current_tokens)
        tags.append(current_tags)
    return make_corpus(sentences, tags)


def save_corpus(corpus: TaggedCorpus, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sentence, tag_seq in zip(corpus.sentences, corpus.tags):
            for token, tag in zip(sentence, tag_seq):
                fh.write(f"{token}\t{tag}\n")
            fh.write("\n")


def lexical_features(token: str) -> np.ndarray:
    """Binary shape indicators: initial capital, all caps, contains digit,
    all punctuation."""
    return np.array(
        [
            1.0 if token[:1].isupper() else 0.0,
            1.0 if token.isupper() else 0.0,
            1.0 if any(ch.isdigit() for ch in token) else 0.0,
            1.0 if token and all(ch in _PUNCT for ch in token) else 0.0,
        ]
    )


def build_features(
    sentence: list[str],
    space: EmbeddingSpace | None,
    spec: FeatureSpec,
    hs_rows: np.ndarray | None = None,
    lowercase_fallback: bool = False,
) -> np.ndarray:
    """Per-token feature matrix (n x spec.length) for one sentence."""
    if spec.use_embedding and space is None:
        raise UsageError("embedding block enabled but no embedding space given")
    if spec.use_hypersphere:
        if hs_rows is None:
            raise UsageError("hypersphere block enabled but no feature rows given")
        hs_rows = np.asarray(hs_rows, dtype=float)
        if hs_rows.shape != (len(sentence), spec.hypersphere_dim):
            raise UsageError(
                f"hypersphere rows shape {hs_rows.shape} does not match "
                f"({len(sentence)}, {spec.hypersphere_dim})"
            )
    rows = []
    for i, token in enumerate(sentence):
        blocks = []
        if spec.use_embedding:
            vector = lookup(space, token, lowercase_fallback)
            blocks.append(
                np.zeros(spec.embedding_dim) if vector is None else vector
            )
        if spec.use_hypersphere:
            blocks.append(hs_rows[i])
        if spec.use_lexical:
            blocks.append(lexical_features(token))
        blocks.append(np.ones(1))
        rows.append(np.concatenate(blocks))
    return np.stack(rows)


def _logsumexp(a: np.ndarray, axis: int | None = None) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    out = m + np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis) if axis is not None else float(out.squeeze())


def emission_scores(model: CrfModel, features: np.ndarray) -> np.ndarray:
    """Per-token, per-tag emission scores L (n x |tags|)."""
    return features @ model.emission_weights.T


def score_sequence(model: CrfModel, features: np.ndarray, y: list[str]) -> float:
    """Transition-plus-emission score of one tag sequence, boundary terms included."""
    n = features.shape[0]
    if len(y) != n:
        raise UsageError(f"{n} tokens but {len(y)} tags")
    idx = [model.tag_index(tag) for tag in y]
    t = model.transitions
    b = model.boundary
    scores = emission_scores(model, features)
    total = t[b, idx[0]]
    for i in range(1, n):
        total += t[idx[i - 1], idx[i]]
    total += t[idx[-1], b]
    total += sum(scores[i, idx[i]] for i in range(n))
    return float(total)


def _forward(model: CrfModel, scores: np.ndarray) -> tuple[np.ndarray, float]:
    n, k = scores.shape
    t = model.transitions
    b = model.boundary
    alpha = np.empty((n, k))
    alpha[0] = t[b, :k] + scores[0]
    inner = t[:k, :k]
    for i in range(1, n):
        alpha[i] = _logsumexp(alpha[i - 1][:, None] + inner, axis=0) + scores[i]
    log_z = float(_logsumexp(alpha[-1] + t[:k, b]))
    return alpha, log_z


def _backward(model: CrfModel, scores: np.ndarray) -> np.ndarray:
    n, k = scores.shape
    t = model.transitions
    b = model.boundary
    beta = np.empty((n, k))
    beta[-1] = t[:k, b]
    inner = t[:k, :k]
    for i in range(n - 2, -1, -1):
        beta[i] = _logsumexp(inner + (scores[i + 1] + beta[i + 1])[None, :], axis=1)
    return beta


def log_partition(model: CrfModel, features: np.ndarray) -> float:
    """Log of the summed exponentiated scores over all tag sequences."""
    if features.shape[0] == 0:
        raise UsageError("log_partition requires a non-empty sentence")
    _, log_z = _forward(model, emission_scores(model, features))
    return log_z


def sequence_log_probability(
    model: CrfModel, features: np.ndarray, y: list[str]
) -> float:
    """Log-probability of the tag sequence: score minus log-partition."""
    return score_sequence(model, features, y) - log_partition(model, features)


def log_likelihood_and_gradients(
    model: CrfModel, features: np.ndarray, y: list[str]
) -> tuple[float, np.ndarray, np.ndarray]:
    """Sentence log-likelihood plus its gradients w.r.t. transitions and
    emission weights (observed minus expected counts via forward-backward)."""
    n = features.shape[0]
    if len(y) != n:
        raise UsageError(f"{n} tokens but {len(y)} tags")
    idx = [model.tag_index(tag) for tag in y]
    k = len(model.tags)
    b = model.boundary
    t = model.transitions
    scores = emission_scores(model, features)
    alpha, log_z = _forward(model, scores)
    beta = _backward(model, scores)

    # Unary posteriors p_i(tag).
    unary = np.exp(alpha + beta - log_z)

    grad_t = np.zeros_like(t)
    grad_t[b, :k] -= unary[0]
    grad_t[b, idx[0]] += 1.0
    grad_t[:k, b] -= unary[-1]
    grad_t[idx[-1], b] += 1.0
    inner = t[:k, :k]
    for i in range(n - 1):
        pairwise = np.exp(
            alpha[i][:, None] + inner + (scores[i + 1] + beta[i + 1])[None, :] - log_z
        )
        grad_t[:k, :k] -= pairwise
        grad_t[idx[i], idx[i + 1]] += 1.0

    observed = np.zeros((n, k))
    observed[np.arange(n), idx] = 1.0
    grad_w = (observed - unary).T @ features

    log_likelihood = score_sequence(model, features, y) - log_z
    return log_likelihood, grad_t, grad_w


def train(
    model: CrfModel,
    corpus: TaggedCorpus,
    features: list[np.ndarray],
    config: TrainConfig,
) -> CrfModel:
    """Stochastic gradient ascent on the corpus log-likelihood with L2 decay.

    Visits sentences one at a time (shuffled per epoch when configured),
    applying the sentence gradient plus its share of the L2 penalty gradient.
    Records the mean per-sentence log-likelihood of each epoch in
    ``training_history``.  Returns a new model; the input is unchanged.
    """
    if not corpus.sentences:
        raise UsageError("training corpus is empty")
    if len(features) != len(corpus.sentences):
        raise UsageError("features must be parallel to corpus sentences")
    trained = replace(
        model,
        transitions=model.transitions.copy(),
        emission_weights=model.emission_weights.copy(),
        training_history=list(model.training_history),
    )
    rng = np.random.default_rng(config.seed)
    n_sentences = len(corpus.sentences)
    for epoch in range(config.epochs):
        order = rng.permutation(n_sentences) if config.shuffle else np.arange(n_sentences)
        total_ll = 0.0
        for position, sentence_idx in enumerate(order):
            ll, grad_t, grad_w = log_likelihood_and_gradients(
                trained, features[sentence_idx], corpus.tags[sentence_idx]
            )
            if not np.isfinite(ll):
                raise TrainingError(
                    f"non-finite log-likelihood at epoch {epoch}, "
                    f"sentence {int(sentence_idx)}"
                )
            total_ll += ll
            lr = config.learning_rate
            decay = 2.0 * config.l2_strength / n_sentences
            trained.transitions += lr * (grad_t - decay * trained.transitions)
            trained.emission_weights += lr * (grad_w - decay * trained.emission_weights)
        trained.training_history.append(total_ll / n_sentences)
    return trained


def viterbi(model: CrfModel, features: np.ndarray) -> list[str]:
    """Highest-scoring tag sequence; ties resolve to the lowest tag index."""
    n = features.shape[0]
    if n == 0:
        raise UsageError("viterbi requires a non-empty sentence")
    k = len(model.tags)
    t = model.transitions
    b = model.boundary
    scores = emission_scores(model, features)
    delta = t[b, :k] + scores[0]
    backpointers = np.zeros((n, k), dtype=int)
    inner = t[:k, :k]
    for i in range(1, n):
        candidate = delta[:, None] + inner
        backpointers[i] = np.argmax(candidate, axis=0)
        delta = candidate[backpointers[i], np.arange(k)] + scores[i]
    final = delta + t[:k, b]
    best = int(np.argmax(final))
    path = [best]
    for i in range(n - 1, 0, -1):
        best = int(backpointers[i, best])
        path.append(best)
    path.reverse()
    return [model.tags[j] for j in path]


def extract_spans(tags: list[str]) -> list[tuple[str, int, int]]:
    """Entity spans (type, start, end-exclusive) from a BIO sequence; a bare
    I-X with no same-type predecessor opens a new span."""
    spans: list[tuple[str, int, int]] = []
    open_type: str | None = None
    start = 0
    for i, tag in enumerate(tags):
        if tag.startswith("B-"):
            if open_type is not None:
                spans.append((open_type, start, i))
            open_type, start = tag[2:], i
        elif tag.startswith("I-"):
            if open_type != tag[2:]:
                if open_type is not None:
                    spans.append((open_type, start, i))
                open_type, start = tag[2:], i
        else:
            if open_type is not None:
                spans.append((open_type, start, i))
                open_type = None
    if open_type is not None:
        spans.append((open_type, start, len(tags)))
    return spans


def evaluate_ner(
    model: CrfModel, corpus: TaggedCorpus, features: list[np.ndarray]
) -> PrfReport:
    """Entity-level scores: decode every sentence and count exact
    span-and-type matches against the gold annotation."""
    if len(features) != len(corpus.sentences):
        raise UsageError("features must be parallel to corpus sentences")
    gold_total = 0
    predicted_total = 0
    hits = 0
    for sentence_idx in range(len(corpus.sentences)):
        gold = set(extract_spans(corpus.tags[sentence_idx]))
        predicted = set(extract_spans(viterbi(model, features[sentence_idx])))
        gold_total += len(gold)
        predicted_total += len(predicted)
        hits += len(gold & predicted)
    return prf_from_counts(gold_total, predicted_total, hits)


def model_to_json(model: CrfModel) -> str:
    payload = {
        "tags": model.tags,
        "transitions": [[float(x) for x in row] for row in model.transitions],
        "emission_weights": [
            [float(x) for x in row] for row in model.emission_weights
        ],
        "feature_spec": {
            "embedding_dim": model.feature_spec.embedding_dim,
            "use_embedding": model.feature_spec.use_embedding,
            "use_hypersphere": model.feature_spec.use_hypersphere,
            "hypersphere_dim": model.feature_spec.hypersphere_dim,
            "use_lexical": model.feature_spec.use_lexical,
        },
        "training_history": [float(x) for x in model.training_history],
    }
    return json.dumps(payload, indent=2)


def model_from_json(text: str) -> CrfModel:
    payload = json.loads(text)
    spec = FeatureSpec(**payload["feature_spec"])
    return CrfModel(
        tags=list(payload["tags"]),
        transitions=np.array(payload["transitions"], dtype=float),
        emission_weights=np.array(payload["emission_weights"], dtype=float),
        feature_spec=spec,
        training_history=[float(x) for x in payload.get("training_history", [])],
    )


def save_model(model: CrfModel, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(model_to_json(model))
        fh.write("\n")


def load_model(path: str) -> CrfModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_json(fh.read())

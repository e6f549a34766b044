import numpy as np
import pytest

from nesphere.embeddings import EmbeddingSpace, save_embeddings


@pytest.fixture
def write_space(tmp_path):
    """Write an EmbeddingSpace (or raw dict) to a temp embedding file."""

    def _write(entries: dict[str, np.ndarray], name: str = "emb.txt") -> str:
        dim = len(next(iter(entries.values())))
        space = EmbeddingSpace(
            dim=dim, entries={k: np.asarray(v, dtype=float) for k, v in entries.items()}
        )
        path = tmp_path / name
        save_embeddings(space, str(path))
        return str(path)

    return _write


@pytest.fixture
def write_text(tmp_path):
    """Write raw text to a temp file and return its path."""

    def _write(text: str, name: str = "file.txt") -> str:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)

    return _write

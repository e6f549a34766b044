"""nesphere: named-entity hyperspheres in word-embedding space.

Fit per-type hyperspheres (center + radius) over embedding vocabularies,
align embedding spaces across languages (adversarially or via Procrustes),
carry hyperspheres through an alignment, turn center distances into z-score
features, and train/evaluate a linear-chain CRF tagger with or without the
hypersphere feature block.

Submodules are imported lazily so the CLI can pin the numeric thread
environment before any numerical library loads.
"""

__version__ = "0.1.0"

_SUBMODULES = (
    "alignment",
    "commands",
    "dictionary",
    "embeddings",
    "errors",
    "features",
    "figures",
    "hypersphere",
    "tagger",
)


def __getattr__(name: str):
    if name in _SUBMODULES:
        import importlib

        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")

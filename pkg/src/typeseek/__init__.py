"""Zero-shot typed-entity retrieval over transformer-internal representations."""

from . import corpus, evaluation, index, lexical, projection, ranking, represent, sweep
from .errors import TypeseekError

__version__ = "0.1.0"

__all__ = [
    "TypeseekError",
    "__version__",
    "corpus",
    "evaluation",
    "index",
    "lexical",
    "projection",
    "ranking",
    "represent",
    "sweep",
]

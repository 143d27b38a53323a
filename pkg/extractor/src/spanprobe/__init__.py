"""Dump per-span internal representations from transformer models.

Output files use the retrieval engine's representation-dump interchange
format (JSON Lines or the NRDv1 binary sidecar); the two packages share
nothing but the file formats.
"""

from .extract import ExtractionStats, extract
from .hooks import HookSpec

__version__ = "0.1.0"

__all__ = ["ExtractionStats", "HookSpec", "extract", "__version__"]

"""Dynamic k2-trees over block trees, a static baseline, and a k2-triples store."""

from .codec import etdc_decode, etdc_encode, etdc_length
from .dk2 import DK2Tree
from .schedule import DK2Config, KSchedule, compute_child
from .static import MatrixOracle, StaticK2Tree, build
from .vocab import MatrixVocabulary, VocabLTree

__all__ = [
    "DK2Config",
    "DK2Tree",
    "KSchedule",
    "MatrixOracle",
    "MatrixVocabulary",
    "StaticK2Tree",
    "VocabLTree",
    "build",
    "compute_child",
    "etdc_decode",
    "etdc_encode",
    "etdc_length",
]

__version__ = "0.1.0"

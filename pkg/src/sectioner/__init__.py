"""Per-section PE triage: grayscale imaging, per-section CNNs, score fusion."""

__version__ = "0.1.0"

from sectioner.catalog import CANONICAL_SECTIONS, DEFAULT_FUSION_SECTIONS, SectionCatalog
from sectioner.pe import PeFile, Section, parse_pe, extract_tracked_sections

__all__ = [
    "CANONICAL_SECTIONS",
    "DEFAULT_FUSION_SECTIONS",
    "SectionCatalog",
    "PeFile",
    "Section",
    "parse_pe",
    "extract_tracked_sections",
    "__version__",
]

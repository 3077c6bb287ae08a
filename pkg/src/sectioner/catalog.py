"""Canonical tracked-section catalog.

The canonical order below is the single source of truth for every stage:
imaging output, score-vector slots, importance reports and CLI tables all
index sections in this order.
"""

from __future__ import annotations

from dataclasses import dataclass

CANONICAL_SECTIONS: tuple[str, ...] = (
    ".text",
    ".data",
    ".rdata",
    ".idata",
    ".rsrc",
    ".reloc",
    ".tls",
)

# .tls is tracked and imaged but excluded from the fusion vector by default.
DEFAULT_FUSION_SECTIONS: tuple[str, ...] = CANONICAL_SECTIONS[:6]


@dataclass(frozen=True)
class SectionCatalog:
    """Ordered tracked-section names plus the fusion subset."""

    names: tuple[str, ...] = CANONICAL_SECTIONS
    fusion: tuple[str, ...] = DEFAULT_FUSION_SECTIONS

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError("catalog names must be unique")
        extra = set(self.fusion) - set(self.names)
        if extra:
            raise ValueError(f"fusion subset not in catalog: {sorted(extra)}")
        canonical_order = tuple(n for n in self.names if n in set(self.fusion))
        if self.fusion != canonical_order:
            raise ValueError("fusion subset must preserve canonical order")

    @property
    def fusion_dim(self) -> int:
        return len(self.fusion)

    def fusion_index(self, name: str) -> int:
        return self.fusion.index(name)


def default_catalog() -> SectionCatalog:
    return SectionCatalog()

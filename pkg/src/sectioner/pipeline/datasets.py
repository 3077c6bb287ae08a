"""Per-section labelled image sets built from a manifest split."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from sectioner.catalog import SectionCatalog
from sectioner.errors import SectionerError
from sectioner.imaging import image_section
from sectioner.pe import extract_tracked_sections, parse_pe
from sectioner.pipeline.manifest import ManifestRow

log = logging.getLogger(__name__)


@dataclass
class SectionDataset:
    section_name: str
    images: np.ndarray  # (N, 64, 64) uint8
    labels: np.ndarray  # (N,) int64
    shas: list[str] = field(default_factory=list)

    @property
    def count(self) -> int:
        return int(self.labels.shape[0])


def _image_file(row: ManifestRow, catalog: SectionCatalog):
    try:
        pe = parse_pe(Path(row.path).read_bytes())
    except (OSError, SectionerError) as exc:
        return row, None, exc
    images = {name: image_section(sec) for name, sec in extract_tracked_sections(pe, catalog).items()}
    return row, images, None


def build_section_datasets(
    rows: list[ManifestRow],
    catalog: SectionCatalog | None = None,
    *,
    threads: int = 1,
) -> tuple[dict[str, SectionDataset], list[tuple[str, str]]]:
    """For each catalog section, the (image, label) set over ``rows``.

    Files that fail to parse are skipped and reported, never fatal.
    Results are merged in manifest order, so the output is identical for
    any thread count.
    """
    catalog = catalog or SectionCatalog()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda r: _image_file(r, catalog), rows))
    else:
        results = [_image_file(r, catalog) for r in rows]

    skipped: list[tuple[str, str]] = []
    per_section: dict[str, list] = {name: [] for name in catalog.names}
    for row, images, exc in results:
        if exc is not None:
            skipped.append((row.sha256, str(exc)))
            log.warning("skipping %s: %s", row.path, exc)
            continue
        for name, img in images.items():
            per_section[name].append((img.pixels, row.label, row.sha256))

    datasets: dict[str, SectionDataset] = {}
    for name in catalog.names:
        entries = per_section[name]
        if entries:
            pixels = np.stack([e[0] for e in entries])
            labels = np.array([e[1] for e in entries], dtype=np.int64)
            shas = [e[2] for e in entries]
        else:
            pixels = np.zeros((0, 64, 64), dtype=np.uint8)
            labels = np.zeros(0, dtype=np.int64)
            shas = []
        datasets[name] = SectionDataset(section_name=name, images=pixels, labels=labels, shas=shas)
    return datasets, skipped

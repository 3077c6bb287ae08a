"""Synthetic PE writer and benchmark corpus generator.

``build_pe`` emits a minimal but well-formed PE image from a declarative
list of (name, bytes) sections.  It packs headers with its own struct
layout and shares no code with :mod:`sectioner.pe`, so round-trip tests
can treat it as ground truth for the parser.

``write_corpus`` produces the labelled benchmark corpus: benign files get
low-entropy structured section contents, malicious files carry a
high-entropy random-byte motif in ``.rsrc`` and ``.idata``.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_DOS_HEADER_SIZE = 0x40
_COFF_SIZE = 20
_SECTION_HEADER_SIZE = 40


@dataclass(frozen=True)
class BuiltSection:
    """Ground-truth record of one section as written into the image."""

    name: str
    raw_name: bytes
    raw_offset: int
    raw_size: int
    virtual_size: int
    data: bytes


@dataclass(frozen=True)
class BuiltPe:
    data: bytes
    sections: tuple[BuiltSection, ...]


def build_pe(
    sections: list[tuple[str, bytes]],
    *,
    dos_stub: bytes = b"",
    optional_header_size: int = 0,
    machine: int = 0x8664,
    timestamp: int = 0,
    characteristics: int = 0x0102,
    file_alignment: int = 1,
    virtual_sizes: list[int] | None = None,
) -> BuiltPe:
    """Pack a minimal valid PE image containing ``sections`` in order.

    Section names longer than 8 bytes are rejected; raw data is laid out
    back to back after the section table, padded up to ``file_alignment``.
    """
    if file_alignment < 1:
        raise ValueError("file_alignment must be >= 1")
    e_lfanew = _DOS_HEADER_SIZE + len(dos_stub)
    dos = bytearray(_DOS_HEADER_SIZE)
    dos[0:2] = b"MZ"
    dos[0x3C:0x40] = struct.pack("<I", e_lfanew)

    coff = struct.pack(
        "<HHIIIHH",
        machine,
        len(sections),
        timestamp,
        0,
        0,
        optional_header_size,
        characteristics,
    )

    table_offset = e_lfanew + 4 + _COFF_SIZE + optional_header_size
    data_start = table_offset + _SECTION_HEADER_SIZE * len(sections)

    def align(n: int) -> int:
        return ((n + file_alignment - 1) // file_alignment) * file_alignment

    headers = bytearray()
    blobs = bytearray()
    built: list[BuiltSection] = []
    offset = align(data_start)
    virtual_addr = 0x1000
    for i, (name, blob) in enumerate(sections):
        raw_name = name.encode("latin-1")
        if len(raw_name) > 8:
            raise ValueError(f"section name too long: {name!r}")
        raw_name = raw_name.ljust(8, b"\x00")
        vsize = virtual_sizes[i] if virtual_sizes is not None else len(blob)
        headers += raw_name
        headers += struct.pack(
            "<IIIIIIHHI",
            vsize,
            virtual_addr,
            len(blob),
            offset,
            0,
            0,
            0,
            0,
            0x40000040,
        )
        built.append(
            BuiltSection(
                name=name.lower(),
                raw_name=raw_name,
                raw_offset=offset,
                raw_size=len(blob),
                virtual_size=vsize,
                data=blob,
            )
        )
        blobs += blob
        pad = align(len(blob)) - len(blob)
        blobs += b"\x00" * pad
        offset += len(blob) + pad
        virtual_addr += max(0x1000, align(max(vsize, len(blob))))

    gap = align(data_start) - data_start
    image = bytes(dos) + dos_stub + b"PE\x00\x00" + coff + b"\x00" * optional_header_size
    image += bytes(headers) + b"\x00" * gap + bytes(blobs)
    return BuiltPe(data=image, sections=tuple(built))


def random_pe(rng: np.random.Generator, *, max_sections: int = 9) -> BuiltPe:
    """Randomized well-formed PE for round-trip and fuzz-seed testing."""
    from sectioner.catalog import CANONICAL_SECTIONS

    n = int(rng.integers(0, max_sections + 1))
    pool = list(CANONICAL_SECTIONS) + [".code", ".brc", "data1", "UPX0", ".x"]
    names = [pool[int(rng.integers(0, len(pool)))] for _ in range(n)]
    sections = []
    for name in names:
        size = int(rng.integers(0, 600))
        sections.append((name, rng.bytes(size)))
    stub = rng.bytes(int(rng.integers(0, 128)))
    alignment = int(rng.choice([1, 16, 512]))
    opt = int(rng.choice([0, 0xE0, 0xF0]))
    return build_pe(
        sections,
        dos_stub=stub,
        optional_header_size=opt,
        file_alignment=alignment,
        timestamp=int(rng.integers(0, 2**32)),
    )


def _ramp_bytes(rng: np.random.Generator, size: int) -> bytes:
    """Low-entropy structured content: repeating ramps with a random phase."""
    period = int(rng.integers(16, 96))
    phase = int(rng.integers(0, 256))
    scale = int(rng.integers(1, 4))
    idx = np.arange(size, dtype=np.int64)
    vals = (phase + scale * (idx % period)) % 256
    return vals.astype(np.uint8).tobytes()


def _motif_bytes(rng: np.random.Generator, size: int) -> bytes:
    """High-entropy motif planted in malicious sections."""
    return rng.bytes(size)


def synth_sample(rng: np.random.Generator, malicious: bool) -> bytes:
    """One synthetic corpus file; label decides .rsrc/.idata content."""
    sections: list[tuple[str, bytes]] = []
    for name in (".text", ".data", ".rdata", ".idata", ".rsrc", ".reloc", ".tls"):
        if name == ".reloc" and rng.random() < 0.25:
            continue
        if name == ".tls" and rng.random() < 0.70:
            continue
        size = int(rng.integers(2048, 9216))
        if malicious and name in (".rsrc", ".idata"):
            blob = _motif_bytes(rng, size)
        else:
            blob = _ramp_bytes(rng, size)
        sections.append((name, blob))
    stub = rng.bytes(int(rng.integers(0, 64)))
    return build_pe(sections, dos_stub=stub, optional_header_size=0xF0, file_alignment=512).data


def write_corpus(out_dir: Path | str, n_files: int = 400, seed: int = 0) -> list[Path]:
    """Write a half-benign, half-malicious corpus under ``out_dir``.

    Files land in ``benign/`` and ``malware/`` subdirectories so the
    manifest builder's directory-label convention applies directly.
    """
    out_dir = Path(out_dir)
    (out_dir / "benign").mkdir(parents=True, exist_ok=True)
    (out_dir / "malware").mkdir(parents=True, exist_ok=True)
    root = np.random.default_rng(seed)
    paths = []
    for i in range(n_files):
        malicious = i % 2 == 1
        rng = np.random.default_rng(root.integers(0, 2**63))
        blob = synth_sample(rng, malicious)
        digest = hashlib.sha256(blob).hexdigest()[:16]
        sub = "malware" if malicious else "benign"
        path = out_dir / sub / f"{digest}.exe"
        path.write_bytes(blob)
        paths.append(path)
    return paths

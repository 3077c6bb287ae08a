"""Minimal PE parser: COFF header and section table only.

Parses exactly the fields the imaging pipeline consumes.  Imports,
resources and signatures are never walked.  Hostile inputs are expected:
section ranges that point outside the file are clamped, never rejected,
and any byte sequence yields either a ``PeFile`` or a declared error.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

from sectioner.catalog import SectionCatalog
from sectioner.errors import MalformedHeader, TooManySections

MZ_MAGIC = b"MZ"
PE_SIGNATURE = b"PE\x00\x00"
DOS_HEADER_SIZE = 0x40
E_LFANEW_OFFSET = 0x3C
COFF_HEADER_SIZE = 20
SECTION_HEADER_SIZE = 40

# Windows loader refuses images with more than 96 sections; anything above
# that is hostile input, not a parse we should attempt.
MAX_SECTIONS = 96


@dataclass(frozen=True)
class CoffHeader:
    machine: int
    number_of_sections: int
    time_date_stamp: int
    size_of_optional_header: int
    characteristics: int


@dataclass(frozen=True)
class Section:
    """One named byte region of a PE file.

    ``data`` is the raw range clamped to the file end, so its length can be
    shorter than ``raw_size`` when the header lies about the range.
    """

    raw_name: bytes
    name: str
    raw_offset: int
    raw_size: int
    virtual_size: int
    data: bytes = field(repr=False)


@dataclass(frozen=True)
class PeFile:
    dos_stub_len: int
    coff_header: CoffHeader
    optional_header_size: int
    sections: tuple[Section, ...]


def normalize_section_name(raw_name: bytes) -> str:
    """Strip at the first NUL (covers trailing padding) and lowercase."""
    cut = raw_name.split(b"\x00", 1)[0]
    return cut.decode("latin-1").lower()


def parse_pe(data: bytes) -> PeFile:
    """Parse a PE image from raw bytes.

    Never reads past the end of ``data``; raises :class:`MalformedHeader`
    or :class:`TooManySections` for anything that cannot be parsed.
    """
    if len(data) < 2 or data[:2] != MZ_MAGIC:
        raise MalformedHeader("missing MZ magic")
    if len(data) < DOS_HEADER_SIZE:
        raise MalformedHeader("truncated DOS header")
    (e_lfanew,) = struct.unpack_from("<I", data, E_LFANEW_OFFSET)
    if e_lfanew + 4 > len(data) or data[e_lfanew : e_lfanew + 4] != PE_SIGNATURE:
        raise MalformedHeader("missing PE signature")
    coff_offset = e_lfanew + 4
    if coff_offset + COFF_HEADER_SIZE > len(data):
        raise MalformedHeader("truncated COFF header")
    machine, n_sections, timestamp, _ptr_sym, _n_sym, opt_size, characteristics = struct.unpack_from(
        "<HHIIIHH", data, coff_offset
    )
    if n_sections > MAX_SECTIONS:
        raise TooManySections(n_sections, MAX_SECTIONS)
    coff = CoffHeader(
        machine=machine,
        number_of_sections=n_sections,
        time_date_stamp=timestamp,
        size_of_optional_header=opt_size,
        characteristics=characteristics,
    )

    table_offset = coff_offset + COFF_HEADER_SIZE + opt_size
    sections = []
    for i in range(n_sections):
        off = table_offset + i * SECTION_HEADER_SIZE
        if off + SECTION_HEADER_SIZE > len(data):
            raise MalformedHeader("truncated section table")
        raw_name = data[off : off + 8]
        virtual_size, _virtual_addr, raw_size, raw_offset = struct.unpack_from("<IIII", data, off + 8)
        # Python slicing clamps to the file end; lying headers yield a
        # shorter (possibly empty) data range instead of an error.
        section_data = data[raw_offset : raw_offset + raw_size] if raw_size else b""
        sections.append(
            Section(
                raw_name=raw_name,
                name=normalize_section_name(raw_name),
                raw_offset=raw_offset,
                raw_size=raw_size,
                virtual_size=virtual_size,
                data=section_data,
            )
        )

    return PeFile(
        dos_stub_len=max(0, e_lfanew - DOS_HEADER_SIZE),
        coff_header=coff,
        optional_header_size=opt_size,
        sections=tuple(sections),
    )


def extract_tracked_sections(pe: PeFile, catalog: SectionCatalog | None = None) -> dict[str, Section]:
    """Map catalog names to their first occurrence in ``pe``.

    Absent names are simply missing from the map; a first occurrence with
    empty data counts as absent (duplicate names never fall through to a
    later section).
    """
    catalog = catalog or SectionCatalog()
    tracked = set(catalog.names)
    first: dict[str, Section] = {}
    for section in pe.sections:
        if section.name in tracked and section.name not in first:
            first[section.name] = section
    return {name: sec for name, sec in first.items() if len(sec.data) > 0}

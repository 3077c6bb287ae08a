"""Bundle persistence: arch.json + weights.bin per section.

weights.bin is the little-endian float32 concatenation of every tensor in
the order listed by arch.json; a sha256 of the blob guards against
corruption.  Save -> load -> forward is bit-exact for float32 models.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from sectioner.cnn.model import CnnArchitecture, SectionCnn, parameter_order
from sectioner.errors import IntegrityError, MissingBundle

BUNDLE_FORMAT = 1


@dataclass
class SectionModelBundle:
    section_name: str
    model: SectionCnn
    epochs_run: int
    best_val_loss: float
    seed: int


def save_bundle(bundle: SectionModelBundle, directory: Path | str) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    order = parameter_order(bundle.model.arch)
    blob = b"".join(bundle.model.params[name].astype("<f4").tobytes() for name in order)
    meta = {
        "format": BUNDLE_FORMAT,
        "section": bundle.section_name,
        "architecture": bundle.model.arch.to_dict(),
        "training": {
            "epochs_run": bundle.epochs_run,
            "best_val_loss": bundle.best_val_loss,
            "seed": bundle.seed,
        },
        "tensors": [{"name": name, "shape": list(bundle.model.params[name].shape)} for name in order],
        "weights_sha256": hashlib.sha256(blob).hexdigest(),
    }
    (directory / "weights.bin").write_bytes(blob)
    (directory / "arch.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_bundle(directory: Path | str) -> SectionModelBundle:
    directory = Path(directory)
    arch_path = directory / "arch.json"
    weights_path = directory / "weights.bin"
    section = directory.name
    if not arch_path.exists() or not weights_path.exists():
        raise MissingBundle(section, f"no bundle at {directory}")
    meta = json.loads(arch_path.read_text())
    if meta.get("format") != BUNDLE_FORMAT:
        raise IntegrityError(str(arch_path), f"unsupported bundle format {meta.get('format')}")
    blob = weights_path.read_bytes()
    if hashlib.sha256(blob).hexdigest() != meta["weights_sha256"]:
        raise IntegrityError(str(weights_path), f"weights checksum mismatch for section {meta['section']}")

    arch = CnnArchitecture.from_dict(meta["architecture"])
    params: dict[str, np.ndarray] = {}
    offset = 0
    for spec in meta["tensors"]:
        count = int(np.prod(spec["shape"])) if spec["shape"] else 1
        nbytes = count * 4
        if offset + nbytes > len(blob):
            raise IntegrityError(str(weights_path), f"weights truncated for section {meta['section']}")
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
        params[spec["name"]] = arr.reshape(spec["shape"]).astype(np.float32)
        offset += nbytes
    if offset != len(blob):
        raise IntegrityError(str(weights_path), f"trailing bytes in weights for section {meta['section']}")
    if [s["name"] for s in meta["tensors"]] != parameter_order(arch):
        raise IntegrityError(str(arch_path), "tensor order does not match architecture")

    model = SectionCnn(arch, params)
    return SectionModelBundle(
        section_name=meta["section"],
        model=model,
        epochs_run=meta["training"]["epochs_run"],
        best_val_loss=meta["training"]["best_val_loss"],
        seed=meta["training"]["seed"],
    )

import csv
from collections import Counter
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import largest_remainder_oracle
from sectioner.catalog import SectionCatalog
from sectioner.cnn.bundle import SectionModelBundle
from sectioner.cnn.model import CnnArchitecture, SectionCnn
from sectioner.errors import ConflictingLabel, EmptySplit, MissingBundle
from sectioner.pipeline.evaluate import ConfusionCounts, evaluate_predictions
from sectioner.pipeline.manifest import ManifestRow, build_manifest, read_manifest, write_manifest
from sectioner.pipeline.splits import largest_remainder, plan_splits
from sectioner.pipeline.vectors import build_score_vectors, read_score_vectors, write_score_vectors
from sectioner.pipeline.datasets import build_section_datasets
from sectioner.synthetic import build_pe


def _write(path: Path, blob: bytes) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(blob)
    return path


def _sample_pe(sections) -> bytes:
    return build_pe(sections).data


# -- manifest -----------------------------------------------------------------


def test_build_manifest_directory_convention(tmp_path):
    _write(tmp_path / "benign" / "a.exe", _sample_pe([(".text", b"aaaa")]))
    _write(tmp_path / "benign" / "b.exe", _sample_pe([(".text", b"bbbb")]))
    _write(tmp_path / "malware" / "c.exe", _sample_pe([(".text", b"cccc")]))
    _write(tmp_path / "malware" / "d.exe", _sample_pe([(".text", b"dddd")]))
    rows, notes = build_manifest(tmp_path)
    assert len(rows) == 4
    assert Counter(r.label for r in rows) == {0: 2, 1: 2}
    assert notes == []


def test_build_manifest_duplicate_content_keeps_first(tmp_path):
    blob = _sample_pe([(".text", b"same")])
    _write(tmp_path / "benign" / "a.exe", blob)
    _write(tmp_path / "benign" / "z.exe", blob)
    rows, notes = build_manifest(tmp_path)
    assert len(rows) == 1
    assert rows[0].path.endswith("a.exe")
    assert any("duplicate" in n for n in notes)


def test_build_manifest_conflicting_labels(tmp_path):
    blob = _sample_pe([(".text", b"same")])
    _write(tmp_path / "benign" / "a.exe", blob)
    _write(tmp_path / "malware" / "b.exe", blob)
    with pytest.raises(ConflictingLabel):
        build_manifest(tmp_path)


def test_build_manifest_empty_dir_warns(tmp_path):
    rows, notes = build_manifest(tmp_path)
    assert rows == []
    assert any("no labelled files" in n for n in notes)


def test_manifest_round_trip(tmp_path):
    rows = [
        ManifestRow(sha256="a" * 64, path="x/a.exe", label=0, split="auto"),
        ManifestRow(sha256="b" * 64, path="x/b.exe", label=1, split="test"),
    ]
    write_manifest(rows, tmp_path / "m.csv")
    assert read_manifest(tmp_path / "m.csv") == rows


def test_manifest_sha_matches_content(tmp_path):
    import hashlib

    blob = _sample_pe([(".rsrc", b"payload")])
    path = _write(tmp_path / "malware" / "m.exe", blob)
    rows, _ = build_manifest(tmp_path)
    assert rows[0].sha256 == hashlib.sha256(path.read_bytes()).hexdigest()


# -- splits -------------------------------------------------------------------


def test_largest_remainder_matches_oracle():
    for total in [0, 1, 7, 10, 33, 100]:
        for fractions in [(0.5, 0.25, 0.25), (0.7, 0.3), (1.0, 0.0, 0.0), (0.34, 0.33, 0.33)]:
            assert largest_remainder(total, fractions) == largest_remainder_oracle(total, fractions)


def _manifest(n: int, labels=None) -> list[ManifestRow]:
    labels = labels if labels is not None else [i % 2 for i in range(n)]
    return [ManifestRow(sha256=f"{i:064x}", path=f"f{i}.exe", label=labels[i]) for i in range(n)]


def test_plan_sizes_use_largest_remainder():
    plan = plan_splits(_manifest(10), (0.5, 0.25, 0.25), seed=7)
    sizes = Counter(plan.split_of.values())
    assert sizes == {"cnn-train": 5, "fusion-train": 3, "test": 2}


def test_plan_everything_in_one_split_raises_unless_allowed():
    with pytest.raises(EmptySplit):
        plan_splits(_manifest(10), (1.0, 0.0, 0.0), seed=0)
    plan = plan_splits(_manifest(10), (1.0, 0.0, 0.0), seed=0, allow_empty=True)
    assert set(plan.split_of.values()) == {"cnn-train"}


def test_plan_deterministic():
    a = plan_splits(_manifest(20), seed=5)
    b = plan_splits(_manifest(20), seed=5)
    assert a.split_of == b.split_of and a.subsplit_of == b.subsplit_of


def test_plan_honors_pinned_rows():
    rows = _manifest(10)
    rows[0] = ManifestRow(sha256=rows[0].sha256, path=rows[0].path, label=rows[0].label, split="test")
    plan = plan_splits(rows, seed=1)
    assert plan.split_of[rows[0].sha256] == "test"


@given(st.integers(0, 10_000), st.integers(8, 60))
@settings(max_examples=40, deadline=None)
def test_plan_disjoint_exhaustive_and_stratified(seed, n):
    manifest = _manifest(n)
    plan = plan_splits(manifest, (0.5, 0.25, 0.25), seed=seed)
    assert set(plan.split_of) == {r.sha256 for r in manifest}
    by_label = {r.sha256: r.label for r in manifest}
    for split in ("cnn-train", "fusion-train", "test"):
        members = plan.shas(split)
        count = Counter(by_label[sha] for sha in members)
        ideal0 = sum(1 for r in manifest if r.label == 0) * len(members) / n
        assert abs(count[0] - ideal0) <= 1.0
    # 70/30 sub-split partitions each training split
    for split in ("cnn-train", "fusion-train"):
        subs = Counter(plan.subsplit_of[sha] for sha in plan.shas(split))
        assert subs["train"] + subs["val"] == len(plan.shas(split))
        assert subs["train"] == largest_remainder(len(plan.shas(split)), (0.7, 0.3))[0]


# -- section datasets ----------------------------------------------------------


def _corpus_rows(tmp_path) -> list[ManifestRow]:
    specs = [
        ("benign/a.exe", 0, [(".text", b"a" * 2048), (".idata", b"i" * 2048)]),
        ("benign/b.exe", 0, [(".text", b"b" * 2048)]),
        ("malware/c.exe", 1, [(".text", b"c" * 2048), (".idata", b"x" * 2048)]),
        ("malware/d.exe", 1, [(".text", b"d" * 2048), (".text", b"dup" * 100)]),
    ]
    for rel, _, sections in specs:
        _write(tmp_path / rel, _sample_pe(sections))
    rows, _ = build_manifest(tmp_path)
    return rows


def test_build_section_datasets_presence_filter(tmp_path):
    rows = _corpus_rows(tmp_path)
    datasets, skipped = build_section_datasets(rows)
    assert skipped == []
    assert datasets[".text"].count == 4
    assert datasets[".idata"].count == 2
    assert datasets[".rsrc"].count == 0
    # recount oracle: walk the manifest and parse each file again
    from sectioner.pe import extract_tracked_sections, parse_pe

    expected = sum(1 for r in rows if ".idata" in extract_tracked_sections(parse_pe(Path(r.path).read_bytes())))
    assert datasets[".idata"].count == expected


def test_build_section_datasets_zero_size_section_excluded(tmp_path):
    _write(tmp_path / "benign" / "z.exe", _sample_pe([(".text", b""), (".data", b"d" * 100)]))
    rows, _ = build_manifest(tmp_path)
    datasets, _ = build_section_datasets(rows)
    assert datasets[".text"].count == 0
    assert datasets[".data"].count == 1


def test_build_section_datasets_skips_unparseable(tmp_path):
    _write(tmp_path / "benign" / "junk.exe", b"MZ not a real PE")
    _write(tmp_path / "benign" / "ok.exe", _sample_pe([(".text", b"ok" * 100)]))
    rows, _ = build_manifest(tmp_path)
    datasets, skipped = build_section_datasets(rows)
    assert len(skipped) == 1
    assert datasets[".text"].count == 1


def test_build_section_datasets_thread_invariant(tmp_path):
    rows = _corpus_rows(tmp_path)
    serial, _ = build_section_datasets(rows, threads=1)
    parallel, _ = build_section_datasets(rows, threads=4)
    for name in serial:
        np.testing.assert_array_equal(serial[name].images, parallel[name].images)
        assert serial[name].shas == parallel[name].shas


# -- score vectors --------------------------------------------------------------


def _stub_bundles(catalog: SectionCatalog) -> dict[str, SectionModelBundle]:
    arch = CnnArchitecture()
    return {
        name: SectionModelBundle(section_name=name, model=SectionCnn.zeros(arch), epochs_run=0, best_val_loss=0.0, seed=0)
        for name in catalog.fusion
    }


def test_score_vectors_stub_bundles(tmp_path, catalog):
    sections = [(name, bytes(64) * 32) for name in catalog.fusion]
    _write(tmp_path / "benign" / "full.exe", _sample_pe(sections))
    _write(tmp_path / "malware" / "gap.exe", _sample_pe([(".text", b"t" * 2048)]))
    rows, _ = build_manifest(tmp_path)
    vs = build_score_vectors(_stub_bundles(catalog), rows, catalog)
    assert vs.feature_names == catalog.fusion
    full = vs.X[vs.y == 0][0]
    np.testing.assert_array_equal(full, np.full(6, 0.5))
    gap = vs.X[vs.y == 1][0]
    assert gap[catalog.fusion.index(".text")] == 0.5
    assert gap[catalog.fusion.index(".idata")] == -1.0
    assert (gap == -1.0).sum() == 5


def test_score_vectors_missing_bundle(tmp_path, catalog):
    bundles = _stub_bundles(catalog)
    del bundles[".idata"]
    with pytest.raises(MissingBundle):
        build_score_vectors(bundles, [], catalog)


def test_score_vectors_all_absent_flagged(tmp_path, catalog):
    _write(tmp_path / "benign" / "bare.exe", _sample_pe([(".weird", b"www" * 100)]))
    rows, _ = build_manifest(tmp_path)
    vs = build_score_vectors(_stub_bundles(catalog), rows, catalog)
    assert vs.all_absent == [rows[0].sha256]
    np.testing.assert_array_equal(vs.X[0], np.full(6, -1.0))


def test_score_vectors_csv_round_trip(tmp_path, catalog):
    sections = [(name, bytes(range(256)) * 8) for name in catalog.fusion]
    _write(tmp_path / "malware" / "full.exe", _sample_pe(sections))
    rows, _ = build_manifest(tmp_path)
    vs = build_score_vectors(_stub_bundles(catalog), rows, catalog)
    write_score_vectors(vs, tmp_path / "v.csv")
    loaded = read_score_vectors(tmp_path / "v.csv")
    np.testing.assert_array_equal(loaded.X, vs.X)
    np.testing.assert_array_equal(loaded.y, vs.y)
    assert loaded.feature_names == vs.feature_names
    with open(tmp_path / "v.csv", newline="") as fh:
        header = next(csv.reader(fh))
    assert header == ["sha256", "label", ".text", ".data", ".rdata", ".idata", ".rsrc", ".reloc"]


# -- evaluation -----------------------------------------------------------------


def test_confusion_identities():
    counts = ConfusionCounts(tp=2, fp=1, fn=1, tn=6)
    assert counts.accuracy == 0.8
    assert counts.f1 == pytest.approx(2 * 2 / (2 * 2 + 1 + 1))
    assert counts.total == 10


def test_evaluate_all_correct():
    counts = evaluate_predictions(np.array([0, 1, 1]), np.array([0.1, 0.9, 0.8]))
    assert counts.accuracy == 1.0 and counts.f1 == 1.0


def test_evaluate_no_positives_flag():
    counts = evaluate_predictions(np.array([0, 0]), np.array([0.1, 0.2]))
    assert counts.accuracy == 1.0
    assert counts.f1 == 0.0
    assert counts.no_positives


def test_evaluate_empty_split_raises():
    with pytest.raises(EmptySplit):
        evaluate_predictions(np.array([]), np.array([]))


@given(st.lists(st.tuples(st.integers(0, 1), st.floats(0, 1)), min_size=1, max_size=40))
@settings(max_examples=60, deadline=None)
def test_confusion_counts_sum_to_split_size(pairs):
    y = np.array([p[0] for p in pairs])
    proba = np.array([p[1] for p in pairs])
    counts = evaluate_predictions(y, proba)
    assert counts.total == len(pairs)
    acc = (counts.tp + counts.tn) / counts.total
    assert counts.accuracy == acc


def test_build_manifest_with_labels_csv(tmp_path):
    blob_a = _sample_pe([(".text", b"one")])
    blob_b = _sample_pe([(".text", b"two")])
    _write(tmp_path / "files" / "a.exe", blob_a)
    _write(tmp_path / "files" / "b.exe", blob_b)
    labels = tmp_path / "labels.csv"
    labels.write_text("path,label\nfiles/a.exe,0\nfiles/b.exe,1\nfiles/missing.exe,1\n")
    with pytest.warns(UserWarning):
        rows, notes = build_manifest(tmp_path, labels_csv=labels)
    assert [(Path(r.path).name, r.label) for r in rows] == [("a.exe", 0), ("b.exe", 1)]
    assert any("missing.exe" in n for n in notes)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import naive_bilinear_64, naive_grayscale, naive_image, naive_width
from sectioner.errors import EmptySection
from sectioner.imaging import (
    SectionImage,
    bytes_to_grayscale,
    image_bytes,
    resize_to_64,
    width_for_length,
    write_pgm,
)


def test_width_schedule_matches_reference():
    for length in [1, 100, 1535, 1536, 5000, 10239, 10240, 30719, 30720,
                   61439, 61440, 102399, 102400, 204799, 204800, 511999,
                   512000, 1023999, 1024000, 5_000_000]:
        assert width_for_length(length) == naive_width(length), length


def test_grayscale_all_zero_4096():
    # 4096 bytes sit in the <10 KiB bucket (width 32).
    img = bytes_to_grayscale(bytes(4096))
    assert img.shape == (128, 32)
    assert not img.any()
    assert not resize_to_64(img).any()


def test_grayscale_all_zero_16k_uses_width_64():
    img = bytes_to_grayscale(bytes(16 * 1024))
    assert img.shape == (256, 64)
    assert not img.any()


def test_grayscale_padding_rule():
    img = bytes_to_grayscale(bytes(range(10)))
    assert img.shape == (2, 8)
    assert img[1].tolist() == [8, 9, 0, 0, 0, 0, 0, 0]


def test_grayscale_empty_rejected():
    with pytest.raises(EmptySection):
        bytes_to_grayscale(b"")


def test_grayscale_matches_reference_on_random_bytes():
    data = np.random.default_rng(42).bytes(10_000)
    np.testing.assert_array_equal(bytes_to_grayscale(data), naive_grayscale(data))


def test_resize_constant_is_fixed_point():
    for shape in [(1, 1), (3, 7), (64, 64), (100, 13)]:
        img = np.full(shape, 100, dtype=np.uint8)
        assert (resize_to_64(img) == 100).all()


def test_resize_identity_for_64x64():
    img = np.random.default_rng(0).integers(0, 256, size=(64, 64)).astype(np.uint8)
    np.testing.assert_array_equal(resize_to_64(img), img)


def test_resize_2x2_block_checkerboard_matches_oracle():
    # With half-pixel centers all four taps of each output pixel land in a
    # single 2x2 block, so the oracle reproduces the blocks exactly.
    r = np.arange(128)[:, None] // 2
    c = np.arange(128)[None, :] // 2
    img = (((r + c) % 2) * 255).astype(np.uint8)
    expected = naive_bilinear_64(img)
    got = resize_to_64(img)
    np.testing.assert_array_equal(got, expected)
    blocks = (((np.arange(64)[:, None] + np.arange(64)[None, :]) % 2) * 255).astype(np.uint8)
    np.testing.assert_array_equal(got, blocks)


def test_resize_1x1_checkerboard_averages_to_128():
    r = np.arange(128)[:, None]
    c = np.arange(128)[None, :]
    img = (((r + c) % 2) * 255).astype(np.uint8)
    got = resize_to_64(img)
    np.testing.assert_array_equal(got, naive_bilinear_64(img))
    assert (got == 128).all()


def test_single_byte_section_matches_oracle():
    # One byte still lands in the 8-wide floor bucket: a 1x8 row, padded.
    image = image_bytes(".text", b"\x7f")
    assert bytes_to_grayscale(b"\x7f").shape == (1, 8)
    np.testing.assert_array_equal(image.pixels, naive_image(b"\x7f"))


def test_image_section_all_ff():
    image = image_bytes(".rsrc", b"\xff" * 4096)
    assert (image.pixels == 255).all()
    assert image.source_len == 4096
    assert image.section_name == ".rsrc"


@given(st.binary(min_size=1, max_size=4096))
@settings(max_examples=60, deadline=None)
def test_imaging_is_deterministic_and_range_preserving(data):
    a = image_bytes(".x", data)
    b = image_bytes(".x", data)
    np.testing.assert_array_equal(a.pixels, b.pixels)
    padded_min = 0 if len(data) % width_for_length(len(data)) else min(data)
    assert a.pixels.min() >= min(padded_min, min(data))
    assert a.pixels.max() <= max(data)
    assert a.source_len == len(data)


@pytest.mark.parametrize("bucket_len", [700, 5_000, 20_000, 40_000, 80_000, 150_000, 300_000, 700_000, 1_200_000])
def test_oracle_equivalence_per_bucket(bucket_len):
    data = np.random.default_rng(bucket_len).bytes(bucket_len)
    np.testing.assert_array_equal(image_bytes(".x", data).pixels, naive_image(data))


def test_pgm_dump(tmp_path):
    image = image_bytes(".text", bytes(range(256)) * 4)
    path = tmp_path / "x.text.pgm"
    write_pgm(image, path)
    blob = path.read_bytes()
    assert blob.startswith(b"P5\n64 64\n255\n")
    assert len(blob) == len(b"P5\n64 64\n255\n") + 4096


def test_section_image_validates_shape():
    with pytest.raises(ValueError):
        SectionImage(section_name=".x", pixels=np.zeros((2, 2), dtype=np.uint8), source_len=4)

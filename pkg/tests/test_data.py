"""Tests for image and tensor I/O, patches and sample sources"""

import io

import numpy as np
import pytest

from aelpn.core.rng import Rng
from aelpn.core.splitnormal import SplitNormalParams
from aelpn.data import (
    PatchSource,
    PatchSpec,
    SplitNormalSource,
    SyntheticImageSpec,
    encode_pnm,
    image_paths,
    load_image_dir,
    load_tensor,
    parse_pnm,
    read_tensor,
    sample_patch,
    sample_patches,
    save_tensor,
    split_paths,
    synth_image,
    tile_image,
    untile_image,
    write_pnm,
    write_tensor,
)
from aelpn.data.pnm import load_pnm
from aelpn.errors import (
    ConfigError,
    DataFormatError,
    PnmHeaderError,
    PnmMaxvalError,
    PnmTruncatedError,
    ShapeError,
    TensorFormatError,
)

SMALL_P5 = b"P5\n2 2\n255\n" + bytes([0, 255, 128, 64])
SMALL_VALUES = np.array([[0, 255], [128, 64]]) / 255.0


class TestPnm:
    """Test PGM/PPM decoding and encoding"""

    def test_binary_gray(self):
        """Test a 2x2 P5 image"""
        np.testing.assert_array_equal(parse_pnm(SMALL_P5), SMALL_VALUES)

    def test_ascii_matches_binary(self):
        """Test P2 and P5 of the same pixels decode identically"""
        ascii_ = b"P2\n# comment\n2 2\n255\n0 255\n128 64\n"
        np.testing.assert_array_equal(parse_pnm(ascii_), parse_pnm(SMALL_P5))

    def test_color_to_luma(self):
        """Test P6 pixels are reduced with luma weights"""
        data = b"P6\n1 1\n255\n" + bytes([255, 0, 0])
        assert parse_pnm(data)[0, 0] == pytest.approx(0.299)

    def test_truncated_payload(self):
        """Test a short payload reports expected and actual sizes"""
        with pytest.raises(PnmTruncatedError) as excinfo:
            parse_pnm(SMALL_P5[:-1])
        assert (excinfo.value.expected, excinfo.value.actual) == (4, 3)
        assert excinfo.value.offset == 11

    def test_truncated_ascii(self):
        """Test too few ASCII samples"""
        with pytest.raises(PnmTruncatedError):
            parse_pnm(b"P2\n2 2\n255\n1 2 3\n")

    def test_bad_magic(self):
        """Test unknown magic numbers are rejected at offset 0"""
        with pytest.raises(PnmHeaderError) as excinfo:
            parse_pnm(b"P4\n1 1\n255\n\x00")
        assert excinfo.value.offset == 0

    def test_maxval(self):
        """Test only maxval 255 is accepted"""
        with pytest.raises(PnmMaxvalError):
            parse_pnm(b"P5\n1 1\n65535\n\x00\x00")

    def test_encode_round_trip(self, tmp_path):
        """Test written 8-bit pixels are read back exactly"""
        path = tmp_path / "small.pgm"
        write_pnm(path, SMALL_VALUES)
        assert path.read_bytes() == SMALL_P5
        np.testing.assert_array_equal(load_pnm(path), SMALL_VALUES)

    def test_encode_ascii(self):
        """Test the ASCII encoder"""
        assert encode_pnm(SMALL_VALUES, binary=False) == b"P2\n2 2\n255\n0 255\n128 64\n"

    def test_encode_rejects_out_of_range(self):
        """Test values outside [0, 1] must be clipped by the caller"""
        with pytest.raises(ConfigError):
            encode_pnm(np.array([[1.2]]))


class TestTensors:
    """Test raw tensor records"""

    def test_layout(self):
        """Test the header bytes of a 2x3 record"""
        buf = io.BytesIO()
        written = write_tensor(buf, np.arange(6.0).reshape(2, 3))
        data = buf.getvalue()
        assert written == len(data) == 4 + 8 + 16 + 48
        assert data[:4] == b"AELP"
        assert data[4:8] == (1).to_bytes(4, "little")
        assert data[8:12] == (2).to_bytes(4, "little")

    def test_concatenated_records(self):
        """Test records are read back in order"""
        buf = io.BytesIO()
        write_tensor(buf, np.ones((2, 2)))
        write_tensor(buf, np.float64(3.5))
        buf.seek(0)
        np.testing.assert_array_equal(read_tensor(buf), np.ones((2, 2)))
        assert read_tensor(buf).shape == ()

    def test_file_helpers(self, tmp_path):
        """Test save_tensor/load_tensor"""
        values = Rng(1).normal((3, 4))
        save_tensor(tmp_path / "x.bin", values)
        np.testing.assert_array_equal(load_tensor(tmp_path / "x.bin"), values)

    def test_bad_magic(self):
        """Test foreign data is rejected"""
        with pytest.raises(TensorFormatError):
            read_tensor(io.BytesIO(b"NOPE" + bytes(8)))

    def test_truncated(self):
        """Test a cut payload is reported"""
        buf = io.BytesIO()
        write_tensor(buf, np.ones(4))
        with pytest.raises(TensorFormatError):
            read_tensor(io.BytesIO(buf.getvalue()[:-3]))


class TestPatches:
    """Test patch geometry"""

    def test_parse(self):
        """Test "16" and "8x4" forms"""
        assert PatchSpec.parse("16") == PatchSpec(16, 16)
        assert PatchSpec.parse("8x4") == PatchSpec(8, 4)
        with pytest.raises(ConfigError):
            PatchSpec.parse("8x4x2")

    def test_tile_untile(self):
        """Test tiling then untiling restores the cropped image"""
        image = np.arange(35.0).reshape(5, 7) / 35.0
        spec = PatchSpec(2, 3)
        patches, grid = tile_image(image, spec)
        assert grid == (2, 2)
        assert patches.shape == (4, 6)
        np.testing.assert_array_equal(untile_image(patches, grid, spec), image[:4, :6])

    def test_tile_row_major(self):
        """Test patches are flattened row-major"""
        image = np.arange(16.0).reshape(4, 4)
        patches, _ = tile_image(image, PatchSpec(2, 2))
        np.testing.assert_array_equal(patches[1], [2.0, 3.0, 6.0, 7.0])

    def test_image_too_small(self):
        """Test patches larger than the image are rejected"""
        with pytest.raises(ShapeError):
            tile_image(np.zeros((3, 3)), PatchSpec(4, 4))

    def test_sample_patch_is_a_crop(self):
        """Test a sampled patch is a contiguous window of the image"""
        image = np.arange(36.0).reshape(6, 6)
        patch = sample_patch(image, PatchSpec(2, 3), Rng(4)).reshape(2, 3)
        top, left = divmod(int(patch[0, 0]), 6)
        np.testing.assert_array_equal(patch, image[top:top + 2, left:left + 3])

    def test_full_size_patch(self):
        """Test a patch the size of the image is the whole image"""
        image = np.arange(6.0).reshape(2, 3)
        np.testing.assert_array_equal(sample_patch(image, PatchSpec(2, 3), Rng(0)), image.reshape(-1))

    def test_sample_patches_deterministic(self):
        """Test the same stream gives the same crops"""
        images = [synth_image(SyntheticImageSpec(16, 16), Rng(2))]
        a = sample_patches(images, PatchSpec(4, 4), 5, Rng(3))
        b = sample_patches(images, PatchSpec(4, 4), 5, Rng(3))
        np.testing.assert_array_equal(a, b)
        assert a.shape == (5, 16)


class TestSynthetic:
    """Test synthetic images"""

    def test_range_and_shape(self):
        """Test images are (height, width) in [0, 1]"""
        image = synth_image(SyntheticImageSpec(20, 30), Rng(4))
        assert image.shape == (20, 30)
        assert image.min() >= 0.0 and image.max() <= 1.0

    def test_background_only(self):
        """Test no components leaves the flat background"""
        spec = SyntheticImageSpec(8, 8, gradients=0, rectangles=0, disks=0)
        np.testing.assert_array_equal(synth_image(spec, Rng(0)), np.full((8, 8), 0.5))

    def test_invalid_spec(self):
        """Test negative component counts are rejected"""
        with pytest.raises(ConfigError):
            SyntheticImageSpec(disks=-1)


class TestSources:
    """Test sample sources and dataset splits"""

    def test_split_normal_source(self):
        """Test split-normal batches are (size, 1)"""
        source = SplitNormalSource(SplitNormalParams(), Rng(5))
        assert source.batch(7).shape == (7, 1)

    def test_patch_source_synthetic(self):
        """Test a synthetic patch source has the patch dimension"""
        source = PatchSource.synthetic(PatchSpec(4, 4), Rng(6), count=3)
        assert source.dim == 16
        batch = source.batch(9)
        assert batch.shape == (9, 16)
        assert batch.min() >= 0.0 and batch.max() <= 1.0

    def test_patch_source_from_paths(self, image_dir):
        """Test images on disk feed a patch source"""
        source = PatchSource.from_paths(image_paths(image_dir), PatchSpec(8, 8), Rng(7))
        assert source.batch(3).shape == (3, 64)

    def test_image_paths_sorted(self, image_dir):
        """Test only image files are listed, sorted by name"""
        (image_dir / "notes.txt").write_text("ignored")
        names = [p.name for p in image_paths(image_dir)]
        assert names == [f"img{i}.pgm" for i in range(5)]

    def test_load_image_dir(self, image_dir):
        """Test images are loaded with their paths in name order"""
        loaded = load_image_dir(image_dir)
        assert [p.name for p, _ in loaded] == [f"img{i}.pgm" for i in range(5)]
        assert all(image.shape == (24, 24) for _, image in loaded)

    def test_empty_directory(self, tmp_path):
        """Test a directory without images is a data error"""
        with pytest.raises(DataFormatError):
            image_paths(tmp_path)

    def test_missing_directory(self, tmp_path):
        """Test a missing directory raises FileNotFoundError"""
        with pytest.raises(FileNotFoundError):
            image_paths(tmp_path / "absent")

    def test_split_is_seeded_and_disjoint(self, image_dir):
        """Test the split depends only on the seed and covers every file"""
        paths = image_paths(image_dir)
        train, test = split_paths(paths, seed=3)
        assert split_paths(list(reversed(paths)), seed=3) == (train, test)
        assert len(train) == 4 and len(test) == 1
        assert sorted(train + test) == paths

    def test_single_file_split(self, image_dir):
        """Test one file serves both sides"""
        path = image_paths(image_dir)[:1]
        assert split_paths(path, seed=0) == (path, path)

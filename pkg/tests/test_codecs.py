"""Tests for image and depth file handling."""

import numpy as np
import pytest
from PIL import Image

from imaging.codecs import (
    is_image_file,
    read_depth,
    read_image,
    read_pfm,
    render_map,
    write_depth,
    write_image,
    write_map,
    write_pfm,
)
from imaging.core import PlanarImage, ScalarMap, from_bytes, to_bytes
from utils.validation import ConfigError, ImageIOError, ValidationError


@pytest.mark.unit
class TestReadImage:
    """Test cases for read_image."""

    def test_binary_ppm(self, work_dir):
        """Test a 2x2 P6 file decodes to planar samples."""
        pixels = bytes([255, 0, 0, 0, 255, 0, 0, 0, 255, 51, 51, 51])
        path = work_dir / "tiny.ppm"
        path.write_bytes(b"P6\n2 2\n255\n" + pixels)

        img = read_image(path)
        assert img.channels == 3 and img.shape == (2, 2)
        np.testing.assert_allclose(img.data[:, 1, 1], [0.2, 0.2, 0.2])
        assert to_bytes(img) == pixels

    def test_binary_pgm(self, work_dir):
        """Test a P5 file decodes as one channel."""
        path = work_dir / "tiny.pgm"
        path.write_bytes(b"P5\n3 1\n255\n" + bytes([0, 128, 255]))
        img = read_image(path)
        assert img.channels == 1
        np.testing.assert_allclose(img.data[0, 0], [0.0, 128 / 255, 1.0])

    def test_png_alpha_is_dropped(self, work_dir):
        """Test RGBA input keeps RGB and ignores alpha."""
        path = work_dir / "alpha.png"
        Image.new("RGBA", (3, 2), (10, 20, 30, 0)).save(path)
        img = read_image(path)
        assert img.channels == 3
        assert to_bytes(img)[:3] == bytes([10, 20, 30])

    def test_png_roundtrip(self, rng, work_dir):
        """Test an 8-bit image survives write and read unchanged."""
        raw = rng.integers(0, 256, size=5 * 7 * 3, dtype=np.uint8).tobytes()
        img = from_bytes(raw, width=7, height=5, channels=3)
        path = write_image(img, work_dir / "out" / "img.png")
        assert to_bytes(read_image(path)) == raw

    def test_missing_file(self, work_dir):
        """Test a missing file is an I/O error."""
        with pytest.raises(ImageIOError):
            read_image(work_dir / "nope.png")

    def test_truncated_file(self, work_dir):
        """Test a truncated PPM body is an I/O error."""
        path = work_dir / "short.ppm"
        path.write_bytes(b"P6\n4 4\n255\n" + bytes(10))
        with pytest.raises(ImageIOError):
            read_image(path)

    def test_not_an_image(self, work_dir):
        """Test arbitrary bytes are rejected."""
        path = work_dir / "junk.png"
        path.write_bytes(b"definitely not an image")
        with pytest.raises(ImageIOError):
            read_image(path)

    def test_sixteen_bit_image_rejected(self, work_dir):
        """Test 16-bit input is not accepted as an 8-bit image."""
        path = work_dir / "deep.png"
        Image.fromarray(np.full((4, 4), 1000, dtype=np.uint16)).save(path)
        with pytest.raises(ImageIOError):
            read_image(path)

    def test_is_image_file(self, work_dir):
        """Test suffix and existence checks."""
        (work_dir / "a.PNG").write_bytes(b"")
        (work_dir / "b.txt").write_bytes(b"")
        assert is_image_file(work_dir / "a.PNG")
        assert not is_image_file(work_dir / "b.txt")
        assert not is_image_file(work_dir / "c.png")


@pytest.mark.unit
class TestMaps:
    """Test cases for rendering scalar maps."""

    def test_render_stretches(self):
        """Test the minimum maps to 0 and the maximum to 1."""
        img = render_map(ScalarMap(np.array([[0.2, 0.7, 1.2]])))
        np.testing.assert_allclose(img.data[0, 0], [0.0, 0.5, 1.0])

    def test_render_constant_is_black(self):
        """Test a constant map renders as zeros."""
        np.testing.assert_array_equal(render_map(ScalarMap.full(2, 2, 0.4)).data, 0.0)

    def test_write_map(self, work_dir):
        """Test maps are saved as 8-bit gray."""
        path = write_map(ScalarMap(np.array([[0.0, 1.0]])), work_dir / "t.png")
        with Image.open(path) as saved:
            assert saved.mode == "L"
            assert list(saved.getdata()) == [0, 255]


@pytest.mark.unit
class TestDepth:
    """Test cases for depth files."""

    def test_sixteen_bit_png_scale(self, work_dir):
        """Test raw 65535 maps to depth_scale and 0 to 0."""
        path = work_dir / "depth.png"
        Image.fromarray(np.array([[0, 65535]], dtype=np.uint16)).save(path)
        depth = read_depth(path, depth_scale=10.0)
        np.testing.assert_allclose(depth.data, [[0.0, 10.0]])

    def test_eight_bit_png_fallback(self, work_dir):
        """Test 8-bit depth is accepted with reduced precision."""
        path = work_dir / "depth8.png"
        Image.fromarray(np.array([[0, 255]], dtype=np.uint8)).save(path)
        np.testing.assert_allclose(read_depth(path, depth_scale=4.0).data, [[0.0, 4.0]])

    def test_color_png_rejected(self, work_dir):
        """Test an RGB file is not a depth map."""
        path = work_dir / "rgb.png"
        Image.new("RGB", (2, 2)).save(path)
        with pytest.raises(ImageIOError):
            read_depth(path)

    def test_pfm_roundtrip_float32(self, rng, work_dir):
        """Test PFM preserves float32 values bit for bit."""
        data = rng.uniform(0, 5, size=(6, 9)).astype(np.float32)
        path = write_pfm(data, work_dir / "d.pfm")
        np.testing.assert_array_equal(read_pfm(path).astype(np.float32), data)

    def test_pfm_row_order(self, work_dir):
        """Test the first row written is the first row read."""
        data = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(read_pfm(write_pfm(data, work_dir / "o.pfm")), data)

    def test_big_endian_pfm(self, work_dir):
        """Test a positive scale selects big-endian samples."""
        path = work_dir / "be.pfm"
        path.write_bytes(b"Pf\n2 1\n1.0\n" + np.array([0.5, 2.0], dtype=">f4").tobytes())
        np.testing.assert_array_equal(read_pfm(path), [[0.5, 2.0]])

    def test_negative_pfm_depth(self, work_dir):
        """Test negative depth is a validation error."""
        path = write_pfm(np.array([[1.0, -0.5]]), work_dir / "neg.pfm")
        with pytest.raises(ValidationError):
            read_depth(path)

    def test_three_channel_pfm_depth(self, work_dir):
        """Test a color PFM is not a depth map."""
        path = write_pfm(np.ones((2, 2, 3)), work_dir / "rgb.pfm")
        with pytest.raises(ImageIOError):
            read_depth(path)

    def test_truncated_pfm(self, work_dir):
        """Test a short PFM payload is an I/O error."""
        path = work_dir / "short.pfm"
        path.write_bytes(b"Pf\n4 4\n-1.0\n" + bytes(8))
        with pytest.raises(ImageIOError):
            read_pfm(path)

    def test_write_depth_png(self, work_dir):
        """Test 16-bit PNG depth is quantized to depth_scale / 65535 steps."""
        depth = ScalarMap(np.array([[0.0, 2.5, 10.0]]))
        path = write_depth(depth, work_dir / "d.png", depth_scale=10.0)
        np.testing.assert_allclose(read_depth(path, 10.0).data, depth.data, atol=10.0 / 65535)

    def test_bad_depth_scale(self, work_dir):
        """Test depth_scale must be positive."""
        with pytest.raises(ConfigError):
            read_depth(work_dir / "d.png", depth_scale=0.0)

    def test_write_image_gray(self, work_dir):
        """Test gray images are written as mode L."""
        path = write_image(PlanarImage(np.full((1, 2, 2), 0.5)), work_dir / "g.png")
        with Image.open(path) as saved:
            assert saved.mode == "L"

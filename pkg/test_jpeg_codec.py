"""
JPEG Front-End Tests
DCT, quantization, zigzag run-length coding and PSNR
"""

import math
import unittest

import numpy as np

from jpeg_codec import (DEFAULT_QUANT_TABLE, EOF, ZIGZAG, CoefficientOverflowError, DctBlock,
                        QuantBlock, QuantMatrix, RleToken, decode_image, default_quant_matrix,
                        dct_8x8, dequantize, encode_image, idct_8x8, psnr, quantize, zigzag_rle,
                        zigzag_unrle)
from pixmap import Block8, PixelImage


def naive_dct(samples):
    """Four-loop DCT straight from the definition"""
    out = np.zeros((8, 8))
    for u in range(8):
        for v in range(8):
            cu = 1 / (2 * math.sqrt(2)) if u == 0 else 0.5
            cv = 1 / (2 * math.sqrt(2)) if v == 0 else 0.5
            total = 0.0
            for i in range(8):
                for j in range(8):
                    total += (samples[i][j] * math.cos((i + 0.5) * math.pi * u / 8)
                              * math.cos((j + 0.5) * math.pi * v / 8))
            out[u, v] = cu * cv * total
    return out


def _spectrum(entries):
    coeffs = np.zeros((8, 8))
    for (u, v), value in entries.items():
        coeffs[u, v] = value
    return DctBlock(coeffs)


class QuantMatrixTest(unittest.TestCase):
    """Default luminance matrix"""

    def test_default_entries(self):
        """Test the default matrix matches the luminance table entry by entry"""
        qm = default_quant_matrix()
        np.testing.assert_array_equal(qm.values, np.array(DEFAULT_QUANT_TABLE))
        self.assertEqual(int(qm.values[0, 0]), 16)
        self.assertEqual(int(qm.values[7, 7]), 99)

    def test_rejects_zero_divisor(self):
        """Test entries must be >= 1"""
        table = np.ones((8, 8), dtype=np.int64)
        table[3, 3] = 0
        with self.assertRaises(ValueError):
            QuantMatrix(table)


class DctTest(unittest.TestCase):
    """dct_8x8 and idct_8x8"""

    def test_zero_block(self):
        """Test zeros transform to zeros"""
        np.testing.assert_allclose(dct_8x8(Block8(np.zeros((8, 8)))).coeffs, 0, atol=1e-12)

    def test_constant_block(self):
        """Test a constant block has DC 8c and no AC energy"""
        coeffs = dct_8x8(Block8(np.full((8, 8), 37.0))).coeffs
        self.assertAlmostEqual(coeffs[0, 0], 8 * 37.0, delta=1e-9)
        ac = coeffs.copy()
        ac[0, 0] = 0
        self.assertLess(np.abs(ac).max(), 1e-9)

    def test_matches_naive_oracle(self):
        """Test against the four-loop definition on random integer blocks"""
        rng = np.random.default_rng(5)
        for _ in range(5):
            samples = rng.integers(0, 256, size=(8, 8))
            np.testing.assert_allclose(dct_8x8(Block8(samples)).coeffs, naive_dct(samples.tolist()),
                                       atol=1e-9)

    def test_round_trip(self):
        """Test IDCT inverts DCT to 1e-9"""
        rng = np.random.default_rng(6)
        samples = rng.integers(0, 256, size=(8, 8)).astype(np.float64)
        back = idct_8x8(dct_8x8(Block8(samples))).values
        np.testing.assert_allclose(back, samples, atol=1e-9)

    def test_dc_only_inverse(self):
        """Test a DC-only spectrum inverts to a constant block"""
        back = idct_8x8(_spectrum({(0, 0): 8 * 12.5})).values
        np.testing.assert_allclose(back, 12.5, atol=1e-9)

    def test_single_vertical_term(self):
        """Test F(1,0)=1 gives c(1)c(0)cos((i+0.5)pi/8), constant along j"""
        back = idct_8x8(_spectrum({(1, 0): 1.0})).values
        for i in range(8):
            expected = math.cos((i + 0.5) * math.pi / 8) / (2 * 2 * math.sqrt(2))
            np.testing.assert_allclose(back[i], expected, atol=1e-12)

    def test_dc_bound(self):
        """Test |F(0,0)| <= 8(2^q - 1) on a white block"""
        coeffs = dct_8x8(Block8(np.full((8, 8), 255))).coeffs
        self.assertLessEqual(abs(coeffs[0, 0]), 8 * 255 + 1e-9)


class QuantizeTest(unittest.TestCase):
    """quantize and dequantize"""

    def setUp(self):
        self.qm = default_quant_matrix()

    def test_white_block_special_item(self):
        """Test 2040/16 = 127.5 rounds to 128 and clamps to 127"""
        spectrum = dct_8x8(Block8(np.full((8, 8), 255)))
        block = quantize(spectrum, self.qm, 8)
        self.assertEqual(int(block.coeffs[0, 0]), 127)
        ac = block.coeffs.copy()
        ac[0, 0] = 0
        self.assertFalse(ac.any())

    def test_zero_spectrum(self):
        """Test zeros quantize to zeros"""
        self.assertFalse(quantize(_spectrum({}), self.qm, 8).coeffs.any())

    def test_round_half_away(self):
        """Test -57.4 over Q=57 rounds to -1, and -0.5 steps round away from zero"""
        block = quantize(_spectrum({(2, 5): -57.4, (0, 1): -5.5, (0, 2): 5.0}), self.qm, 8)
        self.assertEqual(int(block.coeffs[2, 5]), -1)
        self.assertEqual(int(block.coeffs[0, 1]), -1)
        self.assertEqual(int(block.coeffs[0, 2]), 1)

    def test_ac_overflow_is_an_error(self):
        """Test AC magnitudes beyond q-1 bits are not clamped"""
        with self.assertRaises(CoefficientOverflowError):
            quantize(_spectrum({(0, 1): 11 * 200}), self.qm, 8)

    def test_dc_bound_on_random_blocks(self):
        """Test |F_Q(0,0)| <= 2^(q-1)-1 for random 8-bit blocks"""
        rng = np.random.default_rng(8)
        for _ in range(50):
            block = quantize(dct_8x8(Block8(rng.integers(0, 256, size=(8, 8)))), self.qm, 8)
            self.assertLessEqual(abs(int(block.coeffs[0, 0])), 127)

    def test_dequantize(self):
        """Test F' = F_Q x Q exactly"""
        coeffs = np.zeros((8, 8), dtype=np.int64)
        coeffs[0, 0] = 127
        coeffs[0, 2] = -3
        restored = dequantize(QuantBlock(coeffs, 8), self.qm).coeffs
        self.assertEqual(restored[0, 0], 2032)
        self.assertEqual(restored[0, 2], -30)
        self.assertFalse(dequantize(QuantBlock(np.zeros((8, 8)), 8), self.qm).coeffs[1:].any())

    def test_requantization_is_stable(self):
        """Test dequantize -> quantize -> dequantize is a fixed point"""
        rng = np.random.default_rng(9)
        for _ in range(20):
            first = dequantize(quantize(dct_8x8(Block8(rng.integers(0, 256, size=(8, 8)))), self.qm, 8), self.qm)
            second = dequantize(quantize(first, self.qm, 8), self.qm)
            np.testing.assert_array_equal(first.coeffs, second.coeffs)


class ZigzagTest(unittest.TestCase):
    """Zigzag order and run-length coding"""

    def test_order(self):
        """Test the scan starts (0,0),(0,1),(1,0),(2,0),(1,1),(0,2) and ends at (7,7)"""
        self.assertEqual(list(ZIGZAG[:6]), [(0, 0), (0, 1), (1, 0), (2, 0), (1, 1), (0, 2)])
        self.assertEqual(ZIGZAG[-1], (7, 7))
        self.assertEqual(len(set(ZIGZAG)), 64)

    def test_zero_block(self):
        """Test an all-zero block is just EOF"""
        self.assertEqual(zigzag_rle(QuantBlock(np.zeros((8, 8)), 8)), [EOF])

    def test_dc_only(self):
        """Test a lone DC value"""
        coeffs = np.zeros((8, 8), dtype=np.int64)
        coeffs[0, 0] = 5
        self.assertEqual(zigzag_rle(QuantBlock(coeffs, 8)), [RleToken(5, 0), EOF])

    def test_zero_run(self):
        """Test the zero at (0,1) collapses into the run before (1,0)"""
        coeffs = np.zeros((8, 8), dtype=np.int64)
        coeffs[0, 0] = 5
        coeffs[1, 0] = -2
        self.assertEqual(zigzag_rle(QuantBlock(coeffs, 8)), [RleToken(5, 0), RleToken(-2, 1), EOF])

    def test_inverse(self):
        """Test zigzag_unrle rebuilds sparse random blocks"""
        rng = np.random.default_rng(12)
        for _ in range(20):
            coeffs = rng.integers(-20, 21, size=(8, 8)) * (rng.random((8, 8)) < 0.2)
            block = QuantBlock(coeffs, 8)
            self.assertEqual(zigzag_unrle(zigzag_rle(block), 8), block)


class ImageCodecTest(unittest.TestCase):
    """encode_image, decode_image and psnr"""

    def test_white_image_decodes_to_254(self):
        """Test the clamped DC costs one gray level"""
        img = PixelImage(n=4, q=8, pixels=np.full((16, 16), 255))
        blocks = encode_image(img, default_quant_matrix())
        self.assertEqual(len(blocks), 4)
        grid, display = decode_image(blocks, default_quant_matrix(), 4, 8)
        np.testing.assert_allclose(grid, 254.0, atol=1e-9)
        self.assertTrue((display.pixels == 254).all())

    def test_psnr_identical(self):
        """Test identical images give infinity"""
        img = PixelImage(n=3, q=8, pixels=np.full((8, 8), 9))
        self.assertEqual(psnr(img, img), math.inf)

    def test_psnr_off_by_one(self):
        """Test MSE = 1 gives 20 log10(255)"""
        a = PixelImage(n=3, q=8, pixels=np.full((8, 8), 100))
        b = PixelImage(n=3, q=8, pixels=np.full((8, 8), 101))
        self.assertAlmostEqual(psnr(a, b), 48.1308, places=3)

    def test_psnr_mismatch(self):
        """Test differing sizes are rejected"""
        a = PixelImage(n=3, q=8, pixels=np.zeros((8, 8)))
        b = PixelImage(n=4, q=8, pixels=np.zeros((16, 16)))
        with self.assertRaises(ValueError):
            psnr(a, b)


if __name__ == "__main__":
    unittest.main()

"""
Fixed Point and Arithmetic Black Box Tests
"""

import math
import unittest

from fixedq import (FixedPointOverflowError, SignMagFixed, WidthError, adder_cost,
                    adder_semantics, decode_fixed, encode_fixed, muler_cost,
                    muler_cost_by_stages, muler_semantics, muler_stage_cost,
                    ripple_adder_cost)


class MulerTest(unittest.TestCase):
    """muler_semantics"""

    def test_spot_values(self):
        """Test zero, the Step-4 DC product and the width boundary"""
        self.assertEqual(muler_semantics(0, 77, 8), 0)
        self.assertEqual(muler_semantics(127, 16, 11), 2032)
        top = (1 << 9) - 1
        self.assertLess(muler_semantics(top, top, 9), 1 << 18)

    def test_exhaustive_six_bit(self):
        """Test every pair of 6-bit operands"""
        for a in range(64):
            for b in range(64):
                self.assertEqual(muler_semantics(a, b, 6), a * b)

    def test_width_overflow(self):
        """Test operands wider than the register are rejected"""
        with self.assertRaises(WidthError):
            muler_semantics(16, 1, 4)


class AdderTest(unittest.TestCase):
    """adder_semantics"""

    def test_forward(self):
        """Test 3 + 5 on 4 bits"""
        self.assertEqual(adder_semantics(3, 5, 4), 8)

    def test_reversed_wraps(self):
        """Test b < a gives 2^n - (a - b)"""
        self.assertEqual(adder_semantics(5, 3, 4, reversed=True), 14)

    def test_reversed_plain(self):
        """Test b >= a gives b - a"""
        self.assertEqual(adder_semantics(3, 5, 4, reversed=True), 2)

    def test_round_trip(self):
        """Test the reversed adder undoes the forward adder"""
        for a in range(16):
            for b in range(16):
                total = adder_semantics(a, b, 4)
                self.assertEqual(adder_semantics(a, total, 5, reversed=True), b)
                wrapped = total % 16
                self.assertEqual(adder_semantics(a, wrapped, 4, reversed=True), b)


class CostFormulaTest(unittest.TestCase):
    """muler_cost, adder_cost and the stage summation"""

    def test_muler_spot_values(self):
        """Test n = 1, 2, 4"""
        self.assertEqual(muler_cost(1), 1)
        self.assertEqual(muler_cost(2), 10)
        self.assertEqual(muler_cost(4), 52)

    def test_muler_non_power_of_two(self):
        """Test the log terms stay real-valued"""
        expected = 49 + 28 - 4 + (28 - 8 + 2 * math.log2(7)) * math.log2(7)
        self.assertAlmostEqual(muler_cost(7), expected, places=9)

    def test_adder_spot_values(self):
        """Test 8n - 2 and the ripple adder 4s - 2"""
        self.assertEqual(adder_cost(1), 6)
        self.assertEqual(adder_cost(10), 78)
        self.assertEqual(ripple_adder_cost(3), 10)

    def test_stage_summation(self):
        """Test the stage-by-stage sum equals the closed form for power-of-two widths"""
        for n in (1, 2, 4, 8, 16, 32):
            with self.subTest(n=n):
                self.assertAlmostEqual(muler_cost_by_stages(n), muler_cost(n), places=9)

    def test_stage_summation_needs_power_of_two(self):
        """Test other widths are refused"""
        with self.assertRaises(WidthError):
            muler_cost_by_stages(6)

    def test_stage_cost(self):
        """Test the first stage of an 8-bit multiplier runs size-8 adders"""
        self.assertEqual(muler_stage_cost(8, 1), ripple_adder_cost(8))
        self.assertEqual(muler_stage_cost(8, 3), ripple_adder_cost(13))


class FixedPointTest(unittest.TestCase):
    """encode_fixed and decode_fixed"""

    def test_spot_values(self):
        """Test 0.125, -0.2405 and 0 at 11 fractional bits"""
        self.assertEqual(encode_fixed(0.125, 0, 11), SignMagFixed(0, 256, 0, 11))
        self.assertEqual(encode_fixed(-0.2405, 0, 11), SignMagFixed(1, 493, 0, 11))
        self.assertEqual(encode_fixed(0.0, 0, 11), SignMagFixed(0, 0, 0, 11))

    def test_half_ulp(self):
        """Test decode(encode(x)) stays within half an ulp"""
        for k in range(-400, 401):
            x = k / 401.0 * 0.99
            self.assertLessEqual(abs(decode_fixed(encode_fixed(x, 0, 11)) - x), 2 ** -12 + 1e-15)

    def test_register_bits(self):
        """Test the sign sits directly above the magnitude"""
        self.assertEqual(SignMagFixed(1, 5, 0, 11).to_bits(), (1 << 11) | 5)

    def test_overflow(self):
        """Test values beyond the integer field are rejected"""
        with self.assertRaises(FixedPointOverflowError):
            encode_fixed(1.0, 0, 11)
        with self.assertRaises(FixedPointOverflowError):
            encode_fixed(0.99999, 0, 4)


if __name__ == "__main__":
    unittest.main()

"""
Boolean Expression Compression Tests
Implicant merging, strategy agreement and circuit equivalence
"""

import itertools
import unittest

import numpy as np

from bec import (Implicant, bec_compress, bec_cost, expand_implicant, implicants_from_circuit,
                 merge, mergeable, minimize)
from config import Config
from gqir import MCX, evaluate, prepare_uncompressed
from pixmap import PixelImage

# YX 00=65, 01=194, 10=192, 11=193: ten set bits, six after compression
FOUR_PIXELS = [[65, 194], [192, 193]]


def _minterms(values, width, target=0):
    return [Implicant(target, (1 << width) - 1, v, width) for v in values]


class ImplicantTest(unittest.TestCase):
    """Implicant records and the pairwise merge"""

    def test_pattern(self):
        """Test the pattern prints MSB first with '-' for don't-cares"""
        self.assertEqual(Implicant(0, 0b101, 0b001, 3).pattern(), '0-1')
        self.assertEqual(Implicant(0, 0, 0, 2).dont_cares, 2)

    def test_value_outside_mask(self):
        """Test value bits must lie inside the mask"""
        with self.assertRaises(ValueError):
            Implicant(0, 0b01, 0b10, 2)

    def test_merge_rules(self):
        """Test merging needs the same target, the same mask and a one-bit difference"""
        a, b, c = _minterms([0b01, 0b11, 0b10], 2)
        self.assertTrue(mergeable(a, b))
        self.assertFalse(mergeable(a, c))
        self.assertFalse(mergeable(a, Implicant(1, 0b11, 0b11, 2)))
        self.assertEqual(merge(a, b), Implicant(0, 0b01, 0b01, 2))

    def test_expand(self):
        """Test expansion lists every covered minterm"""
        self.assertEqual(expand_implicant(Implicant(0, 0b100, 0b100, 3)), {4, 5, 6, 7})
        self.assertEqual(expand_implicant(Implicant(0, 0b111, 0b010, 3)), {2})


class MinimizeTest(unittest.TestCase):
    """minimize on hand-built pools"""

    def test_three_of_four(self):
        """Test {01, 10, 11} leaves two implicants"""
        pool, _, _ = minimize(_minterms([0b01, 0b10, 0b11], 2), 2, 'scan')
        self.assertEqual(pool, [Implicant(0, 0b01, 0b01, 2), Implicant(0, 0b11, 0b10, 2)])

    def test_full_plane(self):
        """Test all four minterms collapse to one term without controls"""
        pool, rounds, _ = minimize(_minterms(range(4), 2), 2)
        self.assertEqual(pool, [Implicant(0, 0, 0, 2)])
        self.assertEqual(rounds, 2)

    def test_strategies_agree(self):
        """Test scan and indexed rounds produce the same pool"""
        rng = np.random.default_rng(21)
        for _ in range(30):
            values = sorted(set(rng.integers(0, 64, size=int(rng.integers(1, 40))).tolist()))
            order = rng.permutation(len(values)).tolist()
            pool = _minterms([values[k] for k in order], 6)
            self.assertEqual(minimize(pool, 6, 'scan')[0], minimize(pool, 6, 'indexed')[0])

    def test_unknown_strategy(self):
        """Test the strategy name is checked"""
        with self.assertRaises(ValueError):
            minimize([], 2, 'greedy')


class BecCompressTest(unittest.TestCase):
    """bec_compress on preparation circuits"""

    def _assert_equivalent(self, img, strategy='indexed'):
        circuit = prepare_uncompressed(img)
        compressed, stats = bec_compress(circuit, strategy)
        self.assertEqual(evaluate(compressed, img.n, img.q), evaluate(circuit, img.n, img.q))
        self.assertLessEqual(stats.gates_after, stats.gates_before)
        return compressed, stats

    def test_four_pixel_image(self):
        """Test 10 MCX compress to 6: two on bit 0, one on bits 1 and 6, two on bit 7"""
        img = PixelImage(n=1, q=8, pixels=FOUR_PIXELS)
        compressed, stats = self._assert_equivalent(img, 'scan')
        self.assertEqual((stats.gates_before, stats.gates_after), (10, 6))
        per_bit = {}
        for gate in compressed.gates:
            if isinstance(gate, MCX):
                per_bit[gate.target.index] = per_bit.get(gate.target.index, 0) + 1
        self.assertEqual(per_bit, {0: 2, 1: 1, 6: 1, 7: 2})
        self.assertEqual(bec_cost(stats, compressed).c_i, 6)
        self.assertEqual(compressed.tally().hadamard, 2)

    def test_zero_image(self):
        """Test an empty NOT layer needs no comparisons"""
        img = PixelImage(n=3, q=8, pixels=np.zeros((8, 8)))
        compressed, stats = bec_compress(prepare_uncompressed(img))
        self.assertEqual(stats.comparisons, 0)
        self.assertEqual(compressed.tally().mcx, 0)

    def test_constant_image(self):
        """Test a constant 8x8 image keeps one uncontrolled NOT per set bit"""
        img = PixelImage(n=3, q=8, pixels=np.full((8, 8), 255))
        compressed, _ = self._assert_equivalent(img)
        self.assertEqual(compressed.tally().mcx, 8)
        self.assertEqual(dict(compressed.tally().mcx_by_controls), {0: 8})

    def test_exhaustive_two_by_two(self):
        """Test every 2x2 image with 2-bit colors"""
        for values in itertools.product(range(4), repeat=4):
            img = PixelImage(n=1, q=2, pixels=np.array(values).reshape(2, 2))
            self._assert_equivalent(img, 'scan')

    def test_sampled_four_by_four(self):
        """Test 10^4 distinct 4x4 bit-planes, eight per image"""
        rng = np.random.default_rng(33)
        planes = rng.choice(1 << 16, size=10000, replace=False)
        locations = np.arange(16)
        for start in range(0, len(planes), 8):
            pixels = np.zeros(16, dtype=np.int64)
            for bit, plane in enumerate(planes[start:start + 8]):
                pixels |= ((int(plane) >> locations) & 1) << bit
            img = PixelImage(n=2, q=8, pixels=pixels.reshape(4, 4))
            scan, scan_stats = self._assert_equivalent(img, 'scan')
            self.assertLessEqual(scan_stats.comparisons, scan_stats.comparison_bound)
            if start % 200 == 0:
                indexed, _ = self._assert_equivalent(img, 'indexed')
                self.assertEqual(scan.gates, indexed.gates)

    def test_fixed_point(self):
        """Test compressing a compressed circuit changes nothing"""
        for pixels in (FOUR_PIXELS, [[255, 255], [255, 255]]):
            img = PixelImage(n=1, q=8, pixels=pixels)
            once, _ = bec_compress(prepare_uncompressed(img))
            twice, _ = bec_compress(once)
            self.assertEqual(twice.gates, once.gates)

    def test_terms_are_disjoint(self):
        """Test the implicants kept for one bit cover its minterms exactly once"""
        rng = np.random.default_rng(41)
        img = PixelImage(n=2, q=8, pixels=rng.integers(0, 256, size=(4, 4)))
        compressed, _ = bec_compress(prepare_uncompressed(img))
        for bit in range(8):
            covered = []
            for implicant in implicants_from_circuit(compressed):
                if implicant.target == bit:
                    covered.extend(expand_implicant(implicant))
            expected = set(np.flatnonzero(img.bit_plane(bit).ravel()).tolist())
            self.assertEqual(len(covered), len(set(covered)))
            self.assertEqual(set(covered), expected)

    def test_sixteen_by_sixteen(self):
        """Test 100 random 16x16 images stay equivalent after compression"""
        rng = np.random.default_rng(55)
        strategies = ('indexed', 'scan') if Config.LONG_TESTS else ('indexed',)
        for _ in range(100):
            img = PixelImage(n=4, q=8, pixels=rng.integers(0, 256, size=(16, 16)))
            for strategy in strategies:
                self._assert_equivalent(img, strategy)


if __name__ == "__main__":
    unittest.main()

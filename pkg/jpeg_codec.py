"""
Classical JPEG Front-End
8x8 DCT, quantization, zigzag/RLE reference path, dequantization, IDCT and PSNR
"""

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from pixmap import BLOCK_SIZE, Block8, PixelImage, split_blocks

logger = logging.getLogger(__name__)

# Luminance quantization matrix, row u, column v
DEFAULT_QUANT_TABLE = (
    (16, 11, 10, 16, 24, 40, 51, 61),
    (12, 12, 14, 19, 26, 58, 60, 55),
    (14, 13, 16, 24, 40, 57, 69, 56),
    (14, 17, 22, 29, 51, 87, 80, 62),
    (18, 22, 37, 56, 68, 109, 103, 77),
    (24, 35, 55, 64, 81, 104, 113, 92),
    (49, 64, 78, 87, 103, 121, 120, 101),
    (72, 92, 95, 98, 112, 100, 103, 99),
)


class CoefficientOverflowError(ValueError):
    """Raised when a quantized AC coefficient needs more than q-1 magnitude bits"""


def _readonly(array, dtype):
    array = np.array(array, dtype=dtype)
    array.flags.writeable = False
    return array


def dct_scale(u):
    """c(u): 1/(2*sqrt(2)) for u == 0, 1/2 otherwise"""
    return 1.0 / (2.0 * math.sqrt(2.0)) if u == 0 else 0.5


def _basis():
    # T[u, i] = c(u) * cos((i + 0.5) * pi * u / 8)
    basis = np.empty((BLOCK_SIZE, BLOCK_SIZE))
    for u in range(BLOCK_SIZE):
        for i in range(BLOCK_SIZE):
            basis[u, i] = dct_scale(u) * math.cos((i + 0.5) * math.pi * u / BLOCK_SIZE)
    return basis


DCT_BASIS = _readonly(_basis(), np.float64)


@dataclass(frozen=True, eq=False)
class DctBlock:
    """Real-valued 8x8 spectrum F(u,v)"""
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = _readonly(self.coeffs, np.float64)
        if coeffs.shape != (BLOCK_SIZE, BLOCK_SIZE):
            raise ValueError(f"DCT block must be 8x8, got {coeffs.shape}")
        object.__setattr__(self, 'coeffs', coeffs)


@dataclass(frozen=True, eq=False)
class QuantMatrix:
    """8x8 positive integer divisors Q(u,v)"""
    values: np.ndarray

    def __post_init__(self):
        values = _readonly(self.values, np.int64)
        if values.shape != (BLOCK_SIZE, BLOCK_SIZE):
            raise ValueError(f"quantization matrix must be 8x8, got {values.shape}")
        if values.min() < 1:
            raise ValueError("quantization matrix entries must be >= 1")
        object.__setattr__(self, 'values', values)

    def __eq__(self, other):
        if not isinstance(other, QuantMatrix):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash(self.values.tobytes())


@dataclass(frozen=True, eq=False)
class QuantBlock:
    """Signed quantized coefficients F_Q(u,v) for a q-bit source"""
    coeffs: np.ndarray
    q: int

    def __post_init__(self):
        coeffs = _readonly(self.coeffs, np.int64)
        if coeffs.shape != (BLOCK_SIZE, BLOCK_SIZE):
            raise ValueError(f"quantized block must be 8x8, got {coeffs.shape}")
        object.__setattr__(self, 'coeffs', coeffs)

    def __eq__(self, other):
        if not isinstance(other, QuantBlock):
            return NotImplemented
        return self.q == other.q and np.array_equal(self.coeffs, other.coeffs)


def default_quant_matrix():
    return QuantMatrix(DEFAULT_QUANT_TABLE)


def round_half_away(values):
    """Round to nearest integer, ties away from zero"""
    values = np.asarray(values, dtype=np.float64)
    return (np.sign(values) * np.floor(np.abs(values) + 0.5)).astype(np.int64)


def dct_8x8(block):
    """Forward DCT of one block"""
    samples = np.asarray(block.values, dtype=np.float64)
    return DctBlock(DCT_BASIS @ samples @ DCT_BASIS.T)


def idct_8x8(block):
    """Inverse DCT of one spectrum"""
    samples = DCT_BASIS.T @ block.coeffs @ DCT_BASIS
    return Block8(samples)


def quantize(block, qm, q):
    """F_Q = round(F / Q) with the DC special item clamped to 2^(q-1)-1"""
    coeffs = round_half_away(block.coeffs / qm.values)
    limit = (1 << (q - 1)) - 1
    coeffs[0, 0] = max(-limit, min(limit, coeffs[0, 0]))
    ac = np.abs(coeffs)
    ac[0, 0] = 0
    if ac.max() > limit:
        u, v = np.unravel_index(int(np.argmax(ac)), ac.shape)
        raise CoefficientOverflowError(
            f"F_Q({u},{v})={coeffs[u, v]} does not fit {q - 1} magnitude bits")
    return QuantBlock(coeffs, q)


def dequantize(block, qm):
    """F' = F_Q x Q, exact"""
    return DctBlock(block.coeffs * qm.values)


class RleToken(NamedTuple):
    """A nonzero coefficient preceded by `run` zeros in zigzag order"""
    value: int
    run: int


# Terminator standing for "all remaining coefficients are zero"
EOF = RleToken(0, 0)


def zigzag_order():
    """The 64 (u,v) positions of the zigzag scan, by antidiagonal traversal"""
    order = []
    for s in range(2 * BLOCK_SIZE - 1):
        cells = [(u, s - u) for u in range(BLOCK_SIZE) if 0 <= s - u < BLOCK_SIZE]
        if s % 2 == 0:
            cells.reverse()
        order.extend(cells)
    return order


ZIGZAG = tuple(zigzag_order())


def zigzag_rle(block):
    """Zigzag scan with zero runs collapsed and trailing zeros replaced by EOF"""
    tokens = []
    run = 0
    for u, v in ZIGZAG:
        value = int(block.coeffs[u, v])
        if value == 0:
            run += 1
            continue
        tokens.append(RleToken(value, run))
        run = 0
    tokens.append(EOF)
    return tokens


def zigzag_unrle(tokens, q):
    """Rebuild a QuantBlock from zigzag_rle output"""
    coeffs = np.zeros((BLOCK_SIZE, BLOCK_SIZE), dtype=np.int64)
    position = 0
    for token in tokens:
        if token == EOF:
            break
        position += token.run
        if position >= len(ZIGZAG):
            raise ValueError("run-length stream overruns the block")
        u, v = ZIGZAG[position]
        coeffs[u, v] = token.value
        position += 1
    return QuantBlock(coeffs, q)


def encode_image(img, qm):
    """Classical Step 1: DCT and quantize every block, row-major block order"""
    return [quantize(dct_8x8(block), qm, img.q) for block in split_blocks(img)]


def decode_image(quant_blocks, qm, n, q):
    """Float reference decoder: returns (real-valued grid, rounded and clamped PixelImage)"""
    side = 1 << n
    per_row = side // BLOCK_SIZE
    grid = np.zeros((side, side), dtype=np.float64)
    for index, block in enumerate(quant_blocks):
        bi, bj = divmod(index, per_row)
        samples = idct_8x8(dequantize(block, qm)).values
        grid[bi * BLOCK_SIZE:(bi + 1) * BLOCK_SIZE, bj * BLOCK_SIZE:(bj + 1) * BLOCK_SIZE] = samples
    display = np.clip(round_half_away(grid), 0, (1 << q) - 1)
    return grid, PixelImage(n=n, q=q, pixels=display)


def psnr(a, b):
    """Peak signal-to-noise ratio in dB; identical images give math.inf"""
    if a.n != b.n or a.q != b.q:
        raise ValueError(f"PSNR needs matching images, got n={a.n}/{b.n}, q={a.q}/{b.q}")
    diff = a.pixels.astype(np.float64) - b.pixels.astype(np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 20.0 * math.log10(a.max_value / math.sqrt(mse))

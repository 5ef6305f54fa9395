"""
Sign-Magnitude Fixed Point and Arithmetic Black Boxes
Value semantics of the quantum multiplier (MULER) and adder (ADDER) plus their gate costs
"""

import math
from dataclasses import dataclass


class WidthError(ValueError):
    """Raised when an operand does not fit its declared register width"""


class FixedPointOverflowError(ValueError):
    """Raised when a rounded magnitude needs more bits than declared"""


def _check_width(name, value, width):
    if width < 1:
        raise WidthError(f"width must be >= 1, got {width}")
    if not 0 <= value < (1 << width):
        raise WidthError(f"{name}={value} does not fit {width} bits")


def round_half_away(x):
    """Scalar round to nearest, ties away from zero"""
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


@dataclass(frozen=True)
class SignMagFixed:
    """Dedicated sign bit plus an unsigned magnitude split into integer and fraction fields"""
    sign: int
    magnitude: int
    int_width: int
    frac_width: int

    def __post_init__(self):
        if self.sign not in (0, 1):
            raise ValueError(f"sign must be 0 or 1, got {self.sign}")
        if self.int_width < 0 or self.frac_width < 0:
            raise WidthError("field widths must be non-negative")
        if not 0 <= self.magnitude < (1 << self.width):
            raise FixedPointOverflowError(
                f"magnitude {self.magnitude} exceeds {self.width} bits")

    @property
    def width(self):
        return self.int_width + self.frac_width

    @property
    def value(self):
        return (-1) ** self.sign * self.magnitude / (1 << self.frac_width)

    def to_bits(self):
        """Register image: magnitude bits with the sign in the bit above them"""
        return self.magnitude | (self.sign << self.width)


def encode_fixed(x, int_width, frac_width):
    """Round |x| to frac_width fractional bits; the sign goes to its own bit"""
    if abs(x) >= (1 << int_width):
        raise FixedPointOverflowError(f"|{x}| does not fit {int_width} integer bits")
    magnitude = round_half_away(abs(x) * (1 << frac_width))
    if magnitude >= 1 << (int_width + frac_width):
        raise FixedPointOverflowError(
            f"{x} rounds to {magnitude}, beyond {int_width + frac_width} bits")
    sign = 1 if x < 0 and magnitude else 0
    return SignMagFixed(sign, magnitude, int_width, frac_width)


def decode_fixed(value):
    return value.value


def muler_semantics(a, b, width):
    """M(|a>,|b>,|0>^2n) = (|a>,|b>,|a*b>); returns the 2n-bit product"""
    _check_width('a', a, width)
    _check_width('b', b, width)
    return a * b


def adder_semantics(a, b, width, reversed=False):
    """Forward: a+b on n+1 bits. Reversed: b-a when b >= a, else 2^n-(a-b)"""
    _check_width('a', a, width)
    _check_width('b', b, width)
    if not reversed:
        return a + b
    if b >= a:
        return b - a
    return (1 << width) - (a - b)


def muler_cost(n):
    """n^2 + 4n - 4 + (4n - 8 + 2 log2 n) log2 n"""
    if n < 1:
        raise WidthError(f"MULER width must be >= 1, got {n}")
    log_n = math.log2(n)
    return n * n + 4 * n - 4 + (4 * n - 8 + 2 * log_n) * log_n


def adder_cost(n):
    """(2n-1) carry modules + n sum modules + 1 CNOT = 8n - 2"""
    if n < 1:
        raise WidthError(f"ADDER width must be >= 1, got {n}")
    return 8 * n - 2


def ripple_adder_cost(size):
    return 4 * size - 2


def muler_stage_cost(n, stage):
    """Stage l runs n/2^l ripple adders of size n+l+2^(l-1)-2 in parallel"""
    return ripple_adder_cost(n + stage + 2 ** (stage - 1) - 2)


def muler_cost_by_stages(n):
    """n^2 partial products plus the log2(n) adder stages; n must be a power of two"""
    if n < 1 or n & (n - 1):
        raise WidthError(f"stage summation needs a power-of-two width, got {n}")
    stages = n.bit_length() - 1
    return n * n + sum(muler_stage_cost(n, stage) for stage in range(1, stages + 1))

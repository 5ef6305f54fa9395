"""
Pixel Images
PGM ingestion, validation, bit-plane access and 8x8 block partitioning
"""

import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

BLOCK_SIZE = 8
MIN_BLOCK_EXPONENT = 3
MAX_PGM_DEPTH = 16


class PgmFormatError(ValueError):
    """Raised when a PGM file cannot be parsed"""


class ImageShapeError(ValueError):
    """Raised when pixel data does not form a valid 2^n x 2^n image"""


@dataclass(frozen=True, eq=False)
class PixelImage:
    """A 2^n x 2^n grid of q-bit unsigned pixels, stored row-major"""
    n: int
    q: int
    pixels: np.ndarray
    padded: bool = False
    original_shape: tuple = None

    def __post_init__(self):
        if self.n < 1:
            raise ImageShapeError(f"exponent n must be >= 1, got {self.n}")
        if self.q < 1:
            raise ImageShapeError(f"color depth q must be >= 1, got {self.q}")
        side = 1 << self.n
        pixels = np.asarray(self.pixels, dtype=np.int64)
        if pixels.shape != (side, side):
            raise ImageShapeError(f"expected {side}x{side} pixels, got {pixels.shape}")
        if pixels.size and (pixels.min() < 0 or pixels.max() >= (1 << self.q)):
            raise ImageShapeError(f"pixel values must lie in [0, {(1 << self.q) - 1}]")
        pixels = pixels.copy()
        pixels.flags.writeable = False
        object.__setattr__(self, 'pixels', pixels)
        if self.original_shape is None:
            object.__setattr__(self, 'original_shape', (side, side))

    @property
    def side(self):
        return 1 << self.n

    @property
    def max_value(self):
        return (1 << self.q) - 1

    @property
    def blockable(self):
        """True when 8x8 blocks tile the image"""
        return self.n >= MIN_BLOCK_EXPONENT

    def bit_plane(self, bit):
        """Return the 0/1 grid of color bit `bit`"""
        if not 0 <= bit < self.q:
            raise IndexError(f"bit {bit} outside color depth {self.q}")
        return (self.pixels >> bit) & 1

    def __eq__(self, other):
        if not isinstance(other, PixelImage):
            return NotImplemented
        return self.n == other.n and self.q == other.q and np.array_equal(self.pixels, other.pixels)

    def __hash__(self):
        return hash((self.n, self.q, self.pixels.tobytes()))

    def to_dict(self):
        """Convert to dictionary (metadata only)"""
        return {
            'n': self.n,
            'q': self.q,
            'side': self.side,
            'padded': self.padded,
            'original_shape': list(self.original_shape)
        }


@dataclass(frozen=True, eq=False)
class Block8:
    """One 8x8 block f(i,j) of samples with its block coordinates"""
    values: np.ndarray
    block_row: int = 0
    block_col: int = 0

    def __post_init__(self):
        values = np.array(self.values)
        if values.shape != (BLOCK_SIZE, BLOCK_SIZE):
            raise ImageShapeError(f"a block holds exactly 64 samples, got shape {values.shape}")
        values.flags.writeable = False
        object.__setattr__(self, 'values', values)

    def __eq__(self, other):
        if not isinstance(other, Block8):
            return NotImplemented
        return (self.block_row, self.block_col) == (other.block_row, other.block_col) \
            and np.array_equal(self.values, other.values)


def _exponent_for(side):
    """Smallest n with 2^n >= side"""
    n = 0
    while (1 << n) < side:
        n += 1
    return n


def depth_for_maxval(maxval):
    """Return q for maxval = 2^q - 1, or raise"""
    if maxval < 1 or maxval & (maxval + 1):
        raise PgmFormatError(f"maxval {maxval} is not of the form 2^q-1")
    q = maxval.bit_length()
    if q > MAX_PGM_DEPTH:
        raise PgmFormatError(f"maxval {maxval} exceeds {MAX_PGM_DEPTH}-bit depth")
    return q


def from_array(array, q, min_exponent=1):
    """Build a PixelImage from a 2-D grid, zero-padding up to the next 2^n x 2^n"""
    grid = np.asarray(array, dtype=np.int64)
    if grid.ndim != 2 or grid.size == 0:
        raise ImageShapeError("pixel data must be a non-empty 2-D grid")
    height, width = grid.shape
    n = _exponent_for(max(height, width))
    if n < min_exponent:
        raise ImageShapeError(
            f"{height}x{width} image gives n={n}, need n >= {min_exponent}")
    side = 1 << n
    padded = (height, width) != (side, side)
    if padded:
        logger.warning(f"Zero-padding {height}x{width} image to {side}x{side}")
        grid = np.pad(grid, ((0, side - height), (0, side - width)))
    return PixelImage(n=n, q=q, pixels=grid, padded=padded, original_shape=(height, width))


def _header_tokens(data):
    """Yield (token, end offset) pairs from a netpbm header, skipping comments"""
    pos = 0
    length = len(data)
    while pos < length:
        ch = data[pos:pos + 1]
        if ch == b'#':
            end = data.find(b'\n', pos)
            pos = length if end < 0 else end + 1
        elif ch.isspace():
            pos += 1
        else:
            start = pos
            while pos < length and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b'#':
                pos += 1
            yield data[start:pos], pos


def load_pgm(path):
    """Load a P2 or P5 PGM into a validated, padded PixelImage"""
    with open(path, 'rb') as handle:
        data = handle.read()
    if not data:
        raise PgmFormatError(f"{path}: empty file")

    header = []
    end = 0
    for token, end in _header_tokens(data):
        header.append(token)
        if len(header) == 4:
            break
    if len(header) < 4:
        raise PgmFormatError(f"{path}: truncated header")

    magic = header[0]
    if magic not in (b'P2', b'P5'):
        raise PgmFormatError(f"{path}: unsupported magic {magic!r}")
    try:
        width, height, maxval = (int(t) for t in header[1:4])
    except ValueError:
        raise PgmFormatError(f"{path}: malformed header values")
    if width < 1 or height < 1:
        raise PgmFormatError(f"{path}: invalid dimensions {width}x{height}")
    q = depth_for_maxval(maxval)
    count = width * height

    if magic == b'P5':
        # Exactly one whitespace byte separates the header from the raster
        raster = data[end + 1:]
        dtype = np.dtype('>u2') if maxval > 255 else np.dtype('u1')
        if len(raster) < count * dtype.itemsize:
            raise PgmFormatError(f"{path}: raster holds fewer than {count} samples")
        values = np.frombuffer(raster, dtype=dtype, count=count).astype(np.int64)
    else:
        try:
            values = np.array([int(t) for t in data[end:].split()[:count]], dtype=np.int64)
        except ValueError:
            raise PgmFormatError(f"{path}: non-numeric ASCII sample")
        if values.size < count:
            raise PgmFormatError(f"{path}: raster holds fewer than {count} samples")

    if values.max(initial=0) > maxval:
        raise PgmFormatError(f"{path}: sample exceeds maxval {maxval}")

    try:
        img = from_array(values.reshape(height, width), q, min_exponent=MIN_BLOCK_EXPONENT)
    except ImageShapeError as e:
        raise ImageShapeError(f"{path}: {e}")
    logger.info(f"Loaded {path}: {width}x{height}, q={q}, n={img.n}")
    return img


def write_pgm(img, path):
    """Write a PixelImage as binary P5 PGM"""
    header = f"P5\n{img.side} {img.side}\n{img.max_value}\n".encode('ascii')
    dtype = '>u2' if img.max_value > 255 else 'u1'
    with open(path, 'wb') as handle:
        handle.write(header)
        handle.write(img.pixels.astype(dtype).tobytes())


def split_blocks(img):
    """Split an image into 2^(n-3) x 2^(n-3) blocks in row-major block order"""
    if not img.blockable:
        raise ImageShapeError(f"8x8 blocks need n >= {MIN_BLOCK_EXPONENT}, got n={img.n}")
    count = img.side // BLOCK_SIZE
    tiles = img.pixels.reshape(count, BLOCK_SIZE, count, BLOCK_SIZE).swapaxes(1, 2)
    return [Block8(tiles[bi, bj], bi, bj) for bi in range(count) for bj in range(count)]


def reassemble_blocks(blocks, n, q):
    """Inverse of split_blocks"""
    side = 1 << n
    grid = np.zeros((side, side), dtype=np.int64)
    for block in blocks:
        y = block.block_row * BLOCK_SIZE
        x = block.block_col * BLOCK_SIZE
        grid[y:y + BLOCK_SIZE, x:x + BLOCK_SIZE] = block.values
    return PixelImage(n=n, q=q, pixels=grid)


def block_of(y, x):
    """Map pixel (Y, X) to ((block row, block col), (u', v'))"""
    return (y // BLOCK_SIZE, x // BLOCK_SIZE), (y % BLOCK_SIZE, x % BLOCK_SIZE)


def popcount(value):
    return bin(int(value)).count('1')


def popcount_array(values):
    """Element-wise popcount of a non-negative integer array"""
    values = np.asarray(values, dtype=np.int64)
    total = np.zeros(values.shape, dtype=np.int64)
    while values.any():
        total += values & 1
        values = values >> 1
    return total


def count_one_bits(img):
    """Number of set bits across all pixels (the uncompressed MCX count)"""
    return int(popcount_array(img.pixels).sum())

"""
Synthetic Mini-Corpus
Deterministic 8-bit test images: smooth bases with graded white-noise texture
"""

import logging
import os

import numpy as np

from pixmap import from_array, write_pgm

logger = logging.getLogger(__name__)

NOISE_LEVELS = (4, 8, 12, 16, 20, 24)
BASE_LOW = 40
BASE_HIGH = 215


def _scale(grid):
    """Stretch a real grid onto [BASE_LOW, BASE_HIGH]"""
    low, high = grid.min(), grid.max()
    if high == low:
        return np.full(grid.shape, (BASE_LOW + BASE_HIGH) / 2.0)
    return BASE_LOW + (grid - low) * (BASE_HIGH - BASE_LOW) / (high - low)


def smooth_bases(size):
    """Four noise-free backgrounds keyed by name"""
    y, x = np.mgrid[0:size, 0:size] / float(size)
    return {
        'ramp': _scale(x + 0.5 * y),
        'blob': _scale(np.exp(-((x - 0.4) ** 2 + (y - 0.6) ** 2) / 0.08)),
        'waves': _scale(np.sin(2 * np.pi * 2 * x) * np.cos(2 * np.pi * 1.5 * y)),
        'steps': _scale(np.floor(4 * x) + np.floor(3 * y) + 0.5 * np.sin(2 * np.pi * y))
    }


def generate_corpus(size=64, seed=2024):
    """Return [(name, PixelImage)] for every base and noise level"""
    rng = np.random.default_rng(seed)
    images = []
    for base_name, base in smooth_bases(size).items():
        for sigma in NOISE_LEVELS:
            noisy = base + rng.normal(0.0, sigma, size=base.shape)
            pixels = np.clip(np.rint(noisy), 0, 255).astype(np.int64)
            images.append((f"{base_name}_s{sigma:02d}", from_array(pixels, 8)))
    return images


def write_corpus(out_dir, size=64, seed=2024):
    """Write the corpus as P5 PGM files; returns the written paths"""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name, img in generate_corpus(size, seed):
        path = os.path.join(out_dir, f"{name}.pgm")
        write_pgm(img, path)
        paths.append(path)
    logger.info(f"Wrote {len(paths)} corpus images to {out_dir}")
    return paths


if __name__ == '__main__':
    logging.basicConfig(level=logging.INFO)
    print("Creating synthetic corpus...")
    written = write_corpus(os.environ.get('QIMG_CORPUS_DIR', 'corpus'))
    print(f"✅ Created {len(written)} images")

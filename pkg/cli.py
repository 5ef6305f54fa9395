"""
Quantum Image Compression Command Line
Runs the preparation schemes, cost reports and corpus statistics from the shell
"""

import functools
import hashlib
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field

import click
import numpy as np
from werkzeug.utils import secure_filename

from bec import bec_compress, bec_cost
from config import get_config
from costmod import (analytic_costs, compare_schemes, corpus_statistics, ratio_surface,
                     rows_to_csv, stage_tally_costs, threshold_curve)
from gqir import evaluate, prepare_uncompressed
from pixmap import from_array, load_pgm, write_pgm
from qjpeg import export_trace_jsonl, run_pipeline
from sample_corpus import write_corpus

logger = logging.getLogger(__name__)

EXIT_IO = 1
EXIT_DOMAIN = 2
EXIT_VERIFY_FAILED = 3


@dataclass
class ReportBundle:
    """Everything one command produced; serialized as the JSON report"""
    command: str
    parameters: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)
    cost_reports: list = field(default_factory=list)
    tallies: dict = field(default_factory=dict)
    psnr: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    results: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)

    def add_warning(self, message):
        if message not in self.warnings:
            self.warnings.append(message)

    def add_input(self, path):
        with open(path, 'rb') as handle:
            self.inputs[path] = hashlib.sha256(handle.read()).hexdigest()

    def to_dict(self):
        """Convert to dictionary"""
        return {
            'command': self.command,
            'parameters': self.parameters,
            'inputs': self.inputs,
            'cost_reports': self.cost_reports,
            'tallies': self.tallies,
            'psnr': self.psnr,
            'timing': self.timing,
            'results': self.results,
            'warnings': self.warnings
        }

    def write(self, path):
        with open(path, 'w') as handle:
            json.dump(self.to_dict(), handle, indent=2, default=_json_default)
        logger.info(f"Report written to {path}")


def _json_default(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return str(value)


class _BundleHandler(logging.Handler):
    def __init__(self, bundle):
        super().__init__(level=logging.WARNING)
        self.bundle = bundle

    def emit(self, record):
        self.bundle.add_warning(record.getMessage())


@contextmanager
def capture_warnings(bundle):
    """Route every module warning logged during the block into the bundle"""
    handler = _BundleHandler(bundle)
    root = logging.getLogger()
    root.addHandler(handler)
    try:
        yield bundle
    finally:
        root.removeHandler(handler)


def handle_errors(command):
    """Map I/O failures to exit 1 and domain errors to exit 2"""
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except OSError as e:
            logger.error(f"{command.__name__} failed: {e}")
            click.echo(f"❌ I/O error: {e}", err=True)
            sys.exit(EXIT_IO)
        except ValueError as e:
            logger.error(f"{command.__name__} failed: {e}")
            click.echo(f"❌ {e}", err=True)
            sys.exit(EXIT_DOMAIN)
    return wrapper


def parse_range(text):
    """'4..40' -> [4, ..., 40]; '8' -> [8]; '6,8,10' -> [6, 8, 10]"""
    text = str(text).strip()
    if '..' in text:
        low, high = text.split('..', 1)
        low, high = int(low), int(high)
        if high < low:
            raise ValueError(f"empty range {text}")
        return list(range(low, high + 1))
    return [int(part) for part in text.split(',')]


def _stem(path):
    name = secure_filename(os.path.basename(path))
    return os.path.splitext(name)[0] or 'image'


def _write_text(path, text):
    with open(path, 'w') as handle:
        handle.write(text)


@click.group()
@click.option('--env', default=None, help='Configuration name (development, production, testing)')
@click.pass_context
def cli(ctx, env):
    """Quantum image preparation: plain GQIR, BEC and quantum JPEG"""
    config = get_config(env)
    logging.basicConfig(level=config.LOG_LEVEL, format=config.LOG_FORMAT)
    ctx.obj = config


@cli.command()
@click.argument('image', type=click.Path(dir_okay=False))
@click.option('--scheme', type=click.Choice(['plain', 'bec', 'qjpeg']), default='plain')
@click.option('--max-n', type=int, default=None, help='Largest n BEC runs on without --force')
@click.option('--force', is_flag=True, help='Run BEC above --max-n')
@click.option('--strategy', type=click.Choice(['indexed', 'scan']), default=None)
@click.option('--engine', type=click.Choice(['vectorized', 'circuit']), default=None)
@click.option('--trace', 'write_trace', is_flag=True, help='Also write the per-location JSON-lines trace')
@click.option('--out-dir', type=click.Path(file_okay=False), default=None)
@click.pass_obj
@handle_errors
def prepare(config, image, scheme, max_n, force, strategy, engine, write_trace, out_dir):
    """Synthesize a preparation circuit for IMAGE and write its report"""
    out_dir = out_dir or config.OUT_DIR
    max_n = config.BEC_MAX_N if max_n is None else max_n
    strategy = strategy or config.BEC_STRATEGY
    engine = engine or config.PIPELINE_ENGINE
    bundle = ReportBundle('prepare', {'scheme': scheme, 'max_n': max_n, 'force': force,
                                      'strategy': strategy, 'engine': engine})
    stem = _stem(image)

    with capture_warnings(bundle):
        bundle.add_input(image)
        img = load_pgm(image)
        bundle.results['image'] = img.to_dict()
        os.makedirs(out_dir, exist_ok=True)
        started = time.perf_counter()

        if scheme == 'plain':
            circuit = prepare_uncompressed(img)
            _write_text(os.path.join(out_dir, f"{stem}.plain.circuit"), circuit.to_text())
            bundle.tallies['plain'] = circuit.tally().to_dict()

        elif scheme == 'bec':
            if img.n > max_n and not force:
                raise ValueError(f"BEC refuses n={img.n} > {max_n}; pass --force to run anyway")
            plain = prepare_uncompressed(img)
            compressed, stats = bec_compress(plain, strategy)
            costs = bec_cost(stats, compressed)
            _write_text(os.path.join(out_dir, f"{stem}.bec.circuit"), compressed.to_text())
            bundle.tallies['plain'] = plain.tally().to_dict()
            bundle.tallies['bec'] = compressed.tally().to_dict()
            bundle.results['bec'] = stats.to_dict()
            bundle.results['bec_cost'] = costs._asdict()

        else:
            _, tally, trace = run_pipeline(img, engine=engine)
            for name, circuit in trace.circuits.items():
                _write_text(os.path.join(out_dir, f"{stem}.{name}.circuit"), circuit.to_text())
            write_pgm(trace.display, os.path.join(out_dir, f"{stem}.recovered.pgm"))
            if write_trace:
                export_trace_jsonl(trace, os.path.join(out_dir, f"{stem}.trace.jsonl"))
            bundle.tallies['qjpeg'] = tally.to_dict()
            bundle.results['pipeline'] = trace.summary()
            bundle.psnr[stem] = trace.psnr

        bundle.timing['seconds'] = round(time.perf_counter() - started, 3)

    report_path = os.path.join(out_dir, f"{stem}.{scheme}.report.json")
    bundle.write(report_path)
    click.echo(f"✅ {scheme} preparation for {image} written to {out_dir}")
    for name, tally in bundle.tallies.items():
        click.echo(f"   {name}: {tally['mcx']} MCX, cost {tally['cost']:.1f}")
    for warning in bundle.warnings:
        click.echo(f"⚠️  {warning}")


@cli.command()
@click.option('--n', 'n_text', default='10', help='Image exponent, or a range like 7..14 for --surface')
@click.option('--q', 'q_text', default='8', help='Color depth, or a range like 4..40')
@click.option('--rj', type=float, default=None, help='JPEG ratio r_J (defaults to the configured value)')
@click.option('--curve', type=click.Choice(['m']), default=None, help='Emit the threshold curve as CSV')
@click.option('--surface', type=click.Choice(['r']), default=None, help='Emit the ratio surface as CSV')
@click.option('--stages', is_flag=True, help='Include tally-based stage costs next to the analytic ones')
@click.option('--out-dir', type=click.Path(file_okay=False), default=None)
@click.pass_obj
@handle_errors
def cost(config, n_text, q_text, rj, curve, surface, stages, out_dir):
    """Analytic complexity, thresholds and compression ratios"""
    rj = config.DEFAULT_RJ if rj is None else rj
    n_values = parse_range(n_text)
    q_values = parse_range(q_text)
    bundle = ReportBundle('cost', {'n': n_values, 'q': q_values, 'rj': rj})

    with capture_warnings(bundle):
        if curve or surface:
            rows = threshold_curve(q_values, rj) if curve else ratio_surface(n_values, q_values, rj)
            text = rows_to_csv(rows)
            if out_dir:
                os.makedirs(out_dir, exist_ok=True)
                _write_text(os.path.join(out_dir, 'threshold_m.csv' if curve else 'ratio_r.csv'), text)
            click.echo(text, nl=False)
            return

        for n in n_values:
            for q in q_values:
                bundle.cost_reports.append(analytic_costs(n, q, rj).to_dict())
        if stages:
            bundle.results['stages'] = {str(q): stage_tally_costs(q) for q in q_values}

    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        bundle.write(os.path.join(out_dir, 'cost.report.json'))
    click.echo(json.dumps(bundle.to_dict(), indent=2, default=_json_default))


def _rounded(value, digits):
    return None if value is None else round(value, digits)


def _corpus_row(path, run_bec, max_n, force, strategy, engine):
    """Analyze one corpus image; returns (row, warnings)"""
    img = load_pgm(path)
    warnings = []
    if img.padded:
        warnings.append(f"{path}: zero-padded from {img.original_shape[0]}x{img.original_shape[1]}")
    comparison = compare_schemes(img, run_bec=run_bec, bec_max_n=max_n, force=force,
                                 bec_strategy=strategy, engine=engine)
    row = {
        'image': os.path.basename(path),
        'n': img.n,
        'q': img.q,
        'r_j': comparison.r_j,
        'plain_mcx': comparison.plain_mcx,
        'jpeg_step2_mcx': comparison.jpeg_step2_mcx,
        'jpeg_ratio': comparison.jpeg_ratio,
        'jpeg_full_ratio': comparison.jpeg_full_ratio,
        'bec_mcx': comparison.bec_mcx,
        'bec_ratio': comparison.bec_ratio,
        'psnr': comparison.psnr,
        'jpeg_seconds': _rounded(comparison.jpeg_seconds, 6),
        'pipeline_seconds': _rounded(comparison.pipeline_seconds, 3),
        'bec_seconds': _rounded(comparison.bec_seconds, 3),
        'bec_strategy': comparison.bec_strategy,
        'bec_comparisons': comparison.bec_comparisons,
        'bec_comparison_kind': comparison.bec_comparison_kind
    }
    warnings.extend(f"{path}: {w}" for w in comparison.warnings)
    return row, warnings


@cli.command()
@click.argument('directory', type=click.Path(file_okay=False))
@click.option('--bec', 'run_bec', is_flag=True, help='Also run BEC (slow; capped by --max-n)')
@click.option('--max-n', type=int, default=None)
@click.option('--force', is_flag=True)
@click.option('--strategy', type=click.Choice(['indexed', 'scan']), default='scan',
              help='BEC strategy; scan times and counts the pairwise loop')
@click.option('--engine', type=click.Choice(['vectorized', 'circuit']), default=None)
@click.option('--out-dir', type=click.Path(file_okay=False), default=None)
@click.pass_obj
@handle_errors
def corpus(config, directory, run_bec, max_n, force, strategy, engine, out_dir):
    """Per-image r_J and compression ratios plus aggregate statistics for DIRECTORY"""
    out_dir = out_dir or config.OUT_DIR
    max_n = config.BEC_MAX_N if max_n is None else max_n
    engine = engine or config.PIPELINE_ENGINE
    paths = sorted(os.path.join(directory, name) for name in os.listdir(directory)
                   if name.lower().endswith('.pgm'))
    if not paths:
        raise ValueError(f"no PGM files in {directory}")
    bundle = ReportBundle('corpus', {'directory': directory, 'bec': run_bec, 'max_n': max_n,
                                     'force': force, 'strategy': strategy, 'engine': engine})

    for path in paths:
        bundle.add_input(path)
    started = time.perf_counter()
    # Warnings come back with each row so inline and pooled runs report the same set
    args = (run_bec, max_n, force, strategy, engine)
    threads = max(1, min(config.THREADS, len(paths)))
    if threads == 1:
        results = [_corpus_row(path, *args) for path in paths]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(_corpus_row, path, *args) for path in paths]
            results = [future.result() for future in futures]
    rows = []
    for row, warnings in results:
        rows.append(row)
        for warning in warnings:
            bundle.add_warning(warning)
        bundle.psnr[row['image']] = row['psnr']
    stats = corpus_statistics([row['r_j'] for row in rows])
    bundle.results['rows'] = rows
    bundle.results['statistics'] = stats
    bundle.timing['seconds'] = round(time.perf_counter() - started, 3)

    os.makedirs(out_dir, exist_ok=True)
    _write_text(os.path.join(out_dir, 'corpus.csv'), rows_to_csv(rows))
    _write_text(os.path.join(out_dir, 'corpus_stats.csv'), rows_to_csv([stats]))
    bundle.write(os.path.join(out_dir, 'corpus.report.json'))
    click.echo(rows_to_csv(rows), nl=False)
    click.echo(f"📊 r_J over {stats['count']} images: min {stats['min']}, max {stats['max']}, "
               f"mean {stats['mean']}, variance {stats['variance']}")


def _random_block_image(rng):
    return from_array(rng.integers(0, 256, size=(8, 8)), 8)


@cli.command()
@click.option('--seed', type=int, default=0)
@click.option('--blocks', type=int, default=20, help='Random 8x8 blocks for the engine comparison')
@click.option('--images', type=int, default=20, help='Random images for the BEC equivalence check')
@click.pass_obj
@handle_errors
def verify(config, seed, blocks, images):
    """Randomized self-check: BEC equivalence and circuit-vs-vectorized pipeline"""
    rng = np.random.default_rng(seed)
    failures = []

    for index in range(images):
        side = 2 if index % 2 == 0 else 4
        img = from_array(rng.integers(0, 256, size=(side, side)), 8)
        plain = prepare_uncompressed(img)
        compressed, _ = bec_compress(plain)
        if evaluate(compressed, img.n, img.q) != evaluate(plain, img.n, img.q):
            failures.append(f"BEC changed the state of random image {index}")

    for index in range(blocks):
        img = _random_block_image(rng)
        fast, _, fast_trace = run_pipeline(img, engine='vectorized')
        slow, _, slow_trace = run_pipeline(img, engine='circuit')
        if fast != slow or not np.array_equal(fast_trace.acc, slow_trace.acc):
            failures.append(f"engines disagree on random block {index}")

    for failure in failures:
        click.echo(f"❌ {failure}", err=True)
    if failures:
        sys.exit(EXIT_VERIFY_FAILED)
    click.echo(f"✅ {images} BEC checks and {blocks} pipeline checks passed (seed {seed})")


@cli.command('make-corpus')
@click.option('--out-dir', type=click.Path(file_okay=False), default=None)
@click.option('--size', type=int, default=64, help='Side length of each generated image')
@click.option('--seed', type=int, default=2024)
@click.pass_obj
@handle_errors
def make_corpus(config, out_dir, size, seed):
    """Write the bundled synthetic mini-corpus"""
    out_dir = out_dir or config.CORPUS_DIR
    paths = write_corpus(out_dir, size=size, seed=seed)
    click.echo(f"✅ Wrote {len(paths)} images to {out_dir}")


if __name__ == '__main__':
    cli()

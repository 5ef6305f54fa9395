"""
Cost Model
Analytic gate complexity, compression ratios, thresholds and scheme comparison
"""

import csv
import io
import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from bec import bec_compress
from gqir import prepare_uncompressed
from jpeg_codec import CoefficientOverflowError, default_quant_matrix, encode_image
from pixmap import count_one_bits
from qjpeg import (CoeffRegisterImage, PipelineError, QMatrixRegister, build_cos_table, run_pipeline,
                   step2_gate_count, synth_step3, synth_step4, synth_step5, synth_step5_table)

logger = logging.getLogger(__name__)

DEFAULT_RJ = 0.1
STEP3_COST = 208


class CostDomainError(ValueError):
    """Raised for parameters outside the cost formulas' domain"""


def _check_domain(n, q, r_j):
    if n < 1:
        raise CostDomainError(f"n must be >= 1, got {n}")
    if q < 2:
        raise CostDomainError(f"q must be >= 2 (log2(q-1) is undefined below), got {q}")
    if not 0 < r_j <= 1:
        raise CostDomainError(f"r_J must lie in (0, 1], got {r_j}")


def plain_cost(n, q):
    """Expected MCX count of the uncompressed preparation: q/2 * 2^(2n)"""
    return q / 2 * 2.0 ** (2 * n)


def aux_a(q):
    log_q = math.log2(q - 1)
    return (4 * q - 12 + 2 * log_q) * log_q


def aux_b(q):
    log_q = math.log2(q + 3)
    return 64 * (4 * q + 4 + 2 * log_q) * log_q


def step4_cost(q):
    return q * q + 2 * q + 9 + aux_a(q)


def step5_cost(q):
    return 64 * q * q + 2720 * q + 7232 + aux_b(q)


def total_closed_form(n, q, r_j):
    """Compressed cost written as one expression"""
    return r_j * plain_cost(n, q) + 65 * q * q + 2722 * q + 7449 + aux_a(q) + aux_b(q)


def threshold_m(q, r_j=DEFAULT_RJ):
    """Compression pays off for n > m"""
    if q < 2:
        raise CostDomainError(f"q must be >= 2, got {q}")
    constant = 65 * q * q + 2722 * q + 7449 + aux_a(q) + aux_b(q)
    return 0.5 * math.log2(constant / ((1 - r_j) * q / 2))


def min_n(q, r_j=DEFAULT_RJ):
    """Smallest integer n strictly above the threshold"""
    return math.floor(threshold_m(q, r_j)) + 1


def min_n_by_search(q, r_j=DEFAULT_RJ, limit=64):
    """Smallest n whose compressed cost is below the plain cost, by direct evaluation"""
    for n in range(1, limit + 1):
        if analytic_costs(n, q, r_j).total < plain_cost(n, q):
            return n
    raise CostDomainError(f"no n <= {limit} compresses at q={q}, r_J={r_j}")


@dataclass
class CostReport:
    n: int
    q: int
    r_j: float
    c: float
    c2: float
    c3: float
    c4: float
    c5: float
    total: float
    a: float
    b: float
    m: float
    r: float

    def to_dict(self):
        """Convert to dictionary with rounded display copies"""
        data = asdict(self)
        data['display'] = {key: round(value, 4) for key, value in data.items()
                           if isinstance(value, float)}
        return data


def analytic_costs(n, q, r_j=DEFAULT_RJ):
    _check_domain(n, q, r_j)
    c = plain_cost(n, q)
    c2 = r_j * c
    c4 = step4_cost(q)
    c5 = step5_cost(q)
    total = c2 + STEP3_COST + c4 + c5
    return CostReport(n=n, q=q, r_j=r_j, c=c, c2=c2, c3=float(STEP3_COST), c4=c4, c5=c5,
                      total=total, a=aux_a(q), b=aux_b(q), m=threshold_m(q, r_j),
                      r=1 - total / c)


def ratio_r(n, q, r_j=DEFAULT_RJ):
    return analytic_costs(n, q, r_j).r


def measured_counts(img, qm=None):
    """(Step-2 MCX count, plain MCX count) for one image"""
    qm = qm or default_quant_matrix()
    coeffs = CoeffRegisterImage.from_quant_blocks(encode_image(img, qm), img.n, img.q)
    return step2_gate_count(coeffs), count_one_bits(img)


def measured_r_J(img, qm=None):
    """Exact r_J from real counts; None when the image has no set bits"""
    numerator, denominator = measured_counts(img, qm)
    if denominator == 0:
        return None
    return numerator / denominator


def stage_tally_costs(q, n=3):
    """Synthesized-circuit costs of Steps 3-5 next to their analytic values"""
    qreg = QMatrixRegister(default_quant_matrix(), q)
    table = build_cos_table(q)
    step5 = synth_step5_table(table).tally() + synth_step5(n, q).tally()
    return [
        {'stage': 'step3', 'analytic': float(STEP3_COST), 'tally': synth_step3(qreg).tally().cost},
        {'stage': 'step4', 'analytic': step4_cost(q), 'tally': synth_step4(n, q).tally().cost},
        {'stage': 'step5', 'analytic': step5_cost(q), 'tally': step5.cost}
    ]


def threshold_curve(q_values, r_j=DEFAULT_RJ):
    """Rows (q, m, min_n, min_n_search)"""
    return [{'q': q, 'm': threshold_m(q, r_j), 'min_n': min_n(q, r_j),
             'min_n_search': min_n_by_search(q, r_j)} for q in q_values]


def ratio_surface(n_values, q_values, r_j=DEFAULT_RJ):
    """Rows (n, q, r)"""
    return [{'n': n, 'q': q, 'r': ratio_r(n, q, r_j)} for n in n_values for q in q_values]


def corpus_statistics(values):
    """min, max, mean and population variance of the defined r_J values"""
    defined = np.array([v for v in values if v is not None], dtype=np.float64)
    if not defined.size:
        return {'count': 0, 'undefined': len(values), 'min': None, 'max': None,
                'mean': None, 'variance': None}
    return {
        'count': int(defined.size),
        'undefined': len(values) - int(defined.size),
        'min': float(defined.min()),
        'max': float(defined.max()),
        'mean': float(defined.mean()),
        'variance': float(defined.var())
    }


def rows_to_csv(rows):
    if not rows:
        return ''
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(rows[0].keys()), lineterminator='\n')
    writer.writeheader()
    writer.writerows(rows)
    return buffer.getvalue()


@dataclass
class SchemeComparison:
    """Plain GQIR versus BEC versus quantum JPEG for one image; JPEG fields stay None when the pipeline refuses it"""
    n: int
    q: int
    plain_mcx: int
    jpeg_step2_mcx: int = None
    jpeg_ratio: float = None
    jpeg_cost: float = None
    jpeg_full_ratio: float = None
    jpeg_seconds: float = None
    pipeline_seconds: float = None
    psnr: float = None
    r_j: float = None
    clamped: int = None
    bec_mcx: int = None
    bec_ratio: float = None
    bec_seconds: float = None
    bec_comparisons: int = None
    bec_strategy: str = None
    bec_comparison_kind: str = None
    warnings: list = field(default_factory=list)

    def to_dict(self):
        """Convert to dictionary"""
        return asdict(self)


def _ratio(after, before):
    return None if before == 0 else 1 - after / before


def compare_schemes(img, qm=None, run_bec=False, bec_max_n=8, force=False,
                    bec_strategy='scan', engine='vectorized'):
    """Side-by-side gate counts and preprocessing times; BEC only runs on request and below the size cap

    jpeg_seconds covers the classical DCT and quantization only. The BEC time and
    comparison count come from the chosen strategy, pairwise under scan.
    """
    warnings = []
    plain_mcx = count_one_bits(img)
    comparison = SchemeComparison(n=img.n, q=img.q, plain_mcx=plain_mcx, warnings=warnings)
    qm = qm or default_quant_matrix()

    try:
        started = time.perf_counter()
        blocks = encode_image(img, qm)
        comparison.jpeg_seconds = time.perf_counter() - started
        step2_mcx = step2_gate_count(CoeffRegisterImage.from_quant_blocks(blocks, img.n, img.q))
        comparison.jpeg_step2_mcx = step2_mcx
        comparison.jpeg_ratio = _ratio(step2_mcx, plain_mcx)
        comparison.r_j = step2_mcx / plain_mcx if plain_mcx else None

        started = time.perf_counter()
        _, tally, trace = run_pipeline(img, qm, engine)
        comparison.pipeline_seconds = time.perf_counter() - started
    except (PipelineError, CoefficientOverflowError) as e:
        warnings.append(f"quantum JPEG skipped: {e}")
        logger.warning(warnings[-1])
    else:
        comparison.jpeg_cost = tally.cost
        comparison.jpeg_full_ratio = _ratio(tally.cost, plain_mcx)
        comparison.psnr = trace.psnr
        comparison.clamped = trace.clamped
        if trace.clamped:
            warnings.append(f"{trace.clamped} recovered pixels wrapped around and were clamped for display")
        if trace.truncated:
            warnings.append(f"{trace.truncated} F' operands exceeded {img.q + 3} bits and were truncated")

    if run_bec:
        if img.n > bec_max_n and not force:
            warnings.append(f"BEC skipped: n={img.n} exceeds the cap {bec_max_n} (use force)")
            logger.warning(warnings[-1])
        else:
            _, stats = bec_compress(prepare_uncompressed(img), bec_strategy)
            comparison.bec_mcx = stats.gates_after
            comparison.bec_ratio = _ratio(stats.gates_after, plain_mcx)
            comparison.bec_seconds = stats.seconds
            comparison.bec_comparisons = stats.comparisons
            comparison.bec_strategy = stats.strategy
            comparison.bec_comparison_kind = stats.comparison_kind
    return comparison

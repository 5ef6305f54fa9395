"""
Boolean Expression Compression
Multi-round pairwise merging of location-controlled NOT gates, one color bit at a time
"""

import bisect
import logging
import time
from collections import defaultdict
from dataclasses import dataclass
from typing import NamedTuple

from gqir import (COLOR, LOCATION, MCX, Circuit, Control, Hadamard, IdentityNote,
                  PreparationFormError, Qubit, post_hadamard_gates)
from pixmap import popcount

logger = logging.getLogger(__name__)

STRATEGIES = ('scan', 'indexed')
COMPARISON_KINDS = {'scan': 'pairwise', 'indexed': 'hash probes'}


@dataclass(frozen=True, order=True)
class Implicant:
    """Product term on one color bit: `mask` marks fixed location bits, `value` their values"""
    target: int
    mask: int
    value: int
    width: int

    def __post_init__(self):
        full = (1 << self.width) - 1
        if self.mask & ~full or self.value & ~self.mask:
            raise ValueError(f"value {self.value:b} sets bits outside mask {self.mask:b}")

    @property
    def dont_cares(self):
        return self.width - popcount(self.mask)

    def pattern(self):
        """Most significant location bit first; '-' marks a don't-care"""
        chars = []
        for k in reversed(range(self.width)):
            if not (self.mask >> k) & 1:
                chars.append('-')
            else:
                chars.append(str((self.value >> k) & 1))
        return ''.join(chars)

    def controls(self, location=LOCATION):
        return tuple(Control(Qubit(location, k), (self.value >> k) & 1)
                     for k in range(self.width) if (self.mask >> k) & 1)


def mergeable(a, b):
    """Same target, same fixed bits, opposite values on exactly one of them"""
    return a.target == b.target and a.mask == b.mask and popcount(a.value ^ b.value) == 1


def merge(a, b):
    diff = a.value ^ b.value
    return Implicant(a.target, a.mask & ~diff, a.value & ~diff, a.width)


def expand_implicant(implicant):
    """Every location minterm covered by the implicant"""
    free = ((1 << implicant.width) - 1) & ~implicant.mask
    minterms = set()
    sub = free
    while True:
        minterms.add(implicant.value | sub)
        if sub == 0:
            break
        sub = (sub - 1) & free
    return minterms


@dataclass
class BecStats:
    rounds: int = 0
    comparisons: int = 0
    gates_before: int = 0
    gates_after: int = 0
    location_width: int = 0
    color_width: int = 0
    strategy: str = 'indexed'
    seconds: float = 0.0

    @property
    def comparison_bound(self):
        """2n * q * 2^(4n) with 2n location qubits"""
        return self.location_width * self.color_width * (1 << (2 * self.location_width))

    @property
    def comparison_kind(self):
        """scan counts pairwise merge tests; indexed counts hash lookups"""
        return COMPARISON_KINDS[self.strategy]

    def to_dict(self):
        """Convert to dictionary"""
        return {
            'rounds': self.rounds,
            'comparisons': self.comparisons,
            'comparison_bound': self.comparison_bound,
            'comparison_kind': self.comparison_kind,
            'gates_before': self.gates_before,
            'gates_after': self.gates_after,
            'strategy': self.strategy,
            'seconds': round(self.seconds, 3)
        }


class BecCost(NamedTuple):
    comparisons: int
    comparison_bound: int
    c_i: int
    comparison_kind: str = 'pairwise'


def implicants_from_circuit(circuit, location=LOCATION, color=COLOR):
    """Read the MCX layer of a preparation circuit as implicants, in gate order"""
    width = circuit.widths.get(location)
    if color not in circuit.widths:
        raise PreparationFormError(f"circuit has no {color} register")
    implicants = []
    for gate in post_hadamard_gates(circuit, location):
        if isinstance(gate, IdentityNote):
            continue
        if not isinstance(gate, MCX) or gate.target.register != color:
            raise PreparationFormError(f"not a color-targeted NOT: {gate.to_text()}")
        mask = 0
        value = 0
        for control in gate.controls:
            if control.qubit.register != location:
                raise PreparationFormError(f"control outside the location register: {gate.to_text()}")
            mask |= 1 << control.qubit.index
            value |= control.polarity << control.qubit.index
        implicants.append(Implicant(gate.target.index, mask, value, width))
    return implicants


def _scan_round(pool):
    """One pass of the looking-over loop; returns (pool, merges, comparisons)"""
    consumed = [False] * len(pool)
    result = []
    merges = 0
    comparisons = 0
    for i, a in enumerate(pool):
        if consumed[i]:
            continue
        for j in range(i + 1, len(pool)):
            if consumed[j]:
                continue
            comparisons += 1
            if mergeable(a, pool[j]):
                consumed[j] = True
                result.append(merge(a, pool[j]))
                merges += 1
                break
        else:
            result.append(a)
    return result, merges, comparisons


def _indexed_round(pool):
    """Same outcome as _scan_round, finding partners by hash lookup"""
    positions = defaultdict(list)
    for index, implicant in enumerate(pool):
        positions[(implicant.mask, implicant.value)].append(index)
    consumed = [False] * len(pool)
    result = []
    merges = 0
    probes = 0
    for i, a in enumerate(pool):
        if consumed[i]:
            continue
        partner = None
        bits = a.mask
        while bits:
            low = bits & -bits
            bits ^= low
            probes += 1
            candidates = positions.get((a.mask, a.value ^ low))
            if not candidates:
                continue
            # First unconsumed position after i for this neighbour
            k = bisect.bisect_right(candidates, i)
            while k < len(candidates) and consumed[candidates[k]]:
                k += 1
            if k < len(candidates) and (partner is None or candidates[k] < partner):
                partner = candidates[k]
        if partner is None:
            result.append(a)
            continue
        consumed[partner] = True
        result.append(merge(a, pool[partner]))
        merges += 1
    return result, merges, probes


def minimize(implicants, width, strategy='indexed'):
    """Run up to `width` rounds on one target's pool; stop early at a fixed point"""
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}, expected one of {STRATEGIES}")
    step = _scan_round if strategy == 'scan' else _indexed_round
    pool = list(implicants)
    rounds = 0
    comparisons = 0
    for _ in range(width):
        pool, merges, count = step(pool)
        rounds += 1
        comparisons += count
        if not merges:
            break
    return pool, rounds, comparisons


def bec_compress(circuit, strategy='indexed', location=LOCATION, color=COLOR):
    """Compress a preparation circuit; returns (compressed circuit, BecStats)"""
    started = time.perf_counter()
    implicants = implicants_from_circuit(circuit, location, color)
    widths = circuit.widths
    width = widths[location]
    stats = BecStats(gates_before=len(implicants), location_width=width,
                     color_width=widths[color], strategy=strategy)

    by_target = defaultdict(list)
    for implicant in implicants:
        by_target[implicant.target].append(implicant)

    gates = [Hadamard(Qubit(location, k)) for k in range(width)]
    for target in sorted(by_target):
        pool, rounds, comparisons = minimize(by_target[target], width, strategy)
        stats.rounds = max(stats.rounds, rounds)
        stats.comparisons += comparisons
        gates.extend(MCX(imp.controls(location), Qubit(color, target)) for imp in pool)
        stats.gates_after += len(pool)

    stats.seconds = time.perf_counter() - started
    label = f"{circuit.label} bec" if circuit.label else 'bec'
    compressed = Circuit(circuit.registers, gates, label)
    logger.info(f"BEC ({strategy}): {stats.gates_before} -> {stats.gates_after} MCX "
                f"in {stats.rounds} rounds, {stats.comparisons} {stats.comparison_kind}")
    return compressed, stats


def bec_cost(stats, compressed):
    """C_p as measured comparisons next to its analytic bound; C_i as the compressed MCX count"""
    return BecCost(stats.comparisons, stats.comparison_bound, compressed.tally().mcx,
                   stats.comparison_kind)

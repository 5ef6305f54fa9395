"""
Quantum JPEG Pipeline
Circuit synthesis and exact fixed-point simulation from quantized coefficients to recovered pixels
"""

import json
import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from fixedq import SignMagFixed, encode_fixed
from gqir import (LOCATION, MCX, AdderGate, Circuit, Control, GateTally, MulerGate, Qubit,
                  RegSlice, apply_gate, evaluate, location_controls, synthesize_preparation)
from jpeg_codec import (DCT_BASIS, CoefficientOverflowError, decode_image,
                        default_quant_matrix, encode_image, psnr)
from pixmap import BLOCK_SIZE, PixelImage, popcount, popcount_array

logger = logging.getLogger(__name__)

MIN_PIPELINE_Q = 6
MAX_PIPELINE_Q = 16
PIPELINE_ENGINES = ('vectorized', 'circuit')

# Register names shared by the stage circuits
COEF = 'f'
QLOC = 'yqxq'
QVAL = 'qv'
FLAG = 'g'
FPRIME = 'fp'
TLOC = 'ij'
CTAB = 'ctab'
ACC = 'acc'

SLOTS = BLOCK_SIZE * BLOCK_SIZE


class PipelineError(ValueError):
    """Raised when an image or parameter set cannot run through the quantum pipeline"""


def _product_register(u, v):
    return f"p{u}{v}"


def _sign_register(u, v):
    return f"s{u}{v}"


def _check_q(q):
    if not MIN_PIPELINE_Q <= q <= MAX_PIPELINE_Q:
        raise PipelineError(f"pipeline supports {MIN_PIPELINE_Q} <= q <= {MAX_PIPELINE_Q}, got q={q}")


def _to_grid(blocked):
    """(rows, cols, 8, 8, ...) block layout -> (side, side, ...) image layout"""
    rows, cols = blocked.shape[:2]
    rest = blocked.shape[4:]
    return blocked.swapaxes(1, 2).reshape((rows * BLOCK_SIZE, cols * BLOCK_SIZE) + rest)


def _to_blocks(grid):
    side = grid.shape[0]
    count = side // BLOCK_SIZE
    return grid.reshape((count, BLOCK_SIZE, count, BLOCK_SIZE) + grid.shape[2:]).swapaxes(1, 2)


@dataclass(frozen=True, eq=False)
class CoeffRegisterImage:
    """Signed F_Q placed at location Y=8i+u, X=8j+v; sign bit q-1 above q-1 magnitude bits"""
    n: int
    q: int
    values: np.ndarray

    def __post_init__(self):
        side = 1 << self.n
        values = np.array(self.values, dtype=np.int64)
        if values.shape != (side, side):
            raise PipelineError(f"expected {side}x{side} coefficients, got {values.shape}")
        limit = (1 << (self.q - 1)) - 1
        if values.size and np.abs(values).max() > limit:
            raise CoefficientOverflowError(f"a coefficient magnitude exceeds {self.q - 1} bits")
        values.flags.writeable = False
        object.__setattr__(self, 'values', values)

    @property
    def magnitudes(self):
        return np.abs(self.values)

    @property
    def signs(self):
        return (self.values < 0).astype(np.int64)

    def register_values(self):
        """Row-major YX list of color register values"""
        return (self.magnitudes | (self.signs << (self.q - 1))).ravel().tolist()

    @classmethod
    def from_quant_blocks(cls, blocks, n, q):
        count = (1 << n) // BLOCK_SIZE
        if len(blocks) != count * count:
            raise PipelineError(f"expected {count * count} blocks, got {len(blocks)}")
        blocked = np.array([b.coeffs for b in blocks], dtype=np.int64).reshape(count, count, BLOCK_SIZE, BLOCK_SIZE)
        return cls(n, q, _to_grid(blocked))

    @classmethod
    def from_state(cls, state):
        """Decode an evaluated Step-2 state"""
        side = 1 << state.h
        raw = np.array(state.colors, dtype=np.int64).reshape(side, side)
        magnitude = raw & ((1 << (state.q - 1)) - 1)
        sign = (raw >> (state.q - 1)) & 1
        return cls(state.h, state.q, np.where(sign == 1, -magnitude, magnitude))


@dataclass(frozen=True, eq=False)
class QMatrixRegister:
    """Quantization matrix stored as (q-1)-bit colors over 6 location qubits YQ XQ"""
    qm: object
    q: int

    def __post_init__(self):
        if self.qm.values.max() >> (self.q - 1):
            raise PipelineError(f"quantization entries need more than {self.q - 1} bits at q={self.q}")

    @property
    def width(self):
        return self.q - 1

    def entry(self, u, v):
        return int(self.qm.values[u, v])

    def colors(self):
        """Entry (u, v) sits at location (u << 3) | v"""
        return [self.entry(u, v) for u in range(BLOCK_SIZE) for v in range(BLOCK_SIZE)]


@dataclass(frozen=True, eq=False)
class CosTable:
    """Sign-magnitude C_ij(u,v) with q+3 fractional bits, indexed [u, v, i, j]"""
    q: int
    magnitudes: np.ndarray
    signs: np.ndarray

    @property
    def frac_width(self):
        return self.q + 3

    @property
    def slot_width(self):
        """q+3 magnitude bits plus one sign bit"""
        return self.q + 4

    @property
    def register_width(self):
        return SLOTS * self.slot_width

    def entry(self, u, v, i, j):
        return SignMagFixed(int(self.signs[u, v, i, j]), int(self.magnitudes[u, v, i, j]), 0, self.frac_width)

    def slot_offset(self, u, v):
        return ((u << 3) | v) * self.slot_width

    def register_value(self, i, j):
        """Color register of table location (i, j): 64 slots, slot (u,v) at offset ((u<<3)|v)(q+4)"""
        value = 0
        for u in range(BLOCK_SIZE):
            for v in range(BLOCK_SIZE):
                value |= self.entry(u, v, i, j).to_bits() << self.slot_offset(u, v)
        return value


@lru_cache(maxsize=None)
def build_cos_table(q):
    """Encode C_ij(u,v) = c(u)c(v)cos[(i+0.5)pi u/8]cos[(j+0.5)pi v/8]"""
    magnitudes = np.zeros((BLOCK_SIZE,) * 4, dtype=np.int64)
    signs = np.zeros((BLOCK_SIZE,) * 4, dtype=np.int64)
    for u in range(BLOCK_SIZE):
        for v in range(BLOCK_SIZE):
            for i in range(BLOCK_SIZE):
                for j in range(BLOCK_SIZE):
                    encoded = encode_fixed(DCT_BASIS[u, i] * DCT_BASIS[v, j], 0, q + 3)
                    magnitudes[u, v, i, j] = encoded.magnitude
                    signs[u, v, i, j] = encoded.sign
    magnitudes.flags.writeable = False
    signs.flags.writeable = False
    return CosTable(q, magnitudes, signs)


def cos_table_popcount(table):
    """Set bits across every encoded entry, sign bits included"""
    return int(popcount_array(table.magnitudes).sum() + table.signs.sum())


def synth_step2(coeffs):
    """Prepare the coefficient image as a GQIR state"""
    circuit = synthesize_preparation(coeffs.register_values(), coeffs.n, coeffs.n, coeffs.q,
                                     color=COEF, label=f"step2 n={coeffs.n} q={coeffs.q}")
    logger.info(f"Step 2: {circuit.tally().mcx} MCX for the coefficient image")
    return circuit


def synth_step3(qreg=None, q=8):
    """Prepare the quantization matrix over 6 location qubits"""
    if qreg is None:
        qreg = QMatrixRegister(default_quant_matrix(), q)
    return synthesize_preparation(qreg.colors(), 3, 3, qreg.width, location=QLOC, color=QVAL,
                                  label=f"step3 q={qreg.q}")


def synth_step5_table(table):
    """Prepare the cosine table: one 6-controlled NOT per set bit of the 4096 entries"""
    colors = [table.register_value(i, j) for i in range(BLOCK_SIZE) for j in range(BLOCK_SIZE)]
    return synthesize_preparation(colors, 3, 3, table.register_width, location=TLOC, color=CTAB,
                                  label=f"step5.1 q={table.q}")


def _offset_controls(n, u, v):
    """Location controls matching block offset (u, v): X low bits are v, Y low bits are u"""
    controls = [Control(Qubit(LOCATION, k), (v >> k) & 1) for k in range(3)]
    controls.extend(Control(Qubit(LOCATION, n + k), (u >> k) & 1) for k in range(3))
    return tuple(controls)


def synth_step4(n, q):
    """Alignment CNOTs, the 6-CNOT flag, one flag-controlled MULER and the sign transfer"""
    fp_sign = 2 * q - 3
    registers = ((LOCATION, 2 * n), (COEF, q), (QLOC, 6), (QVAL, q - 1), (FLAG, 1), (FPRIME, 2 * q - 2))
    gates = []
    # 1. YQXQ ^= (Y low bits, X low bits)
    for k in range(3):
        gates.append(MCX((Control(Qubit(LOCATION, k), 1),), Qubit(QLOC, k)))
        gates.append(MCX((Control(Qubit(LOCATION, n + k), 1),), Qubit(QLOC, 3 + k)))
    # 2. g = 1 iff every alignment qubit is zero
    gates.append(MCX(location_controls(0, 6, QLOC), Qubit(FLAG, 0)))
    # 3. |F'| = |F_Q| x Q(u,v)
    gates.append(MulerGate(q - 1, RegSlice(COEF, 0, q - 1), RegSlice(QVAL, 0, q - 1),
                           RegSlice(FPRIME, 0, 2 * q - 2), (Control(Qubit(FLAG, 0), 1),)))
    # 4. Copy the coefficient sign
    gates.append(MCX((Control(Qubit(FLAG, 0), 1), Control(Qubit(COEF, q - 1), 1)), Qubit(FPRIME, fp_sign)))
    return Circuit(registers, gates, f"step4 n={n} q={q}")


@lru_cache(maxsize=None)
def synth_step5(n, q):
    """64 location-controlled MULERs, 128 sign 8-CNOTs and 128 sign-selected ADDERs"""
    width = 2 * q + 6
    slot = q + 4
    fp_sign = 2 * q - 3
    registers = [(LOCATION, 2 * n), (FPRIME, 2 * q - 2), (TLOC, 6), (CTAB, SLOTS * slot)]
    for u in range(BLOCK_SIZE):
        for v in range(BLOCK_SIZE):
            registers.append((_product_register(u, v), width))
            registers.append((_sign_register(u, v), 1))
    registers.append((ACC, width))

    mulers, signs, adders = [], [], []
    for u in range(BLOCK_SIZE):
        for v in range(BLOCK_SIZE):
            offset = ((u << 3) | v) * slot
            controls = _offset_controls(n, u, v)
            product = _product_register(u, v)
            sign = Qubit(_sign_register(u, v), 0)
            table_sign = Qubit(CTAB, offset + q + 3)
            mulers.append(MulerGate(q + 3, RegSlice(FPRIME, 0, q + 3), RegSlice(CTAB, offset, q + 3),
                                    RegSlice(product, 0, width), controls))
            signs.append(MCX(controls + (Control(Qubit(FPRIME, fp_sign), 1), Control(table_sign, 0)), sign))
            signs.append(MCX(controls + (Control(Qubit(FPRIME, fp_sign), 0), Control(table_sign, 1)), sign))
            adders.append(AdderGate(width, RegSlice(product, 0, width), RegSlice(ACC, 0, width),
                                    False, (Control(sign, 0),)))
            adders.append(AdderGate(width, RegSlice(product, 0, width), RegSlice(ACC, 0, width),
                                    True, (Control(sign, 1),)))
    return Circuit(registers, mulers + signs + adders, f"step5 n={n} q={q}")


@dataclass
class PipelineTrace:
    """Per-location register values through Steps 2-5, in image layout"""
    n: int
    q: int
    engine: str = 'vectorized'
    fq: np.ndarray = None
    fp: np.ndarray = None
    g: np.ndarray = None
    products: np.ndarray = None
    product_signs: np.ndarray = None
    sums: np.ndarray = None
    acc: np.ndarray = None
    pixels: np.ndarray = None
    display: PixelImage = None
    wrapped: np.ndarray = None
    reference: np.ndarray = None
    truncated: int = 0
    carries: int = 0
    borrows: int = 0
    psnr: float = None
    circuits: dict = field(default_factory=dict)

    @property
    def stage_tallies(self):
        return {name: circuit.tally() for name, circuit in self.circuits.items()}

    @property
    def complete(self):
        return self.acc is not None

    @property
    def clamped(self):
        return 0 if self.wrapped is None else int(self.wrapped.sum())

    def record(self, y, x):
        """One location as a JSON-ready dict"""
        q = self.q
        fp = int(self.fp[y, x])
        record = {
            'y': y,
            'x': x,
            'fq': int(self.fq[y, x]),
            'fp': fp,
            'fp_bits': abs(fp) | (int(fp < 0) << (2 * q - 3)),
            'g': int(self.g[y, x])
        }
        if self.complete:
            record['products'] = [
                int(m) | (int(s) << (2 * q + 6))
                for m, s in zip(self.products[y, x], self.product_signs[y, x])
            ]
            record['acc'] = int(self.acc[y, x])
            record['pixel'] = int(self.pixels[y, x])
            record['wrapped'] = bool(self.wrapped[y, x])
        return record

    def summary(self):
        return {
            'engine': self.engine,
            'n': self.n,
            'q': self.q,
            'truncated_operands': self.truncated,
            'carries': self.carries,
            'borrows': self.borrows,
            'clamped': self.clamped,
            'psnr': self.psnr,
            'stages': {name: tally.to_dict() for name, tally in self.stage_tallies.items()}
        }


def export_trace_jsonl(trace, path):
    """Write one JSON record per location, row-major"""
    side = 1 << trace.n
    with open(path, 'w') as handle:
        for y in range(side):
            for x in range(side):
                handle.write(json.dumps(trace.record(y, x)) + '\n')
    logger.info(f"Wrote {side * side} trace records to {path}")


def _quant_grid(qreg, n):
    side = 1 << n
    return np.tile(qreg.qm.values, (side // BLOCK_SIZE, side // BLOCK_SIZE))


def inverse_quantization(coeffs, qreg, engine='vectorized'):
    """F' = F_Q x Q(u,v) with the sign carried over; returns (trace, Step-4 circuit)"""
    if engine not in PIPELINE_ENGINES:
        raise PipelineError(f"unknown engine {engine!r}")
    n, q = coeffs.n, coeffs.q
    circuit = synth_step4(n, q)
    trace = PipelineTrace(n=n, q=q, engine=engine, fq=np.array(coeffs.values))

    expected = coeffs.values * _quant_grid(qreg, n)
    if np.abs(expected).max(initial=0) >> (2 * q - 3):
        raise PipelineError(f"F' magnitude does not fit {2 * q - 3} bits")

    if engine == 'vectorized':
        trace.fp = expected
        trace.g = np.ones_like(expected)
        return trace, circuit

    side = 1 << n
    registers = coeffs.register_values()
    fp = np.zeros((side, side), dtype=np.int64)
    g = np.zeros((side, side), dtype=np.int64)
    gates = circuit.gates
    magnitude_mask = (1 << (2 * q - 3)) - 1
    for y in range(side):
        for x in range(side):
            u, v = y % BLOCK_SIZE, x % BLOCK_SIZE
            # The (u, v) branch of the YQXQ superposition is the one the flag selects
            regs = {LOCATION: (y << n) | x, COEF: registers[y * side + x],
                    QLOC: (u << 3) | v, QVAL: qreg.entry(u, v), FLAG: 0, FPRIME: 0}
            for gate in gates:
                apply_gate(regs, gate)
            value = regs[FPRIME]
            magnitude = value & magnitude_mask
            fp[y, x] = -magnitude if (value >> (2 * q - 3)) & 1 else magnitude
            g[y, x] = regs[FLAG]
    trace.fp = fp
    trace.g = g
    return trace, circuit


def _accumulate_events(products, product_signs, width):
    """Replay the adder chain in slot order; returns (acc, carries, borrows)"""
    modulus = 1 << width
    acc = np.zeros(products.shape[:-1], dtype=np.int64)
    carries = 0
    borrows = 0
    for slot in range(products.shape[-1]):
        p = products[..., slot]
        negative = product_signs[..., slot] == 1
        carries += int(((~negative) & (acc + p >= modulus)).sum())
        borrows += int((negative & (acc < p)).sum())
        acc = np.where(negative, acc - p, acc + p) % modulus
    return acc, carries, borrows


def _finish(trace, sums, acc):
    q = trace.q
    trace.sums = sums
    trace.acc = acc
    trace.pixels = (acc >> (q + 3)) & ((1 << q) - 1)
    trace.wrapped = (sums < 0) | (sums >= (1 << (2 * q + 3)))
    display = np.clip(sums >> (q + 3), 0, (1 << q) - 1)
    trace.display = PixelImage(n=trace.n, q=q, pixels=display)
    if trace.truncated:
        logger.warning(f"{trace.truncated} F' operands exceeded {q + 3} bits and were truncated")
    if trace.clamped:
        logger.warning(f"{trace.clamped} recovered pixels wrapped around and were clamped for display")


def _inverse_dct_vectorized(trace, table):
    q = trace.q
    operand_mask = (1 << (q + 3)) - 1
    fp_blocks = _to_blocks(trace.fp)
    magnitude = np.abs(fp_blocks)
    trace.truncated = int((magnitude > operand_mask).sum())
    operand = magnitude & operand_mask
    sign = (fp_blocks < 0).astype(np.int64)
    # [rows, cols, u, v] x [u, v, i, j] -> [rows, cols, i, j, slot]
    products = np.einsum('abuv,uvij->abijuv', operand, table.magnitudes)
    product_signs = sign[:, :, None, None, :, :] ^ table.signs.transpose(2, 3, 0, 1)[None, None]
    rows, cols = fp_blocks.shape[:2]
    products = _to_grid(products.reshape(rows, cols, BLOCK_SIZE, BLOCK_SIZE, SLOTS))
    product_signs = _to_grid(product_signs.reshape(rows, cols, BLOCK_SIZE, BLOCK_SIZE, SLOTS))
    trace.products = products
    trace.product_signs = product_signs
    sums = np.where(product_signs == 1, -products, products).sum(axis=-1)
    acc, trace.carries, trace.borrows = _accumulate_events(products, product_signs, 2 * q + 6)
    _finish(trace, sums, acc)


def _gather_plan(circuit, n):
    """Pair each gate with the block offset its location controls select, or None"""
    plan = []
    for gate in circuit.gates:
        offset = None
        controls = [c for c in getattr(gate, 'controls', ()) if c.qubit.register == LOCATION]
        if controls:
            u = v = 0
            for control in controls:
                index = control.qubit.index
                if index < 3:
                    v |= control.polarity << index
                else:
                    u |= control.polarity << (index - n)
            offset = (u, v)
        plan.append((gate, offset))
    return plan


def _inverse_dct_circuit(trace, table, circuit):
    q, n = trace.q, trace.n
    side = 1 << n
    width = 2 * q + 6
    fp_sign = 2 * q - 3
    fp_registers = np.abs(trace.fp) | ((trace.fp < 0).astype(np.int64) << fp_sign)
    plan = _gather_plan(circuit, n)
    table_values = [[table.register_value(i, j) for j in range(BLOCK_SIZE)] for i in range(BLOCK_SIZE)]
    operand_mask = (1 << (q + 3)) - 1

    products = np.zeros((side, side, SLOTS), dtype=np.int64)
    product_signs = np.zeros((side, side, SLOTS), dtype=np.int64)
    sums = np.zeros((side, side), dtype=np.int64)
    acc = np.zeros((side, side), dtype=np.int64)
    trace.truncated = int((np.abs(trace.fp) > operand_mask).sum())
    carries = borrows = 0
    for y in range(side):
        for x in range(side):
            base_y, i = y - y % BLOCK_SIZE, y % BLOCK_SIZE
            base_x, j = x - x % BLOCK_SIZE, x % BLOCK_SIZE
            regs = {TLOC: (i << 3) | j, CTAB: table_values[i][j], ACC: 0}
            for gate, offset in plan:
                if offset is not None:
                    # Gather: the (u, v) coefficient slot of this block drives the gate
                    u, v = offset
                    regs[LOCATION] = ((base_y + u) << n) | (base_x + v)
                    regs[FPRIME] = int(fp_registers[base_y + u, base_x + v])
                event = apply_gate(regs, gate)
                if event == 'carry':
                    carries += 1
                elif event == 'borrow':
                    borrows += 1
            total = 0
            for u in range(BLOCK_SIZE):
                for v in range(BLOCK_SIZE):
                    slot = (u << 3) | v
                    magnitude = regs.get(_product_register(u, v), 0)
                    negative = regs.get(_sign_register(u, v), 0)
                    products[y, x, slot] = magnitude
                    product_signs[y, x, slot] = negative
                    total += -magnitude if negative else magnitude
            sums[y, x] = total
            acc[y, x] = regs[ACC]
    trace.products = products
    trace.product_signs = product_signs
    trace.carries = carries
    trace.borrows = borrows
    _finish(trace, sums, acc)


def inverse_dct(trace, table, engine=None):
    """Fixed-point IDCT from F' to extracted pixels; returns (trace, Step-5 circuit)"""
    engine = engine or trace.engine
    if engine not in PIPELINE_ENGINES:
        raise PipelineError(f"unknown engine {engine!r}")
    if trace.fp is None:
        raise PipelineError("inverse quantization has not run")
    if table.q != trace.q:
        raise PipelineError(f"cosine table built for q={table.q}, trace has q={trace.q}")
    circuit = synth_step5(trace.n, trace.q)
    if engine == 'vectorized':
        _inverse_dct_vectorized(trace, table)
    else:
        _inverse_dct_circuit(trace, table, circuit)
    return trace, circuit


def combined_tally(circuits):
    """Sum stage tallies; registers shared between stages count once"""
    tally = GateTally()
    widths = {}
    for circuit in circuits:
        tally = tally + circuit.tally()
        widths.update(circuit.widths)
    tally.qubits = sum(widths.values())
    return tally


def run_pipeline(img, qm=None, engine='vectorized'):
    """Steps 1-5 end to end; returns (extracted image, GateTally, PipelineTrace)"""
    _check_q(img.q)
    if not img.blockable:
        raise PipelineError(f"8x8 blocking needs n >= 3, got n={img.n}")
    if engine not in PIPELINE_ENGINES:
        raise PipelineError(f"unknown engine {engine!r}")
    qm = qm or default_quant_matrix()
    qreg = QMatrixRegister(qm, img.q)

    # 1. Classical DCT and quantization
    blocks = encode_image(img, qm)
    coeffs = CoeffRegisterImage.from_quant_blocks(blocks, img.n, img.q)

    # 2. Coefficient image and 3. quantization matrix as GQIR states
    step2 = synth_step2(coeffs)
    step3 = synth_step3(qreg)
    if engine == 'circuit':
        coeffs = CoeffRegisterImage.from_state(evaluate(step2, img.n, img.q, color=COEF))
        state = evaluate(step3, 3, qreg.width, location=QLOC, color=QVAL)
        qreg_values = np.array(state.colors, dtype=np.int64).reshape(BLOCK_SIZE, BLOCK_SIZE)
        if not np.array_equal(qreg_values, qm.values):
            raise PipelineError("Step 3 state does not reproduce the quantization matrix")

    # 4. Inverse quantization
    trace, step4 = inverse_quantization(coeffs, qreg, engine)

    # 5. Cosine table and inverse DCT
    table = build_cos_table(img.q)
    table_circuit = synth_step5_table(table)
    trace, step5 = inverse_dct(trace, table, engine)

    trace.circuits = {
        'step2': step2,
        'step3': step3,
        'step4': step4,
        'step5_table': table_circuit,
        'step5': step5
    }
    tally = combined_tally(trace.circuits.values())
    trace.reference, _ = decode_image(blocks, qm, img.n, img.q)
    trace.psnr = psnr(img, trace.display)
    recovered = PixelImage(n=img.n, q=img.q, pixels=trace.pixels)
    logger.info(f"Pipeline ({engine}) finished: PSNR {trace.psnr:.4f} dB, cost {tally.cost:.1f}")
    return recovered, tally, trace


def step2_gate_count(coeffs):
    """Set magnitude bits plus negative coefficients"""
    return int(popcount_array(coeffs.magnitudes).sum() + coeffs.signs.sum())


def quant_matrix_popcount(qm):
    return sum(popcount(value) for value in qm.values.ravel())

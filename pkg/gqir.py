"""
GQIR Circuits
Gate-record IR, preparation-circuit synthesis, basis-branch evaluation and readback
"""

import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from fixedq import adder_cost, adder_semantics, muler_cost, muler_semantics
from pixmap import PixelImage

logger = logging.getLogger(__name__)

LOCATION = 'loc'
COLOR = 'col'


class CircuitError(ValueError):
    """Raised for malformed gates, bad register addressing or unparsable circuit text"""


class PreparationFormError(CircuitError):
    """Raised when a circuit is not a Hadamard layer followed by location-controlled NOTs"""


@dataclass(frozen=True, order=True)
class Qubit:
    register: str
    index: int

    def __str__(self):
        return f"{self.register}[{self.index}]"


@dataclass(frozen=True, order=True)
class Control:
    """Control on `qubit`; polarity 1 fires on |1>, polarity 0 on |0>"""
    qubit: Qubit
    polarity: int = 1

    def __str__(self):
        return f"{self.qubit}:{self.polarity}"


@dataclass(frozen=True)
class RegSlice:
    """Contiguous little-endian bit field [start, start+width) of a register"""
    register: str
    start: int
    width: int

    def __str__(self):
        return f"{self.register}[{self.start}:{self.start + self.width}]"

    def qubits(self):
        return [Qubit(self.register, self.start + k) for k in range(self.width)]


@dataclass(frozen=True)
class Hadamard:
    target: Qubit

    def targets(self):
        return [self.target]

    def to_text(self):
        return f"H {self.target}"


@dataclass(frozen=True)
class MCX:
    """NOT on `target` conditioned on every control"""
    controls: Tuple[Control, ...]
    target: Qubit

    def targets(self):
        return [self.target]

    def to_text(self):
        controls = ','.join(str(c) for c in self.controls) or '-'
        return f"MCX {controls} {self.target}"


@dataclass(frozen=True)
class MulerGate:
    """out ^= a * b for width-bit operands, optionally controlled"""
    width: int
    a: RegSlice
    b: RegSlice
    out: RegSlice
    controls: Tuple[Control, ...] = ()

    def targets(self):
        return self.out.qubits()

    def to_text(self):
        controls = ','.join(str(c) for c in self.controls) or '-'
        return f"MULER {self.width} a={self.a} b={self.b} out={self.out} ctrl={controls}"


@dataclass(frozen=True)
class AdderGate:
    """b <- a + b, or the reversed network b <- b - a with 2^width wraparound"""
    width: int
    a: RegSlice
    b: RegSlice
    reversed: bool = False
    controls: Tuple[Control, ...] = ()

    def targets(self):
        return self.b.qubits()

    def to_text(self):
        controls = ','.join(str(c) for c in self.controls) or '-'
        name = 'ADDERR' if self.reversed else 'ADDER'
        return f"{name} {self.width} a={self.a} b={self.b} ctrl={controls}"


@dataclass(frozen=True)
class IdentityNote:
    """Zero-cost annotation (identity gates are omitted from circuits)"""
    text: str

    def targets(self):
        return []

    def to_text(self):
        return f"ID {self.text}"


@dataclass
class GateTally:
    """Per-kind gate counts derived from a circuit"""
    hadamard: int = 0
    mcx: int = 0
    mcx_by_controls: Counter = field(default_factory=Counter)
    muler: Counter = field(default_factory=Counter)
    adder: Counter = field(default_factory=Counter)
    adder_reversed: Counter = field(default_factory=Counter)
    qubits: int = 0

    @property
    def gates(self):
        """Every drawn gate counts once"""
        return (self.hadamard + self.mcx + sum(self.muler.values())
                + sum(self.adder.values()) + sum(self.adder_reversed.values()))

    @property
    def cost(self):
        """MCX count plus the black-box costs of every MULER and ADDER; Hadamards excluded"""
        total = float(self.mcx)
        total += sum(muler_cost(width) * count for width, count in self.muler.items())
        for counter in (self.adder, self.adder_reversed):
            total += sum(adder_cost(width) * count for width, count in counter.items())
        return total

    def __add__(self, other):
        return GateTally(
            hadamard=self.hadamard + other.hadamard,
            mcx=self.mcx + other.mcx,
            mcx_by_controls=self.mcx_by_controls + other.mcx_by_controls,
            muler=self.muler + other.muler,
            adder=self.adder + other.adder,
            adder_reversed=self.adder_reversed + other.adder_reversed,
            qubits=self.qubits + other.qubits
        )

    def to_dict(self):
        """Convert to dictionary"""
        return {
            'hadamard': self.hadamard,
            'mcx': self.mcx,
            'mcx_by_controls': {str(k): v for k, v in sorted(self.mcx_by_controls.items())},
            'muler': {str(k): v for k, v in sorted(self.muler.items())},
            'adder': {str(k): v for k, v in sorted(self.adder.items())},
            'adder_reversed': {str(k): v for k, v in sorted(self.adder_reversed.items())},
            'gates': self.gates,
            'cost': self.cost,
            'qubits': self.qubits
        }


def _slice_mask(width):
    return (1 << width) - 1


@dataclass(frozen=True)
class Circuit:
    """Ordered gate records over named registers; immutable after synthesis"""
    registers: Tuple[Tuple[str, int], ...]
    gates: tuple
    label: str = ''

    def __post_init__(self):
        object.__setattr__(self, 'registers', tuple((name, int(w)) for name, w in self.registers))
        object.__setattr__(self, 'gates', tuple(self.gates))
        widths = {}
        for name, width in self.registers:
            if name in widths:
                raise CircuitError(f"register {name} declared twice")
            if width < 1:
                raise CircuitError(f"register {name} needs a positive width")
            widths[name] = width
        for gate in self.gates:
            _validate_gate(gate, widths)

    @property
    def widths(self):
        return dict(self.registers)

    @property
    def num_qubits(self):
        return sum(width for _, width in self.registers)

    def tally(self):
        """Recount every gate kind from the records"""
        tally = GateTally(qubits=self.num_qubits)
        for gate in self.gates:
            if isinstance(gate, Hadamard):
                tally.hadamard += 1
            elif isinstance(gate, MCX):
                tally.mcx += 1
                tally.mcx_by_controls[len(gate.controls)] += 1
            elif isinstance(gate, MulerGate):
                tally.muler[gate.width] += 1
            elif isinstance(gate, AdderGate):
                if gate.reversed:
                    tally.adder_reversed[gate.width] += 1
                else:
                    tally.adder[gate.width] += 1
        return tally

    def then(self, other, label=None):
        """Sequential composition; shared registers must agree on width"""
        widths = self.widths
        registers = list(self.registers)
        for name, width in other.registers:
            if name in widths:
                if widths[name] != width:
                    raise CircuitError(f"register {name} has widths {widths[name]} and {width}")
                continue
            registers.append((name, width))
        return Circuit(registers, self.gates + other.gates, label or self.label)

    def to_text(self):
        """Line-oriented text, one gate per line"""
        lines = []
        if self.label:
            lines.append(f"# {self.label}")
        lines.extend(f"REG {name} {width}" for name, width in self.registers)
        lines.extend(gate.to_text() for gate in self.gates)
        return '\n'.join(lines) + '\n'

    @staticmethod
    def from_text(text):
        """Parse the output of to_text"""
        label = ''
        registers = []
        gates = []
        for number, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith('#'):
                if not label:
                    label = line[1:].strip()
                continue
            try:
                head, _, rest = line.partition(' ')
                if head == 'REG':
                    name, width = rest.split()
                    registers.append((name, int(width)))
                else:
                    gates.append(_parse_gate(head, rest))
            except (ValueError, IndexError) as e:
                raise CircuitError(f"line {number}: cannot parse {raw!r} ({e})")
        return Circuit(registers, gates, label)


_QUBIT_RE = re.compile(r'^(\w+)\[(\d+)\]$')
_SLICE_RE = re.compile(r'^(\w+)\[(\d+):(\d+)\]$')


def _parse_qubit(token):
    match = _QUBIT_RE.match(token)
    if not match:
        raise ValueError(f"bad qubit {token!r}")
    return Qubit(match.group(1), int(match.group(2)))


def _parse_slice(token):
    match = _SLICE_RE.match(token)
    if not match:
        raise ValueError(f"bad slice {token!r}")
    start, stop = int(match.group(2)), int(match.group(3))
    return RegSlice(match.group(1), start, stop - start)


def _parse_controls(token):
    if token == '-':
        return ()
    controls = []
    for item in token.split(','):
        qubit, _, polarity = item.rpartition(':')
        controls.append(Control(_parse_qubit(qubit), int(polarity)))
    return tuple(controls)


def _parse_gate(head, rest):
    parts = rest.split()
    if head == 'H':
        return Hadamard(_parse_qubit(parts[0]))
    if head == 'MCX':
        return MCX(_parse_controls(parts[0]), _parse_qubit(parts[1]))
    if head == 'ID':
        return IdentityNote(rest)
    if head in ('MULER', 'ADDER', 'ADDERR'):
        width = int(parts[0])
        fields = dict(part.split('=', 1) for part in parts[1:])
        controls = _parse_controls(fields.get('ctrl', '-'))
        if head == 'MULER':
            return MulerGate(width, _parse_slice(fields['a']), _parse_slice(fields['b']),
                             _parse_slice(fields['out']), controls)
        return AdderGate(width, _parse_slice(fields['a']), _parse_slice(fields['b']),
                         head == 'ADDERR', controls)
    raise ValueError(f"unknown gate {head!r}")


def _check_qubit(qubit, widths):
    if qubit.register not in widths:
        raise CircuitError(f"unknown register in {qubit}")
    if not 0 <= qubit.index < widths[qubit.register]:
        raise CircuitError(f"{qubit} outside register width {widths[qubit.register]}")


def _check_slice(sl, widths):
    if sl.register not in widths:
        raise CircuitError(f"unknown register in {sl}")
    if sl.width < 1 or sl.start < 0 or sl.start + sl.width > widths[sl.register]:
        raise CircuitError(f"{sl} outside register width {widths[sl.register]}")


def _validate_gate(gate, widths):
    controls = getattr(gate, 'controls', ())
    for control in controls:
        _check_qubit(control.qubit, widths)
        if control.polarity not in (0, 1):
            raise CircuitError(f"control polarity must be 0 or 1 in {gate.to_text()}")
    if isinstance(gate, (Hadamard, MCX)):
        _check_qubit(gate.target, widths)
    elif isinstance(gate, MulerGate):
        for sl in (gate.a, gate.b, gate.out):
            _check_slice(sl, widths)
        if gate.a.width != gate.width or gate.b.width != gate.width:
            raise CircuitError(f"MULER operands must be {gate.width} bits wide")
        if gate.out.width < 2 * gate.width:
            raise CircuitError(f"MULER output needs {2 * gate.width} bits")
    elif isinstance(gate, AdderGate):
        for sl in (gate.a, gate.b):
            _check_slice(sl, widths)
        if gate.a.width != gate.width or gate.b.width != gate.width:
            raise CircuitError(f"ADDER operands must be {gate.width} bits wide")
    elif not isinstance(gate, IdentityNote):
        raise CircuitError(f"unsupported gate record {gate!r}")
    targets = set(gate.targets())
    if any(control.qubit in targets for control in controls):
        raise CircuitError(f"control set includes a target in {gate.to_text()}")


def _read(regs, sl):
    return (regs.get(sl.register, 0) >> sl.start) & _slice_mask(sl.width)


def _write(regs, sl, value):
    mask = _slice_mask(sl.width) << sl.start
    current = regs.get(sl.register, 0)
    regs[sl.register] = (current & ~mask) | ((value << sl.start) & mask)


def controls_fire(regs, controls):
    for control in controls:
        bit = (regs.get(control.qubit.register, 0) >> control.qubit.index) & 1
        if bit != control.polarity:
            return False
    return True


def apply_gate(regs, gate):
    """Apply one gate to one basis branch held as {register: int}; returns 'carry', 'borrow' or None"""
    if isinstance(gate, (Hadamard, IdentityNote)):
        return None
    if not controls_fire(regs, gate.controls):
        return None
    if isinstance(gate, MCX):
        regs[gate.target.register] = regs.get(gate.target.register, 0) ^ (1 << gate.target.index)
        return None
    if isinstance(gate, MulerGate):
        product = muler_semantics(_read(regs, gate.a), _read(regs, gate.b), gate.width)
        _write(regs, gate.out, _read(regs, gate.out) ^ product)
        return None
    if isinstance(gate, AdderGate):
        a = _read(regs, gate.a)
        b = _read(regs, gate.b)
        result = adder_semantics(a, b, gate.width, gate.reversed)
        event = None
        if gate.reversed and b < a:
            event = 'borrow'
        elif not gate.reversed and result >> gate.width:
            event = 'carry'
        _write(regs, gate.b, result & _slice_mask(gate.width))
        return event
    raise CircuitError(f"cannot apply {gate!r}")


@dataclass(frozen=True)
class GqirState:
    """Per-location color values of a uniform GQIR superposition"""
    h: int
    w: int
    q: int
    colors: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, 'colors', tuple(int(c) for c in self.colors))
        if len(self.colors) != 1 << (self.h + self.w):
            raise CircuitError(f"expected {1 << (self.h + self.w)} locations, got {len(self.colors)}")

    def color_of(self, y, x):
        return self.colors[(y << self.w) | x]


def location_controls(index, width, register=LOCATION):
    """Controls selecting one location basis value; 0-bits get negative polarity"""
    return tuple(Control(Qubit(register, k), (index >> k) & 1) for k in range(width))


def synthesize_preparation(colors, h, w, color_width, location=LOCATION, color=COLOR, label=''):
    """Hadamards on every location qubit, then one full-control NOT per set color bit"""
    width = h + w
    gates = [Hadamard(Qubit(location, k)) for k in range(width)]
    for index, value in enumerate(colors):
        value = int(value)
        if value >> color_width:
            raise CircuitError(f"color {value} at location {index} exceeds {color_width} bits")
        if not value:
            continue
        controls = location_controls(index, width, location)
        bit = 0
        while value:
            if value & 1:
                gates.append(MCX(controls, Qubit(color, bit)))
            value >>= 1
            bit += 1
    return Circuit(((location, width), (color, color_width)), gates, label)


def prepare_uncompressed(img):
    """(h+w) Hadamards and one 2n-controlled NOT per set pixel bit"""
    circuit = synthesize_preparation(img.pixels.ravel().tolist(), img.n, img.n, img.q,
                                     label=f"gqir n={img.n} q={img.q}")
    logger.info(f"Synthesized plain GQIR preparation: {circuit.tally().mcx} MCX")
    return circuit


def post_hadamard_gates(circuit, location):
    """Check the Hadamard layer covers the location register; return the gates after it"""
    width = circuit.widths.get(location)
    if width is None:
        raise PreparationFormError(f"circuit has no {location} register")
    position = 0
    seen = set()
    gates = circuit.gates
    while position < len(gates) and isinstance(gates[position], (Hadamard, IdentityNote)):
        gate = gates[position]
        if isinstance(gate, Hadamard):
            if gate.target.register != location:
                raise PreparationFormError(f"Hadamard outside the location register: {gate.to_text()}")
            seen.add(gate.target.index)
        position += 1
    if seen != set(range(width)):
        raise PreparationFormError("the Hadamard layer must cover every location qubit")
    rest = gates[position:]
    if any(isinstance(gate, Hadamard) for gate in rest):
        raise PreparationFormError("Hadamard after the first non-Hadamard gate")
    return rest


def _is_diagonal_mcx(gate, location, color):
    return (isinstance(gate, MCX) and gate.target.register == color
            and all(c.qubit.register == location for c in gate.controls))


def evaluate(circuit, n, q, location=LOCATION, color=COLOR, w=None):
    """Basis-branch evaluation of a preparation circuit.

    The Hadamard layer is first and every later gate is controlled by location
    qubits only (it never changes them), so each location basis value evolves
    independently and the uniform superposition is recovered branch by branch.
    """
    w = n if w is None else w
    width = n + w
    if circuit.widths.get(location, width) != width:
        raise CircuitError(f"{location} register is not {width} qubits wide")
    if circuit.widths.get(color, q) != q:
        raise CircuitError(f"{color} register is not {q} qubits wide")
    rest = post_hadamard_gates(circuit, location) if circuit.gates else ()
    size = 1 << width

    if all(_is_diagonal_mcx(g, location, color) or isinstance(g, IdentityNote) for g in rest):
        colors = [0] * size
        full = size - 1
        for gate in rest:
            if isinstance(gate, IdentityNote):
                continue
            fixed = 0
            value = 0
            for control in gate.controls:
                fixed |= 1 << control.qubit.index
                value |= control.polarity << control.qubit.index
            free = full & ~fixed
            flip = 1 << gate.target.index
            # Walk every submask of the free (don't-care) location bits
            sub = free
            while True:
                colors[value | sub] ^= flip
                if sub == 0:
                    break
                sub = (sub - 1) & free
        return GqirState(n, w, q, colors)

    # General location-controlled permutations: run every branch through the records
    colors = [0] * size
    for index in range(size):
        regs = {location: index}
        for gate in rest:
            apply_gate(regs, gate)
        if regs[location] != index:
            raise PreparationFormError("a gate changed the location register")
        colors[index] = regs.get(color, 0)
    return GqirState(n, w, q, colors)


def readback(state):
    """Inverse of the ideal preparation"""
    if state.h != state.w:
        raise CircuitError(f"readback needs a square image, got h={state.h}, w={state.w}")
    side = 1 << state.h
    pixels = np.array(state.colors, dtype=np.int64).reshape(side, side)
    return PixelImage(n=state.h, q=state.q, pixels=pixels)

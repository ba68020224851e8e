"""Gate-level IR and circuit builders.

Rotation convention: R_n(theta) = exp(-i n.sigma theta/2) with the axis in
the xy plane encoded by a single phase angle alpha, n = (cos a, sin a, 0).
Phase 0 is +x, 90 is +y, 180 is -x, 270 is -y.

A GateSequence stores ops in pulse order (applied left to right); the
corresponding operator product multiplies the ops in reverse.  Every matrix
oracle in this module reverses before multiplying.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .functions import FunctionSpec, classify_kind
from .spinsys import (
    SIGMA_X,
    SIGMA_Y,
    SpinSystem,
    pair_coupling_diagonal,
    single_spin_op,
    zeeman_signs,
)


class CircuitError(ValueError):
    """Raised for malformed gate operations or sequences."""


@dataclass(frozen=True)
class RotXY:
    """Transverse rotation of `spin` about the in-plane axis at `phase_deg`."""

    spin: int
    phase_deg: float
    angle_deg: float

    def __post_init__(self):
        if not math.isfinite(self.phase_deg) or not math.isfinite(self.angle_deg):
            raise CircuitError("rotation angles must be finite")


@dataclass(frozen=True)
class RotZ:
    spin: int
    angle_deg: float

    def __post_init__(self):
        if not math.isfinite(self.angle_deg):
            raise CircuitError("rotation angles must be finite")


@dataclass(frozen=True)
class ScalDelay:
    """Free evolution of duration t under the single (i, j) coupling term.

    t = None is the symbolic duration 1/(2 J_ij), resolved against a spin
    system when the sequence is turned into matrices or compiled.
    """

    i: int
    j: int
    t: float = None

    def __post_init__(self):
        if self.i == self.j:
            raise CircuitError("coupling delay needs two distinct spins")
        if self.t is not None and self.t < 0:
            raise CircuitError("delay must be >= 0")

    def resolved_t(self, system: SpinSystem) -> float:
        if self.t is not None:
            return self.t
        jij = system.coupling(self.i, self.j)
        if jij == 0.0:
            raise CircuitError(f"spins {self.i},{self.j} are uncoupled; 1/2J undefined")
        return 1.0 / (2.0 * abs(jij))


@dataclass(frozen=True)
class TotalDelay:
    """Free evolution of duration t under all coupling terms."""

    t: float

    def __post_init__(self):
        if self.t < 0:
            raise CircuitError("delay must be >= 0")


@dataclass(frozen=True)
class Cnot:
    control: int
    target: int

    def __post_init__(self):
        if self.control == self.target:
            raise CircuitError("CNOT needs distinct control and target")


@dataclass(frozen=True)
class Swap:
    i: int
    k: int

    def __post_init__(self):
        if self.i == self.k:
            raise CircuitError("SWAP needs two distinct spins")


@dataclass(frozen=True)
class QuadGate:
    """Diagonal gate multiplying |x> by (-1)^(x_i x_j)."""

    i: int
    j: int

    def __post_init__(self):
        if self.i == self.j:
            raise CircuitError("quadratic gate needs two distinct spins")


@dataclass(frozen=True)
class LinGate:
    """Diagonal gate multiplying |x> by (-1)^(x_i)."""

    i: int


@dataclass(frozen=True)
class GateSequence:
    """Ordered ops in pulse-sequence order (applied left to right)."""

    ops: tuple

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))

    def __iter__(self):
        return iter(self.ops)

    def __len__(self):
        return len(self.ops)

    def __add__(self, other: "GateSequence") -> "GateSequence":
        return GateSequence(self.ops + tuple(other))


def sequence_to_dicts(seq: GateSequence) -> list:
    """JSON-ready tagged op records, pulse order preserved."""
    out = []
    for op in seq:
        if isinstance(op, RotXY):
            out.append({"op": "rotxy", "spin": op.spin, "phase_deg": op.phase_deg,
                        "angle_deg": op.angle_deg})
        elif isinstance(op, RotZ):
            out.append({"op": "rotz", "spin": op.spin, "angle_deg": op.angle_deg})
        elif isinstance(op, ScalDelay):
            out.append({"op": "scal_delay", "i": op.i, "j": op.j, "t_s": op.t})
        elif isinstance(op, TotalDelay):
            out.append({"op": "total_delay", "t_s": op.t})
        elif isinstance(op, Cnot):
            out.append({"op": "cnot", "control": op.control, "target": op.target})
        elif isinstance(op, Swap):
            out.append({"op": "swap", "i": op.i, "k": op.k})
        elif isinstance(op, QuadGate):
            out.append({"op": "quad", "i": op.i, "j": op.j})
        elif isinstance(op, LinGate):
            out.append({"op": "lin", "i": op.i})
        else:
            raise CircuitError(f"cannot serialize op {op!r}")
    return out


def sequence_from_dicts(records) -> GateSequence:
    ops = []
    for rec in records:
        try:
            kind = rec["op"]
            if kind == "rotxy":
                ops.append(RotXY(rec["spin"], rec["phase_deg"], rec["angle_deg"]))
            elif kind == "rotz":
                ops.append(RotZ(rec["spin"], rec["angle_deg"]))
            elif kind == "scal_delay":
                ops.append(ScalDelay(rec["i"], rec["j"], rec.get("t_s")))
            elif kind == "total_delay":
                ops.append(TotalDelay(rec["t_s"]))
            elif kind == "cnot":
                ops.append(Cnot(rec["control"], rec["target"]))
            elif kind == "swap":
                ops.append(Swap(rec["i"], rec["k"]))
            elif kind == "quad":
                ops.append(QuadGate(rec["i"], rec["j"]))
            elif kind == "lin":
                ops.append(LinGate(rec["i"]))
            else:
                raise CircuitError(f"unknown op kind {kind!r}")
        except (KeyError, TypeError) as exc:
            raise CircuitError(f"malformed op record {rec!r}: {exc}") from exc
    return GateSequence(tuple(ops))


def rot_xy_matrix(phase_deg: float, angle_deg: float) -> np.ndarray:
    a = math.radians(phase_deg)
    t = math.radians(angle_deg)
    axis = math.cos(a) * SIGMA_X + math.sin(a) * SIGMA_Y
    return math.cos(t / 2) * np.eye(2) - 1j * math.sin(t / 2) * axis


def rot_z_matrix(angle_deg: float) -> np.ndarray:
    t = math.radians(angle_deg)
    return np.diag([np.exp(-0.5j * t), np.exp(0.5j * t)])


def op_spins(op) -> tuple:
    """Spins an op touches (used for commutation checks in rewrite passes)."""
    if isinstance(op, (RotXY, RotZ)):
        return (op.spin,)
    if isinstance(op, ScalDelay):
        return (op.i, op.j)
    if isinstance(op, Cnot):
        return (op.control, op.target)
    if isinstance(op, (Swap,)):
        return (op.i, op.k)
    if isinstance(op, QuadGate):
        return (op.i, op.j)
    if isinstance(op, LinGate):
        return (op.i,)
    if isinstance(op, TotalDelay):
        return None  # all spins
    # compiler.RefocusedDelay also evolves under every coupling
    if hasattr(op, "refocus_spin"):
        return None
    raise CircuitError(f"unsupported op {op!r}")


def build_uf(spec: FunctionSpec) -> GateSequence:
    """Function-evaluation gate: quadratic term gates then linear term gates.

    The constant coefficient only contributes a global phase and is dropped.
    All emitted gates are diagonal and commute, so any reordering is valid.
    """
    if classify_kind(spec.truth_table) == "neither":
        raise CircuitError("function must be balanced or constant")
    ops = [QuadGate(i, j) for (i, j) in spec.quadratic_terms()]
    ops += [LinGate(i) for i in spec.linear_terms()]
    return GateSequence(tuple(ops))


def lower_lin(i: int) -> GateSequence:
    return GateSequence((RotZ(i, 180.0),))


def lower_quad(i: int, j: int) -> GateSequence:
    """Quadratic gate as a CNOT conjugated by +y / -y 90s on the target."""
    return GateSequence((RotXY(j, 90.0, 90.0), Cnot(i, j), RotXY(j, 270.0, 90.0)))


def lower_cnot(i: int, j: int, sign: str = "upper") -> GateSequence:
    """CNOT with control i, target j via one coupling period and five 90s.

    Pulse order: [90]^j_{+-y} - [1/2J_ij] - [90]^j_{+-x} - [90]^i_{+-z}
    - [90]^j_{-z}, all upper or all lower signs.  Both variants equal the
    ideal CNOT up to a global phase (e^{-+ i pi/4}).
    """
    if i == j:
        raise CircuitError("CNOT needs distinct control and target")
    if sign not in ("upper", "lower"):
        raise CircuitError(f"sign must be 'upper' or 'lower', got {sign!r}")
    s = 1.0 if sign == "upper" else -1.0
    y_phase = 90.0 if s > 0 else 270.0
    x_phase = 0.0 if s > 0 else 180.0
    return GateSequence(
        (
            RotXY(j, y_phase, 90.0),
            ScalDelay(i, j),
            RotXY(j, x_phase, 90.0),
            RotZ(i, s * 90.0),
            RotZ(j, -90.0),
        )
    )


def lower_swap(i: int, k: int) -> GateSequence:
    """SWAP as three alternating CNOTs: (i -> k), (k -> i), (i -> k)."""
    return GateSequence((Cnot(i, k), Cnot(k, i), Cnot(i, k)))


def build_dj_circuit(spec: FunctionSpec, init_axis_phase: float = 270.0) -> GateSequence:
    """Per-qubit 90 degree preparation rotations followed by the U_f gates.

    The default preparation axis is -y (phase 270), which turns the thermal
    state into -Ix on every spin.
    """
    n = spec.n_bits
    init = tuple(RotXY(j, init_axis_phase, 90.0) for j in range(n - 1, -1, -1))
    return GateSequence(init) + build_uf(spec)


def _cnot_matrix(n: int, control: int, target: int) -> np.ndarray:
    dim = 2**n
    m = np.zeros((dim, dim), dtype=complex)
    for x in range(dim):
        y = x ^ (1 << target) if (x >> control) & 1 else x
        m[y, x] = 1.0
    return m


def _swap_matrix(n: int, i: int, k: int) -> np.ndarray:
    dim = 2**n
    m = np.zeros((dim, dim), dtype=complex)
    for x in range(dim):
        bi, bk = (x >> i) & 1, (x >> k) & 1
        y = x & ~((1 << i) | (1 << k))
        y |= (bk << i) | (bi << k)
        m[y, x] = 1.0
    return m


def op_matrix(op, system: SpinSystem) -> np.ndarray:
    """Ideal matrix of a single op on the full register."""
    n = system.n_spins
    if isinstance(op, RotXY):
        return single_spin_op(n, op.spin, rot_xy_matrix(op.phase_deg, op.angle_deg))
    if isinstance(op, RotZ):
        return single_spin_op(n, op.spin, rot_z_matrix(op.angle_deg))
    if isinstance(op, ScalDelay):
        if system.coupling(op.i, op.j) == 0.0:
            raise CircuitError(
                f"coupling delay on uncoupled pair ({op.i},{op.j})"
            )
        t = op.resolved_t(system)
        return np.diag(np.exp(-1j * pair_coupling_diagonal(system, op.i, op.j) * t))
    if isinstance(op, TotalDelay):
        diag = np.zeros(system.dim)
        signs = zeeman_signs(n)
        for a in range(n):
            for b in range(a):
                diag += (math.pi / 2.0) * system.j_hz[a][b] * signs[:, a] * signs[:, b]
        return np.diag(np.exp(-1j * diag * op.t))
    if isinstance(op, Cnot):
        return _cnot_matrix(n, op.control, op.target)
    if isinstance(op, Swap):
        return _swap_matrix(n, op.i, op.k)
    if isinstance(op, QuadGate):
        signs = ((np.arange(system.dim) >> op.i) & 1) * ((np.arange(system.dim) >> op.j) & 1)
        return np.diag((-1.0 + 0j) ** signs)
    if isinstance(op, LinGate):
        signs = (np.arange(system.dim) >> op.i) & 1
        return np.diag((-1.0 + 0j) ** signs)
    if hasattr(op, "refocus_spin"):  # compiler.RefocusedDelay
        u = np.eye(system.dim, dtype=complex)
        for piece in op.elements():
            u = op_matrix(piece, system) @ u
        return u
    raise CircuitError(f"unsupported op {op!r}")


def sequence_unitary(seq, system: SpinSystem) -> np.ndarray:
    """Ideal unitary of a pulse-order sequence (ops multiplied in reverse)."""
    u = np.eye(system.dim, dtype=complex)
    for op in seq:
        u = op_matrix(op, system) @ u
    return u


def uf_matrix(spec: FunctionSpec) -> np.ndarray:
    """Reference oracle: diag((-1)^f(x))."""
    return np.diag([(-1.0 + 0j) ** spec.truth_table[x] for x in range(2**spec.n_bits)])


def equal_up_to_global_phase(a: np.ndarray, b: np.ndarray, tol: float = 1e-9) -> bool:
    """||a e^{i phi} - b|| small, with phi chosen analytically via trace."""
    tr = np.trace(a.conj().T @ b)
    if abs(tr) < 1e-12:
        return False
    phase = tr / abs(tr)
    return bool(np.abs(a * phase - b).max() < tol)


def z_freedom_decompose(a: np.ndarray, b: np.ndarray, n_spins: int, tol: float = 1e-9):
    """Solve a = e^{i gamma} Z(theta) b for per-qubit z angles.

    Returns (ok, thetas_deg).  Used by oracles that compare a compiled
    construction against its target up to deferred z rotations and a global
    phase: the mismatch m = a b^dagger must be diagonal with unit-modulus
    entries whose phases are multiplicative across bit flips, i.e.
    m[x set bit j] / m[x clear bit j] = e^{i theta_j} independent of x.
    """
    m = a @ b.conj().T
    if np.abs(m - np.diag(np.diag(m))).max() > tol:
        return False, None
    d = np.diag(m)
    if np.abs(np.abs(d) - 1.0).max() > tol:
        return False, None
    dim = len(d)
    thetas = []
    for j in range(n_spins):
        bit = 1 << j
        ratios = np.array([d[x] / d[x ^ bit] for x in range(dim) if x & bit])
        if np.abs(ratios - ratios[0]).max() > 10 * tol:
            return False, None
        thetas.append(float(np.degrees(np.angle(ratios[0]))))
    return True, tuple(thetas)


def equal_up_to_z_and_phase(a: np.ndarray, b: np.ndarray, n_spins: int, tol: float = 1e-9) -> bool:
    ok, _ = z_freedom_decompose(a, b, n_spins, tol)
    return ok

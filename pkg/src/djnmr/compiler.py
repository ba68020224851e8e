"""Pulse-sequence compilation passes.

The pipeline turns an abstract Deutsch-Jozsa gate sequence into an
executable pulse program:

1. lower the quadratic/linear gates into rotations and coupling delays,
   choosing a direct or indirect (swap-routed) realization per coupling;
2. commute every z rotation to the end of the sequence (z deferral), where
   it becomes a passive per-qubit phase applied to the acquired data;
3. merge or cancel adjacent 90 degree rotations on the same qubit;
4. optionally drop leading coupling delays that act on still-thermal qubits;
5. expand each remaining two-spin coupling delay into a refocused block
   that cancels the spectator couplings;
6. in timed mode, shift pulse phases to compensate the off-resonance
   precession accumulated during delays and pulses (Zeeman bookkeeping).

Every pass except the thermal-input shortcut preserves the sequence unitary
up to deferred z rotations and a global phase; the shortcut additionally
relies on the input state being diagonal on the affected qubits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .circuit import (
    CircuitError,
    Cnot,
    GateSequence,
    LinGate,
    QuadGate,
    RotXY,
    RotZ,
    ScalDelay,
    Swap,
    TotalDelay,
    build_uf,
    lower_cnot,
    op_spins,
)
from .functions import FunctionSpec
from .spinsys import SpinSystem


class CompilerError(ValueError):
    """Raised when a sequence cannot be compiled."""


class UncouplableError(CompilerError):
    """No intermediate spin couples both members of a required pair."""


SELF_PHASE_MODELS = {
    # phase (degrees) the pulsed qubit itself accumulates during a pulse
    "rect": lambda nu_hz, dur_s: 360.0 * nu_hz * dur_s,
    "none": lambda nu_hz, dur_s: 0.0,
}


@dataclass(frozen=True)
class PulseTimings:
    """Physical pulse durations used for duration accounting and timed mode."""

    pulse_s: tuple = (7e-4, 7e-4, 5e-4)
    gap_s: float = 5e-6
    self_phase_model: str = "rect"

    def __post_init__(self):
        object.__setattr__(self, "pulse_s", tuple(float(v) for v in self.pulse_s))
        if any(v < 0 for v in self.pulse_s) or self.gap_s < 0:
            raise CompilerError("pulse and gap durations must be >= 0")
        if self.self_phase_model not in SELF_PHASE_MODELS:
            raise CompilerError(f"unknown self-phase model {self.self_phase_model!r}")

    def pulse(self, spin: int) -> float:
        return self.pulse_s[spin]

    def to_dict(self) -> dict:
        return {
            "pulse_s": list(self.pulse_s),
            "gap_s": self.gap_s,
            "self_phase_model": self.self_phase_model,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PulseTimings":
        return cls(tuple(d["pulse_s"]), float(d["gap_s"]), d["self_phase_model"])


@dataclass(frozen=True)
class RefocusedDelay:
    """Coupling evolution on (i, j) for total_t with spectator decoupling.

    Structure (pulse order): [total_t/2]^tot - [180]^k - [total_t/2]^tot
    - [180]^k.  The 180 pair cancels every coupling involving the refocus
    spin k and leaves at most a z rotation on k, so the net effect is
    evolution under the remaining couplings for total_t.

    The two refocusing pulses carry independent phases: Zeeman bookkeeping
    shifts them by different amounts.
    """

    i: int
    j: int
    total_t: float
    refocus_spin: int
    refocus_phases_deg: tuple = (0.0, 0.0)

    def __post_init__(self):
        if len({self.i, self.j, self.refocus_spin}) != 3:
            raise CompilerError("refocused delay needs three distinct spins")
        if self.total_t < 0:
            raise CompilerError("delay must be >= 0")
        object.__setattr__(
            self, "refocus_phases_deg", tuple(float(p) for p in self.refocus_phases_deg)
        )

    def elements(self):
        """Primitive ops implementing the block, in pulse order."""
        half = TotalDelay(self.total_t / 2.0)
        yield half
        yield RotXY(self.refocus_spin, self.refocus_phases_deg[0], 180.0)
        yield half
        yield RotXY(self.refocus_spin, self.refocus_phases_deg[1], 180.0)


@dataclass(frozen=True)
class CompileOptions:
    indirect: str = "swap-cnot"  # or "swap-scal"
    ratio_threshold: float = 0.25
    thermal_input: bool = True
    timed: bool = False
    init_axis_phase: float = 270.0
    cnot_sign: str = "upper"
    refocus_phase: float = 0.0
    timings: PulseTimings = PulseTimings()

    def __post_init__(self):
        if self.indirect not in ("swap-cnot", "swap-scal"):
            raise CompilerError(f"unknown indirect realization {self.indirect!r}")


@dataclass(frozen=True)
class PulseProgram:
    """Executable active section plus passive per-qubit phases.

    The active section contains only transverse rotations and refocused or
    total delays; all z rotations live in ``passive_deg`` and are applied
    as data phase shifts after acquisition.
    """

    active: tuple
    passive_deg: tuple
    duration_s: float
    n_spins: int
    timings: PulseTimings
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for op in self.active:
            if isinstance(op, (RotZ, ScalDelay)):
                raise CompilerError(
                    "active section may not contain RotZ or bare coupling delays"
                )
            if not isinstance(op, (RotXY, TotalDelay, RefocusedDelay)):
                raise CompilerError(f"unsupported active op {op!r}")
        if len(self.passive_deg) != self.n_spins:
            raise CompilerError("passive_deg needs one entry per qubit")
        object.__setattr__(self, "active", tuple(self.active))
        object.__setattr__(self, "passive_deg", tuple(float(p) for p in self.passive_deg))

    def to_dict(self) -> dict:
        ops = []
        for op in self.active:
            if isinstance(op, RotXY):
                ops.append(
                    {
                        "op": "rotxy",
                        "spin": op.spin,
                        "phase_deg": op.phase_deg,
                        "angle_deg": op.angle_deg,
                    }
                )
            elif isinstance(op, RefocusedDelay):
                ops.append(
                    {
                        "op": "refocused_delay",
                        "i": op.i,
                        "j": op.j,
                        "total_t_s": op.total_t,
                        "refocus_spin": op.refocus_spin,
                        "refocus_phases_deg": list(op.refocus_phases_deg),
                    }
                )
            elif isinstance(op, TotalDelay):
                ops.append({"op": "total_delay", "t_s": op.t})
        return {
            "active": ops,
            "passive_deg": list(self.passive_deg),
            "duration_s": self.duration_s,
            "n_spins": self.n_spins,
            "timings": self.timings.to_dict(),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PulseProgram":
        try:
            active = []
            for rec in d["active"]:
                kind = rec["op"]
                if kind == "rotxy":
                    active.append(RotXY(rec["spin"], rec["phase_deg"], rec["angle_deg"]))
                elif kind == "refocused_delay":
                    active.append(
                        RefocusedDelay(
                            rec["i"],
                            rec["j"],
                            rec["total_t_s"],
                            rec["refocus_spin"],
                            tuple(rec["refocus_phases_deg"]),
                        )
                    )
                elif kind == "total_delay":
                    active.append(TotalDelay(rec["t_s"]))
                else:
                    raise CompilerError(f"unknown active op kind {kind!r}")
            return cls(
                active=tuple(active),
                passive_deg=tuple(d["passive_deg"]),
                duration_s=float(d["duration_s"]),
                n_spins=int(d["n_spins"]),
                timings=PulseTimings.from_dict(d["timings"]),
                metadata=dict(d.get("metadata", {})),
            )
        except (KeyError, TypeError) as exc:
            raise CompilerError(f"malformed pulse program record: {exc}") from exc


# ---------------------------------------------------------------------------
# rewrite passes


def _defer_tagged(tagged, n_spins):
    """Commute every RotZ rightward out of the stream.

    A z rotation moved past a later transverse rotation on the same qubit
    shifts that rotation's phase: [theta]_z - [phi at a] = [phi at a-theta]
    - [theta]_z.  Delays commute with z rotations unchanged.
    """
    acc = [0.0] * n_spins
    out = []
    for op, tag in tagged:
        if isinstance(op, RotZ):
            acc[op.spin] += op.angle_deg
        elif isinstance(op, RotXY):
            out.append(
                (RotXY(op.spin, (op.phase_deg - acc[op.spin]) % 360.0, op.angle_deg), tag)
            )
        elif isinstance(op, (ScalDelay, TotalDelay)):
            out.append((op, tag))
        else:
            raise CompilerError(f"unsupported op variant for z deferral: {op!r}")
    return out, tuple(a % 360.0 for a in acc)


def defer_z(seq: GateSequence, n_spins: int = 3):
    """Public wrapper: returns (sequence without RotZ, passive phases)."""
    tagged, acc = _defer_tagged([(op, None) for op in seq], n_spins)
    return GateSequence(tuple(op for op, _ in tagged)), acc


def _angle_close(a, b, tol=1e-9):
    return abs((a - b + 180.0) % 360.0 - 180.0) < tol


def _merge_tagged_once(tagged):
    """One merge/cancel rewrite, leftmost applicable pair first.

    Adjacent means: same spin, and no op between the two that touches that
    spin (rotations and delays on other spins commute past).
    """
    for p, (a, _) in enumerate(tagged):
        if not isinstance(a, RotXY) or not _angle_close(a.angle_deg, 90.0):
            continue
        q = p + 1
        while q < len(tagged):
            spins = op_spins(tagged[q][0])
            if spins is None or a.spin in spins:
                break
            q += 1
        if q >= len(tagged):
            continue
        b, tag_b = tagged[q]
        if not isinstance(b, RotXY) or b.spin != a.spin:
            continue
        if not _angle_close(b.angle_deg, 90.0):
            continue
        diff = (b.phase_deg - a.phase_deg) % 360.0
        if _angle_close(diff, 180.0):
            # inverse rotations annihilate
            return tagged[:p] + tagged[p + 1 : q] + tagged[q + 1 :], True
        if _angle_close(diff, 90.0):
            pair = [(b, tag_b), (RotZ(a.spin, -90.0), tag_b)]
        elif _angle_close(diff, 270.0):
            pair = [(b, tag_b), (RotZ(a.spin, 90.0), tag_b)]
        else:
            continue
        return tagged[:p] + tagged[p + 1 : q] + pair + tagged[q + 1 :], True
    return tagged, False


def merge_orthogonal_90(seq: GateSequence) -> GateSequence:
    """Merge adjacent same-spin 90 degree rotation pairs.

    Pairs about opposite axes cancel outright; pairs about orthogonal axes
    collapse to the second rotation followed by a RotZ(-+90), which a
    subsequent z-deferral absorbs into the passive phases.
    """
    tagged = [(op, None) for op in seq]
    changed = True
    while changed:
        tagged, changed = _merge_tagged_once(tagged)
    return GateSequence(tuple(op for op, _ in tagged))


def _drop_leading_diagonal(tagged, n_spins):
    """Thermal-input shortcut: delete coupling delays that precede any
    transverse rotation on their spins.

    Valid only when the input state is diagonal in the z basis on the
    affected qubits (thermal equilibrium): a sigma_z sigma_z evolution then
    commutes with the state and has no effect.
    """
    touched = set()
    out = []
    dropped = []
    for op, tag in tagged:
        if isinstance(op, ScalDelay) and op.i not in touched and op.j not in touched:
            dropped.append(op)
            continue
        if isinstance(op, TotalDelay) and not touched:
            dropped.append(op)
            continue
        if isinstance(op, RotXY):
            touched.add(op.spin)
        out.append((op, tag))
    return out, dropped


# ---------------------------------------------------------------------------
# realization selection and indirect constructions


def choose_realization(system: SpinSystem, i: int, j: int, ratio_threshold: float = 0.25):
    """Pick a direct or swap-routed realization for the (i, j) coupling gate.

    Direct is feasible when the required evolution 1/(2 J_ij) is short
    compared with the fastest transverse relaxation; otherwise the coupling
    is synthesized through the intermediate spin k that maximizes the weaker
    of its two couplings.
    """
    if i == j:
        raise CompilerError("realization needs two distinct spins")
    jij = abs(system.coupling(i, j))
    t2min = min(system.t2_s)
    if jij > 0.0 and 1.0 / (2.0 * jij) < ratio_threshold * t2min:
        return ("direct", None)
    best_k = None
    best_strength = 0.0
    for k in range(system.n_spins):
        if k in (i, j):
            continue
        strength = min(abs(system.coupling(i, k)), abs(system.coupling(j, k)))
        if strength > best_strength:
            best_strength, best_k = strength, k
    if best_k is None or best_strength == 0.0:
        raise UncouplableError(
            f"no intermediate spin couples both {i} and {j}; cannot synthesize the gate"
        )
    return ("indirect", best_k)


def indirect_scal_via_swap_cnot(
    system: SpinSystem, i: int, j: int, k: int, sign: str = "upper"
) -> GateSequence:
    """Coupling gate on (i, j) routed through k via a swapped controlled-NOT.

    Operator form: R^j_{-y}(90) SWAP_jk CNOT_ik SWAP_jk R^j_y(90), with
    SWAP_jk = A B A, A = CNOT(j->k), B = CNOT(k->j).  A commutes with
    CNOT_ik (same target), so the sandwich reduces to A B CNOT_ik B A.
    The result equals the quadratic term gate on (i, j) exactly, and the
    (i, j) coupling gate up to deferred z rotations and a global phase.
    """
    if len({i, j, k}) != 3:
        raise CompilerError("indirect realization needs three distinct spins")
    if system.coupling(i, k) == 0.0 or system.coupling(j, k) == 0.0:
        raise CompilerError(f"intermediate spin {k} must couple to both {i} and {j}")
    a = lower_cnot(j, k, sign)
    b = lower_cnot(k, j, sign)
    c = lower_cnot(i, k, sign)
    seq = GateSequence((RotXY(j, 90.0, 90.0),)) + a + b + c + b + a
    return seq + GateSequence((RotXY(j, 270.0, 90.0),))


def indirect_scal_via_swap_scal(
    system: SpinSystem, i: int, j: int, k: int, t: float = None, sign: str = "upper"
) -> GateSequence:
    """Coupling gate on (i, j) routed through k via a swapped coupling delay.

    Operator form: SWAP_ik U_jk(t') SWAP_ik with SWAP_ik = B A B,
    B = CNOT(k->i), A = CNOT(i->k).  B commutes with the diagonal (j, k)
    delay, reducing the sandwich to B A U_jk(t') A B.  The mapped duration
    t' reproduces the (i, j) conditional phase (pi/2) J_ij t on the (j, k)
    coupling; t = None requests the quarter-cycle phase, t' = 1/(2 J_jk).
    """
    if len({i, j, k}) != 3:
        raise CompilerError("indirect realization needs three distinct spins")
    jik = system.coupling(i, k)
    jjk = system.coupling(j, k)
    if jik == 0.0 or jjk == 0.0:
        raise CompilerError(f"intermediate spin {k} must couple to both {i} and {j}")
    if t is None:
        delay = ScalDelay(j, k)
    else:
        delay = ScalDelay(j, k, abs(t * system.coupling(i, j) / jjk))
    b = lower_cnot(k, i, sign)
    a = lower_cnot(i, k, sign)
    return b + a + GateSequence((delay,)) + a + b


def refocus_expand(delay: ScalDelay, system: SpinSystem, refocus_phase: float = 0.0) -> RefocusedDelay:
    """Expand a bare two-spin coupling delay into its refocused block.

    Requires exactly one spectator spin (three-spin systems): the spectator
    is flipped halfway and at the end, cancelling its couplings.
    """
    if system.n_spins != 3:
        raise CompilerError("refocusing is implemented for 3-spin systems only")
    (k,) = set(range(3)) - {delay.i, delay.j}
    return RefocusedDelay(
        i=delay.i,
        j=delay.j,
        total_t=delay.resolved_t(system),
        refocus_spin=k,
        refocus_phases_deg=(refocus_phase, refocus_phase),
    )


# ---------------------------------------------------------------------------
# Zeeman bookkeeping


def coupling_error_estimate(t: float, j_hz: float) -> float:
    """Crude fractional error from coupling evolution during a short window:
    the elapsed time as a fraction of the half-cycle 1/(2J)."""
    if t < 0 or j_hz < 0:
        raise CompilerError("time and coupling must be >= 0")
    return 2.0 * j_hz * t


def zeeman_bookkeeping(program: PulseProgram, system: SpinSystem) -> PulseProgram:
    """Shift pulse phases to absorb off-resonance precession.

    During any interval of duration t the offset nu^j advances qubit j's
    frame by 2 pi nu^j t; commuting the compensating z rotation to the end
    shifts every later transverse-rotation phase on j by +360 nu^j t degrees
    and decrements the passive phase by the same amount.  The pulsed qubit's
    own precession during a shaped pulse follows the configured self-phase
    model (default: the rectangular-pulse value, the full offset phase).
    """
    timings = program.timings
    if timings is None:
        raise CompilerError("program carries no pulse timing metadata")
    if program.n_spins != system.n_spins:
        raise CompilerError("program/system spin count mismatch")
    self_phase = SELF_PHASE_MODELS[timings.self_phase_model]
    nu = system.offsets_hz
    acc = [0.0] * system.n_spins

    def advance_all(t):
        for s in range(system.n_spins):
            acc[s] += 360.0 * nu[s] * t

    def advance_pulse(spin):
        dur = timings.pulse(spin)
        for s in range(system.n_spins):
            if s == spin:
                acc[s] += self_phase(nu[s], dur)
            else:
                acc[s] += 360.0 * nu[s] * dur
        advance_all(timings.gap_s)

    new_active = []
    for op in program.active:
        if isinstance(op, RotXY):
            new_active.append(
                RotXY(op.spin, (op.phase_deg + acc[op.spin]) % 360.0, op.angle_deg)
            )
            advance_pulse(op.spin)
        elif isinstance(op, RefocusedDelay):
            k = op.refocus_spin
            advance_all(op.total_t / 2.0)
            p1 = (op.refocus_phases_deg[0] + acc[k]) % 360.0
            advance_pulse(k)
            advance_all(op.total_t / 2.0)
            p2 = (op.refocus_phases_deg[1] + acc[k]) % 360.0
            advance_pulse(k)
            new_active.append(replace(op, refocus_phases_deg=(p1, p2)))
        elif isinstance(op, TotalDelay):
            advance_all(op.t)
            new_active.append(op)
        else:
            raise CompilerError(f"unsupported active op {op!r}")

    passive = tuple(
        (program.passive_deg[s] - acc[s]) % 360.0 for s in range(system.n_spins)
    )
    meta = dict(program.metadata)
    meta["zeeman_corrected"] = True
    return replace(program, active=tuple(new_active), passive_deg=passive, metadata=meta)


# ---------------------------------------------------------------------------
# top-level compilation


def _segment_durations(tagged_active, timings):
    out = {}
    for op, tag in tagged_active:
        if isinstance(op, RotXY):
            d = timings.pulse(op.spin) + timings.gap_s
        elif isinstance(op, RefocusedDelay):
            d = op.total_t + 2.0 * (timings.pulse(op.refocus_spin) + timings.gap_s)
        elif isinstance(op, TotalDelay):
            d = op.t
        else:
            d = 0.0
        out[tag] = out.get(tag, 0.0) + d
    return out


def program_duration(active, timings: PulseTimings) -> float:
    """Total wall time: delays plus configured pulse durations and gaps."""
    return sum(_segment_durations([(op, None) for op in active], timings).values())


def compile_function(
    spec: FunctionSpec, system: SpinSystem, options: CompileOptions = CompileOptions()
) -> PulseProgram:
    """Full pipeline from Boolean function to executable pulse program."""
    if spec.n_bits != system.n_spins:
        raise CompilerError("function arity and spin count differ")
    uf = build_uf(spec)  # validates admissibility
    quads = [op for op in uf if isinstance(op, QuadGate)]
    lins = [op for op in uf if isinstance(op, LinGate)]

    realizations = {}
    for q in quads:
        realizations[(q.i, q.j)] = choose_realization(
            system, q.i, q.j, options.ratio_threshold
        )
    # indirect gates first: against a thermal input their leading rotations
    # cancel with the preparation pulses and their first coupling delay is a
    # no-op, which the shortcut exploits
    ordered = sorted(quads, key=lambda q: 0 if realizations[(q.i, q.j)][0] == "indirect" else 1)

    tagged = [
        (RotXY(s, options.init_axis_phase, 90.0), "init")
        for s in range(system.n_spins - 1, -1, -1)
    ]
    realization_meta = {}
    for q in quads:
        kind, via = realizations[(q.i, q.j)]
        realization_meta[f"quad({q.i},{q.j})"] = (
            "direct" if kind == "direct" else f"{options.indirect} via {via}"
        )
    for q in ordered:
        kind, via = realizations[(q.i, q.j)]
        tag = f"quad({q.i},{q.j})"
        if kind == "direct":
            gate_ops = [ScalDelay(q.i, q.j), RotZ(q.i, -90.0), RotZ(q.j, -90.0)]
        elif options.indirect == "swap-cnot":
            gate_ops = list(indirect_scal_via_swap_cnot(system, q.i, q.j, via, options.cnot_sign))
        else:
            gate_ops = list(
                indirect_scal_via_swap_scal(system, q.i, q.j, via, None, options.cnot_sign)
            ) + [RotZ(q.i, -90.0), RotZ(q.j, -90.0)]
        tagged += [(op, tag) for op in gate_ops]
    for lin in lins:
        tagged.append((RotZ(lin.i, 180.0), f"lin({lin.i})"))

    n = system.n_spins
    tagged, passive = _defer_tagged(tagged, n)
    passive = list(passive)
    while True:
        tagged, changed = _merge_tagged_once(tagged)
        if not changed:
            break
        if any(isinstance(op, RotZ) for op, _ in tagged):
            tagged, extra = _defer_tagged(tagged, n)
            passive = [(p + e) % 360.0 for p, e in zip(passive, extra)]

    dropped = []
    if options.thermal_input:
        tagged, dropped = _drop_leading_diagonal(tagged, n)

    refocused = []
    for op, tag in tagged:
        if isinstance(op, ScalDelay):
            refocused.append((refocus_expand(op, system, options.refocus_phase), tag))
        else:
            refocused.append((op, tag))

    active = tuple(op for op, _ in refocused)
    segments = _segment_durations(refocused, options.timings)
    metadata = {
        "function": spec.polynomial_str(),
        "truth_table": "".join(str(b) for b in spec.truth_table),
        "realizations": realization_meta,
        "dropped_thermal_noops": len(dropped),
        "segment_durations_s": segments,
        "mode": "timed" if options.timed else "ideal",
        "zeeman_corrected": False,
    }
    program = PulseProgram(
        active=active,
        passive_deg=tuple(passive),
        duration_s=program_duration(active, options.timings),
        n_spins=n,
        timings=options.timings,
        metadata=metadata,
    )
    if options.timed:
        program = zeeman_bookkeeping(program, system)
    return program

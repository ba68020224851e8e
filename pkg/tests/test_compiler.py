import math
import random

import numpy as np
import pytest

from djnmr.circuit import (
    GateSequence,
    RotXY,
    RotZ,
    ScalDelay,
    TotalDelay,
    equal_up_to_global_phase,
    equal_up_to_z_and_phase,
    sequence_unitary,
    z_freedom_decompose,
)
from djnmr.compiler import (
    CompileOptions,
    CompilerError,
    PulseProgram,
    PulseTimings,
    RefocusedDelay,
    UncouplableError,
    choose_realization,
    compile_function,
    coupling_error_estimate,
    defer_z,
    indirect_scal_via_swap_cnot,
    indirect_scal_via_swap_scal,
    merge_orthogonal_90,
    refocus_expand,
    zeeman_bookkeeping,
)
from djnmr.functions import all_admissible_tables, expand_gf2, named_function
from djnmr.spinsys import SpinSystem


def random_sequence(rng, n_ops=10):
    ops = []
    for _ in range(n_ops):
        kind = rng.randrange(4)
        spin = rng.randrange(3)
        if kind == 0:
            ops.append(RotXY(spin, rng.choice([0, 45, 90, 135, 180, 270]), 90.0))
        elif kind == 1:
            ops.append(RotZ(spin, rng.choice([-90, 90, 180, 37.5])))
        elif kind == 2:
            pairs = [(2, 1), (1, 0), (2, 0)]
            i, j = pairs[rng.randrange(3)]
            ops.append(ScalDelay(i, j, rng.uniform(0.001, 0.02)))
        else:
            ops.append(TotalDelay(rng.uniform(0.001, 0.02)))
    return GateSequence(tuple(ops))


def z_rotation_matrix(n, phases_deg, system):
    seq = GateSequence(tuple(RotZ(s, phases_deg[s]) for s in range(n)))
    return sequence_unitary(seq, system)


class TestDeferZ:
    def test_literal_example(self):
        seq = GateSequence((RotZ(0, 90.0), RotXY(0, 0.0, 90.0)))
        out, phases = defer_z(seq)
        assert out.ops == (RotXY(0, 270.0, 90.0),)  # 0 - 90 mod 360
        assert phases == (90.0, 0.0, 0.0)

    def test_no_z_unchanged(self):
        seq = GateSequence((RotXY(1, 45.0, 90.0), ScalDelay(2, 1, 0.002)))
        out, phases = defer_z(seq)
        assert out.ops == seq.ops
        assert phases == (0.0, 0.0, 0.0)

    def test_unsupported_op_rejected(self):
        from djnmr.circuit import Cnot

        with pytest.raises(CompilerError):
            defer_z(GateSequence((Cnot(0, 1),)))

    def test_random_sequences_preserve_unitary(self, ala):
        rng = random.Random(2024)
        for _ in range(25):
            seq = random_sequence(rng)
            out, phases = defer_z(seq)
            u_orig = sequence_unitary(seq, ala)
            u_new = z_rotation_matrix(3, phases, ala) @ sequence_unitary(out, ala)
            assert equal_up_to_global_phase(u_orig, u_new, tol=1e-9)


class TestMergeOrthogonal90:
    def test_orthogonal_pair_merges_with_z(self, ala):
        seq = GateSequence((RotXY(1, 0.0, 90.0), RotXY(1, 90.0, 90.0)))
        out = merge_orthogonal_90(seq)
        assert len(out) == 2
        assert isinstance(out.ops[0], RotXY) and isinstance(out.ops[1], RotZ)
        # the rewrite is only legitimate if the matrices agree exactly
        assert equal_up_to_global_phase(
            sequence_unitary(out, ala), sequence_unitary(seq, ala), tol=1e-12
        )

    def test_equal_phases_unchanged(self):
        seq = GateSequence((RotXY(1, 30.0, 90.0), RotXY(1, 30.0, 90.0)))
        assert merge_orthogonal_90(seq).ops == seq.ops

    def test_opposite_pair_cancels(self, ala):
        seq = GateSequence((RotXY(0, 270.0, 90.0), RotXY(0, 90.0, 90.0)))
        out = merge_orthogonal_90(seq)
        assert len(out) == 0

    def test_blocked_by_intervening_coupling(self):
        seq = GateSequence(
            (RotXY(1, 0.0, 90.0), ScalDelay(2, 1, 0.002), RotXY(1, 90.0, 90.0))
        )
        assert merge_orthogonal_90(seq).ops == seq.ops

    def test_merges_across_disjoint_ops(self, ala):
        # rotations on other spins and couplings not touching the spin commute past
        seq = GateSequence(
            (
                RotXY(0, 0.0, 90.0),
                RotXY(1, 45.0, 90.0),
                ScalDelay(2, 1, 0.002),
                RotXY(0, 180.0, 90.0),
            )
        )
        out = merge_orthogonal_90(seq)
        assert all(not (isinstance(op, RotXY) and op.spin == 0) for op in out)
        assert equal_up_to_global_phase(
            sequence_unitary(out, ala), sequence_unitary(seq, ala), tol=1e-12
        )

    def test_random_sequences_preserve_unitary(self, ala):
        rng = random.Random(77)
        for _ in range(25):
            seq = random_sequence(rng)
            out = merge_orthogonal_90(seq)
            assert equal_up_to_global_phase(
                sequence_unitary(out, ala), sequence_unitary(seq, ala), tol=1e-9
            )


class TestChooseRealization:
    def test_alanine_strong_pairs_direct(self, ala):
        assert choose_realization(ala, 2, 1) == ("direct", None)
        assert choose_realization(ala, 1, 0) == ("direct", None)

    def test_alanine_weak_pair_indirect_via_alpha(self, ala):
        assert choose_realization(ala, 2, 0) == ("indirect", 1)

    def test_zero_coupling_forces_indirect(self):
        sys = SpinSystem(
            (0.0, 0.0, 0.0),
            ((0.0, 30.0, 0.0), (30.0, 0.0, 50.0), (0.0, 50.0, 0.0)),
            (1.0, 1.0, 1.0),
            (1.0, 1.0, 1.0),
        )
        assert choose_realization(sys, 2, 0) == ("indirect", 1)

    def test_uncouplable_error(self):
        sys = SpinSystem(
            (0.0, 0.0, 0.0),
            ((0.0, 0.0, 0.0), (0.0, 0.0, 50.0), (0.0, 50.0, 0.0)),
            (1.0, 1.0, 1.0),
            (1.0, 1.0, 1.0),
        )
        with pytest.raises(UncouplableError):
            choose_realization(sys, 1, 0)


class TestIndirectConstructions:
    def test_swap_scal_matches_direct(self, ala):
        seq = indirect_scal_via_swap_scal(ala, 2, 0, 1, t=1.0 / (2 * 1.57))
        u = sequence_unitary(seq, ala)
        direct = sequence_unitary(
            GateSequence((ScalDelay(2, 0, 1.0 / (2 * 1.57)),)), ala
        )
        assert equal_up_to_z_and_phase(u, direct, 3, tol=1e-9)

    def test_swap_scal_zero_time_is_identity(self, ala):
        seq = indirect_scal_via_swap_scal(ala, 2, 0, 1, t=0.0)
        u = sequence_unitary(seq, ala)
        assert equal_up_to_z_and_phase(u, np.eye(8), 3, tol=1e-9)

    def test_swap_scal_structure(self, ala):
        seq = indirect_scal_via_swap_scal(ala, 2, 0, 1)
        delays = [op for op in seq if isinstance(op, ScalDelay)]
        # four coupling periods on the (i,k) routing pair, one mapped (j,k) period
        assert sum(1 for d in delays if {d.i, d.j} == {2, 1}) == 4
        assert sum(1 for d in delays if {d.i, d.j} == {0, 1}) == 1
        assert not any({d.i, d.j} == {2, 0} for d in delays)

    def test_swap_cnot_matches_coupling_gate(self, ala):
        seq = indirect_scal_via_swap_cnot(ala, 2, 0, 1)
        u = sequence_unitary(seq, ala)
        direct = sequence_unitary(
            GateSequence((ScalDelay(2, 0, 1.0 / (2 * 1.57)),)), ala
        )
        ok, thetas = z_freedom_decompose(u, direct, 3, tol=1e-9)
        assert ok
        # residual z rotations are -90 on both routed spins (the deferred
        # phase shifts that turn the coupling gate into the quadratic gate)
        assert thetas[0] == pytest.approx(-90.0, abs=1e-6)
        assert thetas[2] == pytest.approx(-90.0, abs=1e-6)

    def test_swap_cnot_equals_quadratic_gate_exactly(self, ala):
        from djnmr.circuit import QuadGate, op_matrix

        seq = indirect_scal_via_swap_cnot(ala, 2, 0, 1)
        u = sequence_unitary(seq, ala)
        assert equal_up_to_global_phase(u, op_matrix(QuadGate(2, 0), ala), tol=1e-9)

    def test_zero_intermediate_coupling_rejected(self):
        sys = SpinSystem(
            (0.0, 0.0, 0.0),
            ((0.0, 0.0, 0.0), (0.0, 0.0, 50.0), (0.0, 50.0, 0.0)),
            (1.0, 1.0, 1.0),
            (1.0, 1.0, 1.0),
        )
        with pytest.raises(CompilerError):
            indirect_scal_via_swap_cnot(sys, 2, 0, 1)
        with pytest.raises(CompilerError):
            indirect_scal_via_swap_scal(sys, 2, 0, 1)


class TestRefocusExpand:
    def test_block_structure_strong_pair(self, ala):
        block = refocus_expand(ScalDelay(2, 1), ala)
        assert block.refocus_spin == 0
        assert block.total_t == pytest.approx(1.0 / 112.0)
        elements = list(block.elements())
        assert isinstance(elements[0], TotalDelay) and elements[0].t == pytest.approx(1.0 / 224.0)
        assert isinstance(elements[1], RotXY) and elements[1].angle_deg == 180.0

    def test_block_structure_other_pair(self, ala):
        block = refocus_expand(ScalDelay(1, 0), ala)
        assert block.refocus_spin == 2

    def test_block_unitary_cancels_spectator(self, ala):
        for pair, t in (((2, 1), 1.0 / 112.0), ((1, 0), 0.007)):
            block = refocus_expand(ScalDelay(*pair, t), ala)
            u = sequence_unitary(GateSequence((block,)), ala)
            target = sequence_unitary(GateSequence((ScalDelay(*pair, t),)), ala)
            assert equal_up_to_global_phase(u, target, tol=1e-9)

    def test_two_spin_system_rejected(self, two_spin):
        with pytest.raises(CompilerError):
            refocus_expand(ScalDelay(1, 0, 0.01), two_spin)


class TestZeemanBookkeeping:
    def test_zero_offsets_unchanged(self, ala):
        sys0 = SpinSystem((0.0, 0.0, 0.0), ala.j_hz, ala.t1_s, ala.t2_s)
        prog = compile_function(named_function("f9"), sys0)
        corrected = zeeman_bookkeeping(prog, sys0)
        assert corrected.active == prog.active
        assert corrected.passive_deg == prog.passive_deg

    def test_single_delay_phase_shift(self):
        sys = SpinSystem((0.0, 100.0, 0.0), (((0.0,) * 3,) * 3), (1.0,) * 3, (1.0,) * 3)
        timings = PulseTimings(gap_s=0.0, self_phase_model="none")
        prog = PulseProgram(
            active=(TotalDelay(0.0069), RotXY(1, 0.0, 90.0)),
            passive_deg=(0.0, 0.0, 0.0),
            duration_s=0.0069,
            n_spins=3,
            timings=timings,
        )
        out = zeeman_bookkeeping(prog, sys)
        shift = 360.0 * 100.0 * 0.0069  # 248.4 degrees
        assert out.active[1].phase_deg == pytest.approx(shift % 360.0, abs=1e-9)
        assert out.passive_deg[1] == pytest.approx((-shift) % 360.0, abs=1e-9)

    def test_refocusing_pulses_get_independent_shifts(self):
        sys = SpinSystem((0.0, 0.0, 120.0), (((0.0,) * 3,) * 3), (1.0,) * 3, (1.0,) * 3)
        timings = PulseTimings(pulse_s=(0.0, 0.0, 0.0), gap_s=0.0)
        block = RefocusedDelay(1, 0, 0.01, 2)
        prog = PulseProgram(
            active=(block,), passive_deg=(0.0,) * 3, duration_s=0.01, n_spins=3,
            timings=timings,
        )
        out = zeeman_bookkeeping(prog, sys)
        p1, p2 = out.active[0].refocus_phases_deg
        a = 360.0 * 120.0 * 0.005
        assert p1 == pytest.approx(a % 360.0, abs=1e-9)
        assert p2 == pytest.approx((2 * a) % 360.0, abs=1e-9)

    def test_missing_timings_rejected(self, ala):
        prog = PulseProgram(
            active=(RotXY(0, 0.0, 90.0),),
            passive_deg=(0.0, 0.0, 0.0),
            duration_s=0.0,
            n_spins=3,
            timings=None,
        )
        with pytest.raises(CompilerError):
            zeeman_bookkeeping(prog, ala)


class TestCouplingErrorEstimate:
    def test_gap_error(self):
        assert coupling_error_estimate(5e-6, 56.0) == pytest.approx(0.00056)

    def test_pulse_error(self):
        assert coupling_error_estimate(0.7e-3, 56.0) == pytest.approx(0.0784)

    def test_zero_coupling(self):
        assert coupling_error_estimate(1.0, 0.0) == 0.0


EQ31_SKELETON = [
    ("rot", 0, 0.0),
    ("rot", 1, 0.0),
    ("delay", frozenset({1, 0})),
    ("rot", 1, 90.0),
    ("delay", frozenset({2, 1})),
    ("rot", 1, 0.0),
    ("delay", frozenset({1, 0})),
    ("rot", 1, 90.0),
    ("rot", 0, 0.0),
    ("delay", frozenset({1, 0})),
    ("rot", 1, 0.0),
    ("rot", 0, 270.0),
]


def skeleton(ops):
    out = []
    for op in ops:
        if isinstance(op, RotXY):
            out.append(("rot", op.spin, op.phase_deg % 360.0))
        elif isinstance(op, RefocusedDelay):
            out.append(("delay", frozenset({op.i, op.j})))
        elif isinstance(op, ScalDelay):
            out.append(("delay", frozenset({op.i, op.j})))
    return out


def per_spin_projection(skel, spin):
    """A spin's view of the sequence: its own rotations and the delays that
    couple it, in order.  Rotations on other spins commute past freely."""
    out = []
    for item in skel:
        if item[0] == "rot" and item[1] == spin:
            out.append(("rot", item[2]))
        elif item[0] == "delay" and spin in item[1]:
            out.append(item)
    return out


class TestCompile:
    def test_constant_three_rotations_no_passive(self, ala):
        prog = compile_function(named_function("const"), ala)
        assert len(prog.active) == 3
        assert all(isinstance(op, RotXY) for op in prog.active)
        assert prog.passive_deg == (0.0, 0.0, 0.0)

    def test_f9_matches_published_skeleton(self, ala):
        prog = compile_function(named_function("f9"), ala)
        # leading op is the surviving preparation pulse on the carboxyl spin
        assert prog.active[0] == RotXY(2, 270.0, 90.0)
        # trailing ops are the two direct quadratic gates' refocused delays
        tail = prog.active[-2:]
        assert {frozenset({op.i, op.j}) for op in tail} == {
            frozenset({2, 1}),
            frozenset({1, 0}),
        }
        block = skeleton(prog.active[1:-2])
        expected = EQ31_SKELETON
        # delays must appear in the published order
        assert [x for x in block if x[0] == "delay"] == [
            x for x in expected if x[0] == "delay"
        ]
        # each spin sees exactly the published rotation phases and delays
        for spin in range(3):
            assert per_spin_projection(block, spin) == per_spin_projection(expected, spin)

    def test_f9_passive_phases(self, ala):
        # indirect gate contributes (+90 on 2, -90 on 1); the direct gates
        # add -90 on each of their spins
        prog = compile_function(named_function("f9"), ala)
        assert prog.passive_deg == pytest.approx((270.0, 90.0, 0.0))

    def test_indirect_gate_z_contributions(self, ala):
        seq = indirect_scal_via_swap_cnot(ala, 2, 0, 1)
        _, phases = defer_z(seq)
        assert phases == pytest.approx((0.0, 270.0, 90.0))

    def test_thermal_shortcut_drops_one_delay(self, ala):
        with_cut = compile_function(named_function("f9"), ala)
        without = compile_function(
            named_function("f9"), ala, CompileOptions(thermal_input=False)
        )
        assert with_cut.metadata["dropped_thermal_noops"] == 1
        assert without.metadata["dropped_thermal_noops"] == 0
        n_delays = lambda p: sum(1 for op in p.active if isinstance(op, RefocusedDelay))
        assert n_delays(without) == n_delays(with_cut) + 1

    def test_active_sections_identical_within_class(self, ala):
        for group in (("f1", "f2", "f3", "const"), ("f4", "f5", "f6"), ("f7", "f8"), ("f9", "f10")):
            progs = [compile_function(named_function(n), ala) for n in group]
            base = progs[0].active
            assert all(p.active == base for p in progs[1:])

    def test_no_weak_pair_delay_ever_emitted(self, ala):
        for table in all_admissible_tables():
            prog = compile_function(expand_gf2(table), ala)
            for op in prog.active:
                if isinstance(op, RefocusedDelay):
                    assert {op.i, op.j} != {2, 0}

    def test_duration_matches_component_sum(self, ala):
        prog = compile_function(named_function("f9"), ala)
        t = prog.timings
        total = 0.0
        for op in prog.active:
            if isinstance(op, RotXY):
                total += t.pulse(op.spin) + t.gap_s
            elif isinstance(op, RefocusedDelay):
                total += op.total_t + 2 * (t.pulse(op.refocus_spin) + t.gap_s)
        assert prog.duration_s == pytest.approx(total)
        segs = prog.metadata["segment_durations_s"]
        assert sum(segs.values()) == pytest.approx(prog.duration_s)

    def test_swap_scal_option_also_correct(self, ala):
        from djnmr.simulator import product_expansion, run_program, thermal_state

        prog = compile_function(
            named_function("f9"), ala, CompileOptions(indirect="swap-scal")
        )
        rho = run_program(thermal_state(ala), prog, ala)
        exp = product_expansion(rho)
        assert exp.coeff("xzz") == pytest.approx(-1.0, abs=1e-8)
        assert exp.coeff("zxz") == pytest.approx(-1.0, abs=1e-8)
        assert exp.coeff("zzx") == pytest.approx(-1.0, abs=1e-8)

    def test_frame_freedom(self, ala):
        """Shifting every active-phase of one qubit by a constant only moves
        that qubit's passive phase (z-diagonal inputs)."""
        from djnmr.simulator import run_program, thermal_state
        from dataclasses import replace as dc_replace

        prog = compile_function(named_function("f9"), ala)
        rho_ref = run_program(thermal_state(ala), prog, ala)
        for qubit, delta in ((0, 35.0), (1, 120.0), (2, 77.0)):
            active = []
            for op in prog.active:
                if isinstance(op, RotXY) and op.spin == qubit:
                    active.append(dc_replace(op, phase_deg=(op.phase_deg + delta) % 360))
                elif isinstance(op, RefocusedDelay) and op.refocus_spin == qubit:
                    p1, p2 = op.refocus_phases_deg
                    active.append(
                        dc_replace(op, refocus_phases_deg=((p1 + delta) % 360, (p2 + delta) % 360))
                    )
                else:
                    active.append(op)
            passive = list(prog.passive_deg)
            passive[qubit] = (passive[qubit] - delta) % 360.0
            shifted = PulseProgram(
                active=tuple(active),
                passive_deg=tuple(passive),
                duration_s=prog.duration_s,
                n_spins=3,
                timings=prog.timings,
                metadata=dict(prog.metadata),
            )
            rho = run_program(thermal_state(ala), shifted, ala)
            assert np.abs(rho.matrix - rho_ref.matrix).max() < 1e-9

    def test_arity_mismatch_rejected(self, two_spin):
        with pytest.raises(CompilerError):
            compile_function(named_function("f9"), two_spin)

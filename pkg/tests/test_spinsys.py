import json
import math

import numpy as np
import pytest

from djnmr.spinsys import (
    SIGMA_Z,
    FrameChoice,
    SpinSystem,
    SpinSystemError,
    alanine,
    build_hamiltonian,
    hamiltonian_diagonal,
    linewidth,
    propagator,
    single_spin_op,
)


def kron_oracle_hamiltonian(system):
    """Independent construction: explicit tensor products, no shortcuts."""
    n = system.n_spins
    h = np.zeros((2**n, 2**n), dtype=complex)
    for i in range(n):
        h += (2 * math.pi * system.offsets_hz[i] / 2.0) * single_spin_op(n, i, SIGMA_Z)
    for i in range(n):
        for j in range(i):
            zz = single_spin_op(n, i, SIGMA_Z) @ single_spin_op(n, j, SIGMA_Z)
            h += (math.pi / 2.0) * system.j_hz[i][j] * zz
    return h


class TestBuildHamiltonian:
    def test_alanine_ground_state_coupling_energy(self, ala):
        h = build_hamiltonian(ala, FrameChoice.COUPLINGS_ONLY)
        expected = (math.pi / 2.0) * (56.0 + 36.0 + 1.57)
        assert h.matrix[0, 0].real == pytest.approx(expected, abs=1e-12)

    def test_trivial_system_is_zero(self):
        sys0 = SpinSystem((0.0, 0.0), ((0.0, 0.0), (0.0, 0.0)), (1.0, 1.0), (1.0, 1.0))
        h = build_hamiltonian(sys0, FrameChoice.ROTATING)
        assert np.abs(h.matrix).max() == 0.0

    def test_two_spin_matches_kron_oracle(self, two_spin):
        h = build_hamiltonian(two_spin, FrameChoice.ROTATING)
        assert np.abs(h.matrix - kron_oracle_hamiltonian(two_spin)).max() < 1e-10

    def test_diagonal_and_real(self, ala):
        for frame in FrameChoice:
            h = build_hamiltonian(ala, frame).matrix
            off = h - np.diag(np.diag(h))
            assert np.abs(off).max() == 0.0
            assert np.abs(np.diag(h).imag).max() == 0.0

    def test_frames_differ_only_in_zeeman(self, ala):
        rot = hamiltonian_diagonal(ala, FrameChoice.ROTATING)
        coup = hamiltonian_diagonal(ala, FrameChoice.COUPLINGS_ONLY)
        lab = hamiltonian_diagonal(ala, FrameChoice.LAB, receiver_offset_hz=300.0)
        zeeman = rot - coup
        # the pure-Zeeman part is linear in the offsets
        expect = np.zeros_like(zeeman)
        from djnmr.spinsys import zeeman_signs

        signs = zeeman_signs(3)
        for i in range(3):
            expect += math.pi * ala.offsets_hz[i] * signs[:, i]
        assert np.abs(zeeman - expect).max() < 1e-9
        # lab vs rotating: uniform receiver shift, couplings part identical
        shift = lab - rot
        expect_shift = np.sum(math.pi * 300.0 * signs, axis=1)
        assert np.abs(shift - expect_shift).max() < 1e-9


class TestPropagator:
    def test_t_zero_is_identity(self, ala):
        h = build_hamiltonian(ala, FrameChoice.ROTATING)
        u = propagator(h, 0.0)
        assert np.abs(u.matrix - np.eye(8)).max() < 1e-14

    def test_half_j_matches_coupling_gate_definition(self, two_spin):
        j = two_spin.j_hz[1][0]
        h = build_hamiltonian(two_spin, FrameChoice.COUPLINGS_ONLY)
        u = propagator(h, 1.0 / (2.0 * j)).matrix
        zz = np.diag(np.kron(SIGMA_Z, SIGMA_Z)).real
        expected = np.diag(np.exp(-1j * (math.pi / 4.0) * zz))
        assert np.abs(u - expected).max() < 1e-12

    def test_group_property(self, ala):
        h = build_hamiltonian(ala, FrameChoice.ROTATING)
        u1 = propagator(h, 0.004).matrix
        u2 = propagator(h, 0.009).matrix
        u12 = propagator(h, 0.013).matrix
        assert np.abs(u1 @ u2 - u12).max() < 1e-10

    def test_random_diagonal_matches_taylor_series(self):
        rng = np.random.default_rng(42)
        diag = rng.uniform(-200.0, 200.0, size=8)
        from djnmr.spinsys import HamiltonianMatrix

        h = HamiltonianMatrix(np.diag(diag.astype(complex)), FrameChoice.ROTATING)
        t = 0.013
        u = propagator(h, t).matrix
        # truncated Taylor series of exp(-i H t), scaled-and-squared for accuracy
        m = -1j * h.matrix * (t / 1024.0)
        series = np.eye(8, dtype=complex)
        term = np.eye(8, dtype=complex)
        for k in range(1, 20):
            term = term @ m / k
            series = series + term
        for _ in range(10):
            series = series @ series
        assert np.abs(u - series).max() < 1e-10

    def test_negative_time_rejected(self, ala):
        h = build_hamiltonian(ala, FrameChoice.ROTATING)
        with pytest.raises(SpinSystemError):
            propagator(h, -1.0)


class TestLinewidth:
    def test_alanine_natural_width(self, ala):
        assert linewidth(ala, 1) == pytest.approx(2.0 / 0.417, rel=1e-12)

    def test_infinite_t2_limit(self):
        sys0 = SpinSystem((0.0,), ((0.0,),), (1e9,), (1e9,))
        assert linewidth(sys0, 0) == pytest.approx(0.0, abs=1e-8)

    def test_override_maps_fwhm_to_rad_s(self):
        sys0 = SpinSystem((0.0,), ((0.0,),), (1.0,), (1.0,), (1.0,))
        assert linewidth(sys0, 0) == pytest.approx(2.0 * math.pi, rel=1e-12)

    def test_index_out_of_range(self, ala):
        with pytest.raises(SpinSystemError):
            linewidth(ala, 3)


class TestValidation:
    def test_asymmetric_couplings_rejected(self):
        with pytest.raises(SpinSystemError):
            SpinSystem((0.0, 0.0), ((0.0, 1.0), (2.0, 0.0)), (1.0, 1.0), (1.0, 1.0))

    def test_nonzero_diagonal_rejected(self):
        with pytest.raises(SpinSystemError):
            SpinSystem((0.0,), ((1.0,),), (1.0,), (1.0,))

    def test_nonpositive_t2_rejected(self):
        with pytest.raises(SpinSystemError):
            SpinSystem((0.0,), ((0.0,),), (1.0,), (0.0,))

    def test_too_many_spins_rejected(self):
        n = 7
        with pytest.raises(SpinSystemError):
            SpinSystem(
                (0.0,) * n,
                tuple((0.0,) * n for _ in range(n)),
                (1.0,) * n,
                (1.0,) * n,
            )

    def test_json_round_trip(self, tmp_path, ala):
        path = tmp_path / "sys.json"
        path.write_text(json.dumps(ala.to_dict()))
        again = SpinSystem.from_json(path)
        assert again == ala

    def test_bundled_alanine_values(self):
        sys = alanine()
        assert sys.coupling(2, 1) == 56.0
        assert sys.coupling(1, 0) == 36.0
        assert sys.coupling(2, 0) == 1.57
        assert sys.t2_s == (0.702, 0.417, 1.25)
        assert sys.t1_s == (1.45, 2.82, 20.3)

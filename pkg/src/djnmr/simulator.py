"""Density-operator simulation of pulse programs and signal acquisition.

States are deviation density operators (traceless, product-operator
normalization): the thermal equilibrium state of N weakly coupled
homonuclear spins is Iz^(N-1) + ... + Iz^0 up to an overall scale that
cancels out of every comparison.

Coherent evolution is unitary throughout; relaxation enters only as a
per-spin T2 envelope on the acquired signal.  All Hamiltonians are taken
in the receiver rotating frame with hbar = 1 (energies in rad/s).

Two simulation modes:

* ``ideal``   - instantaneous rotations, couplings-only delays;
* ``timed``   - delays evolve under couplings plus Zeeman offsets, pulses
  take their configured durations during which every qubit precesses at its
  offset (couplings are neglected during pulses and gaps).  Together with
  the compiler's Zeeman bookkeeping this reproduces the ideal result after
  the passive phases are applied.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .circuit import RotXY, TotalDelay, rot_xy_matrix, rot_z_matrix
from .compiler import SELF_PHASE_MODELS, PulseProgram, RefocusedDelay
from .spinsys import (
    FrameChoice,
    SpinSystem,
    hamiltonian_diagonal,
    linewidth,
    single_spin_op,
    spin_half_op,
)


class SimulationError(ValueError):
    """Raised for inconsistent simulation inputs."""


@dataclass(frozen=True)
class DensityOperator:
    """Deviation density operator; Hermitian to 1e-10."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise SimulationError("density operator must be square")
        if np.abs(m - m.conj().T).max() > 1e-10:
            raise SimulationError("density operator must be Hermitian to 1e-10")
        object.__setattr__(self, "matrix", m)

    @property
    def n_spins(self) -> int:
        return self.matrix.shape[0].bit_length() - 1

    def conjugated(self, u: np.ndarray) -> "DensityOperator":
        return DensityOperator(u @ self.matrix @ u.conj().T)


@dataclass(frozen=True)
class Fid:
    """Complex free-induction decay: samples of the transverse magnetization."""

    samples: np.ndarray
    dwell_s: float
    phi_acq_deg: float = 0.0

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex)
        if s.size == 0:
            raise SimulationError("FID needs at least one sample")
        if self.dwell_s <= 0:
            raise SimulationError("dwell time must be > 0")
        object.__setattr__(self, "samples", s)

    def to_dict(self) -> dict:
        return {
            "dwell_s": self.dwell_s,
            "phi_acq_deg": self.phi_acq_deg,
            "re": [float(v) for v in self.samples.real],
            "im": [float(v) for v in self.samples.imag],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Fid":
        try:
            samples = np.array(d["re"], dtype=float) + 1j * np.array(d["im"], dtype=float)
            return cls(samples=samples, dwell_s=float(d["dwell_s"]),
                       phi_acq_deg=float(d.get("phi_acq_deg", 0.0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise SimulationError(f"malformed FID record: {exc}") from exc


def thermal_state(system: SpinSystem) -> DensityOperator:
    """Equal-weight deviation state: one Iz per spin."""
    n = system.n_spins
    m = sum(spin_half_op(n, s, "z") for s in range(n))
    return DensityOperator(m)


def fiducial_state(system: SpinSystem) -> DensityOperator:
    """State right after the -y preparation rotations: -Ix on every spin."""
    n = system.n_spins
    m = -sum(spin_half_op(n, s, "x") for s in range(n))
    return DensityOperator(m)


def _rotation(n_spins: int, spin: int, phase_deg: float, angle_deg: float) -> np.ndarray:
    return single_spin_op(n_spins, spin, rot_xy_matrix(phase_deg, angle_deg))


def _z_rotations(n_spins: int, angles_deg) -> np.ndarray:
    u = np.array([[1.0 + 0j]])
    for s in range(n_spins - 1, -1, -1):
        u = np.kron(u, rot_z_matrix(angles_deg[s]))
    return u


def _pulse_zeeman(system: SpinSystem, spin: int, timings) -> np.ndarray:
    """Offset precession during one pulse plus the trailing gap."""
    model = SELF_PHASE_MODELS[timings.self_phase_model]
    dur, gap = timings.pulse(spin), timings.gap_s
    angles = []
    for s in range(system.n_spins):
        nu = system.offsets_hz[s]
        own = model(nu, dur) if s == spin else 360.0 * nu * dur
        angles.append(own + 360.0 * nu * gap)
    return _z_rotations(system.n_spins, angles)


def apply_program(
    rho: DensityOperator,
    program: PulseProgram,
    system: SpinSystem,
    mode: str = "ideal",
) -> DensityOperator:
    """Propagate a state through a compiled pulse program's active section."""
    if mode not in ("ideal", "timed"):
        raise SimulationError(f"unknown simulation mode {mode!r}")
    if program.n_spins != system.n_spins:
        raise SimulationError("program/system spin count mismatch")
    if rho.matrix.shape[0] != system.dim:
        raise SimulationError("state dimension does not match the system")
    n = system.n_spins
    timed = mode == "timed"
    h_coup = hamiltonian_diagonal(system, FrameChoice.COUPLINGS_ONLY)
    h_full = hamiltonian_diagonal(system, FrameChoice.ROTATING)
    h_delay = h_full if timed else h_coup

    u = np.eye(system.dim, dtype=complex)
    for op in program.active:
        if isinstance(op, RotXY):
            u = _rotation(n, op.spin, op.phase_deg, op.angle_deg) @ u
            if timed:
                u = _pulse_zeeman(system, op.spin, program.timings) @ u
        elif isinstance(op, TotalDelay):
            u = np.diag(np.exp(-1j * h_delay * op.t)) @ u
        elif isinstance(op, RefocusedDelay):
            half = np.diag(np.exp(-1j * h_delay * op.total_t / 2.0))
            for idx in (0, 1):
                u = half @ u
                u = _rotation(n, op.refocus_spin, op.refocus_phases_deg[idx], 180.0) @ u
                if timed:
                    u = _pulse_zeeman(system, op.refocus_spin, program.timings) @ u
        else:
            raise SimulationError(f"unsupported active op {op!r}")
    return rho.conjugated(u)


def apply_passive(rho: DensityOperator, passive_deg) -> DensityOperator:
    """Final per-qubit z rotations, realized in hardware as data phase shifts."""
    n = rho.n_spins
    if len(passive_deg) != n:
        raise SimulationError("one passive phase per qubit required")
    return rho.conjugated(_z_rotations(n, passive_deg))


def run_program(
    rho: DensityOperator,
    program: PulseProgram,
    system: SpinSystem,
    mode: str = None,
) -> DensityOperator:
    """Active section followed by the passive phases."""
    if mode is None:
        mode = program.metadata.get("mode", "ideal")
    out = apply_program(rho, program, system, mode)
    return apply_passive(out, program.passive_deg)


def acquire(
    rho: DensityOperator,
    system: SpinSystem,
    n_points: int = 4096,
    sweep_hz: float = 400.0,
    phi_acq_deg: float = 0.0,
) -> Fid:
    """Sample the complex transverse magnetization M+ = sum_j <Ix^j + i Iy^j>.

    Free evolution runs under the rotating-frame Hamiltonian; each spin's
    contribution decays with its own linewidth (2/T2 or the configured
    override), applied term-wise through spin-resolved traces.
    """
    if n_points <= 0 or sweep_hz <= 0:
        raise SimulationError("n_points and sweep must be positive")
    if rho.matrix.shape[0] != system.dim:
        raise SimulationError("state dimension does not match the system")
    n = system.n_spins
    dwell = 1.0 / sweep_hz
    t = np.arange(n_points) * dwell
    energies = hamiltonian_diagonal(system, FrameChoice.ROTATING)
    phase = np.exp(1j * math.radians(phi_acq_deg))
    m = rho.matrix

    samples = np.zeros(n_points, dtype=complex)
    for j in range(n):
        lam = linewidth(system, j) / 2.0  # amplitude decay rate 1/T2
        bit = 1 << j
        ups = np.array([x for x in range(system.dim) if x & bit])
        los = ups ^ bit
        # Tr(I+^j rho(t)): matrix elements rho[up, lo] oscillate at E_up - E_lo
        amps = m[ups, los]
        freqs = energies[ups] - energies[los]
        if np.abs(amps).max() > 0.0:
            samples += phase * np.exp(-lam * t) * (
                np.exp(-1j * np.outer(t, freqs)) @ amps
            )
    return Fid(samples=samples, dwell_s=dwell, phi_acq_deg=phi_acq_deg)


_AXES = "exyz"


def _basis_matrix(n_spins: int, label: str) -> np.ndarray:
    """Product-operator basis element with the 2^(q-1) weight convention
    (Iz, 2 Iz Ix, 4 Iz Ix Iz, ...); label runs spin N-1 to spin 0."""
    q = sum(1 for c in label if c != "e")
    m = np.array([[1.0 + 0j]])
    for c in label:
        m = np.kron(m, np.eye(2) if c == "e" else 0.5 * _pauli(c))
    return m * (2.0 ** (q - 1)) if q else m


def _pauli(axis: str) -> np.ndarray:
    from .spinsys import SIGMA_X, SIGMA_Y, SIGMA_Z

    return {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}[axis]


@dataclass(frozen=True)
class ProductExpansion:
    """Coefficients of a state over the weighted product-operator basis.

    Keys are axis strings over 'exyz', one character per spin, highest spin
    first: for three spins, 'xzz' is the coefficient of 4 Ix^2 Iz^1 Iz^0.
    """

    n_spins: int
    coeffs: dict

    def coeff(self, label: str) -> float:
        return self.coeffs.get(label, 0.0)

    def reconstruct(self) -> np.ndarray:
        dim = 2**self.n_spins
        m = np.zeros((dim, dim), dtype=complex)
        for label, c in self.coeffs.items():
            m += c * _basis_matrix(self.n_spins, label)
        return m

    def transverse_terms(self, spin: int):
        """Terms with exactly one transverse factor, on `spin` (observable
        single-quantum terms contributing to that spin's multiplet)."""
        pos = self.n_spins - 1 - spin
        out = {}
        for label, c in self.coeffs.items():
            transverse = [i for i, ch in enumerate(label) if ch in "xy"]
            if transverse == [pos]:
                out[label] = c
        return out


def product_expansion(rho: DensityOperator, tol: float = 1e-12) -> ProductExpansion:
    """Orthogonal projection of the state onto the product-operator basis."""
    n = rho.n_spins
    norm = 2.0 ** (n - 2)
    coeffs = {}
    for combo in itertools.product(_AXES, repeat=n):
        label = "".join(combo)
        b = _basis_matrix(n, label)
        if label == "e" * n:
            c = np.trace(rho.matrix) / (2.0**n)
        else:
            c = np.trace(b @ rho.matrix) / norm
        if abs(c) > tol:
            if abs(c.imag) > 1e-9:
                raise SimulationError(f"non-real expansion coefficient at {label}")
            coeffs[label] = float(c.real)
    return ProductExpansion(n_spins=n, coeffs=coeffs)


def calibration_scan(system: SpinSystem, spin: int, delays) -> np.ndarray:
    """Pulse-power calibration curve: [90]y - T - [90]x - acquire.

    For an exact 90 degree rotation the first-point intensity follows
    cos(2 pi nu T) where nu is the spin's receiver offset.
    """
    if not 0 <= spin < system.n_spins:
        raise SimulationError(f"spin index {spin} out of range")
    n = system.n_spins
    h_full = hamiltonian_diagonal(system, FrameChoice.ROTATING)
    r_y = _rotation(n, spin, 90.0, 90.0)
    r_x = _rotation(n, spin, 0.0, 90.0)
    bit = 1 << spin
    ups = np.array([x for x in range(system.dim) if x & bit])
    los = ups ^ bit
    rho0 = thermal_state(system).matrix
    out = []
    for t in delays:
        u = r_x @ np.diag(np.exp(-1j * h_full * t)) @ r_y
        m = u @ rho0 @ u.conj().T
        out.append(float(np.sum(m[ups, los]).real))
    return np.array(out)

"""Spin-system model: offsets, scalar couplings, Hamiltonians, propagators.

Conventions used throughout the package:

* ``n_spins`` weakly coupled spin-1/2 nuclei; spin ``i`` carries bit ``x_i``
  of the computational basis state ``|x_{N-1} ... x_0>``.  Bit 0 is the least
  significant bit of the basis index and ``|0>`` is the +z eigenstate of
  ``sigma_z``.
* All frequencies are stored in Hz; Hamiltonians are returned in rad/s with
  hbar = 1.  Offsets are relative to a single receiver reference frequency,
  so "rotating" means the receiver rotating frame.
* H = sum_i (omega_i / 2) sigma_z^i + (pi/2) sum_{i>j} J_ij sigma_z^i sigma_z^j,
  which contains only sigma_z terms and is therefore diagonal in the
  computational basis.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources

import numpy as np

MAX_SPINS = 6

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)


class FrameChoice(Enum):
    """Reference frame for the Zeeman sum of the Hamiltonian."""

    LAB = "lab"
    ROTATING = "rotating"
    COUPLINGS_ONLY = "couplings-only"


class SpinSystemError(ValueError):
    """Raised for invalid spin-system parameters or indices."""


def single_spin_op(n_spins: int, spin: int, op: np.ndarray) -> np.ndarray:
    """Embed a 2x2 operator on one spin into the full 2^N Hilbert space.

    The Kronecker product runs from spin ``n_spins - 1`` (leftmost factor)
    down to spin 0, matching the ``|x_{N-1} ... x_0>`` index convention.
    """
    if not 0 <= spin < n_spins:
        raise SpinSystemError(f"spin index {spin} out of range for {n_spins} spins")
    out = np.array([[1.0 + 0.0j]])
    for s in range(n_spins - 1, -1, -1):
        out = np.kron(out, op if s == spin else IDENTITY_2)
    return out


def spin_half_op(n_spins: int, spin: int, axis: str) -> np.ndarray:
    """I_axis = sigma_axis / 2 embedded on one spin."""
    sigma = {"x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}[axis]
    return single_spin_op(n_spins, spin, sigma / 2.0)


def zeeman_signs(n_spins: int) -> np.ndarray:
    """Matrix of sigma_z eigenvalues: signs[x, i] = +1 if bit i of x is 0."""
    x = np.arange(2**n_spins)
    bits = (x[:, None] >> np.arange(n_spins)[None, :]) & 1
    return 1.0 - 2.0 * bits


@dataclass(frozen=True)
class SpinSystem:
    """Physical machine model: offsets, scalar couplings and relaxation.

    Parameters
    ----------
    offsets_hz : tuple of float
        Rotating-frame offset nu^j of each spin, Hz.
    j_hz : tuple of tuple of float
        Symmetric scalar-coupling matrix J_ij, Hz, zero diagonal.
    t1_s, t2_s : tuple of float
        Longitudinal / transverse relaxation times, s, strictly positive.
    linewidth_hz : tuple of float or None
        Optional per-spin full width at half maximum overriding the 2/T2
        natural linewidth (inhomogeneous broadening).
    """

    offsets_hz: tuple
    j_hz: tuple
    t1_s: tuple
    t2_s: tuple
    linewidth_hz: tuple = None

    def __post_init__(self):
        n = len(self.offsets_hz)
        if n < 1 or n > MAX_SPINS:
            raise SpinSystemError(f"n_spins must be in 1..{MAX_SPINS}, got {n}")
        object.__setattr__(self, "offsets_hz", tuple(float(v) for v in self.offsets_hz))
        j = tuple(tuple(float(v) for v in row) for row in self.j_hz)
        object.__setattr__(self, "j_hz", j)
        object.__setattr__(self, "t1_s", tuple(float(v) for v in self.t1_s))
        object.__setattr__(self, "t2_s", tuple(float(v) for v in self.t2_s))
        lw = self.linewidth_hz
        if lw is None:
            lw = (None,) * n
        lw = tuple(None if v is None else float(v) for v in lw)
        object.__setattr__(self, "linewidth_hz", lw)

        if len(j) != n or any(len(row) != n for row in j):
            raise SpinSystemError("coupling matrix must be n_spins x n_spins")
        if len(self.t1_s) != n or len(self.t2_s) != n or len(lw) != n:
            raise SpinSystemError("per-spin arrays must all have length n_spins")
        for i in range(n):
            if j[i][i] != 0.0:
                raise SpinSystemError("coupling matrix must have zero diagonal")
            for k in range(n):
                if not math.isfinite(j[i][k]):
                    raise SpinSystemError("couplings must be finite")
                if abs(j[i][k] - j[k][i]) > 1e-12:
                    raise SpinSystemError("coupling matrix must be symmetric")
        for name, arr in (("t1_s", self.t1_s), ("t2_s", self.t2_s)):
            if any(not math.isfinite(v) or v <= 0.0 for v in arr):
                raise SpinSystemError(f"{name} entries must be finite and > 0")
        if any(not math.isfinite(v) for v in self.offsets_hz):
            raise SpinSystemError("offsets must be finite")
        if any(v is not None and (not math.isfinite(v) or v <= 0.0) for v in lw):
            raise SpinSystemError("linewidth overrides must be finite and > 0")

    @property
    def n_spins(self) -> int:
        return len(self.offsets_hz)

    @property
    def dim(self) -> int:
        return 2**self.n_spins

    def coupling(self, i: int, j: int) -> float:
        return self.j_hz[i][j]

    def to_dict(self) -> dict:
        return {
            "offsets_hz": list(self.offsets_hz),
            "j_hz": [list(row) for row in self.j_hz],
            "t1_s": list(self.t1_s),
            "t2_s": list(self.t2_s),
            "linewidth_hz": list(self.linewidth_hz),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SpinSystem":
        try:
            return cls(
                offsets_hz=tuple(d["offsets_hz"]),
                j_hz=tuple(tuple(row) for row in d["j_hz"]),
                t1_s=tuple(d["t1_s"]),
                t2_s=tuple(d["t2_s"]),
                linewidth_hz=tuple(d.get("linewidth_hz") or [None] * len(d["offsets_hz"])),
            )
        except (KeyError, TypeError) as exc:
            raise SpinSystemError(f"malformed spin-system record: {exc}") from exc

    @classmethod
    def from_json(cls, path) -> "SpinSystem":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def alanine() -> SpinSystem:
    """The bundled three-carbon reference system (qubit 2 = carboxyl,
    1 = alpha, 0 = methyl carbon)."""
    with resources.files("djnmr.data").joinpath("alanine.json").open() as fh:
        return SpinSystem.from_dict(json.load(fh))


@dataclass(frozen=True)
class HamiltonianMatrix:
    """2^N x 2^N Hermitian Hamiltonian, rad/s, diagonal in the z basis."""

    matrix: np.ndarray
    frame: FrameChoice

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", m)
        if np.abs(m - m.conj().T).max() > 1e-12:
            raise SpinSystemError("Hamiltonian must be Hermitian to 1e-12")

    @property
    def energies(self) -> np.ndarray:
        """Diagonal eigenvalues, rad/s (valid because H is diagonal)."""
        return np.real(np.diag(self.matrix))


@dataclass(frozen=True)
class Unitary:
    """Propagator container with a U dagger U = I check."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", m)
        if np.abs(m @ m.conj().T - np.eye(m.shape[0])).max() > 1e-10:
            raise SpinSystemError("matrix is not unitary to 1e-10")


def hamiltonian_diagonal(
    system: SpinSystem,
    frame: FrameChoice = FrameChoice.ROTATING,
    receiver_offset_hz: float = 0.0,
) -> np.ndarray:
    """Diagonal of the Hamiltonian in rad/s.

    ``couplings-only`` drops the Zeeman sum entirely; ``lab`` adds the
    receiver offset to every spin (absolute Zeeman frequencies never enter:
    everything is referenced to the receiver).
    """
    n = system.n_spins
    signs = zeeman_signs(n)
    diag = np.zeros(system.dim)
    if frame is not FrameChoice.COUPLINGS_ONLY:
        extra = receiver_offset_hz if frame is FrameChoice.LAB else 0.0
        for i in range(n):
            omega = 2.0 * math.pi * (system.offsets_hz[i] + extra)
            diag += (omega / 2.0) * signs[:, i]
    for i in range(n):
        for j in range(i):
            jij = system.j_hz[i][j]
            if jij != 0.0:
                diag += (math.pi / 2.0) * jij * signs[:, i] * signs[:, j]
    return diag


def build_hamiltonian(
    system: SpinSystem,
    frame: FrameChoice = FrameChoice.ROTATING,
    receiver_offset_hz: float = 0.0,
) -> HamiltonianMatrix:
    """Full-matrix Hamiltonian for the system in the requested frame."""
    diag = hamiltonian_diagonal(system, frame, receiver_offset_hz)
    return HamiltonianMatrix(np.diag(diag.astype(complex)), frame)


def pair_coupling_diagonal(system: SpinSystem, i: int, j: int) -> np.ndarray:
    """Diagonal of the single coupling term (pi/2) J_ij sigma_z^i sigma_z^j."""
    if i == j:
        raise SpinSystemError("coupling pair needs two distinct spins")
    signs = zeeman_signs(system.n_spins)
    return (math.pi / 2.0) * system.j_hz[i][j] * signs[:, i] * signs[:, j]


def propagator(ham: HamiltonianMatrix, t: float) -> Unitary:
    """U = exp(-i H t); element-wise exact for diagonal H."""
    if t < 0:
        raise SpinSystemError("propagation time must be >= 0")
    m = ham.matrix
    off = m - np.diag(np.diag(m))
    if np.abs(off).max() < 1e-14:
        return Unitary(np.diag(np.exp(-1j * np.real(np.diag(m)) * t)))
    evals, evecs = np.linalg.eigh(m)
    return Unitary((evecs * np.exp(-1j * evals * t)) @ evecs.conj().T)


def linewidth(system: SpinSystem, spin: int) -> float:
    """Full width at half maximum of the spin's absorption line, rad/s.

    Defaults to the natural width 2/T2; a per-spin FWHM override in Hz
    (stored in the system record) maps to 2*pi*FWHM.
    """
    if not 0 <= spin < system.n_spins:
        raise SpinSystemError(f"spin index {spin} out of range")
    override = system.linewidth_hz[spin]
    if override is not None:
        return 2.0 * math.pi * override
    return 2.0 / system.t2_s[spin]

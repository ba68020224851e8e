"""Boolean-function algebra over GF(2).

A function f: {0,1}^n -> {0,1} is stored as a truth table indexed by the
integer x = x_{n-1}...x_0 and as the coefficients of its GF(2) polynomial

    f(x) = XOR over subsets S of {0..n-1} of  a_S * prod_{i in S} x_i.

For n = 3 every balanced or constant table has a vanishing cubic
coefficient, so such functions are fully described by a constant bit, three
linear bits a_i and three quadratic bits a_ij (i > j).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache


class FunctionError(ValueError):
    """Raised for malformed truth tables or inadmissible functions."""


def _check_table(truth_table) -> tuple:
    table = tuple(int(v) for v in truth_table)
    n = len(table)
    if n < 2 or n & (n - 1):
        raise FunctionError(f"table length {n} is not a power of two")
    if any(v not in (0, 1) for v in table):
        raise FunctionError("table entries must be bits")
    return table


@dataclass(frozen=True)
class FunctionSpec:
    """Truth table plus its GF(2) polynomial coefficients.

    ``coeffs[mask]`` is the coefficient of prod_{i in mask} x_i; mask 0 is
    the constant term.
    """

    n_bits: int
    truth_table: tuple
    coeffs: tuple

    @property
    def constant(self) -> int:
        return self.coeffs[0]

    def linear(self, i: int) -> int:
        return self.coeffs[1 << i]

    def quadratic(self, i: int, j: int) -> int:
        if i == j:
            raise FunctionError("quadratic coefficient needs distinct bits")
        return self.coeffs[(1 << i) | (1 << j)]

    @property
    def cubic(self) -> int:
        if self.n_bits != 3:
            raise FunctionError("cubic coefficient is defined for n_bits = 3")
        return self.coeffs[7]

    def linear_terms(self) -> tuple:
        """Indices i with a_i = 1, descending."""
        return tuple(i for i in range(self.n_bits - 1, -1, -1) if self.linear(i))

    def quadratic_terms(self) -> tuple:
        """Pairs (i, j), i > j, with a_ij = 1, descending lexicographically."""
        pairs = []
        for i in range(self.n_bits - 1, 0, -1):
            for j in range(i - 1, -1, -1):
                if self.quadratic(i, j):
                    pairs.append((i, j))
        return tuple(pairs)

    def evaluate(self, x: int) -> int:
        """Evaluate the polynomial at x (must reproduce the truth table)."""
        acc = 0
        for mask in range(len(self.coeffs)):
            if self.coeffs[mask] and (x & mask) == mask:
                acc ^= 1
        return acc

    def polynomial_str(self) -> str:
        parts = []
        for (i, j) in self.quadratic_terms():
            parts.append(f"x{i}x{j}")
        for i in self.linear_terms():
            parts.append(f"x{i}")
        if self.constant:
            parts.append("1")
        return " + ".join(parts) if parts else "0"


def expand_gf2(truth_table) -> FunctionSpec:
    """GF(2) Moebius (subset-XOR) transform of a truth table.

    coeffs[S] = XOR_{T subset of S} f(T); the inverse transform (evaluate)
    reproduces the table exactly.
    """
    table = _check_table(truth_table)
    size = len(table)
    n = size.bit_length() - 1
    coeffs = list(table)
    for i in range(n):
        bit = 1 << i
        for mask in range(size):
            if mask & bit:
                coeffs[mask] ^= coeffs[mask ^ bit]
    return FunctionSpec(n_bits=n, truth_table=table, coeffs=tuple(coeffs))


def from_coeffs(n_bits: int, coeffs: dict) -> FunctionSpec:
    """Build a FunctionSpec from {mask: bit} polynomial coefficients."""
    size = 2**n_bits
    vec = [0] * size
    for mask, bit in coeffs.items():
        if not 0 <= mask < size:
            raise FunctionError(f"coefficient mask {mask} out of range")
        vec[mask] = int(bit)
    table = []
    for x in range(size):
        acc = 0
        for mask in range(size):
            if vec[mask] and (x & mask) == mask:
                acc ^= 1
        table.append(acc)
    return FunctionSpec(n_bits=n_bits, truth_table=tuple(table), coeffs=tuple(vec))


def classify_kind(truth_table) -> str:
    """'constant' | 'balanced' | 'neither' by popcount."""
    table = _check_table(truth_table)
    ones = sum(table)
    if ones in (0, len(table)):
        return "constant"
    if ones * 2 == len(table):
        return "balanced"
    return "neither"


# Table of named representatives: polynomial masks for the constant class
# and the ten balanced classes of 3-bit functions.
_REPRESENTATIVE_COEFFS = {
    "const": (),
    "f1": (0b100,),
    "f2": (0b100, 0b010),
    "f3": (0b100, 0b010, 0b001),
    "f4": (0b110, 0b001),
    "f5": (0b110, 0b100, 0b001),
    "f6": (0b110, 0b100, 0b010, 0b001),
    "f7": (0b110, 0b011, 0b100, 0b010),
    "f8": (0b110, 0b011, 0b100),
    "f9": (0b110, 0b011, 0b101),
    "f10": (0b110, 0b011, 0b101, 0b010, 0b001),
}

REPRESENTATIVE_NAMES = tuple(_REPRESENTATIVE_COEFFS)


def named_function(name: str) -> FunctionSpec:
    key = name.lower()
    if key not in _REPRESENTATIVE_COEFFS:
        raise FunctionError(f"unknown function name {name!r}")
    return from_coeffs(3, {m: 1 for m in _REPRESENTATIVE_COEFFS[key]})


def list_representatives() -> tuple:
    """The constant representative followed by the ten balanced ones."""
    return tuple(named_function(n) for n in REPRESENTATIVE_NAMES)


def _coeff_vector(spec: FunctionSpec) -> tuple:
    """(a, a_2, a_1, a_0, a_21, a_20, a_10) with the constant term zeroed:
    it only contributes a global phase, so functions differing by negation
    share a class.  Ordering fixes the lexicographic tie-break."""
    return (
        0,
        spec.linear(2), spec.linear(1), spec.linear(0),
        spec.quadratic(2, 1), spec.quadratic(2, 0), spec.quadratic(1, 0),
    )


def permute_bits(spec: FunctionSpec, perm) -> FunctionSpec:
    """Relabel input bits: bit i of the result is bit perm[i] of the input."""
    n = spec.n_bits
    if sorted(perm) != list(range(n)):
        raise FunctionError("perm must be a permutation of bit indices")
    table = []
    for x in range(2**n):
        src = 0
        for i in range(n):
            if (x >> i) & 1:
                src |= 1 << perm[i]
        table.append(spec.truth_table[src])
    return expand_gf2(table)


@lru_cache(maxsize=1)
def _canonical_representatives() -> dict:
    out = {}
    for class_id, name in enumerate(REPRESENTATIVE_NAMES):
        spec = named_function(name)
        canon = min(
            _coeff_vector(permute_bits(spec, p))
            for p in itertools.permutations(range(3))
        )
        out[canon] = (class_id, name)
    return out


@dataclass(frozen=True)
class FunctionClass:
    """Permutation-equivalence class assignment of an admissible function."""

    kind: str
    class_id: int
    name: str
    canonical_coeffs: tuple
    permutation: tuple
    active_class: int


def canonical_class(spec: FunctionSpec) -> FunctionClass:
    """Class of a 3-bit balanced or constant function under bit permutations.

    The canonical form is the lexicographically minimal coefficient vector
    (a, a_2, a_1, a_0, a_21, a_20, a_10) over all six bit permutations.
    ``active_class`` depends on the quadratic pattern only: permutationally,
    a 3-bit quadratic part is determined by how many a_ij are set (0..3).
    """
    if spec.n_bits != 3:
        raise FunctionError("classification is defined for n_bits = 3")
    kind = classify_kind(spec.truth_table)
    if kind == "neither":
        raise FunctionError("only balanced or constant functions have a class")
    best = None
    best_perm = None
    for p in itertools.permutations(range(3)):
        vec = _coeff_vector(permute_bits(spec, p))
        if best is None or vec < best:
            best, best_perm = vec, p
    class_id, name = _canonical_representatives()[best]
    return FunctionClass(
        kind=kind,
        class_id=class_id,
        name=name,
        canonical_coeffs=best,
        permutation=best_perm,
        active_class=len(spec.quadratic_terms()),
    )


def all_admissible_tables():
    """All 72 admissible 3-bit truth tables (2 constant + 70 balanced)."""
    tables = [(0,) * 8, (1,) * 8]
    for ones in itertools.combinations(range(8), 4):
        table = [0] * 8
        for x in ones:
            table[x] = 1
        tables.append(tuple(table))
    return tables


def parse_table_string(bits: str) -> tuple:
    """CLI truth-table syntax: one char per input, x = 0 leftmost."""
    if not bits or any(c not in "01" for c in bits):
        raise FunctionError("table must be a nonempty string of 0s and 1s")
    return _check_table(int(c) for c in bits)

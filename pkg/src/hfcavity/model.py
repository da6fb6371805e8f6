"""Composite atom-cavity basis, sparse operator builders, and Hamiltonians.

The atomic space is the Cs D2 manifold (ground F=3,4; excited F'=2..5, 48
levels total or a documented subset), tensored with a truncated Fock space
for the single linearly polarized cavity mode.  All frequencies are plain
MHz referenced to the bare F=4 -> F'=5 transition; a global 2*pi would only
rescale time and leaves every steady state unchanged.

Canonical basis order: atomic states run ground F=3 (m=-3..3), ground F=4,
then excited F'=2..5, each m=-F..F; the flat index is
``atom_index * (n_max + 1) + n``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Mapping

import numpy as np
import scipy.sparse as sp

from .angular import EXCITED_F, GROUND_F, dipole_matrix_element

__all__ = [
    "AtomicState",
    "ModelScope",
    "ModelKind",
    "Basis",
    "build_basis",
    "SystemParams",
    "Constants",
    "DEFAULT_CONSTANTS",
    "load_constants",
    "annihilation",
    "number_operator",
    "manifold_projector",
    "transition_operator",
    "dipole_operator",
    "total_mf_operator",
    "excitation_number_operator",
    "hamiltonian_h0",
    "hamiltonian_h1",
    "hamiltonian_h2",
    "hamiltonian_h3",
    "undriven_hamiltonian",
    "driven_hamiltonian",
]


@dataclass(frozen=True, order=True)
class AtomicState:
    """One Zeeman level: ground (excited=False, f in {3,4}) or excited (f in {2..5})."""

    excited: bool
    f: int
    m: int

    def __post_init__(self):
        allowed = EXCITED_F if self.excited else GROUND_F
        if self.f not in allowed:
            raise ValueError(f"F={self.f} invalid for {'excited' if self.excited else 'ground'} state")
        if abs(self.m) > self.f:
            raise ValueError(f"|m|={abs(self.m)} exceeds F={self.f}")

    @property
    def label(self) -> str:
        return f"{'e' if self.excited else 'g'}{self.f}m{self.m:+d}"


def _manifold(excited: bool, f: int) -> tuple[AtomicState, ...]:
    return tuple(AtomicState(excited, f, m) for m in range(-f, f + 1))


GROUND_STATES = _manifold(False, 3) + _manifold(False, 4)
EXCITED_STATES = tuple(s for f in EXCITED_F for s in _manifold(True, f))
ALL_ATOMIC_STATES = GROUND_STATES + EXCITED_STATES


class ModelScope(Enum):
    """Which atomic manifolds the basis contains."""

    FULL = "full"                      # 48 levels, both ground manifolds
    TOROID_COUPLED = "toroid_coupled"  # F=4 plus F'=3,4,5 (36 levels)
    TOROID_45_ONLY = "toroid_45_only"  # F=4 plus F'=5 (20 levels)
    BARE_CAVITY = "bare_cavity"        # one inert ground level: the no-atom limit


class ModelKind(Enum):
    """Which Hamiltonian/reservoir family applies.

    TOROID: cavity on the F=4 -> F' lines with a classical repump, atomic
    decays of equal polarization share a reservoir per ground manifold.
    PBG: cavity coupled to both ground manifolds, one common reservoir per
    polarization.
    """

    TOROID = "toroid"
    PBG = "pbg"


_SCOPE_STATES = {
    ModelScope.FULL: ALL_ATOMIC_STATES,
    ModelScope.TOROID_COUPLED: _manifold(False, 4) + tuple(
        s for f in (3, 4, 5) for s in _manifold(True, f)
    ),
    ModelScope.TOROID_45_ONLY: _manifold(False, 4) + _manifold(True, 5),
    ModelScope.BARE_CAVITY: (AtomicState(False, 4, 0),),
}


@dataclass(frozen=True)
class Basis:
    """Ordered atomic states tensored with Fock levels 0..n_max."""

    atomic_states: tuple[AtomicState, ...]
    n_max: int

    def __post_init__(self):
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")
        if len(set(self.atomic_states)) != len(self.atomic_states):
            raise ValueError("duplicate atomic states in basis")

    @property
    def n_fock(self) -> int:
        return self.n_max + 1

    @property
    def dim(self) -> int:
        return len(self.atomic_states) * self.n_fock

    @cached_property
    def _atom_index(self) -> dict[AtomicState, int]:
        return {s: i for i, s in enumerate(self.atomic_states)}

    def index(self, state: AtomicState, n: int) -> int:
        if not 0 <= n <= self.n_max:
            raise ValueError(f"photon number {n} outside 0..{self.n_max}")
        return self._atom_index[state] * self.n_fock + n

    def state(self, i: int) -> tuple[AtomicState, int]:
        return self.atomic_states[i // self.n_fock], i % self.n_fock

    def has_state(self, state: AtomicState) -> bool:
        return state in self._atom_index

    def manifold_states(self, excited: bool, f: int) -> tuple[AtomicState, ...]:
        return tuple(s for s in self.atomic_states if s.excited == excited and s.f == f)

    @property
    def ground_f_present(self) -> tuple[int, ...]:
        return tuple(f for f in GROUND_F if self.manifold_states(False, f))

    @property
    def excited_f_present(self) -> tuple[int, ...]:
        return tuple(f for f in EXCITED_F if self.manifold_states(True, f))


def build_basis(scope: ModelScope, n_max: int = 1) -> Basis:
    """Basis for one of the documented model scopes; dim = n_states * (n_max+1)."""
    return Basis(_SCOPE_STATES[scope], n_max)


# --- physical constants ----------------------------------------------------

@dataclass(frozen=True)
class Constants:
    """Cs D2 frequency offsets (MHz).  excited_offsets are omega_{4->F'} - omega_{4->5'}."""

    excited_offsets: Mapping[int, float]
    ground_splitting: float
    provenance: Mapping[str, str] = field(default_factory=dict)


DEFAULT_CONSTANTS = Constants(
    excited_offsets={5: 0.0, 4: -251.0, 3: -452.0, 2: -603.0},
    ground_splitting=9193.0,
    provenance={
        "excited_offsets": "4'-5' and 3'-5' intervals -251 and -452 MHz; "
        "2' placed 151 MHz below 3' from standard Cs reference data",
        "ground_splitting": "Cs clock splitting, rounded to 9193 MHz",
    },
)


def load_constants(path: str | Path) -> Constants:
    """Read a constants JSON file (see README for the schema)."""
    with open(path) as fh:
        doc = json.load(fh)
    offsets = {int(k): float(v) for k, v in doc["excited_offsets_MHz"].items()}
    missing = set(EXCITED_F) - set(offsets)
    if missing:
        raise ValueError(f"constants file lacks excited offsets for F'={sorted(missing)}")
    return Constants(
        excited_offsets=offsets,
        ground_splitting=float(doc["ground_splitting_MHz"]),
        provenance=doc.get("provenance", {}),
    )


# --- system parameters ------------------------------------------------------

@dataclass(frozen=True)
class SystemParams:
    """All rates and detunings, in MHz.

    Detunings are stored relative to the bare 4->5' line: ``cavity_detuning``
    is omega_c - omega_45', ``probe_detuning`` is omega_p - omega_45', and
    ``repump_detuning`` is omega_r - omega_GSS - omega_45' (so a repump
    resonant with 3->4' has repump_detuning equal to the 4' offset).  The
    rotating-frame detunings Delta_c, Delta_r, Delta_F' are derived.
    """

    g: float
    kappa: float
    gamma: float
    epsilon_mod: float = 0.0
    epsilon_phase: float = 0.0
    omega_r_rabi: float = 0.0
    cavity_detuning: float = 0.0
    probe_detuning: float = 0.0
    repump_detuning: float = 0.0
    excited_offsets: Mapping[int, float] = field(
        default_factory=lambda: dict(DEFAULT_CONSTANTS.excited_offsets)
    )
    ground_splitting: float = DEFAULT_CONSTANTS.ground_splitting

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be > 0")
        if self.gamma < 0 or self.g < 0:
            raise ValueError("gamma and g must be >= 0")
        if abs(self.excited_offsets.get(5, 0.0)) > 1e-12:
            raise ValueError("offsets are referenced to the 4->5' line; offset[5] must be 0")

    @property
    def epsilon(self) -> complex:
        return self.epsilon_mod * np.exp(1j * self.epsilon_phase)

    @property
    def delta_c(self) -> float:
        return self.cavity_detuning - self.probe_detuning

    @property
    def delta_r(self) -> float:
        return self.repump_detuning - self.probe_detuning

    def delta_fp(self, fp: int) -> float:
        return self.excited_offsets[fp] - self.probe_detuning

    def scaled(self, s: float) -> "SystemParams":
        """Every rate and frequency multiplied by s (steady states are invariant)."""
        return replace(
            self,
            g=self.g * s,
            kappa=self.kappa * s,
            gamma=self.gamma * s,
            epsilon_mod=self.epsilon_mod * s,
            omega_r_rabi=self.omega_r_rabi * s,
            cavity_detuning=self.cavity_detuning * s,
            probe_detuning=self.probe_detuning * s,
            repump_detuning=self.repump_detuning * s,
            excited_offsets={k: v * s for k, v in self.excited_offsets.items()},
            ground_splitting=self.ground_splitting * s,
        )


# --- operator builders -------------------------------------------------------

def annihilation(basis: Basis) -> sp.csr_matrix:
    """Cavity annihilation operator a on the truncated Fock factor."""
    rows, cols, vals = [], [], []
    for ai in range(len(basis.atomic_states)):
        base = ai * basis.n_fock
        for n in range(1, basis.n_fock):
            rows.append(base + n - 1)
            cols.append(base + n)
            vals.append(np.sqrt(n))
    return sp.csr_matrix((vals, (rows, cols)), shape=(basis.dim, basis.dim), dtype=complex)


def number_operator(basis: Basis) -> sp.csr_matrix:
    diag = np.array([n for _ in basis.atomic_states for n in range(basis.n_fock)], dtype=complex)
    return sp.diags(diag, format="csr")


def manifold_projector(basis: Basis, excited: bool, f: int) -> sp.csr_matrix:
    """|F><F| (or |F'><F'|) summed over Zeeman levels, identity on the Fock factor."""
    diag = np.zeros(basis.dim, dtype=complex)
    for s in basis.manifold_states(excited, f):
        for n in range(basis.n_fock):
            diag[basis.index(s, n)] = 1.0
    return sp.diags(diag, format="csr")


def transition_operator(basis: Basis, to_state: AtomicState, from_state: AtomicState) -> sp.csr_matrix:
    """|to><from| on the atomic factor, identity on the Fock factor."""
    rows = [basis.index(to_state, n) for n in range(basis.n_fock)]
    cols = [basis.index(from_state, n) for n in range(basis.n_fock)]
    return sp.csr_matrix(
        (np.ones(basis.n_fock), (rows, cols)), shape=(basis.dim, basis.dim), dtype=complex
    )


def dipole_operator(basis: Basis, q: int, f: int, fp: int) -> sp.csr_matrix:
    """Lowering operator D_q(F,F') = sum_m |F,m> mu_q <F',m+q|, identity on Fock.

    Returns the zero operator when either manifold is absent from the basis
    or when the F -> F' channel is selection-rule forbidden.
    """
    rows, cols, vals = [], [], []
    for upper in basis.manifold_states(True, fp):
        lower = AtomicState(False, f, upper.m - q) if abs(upper.m - q) <= f else None
        if lower is None or not basis.has_state(lower):
            continue
        coeff = dipole_matrix_element(f, lower.m, q, fp, upper.m)
        if coeff == 0.0:
            continue
        for n in range(basis.n_fock):
            rows.append(basis.index(lower, n))
            cols.append(basis.index(upper, n))
            vals.append(coeff)
    return sp.csr_matrix((vals, (rows, cols)), shape=(basis.dim, basis.dim), dtype=complex)


def total_mf_operator(basis: Basis) -> sp.csr_matrix:
    diag = np.array([s.m for s in basis.atomic_states for _ in range(basis.n_fock)], dtype=complex)
    return sp.diags(diag, format="csr")


def excitation_number_operator(basis: Basis) -> sp.csr_matrix:
    """N = a'a + sum_F' |F'><F'|; conserved by the undriven Hamiltonians."""
    op = number_operator(basis)
    for fp in basis.excited_f_present:
        op = op + manifold_projector(basis, True, fp)
    return op.tocsr()


# --- Hamiltonians -------------------------------------------------------------

def _cavity_coupling(basis: Basis, g: float, ground_fs: tuple[int, ...]) -> sp.csr_matrix:
    """g * sum (a' D_0(F,F') + h.c.) over the manifolds present in the basis."""
    a = annihilation(basis)
    h = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    for f in ground_fs:
        if f not in basis.ground_f_present:
            continue
        for fp in basis.excited_f_present:
            d = dipole_operator(basis, 0, f, fp)
            if d.nnz:
                term = a.conj().T @ d
                h = h + g * (term + term.conj().T)
    return h.tocsr()


def _drive(basis: Basis, epsilon: complex) -> sp.csr_matrix:
    a = annihilation(basis)
    return (epsilon * a.conj().T + np.conj(epsilon) * a).tocsr()


def hamiltonian_h0(params: SystemParams, basis: Basis) -> sp.csr_matrix:
    """Undriven Hamiltonian with the cavity coupled to the F=4 -> F' lines.

    omega_c a'a + sum_F' omega_F' |F'><F'| + g sum_F' (a' D_0(4,F') + h.c.),
    all frequencies referenced to the bare 4->5' transition.
    """
    h = params.cavity_detuning * number_operator(basis)
    for fp in basis.excited_f_present:
        h = h + params.excited_offsets[fp] * manifold_projector(basis, True, fp)
    return (h + _cavity_coupling(basis, params.g, (4,))).tocsr()


def hamiltonian_h1(params: SystemParams, basis: Basis) -> sp.csr_matrix:
    """Driven toroid-regime Hamiltonian in the frame rotating with the probe.

    Detunings Delta_F', Delta_r, Delta_c; cavity coupling on F=4 -> F'; the
    classical repump on F=3 -> F' with Rabi amplitude Omega_r; cavity drive
    epsilon.  Repump terms vanish on bases without the F=3 manifold.
    """
    h = params.delta_c * number_operator(basis)
    for fp in basis.excited_f_present:
        h = h + params.delta_fp(fp) * manifold_projector(basis, True, fp)
    if 3 in basis.ground_f_present:
        h = h + params.delta_r * manifold_projector(basis, False, 3)
        for fp in basis.excited_f_present:
            d = dipole_operator(basis, 0, 3, fp)
            if d.nnz:
                h = h + params.omega_r_rabi * (d + d.conj().T)
    h = h + _cavity_coupling(basis, params.g, (4,))
    return (h + _drive(basis, params.epsilon)).tocsr()


def hamiltonian_h2(params: SystemParams, basis: Basis) -> sp.csr_matrix:
    """Undriven Hamiltonian with the cavity coupled to both ground manifolds.

    As hamiltonian_h0 plus the -omega_GSS offset on F=3 and coupling terms
    g (a' D_0(F,F') + h.c.) for F = 3 and 4.
    """
    h = params.cavity_detuning * number_operator(basis)
    for fp in basis.excited_f_present:
        h = h + params.excited_offsets[fp] * manifold_projector(basis, True, fp)
    if 3 in basis.ground_f_present:
        h = h - params.ground_splitting * manifold_projector(basis, False, 3)
    return (h + _cavity_coupling(basis, params.g, (3, 4))).tocsr()


def hamiltonian_h3(params: SystemParams, basis: Basis) -> sp.csr_matrix:
    """Driven version of hamiltonian_h2 in the frame rotating with the probe."""
    h = params.delta_c * number_operator(basis)
    for fp in basis.excited_f_present:
        h = h + params.delta_fp(fp) * manifold_projector(basis, True, fp)
    if 3 in basis.ground_f_present:
        h = h - params.ground_splitting * manifold_projector(basis, False, 3)
    h = h + _cavity_coupling(basis, params.g, (3, 4))
    return (h + _drive(basis, params.epsilon)).tocsr()


def undriven_hamiltonian(kind: ModelKind, params: SystemParams, basis: Basis) -> sp.csr_matrix:
    builder = hamiltonian_h0 if kind is ModelKind.TOROID else hamiltonian_h2
    return builder(params, basis)


def driven_hamiltonian(kind: ModelKind, params: SystemParams, basis: Basis) -> sp.csr_matrix:
    builder = hamiltonian_h1 if kind is ModelKind.TOROID else hamiltonian_h3
    return builder(params, basis)

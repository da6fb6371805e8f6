"""Open-system machinery: collapse operators, Liouvillian, steady states.

The dissipator convention is D[c]rho = 2 c rho c' - c'c rho - rho c'c, so
kappa and gamma are field and dipole amplitude decay rates and excited-state
populations decay at 2*gamma.  Atomic decays of equal polarization share a
reservoir: one operator per (polarization, ground manifold) in the toroid
regime, one per polarization in the big-coupling regime, which produces the
cross-F' interference terms responsible for the dark central band.

Steady states solve L rho = 0 with the trace condition replacing one
redundant row, by sparse LU with one step of iterative refinement.  An
optional m_F -> -m_F symmetry reduction solves in the reflection-symmetric
sector only; it is off by default and asserted against the full solve.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .model import (
    AtomicState,
    Basis,
    ModelKind,
    SystemParams,
    annihilation,
    dipole_operator,
)

__all__ = [
    "CollapseMode",
    "CollapseSet",
    "Liouvillian",
    "SteadyStateResult",
    "DegenerateSteadyStateError",
    "SolverError",
    "collapse_mode_for",
    "collapse_operators",
    "liouvillian",
    "steady_state",
    "observables",
    "solve_steady_state",
    "m_reflection_unitary",
    "symmetric_sector_isometry",
]


class DegenerateSteadyStateError(RuntimeError):
    """The Liouvillian null space is more than one-dimensional."""


class SolverError(RuntimeError):
    """The steady-state solve failed numerically."""


class CollapseMode(Enum):
    PER_GROUND_MANIFOLD = "per_ground_manifold"  # reservoirs split by final ground F
    GLOBAL_COMMON = "global_common"              # one reservoir per polarization


def collapse_mode_for(kind: ModelKind) -> CollapseMode:
    return (
        CollapseMode.PER_GROUND_MANIFOLD
        if kind is ModelKind.TOROID
        else CollapseMode.GLOBAL_COMMON
    )


@dataclass(frozen=True)
class CollapseSet:
    """Atomic collapse operators (rate gamma each) plus the cavity operator a (rate kappa)."""

    atomic_ops: tuple[sp.csr_matrix, ...]
    cavity_op: sp.csr_matrix
    mode: CollapseMode | None = None


def collapse_operators(basis: Basis, mode: CollapseMode) -> CollapseSet:
    """Common-reservoir collapse operators for the requested mode.

    PER_GROUND_MANIFOLD sums D_q(F,F') over F' for each present ground F and
    each polarization (6 operators on the full basis); GLOBAL_COMMON also
    sums over F (3 operators).
    """
    ops: list[sp.csr_matrix] = []
    if mode is CollapseMode.PER_GROUND_MANIFOLD:
        for f in basis.ground_f_present:
            for q in (-1, 0, 1):
                c = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
                for fp in basis.excited_f_present:
                    c = c + dipole_operator(basis, q, f, fp)
                ops.append(c.tocsr())
    else:
        for q in (-1, 0, 1):
            c = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
            for f in basis.ground_f_present:
                for fp in basis.excited_f_present:
                    c = c + dipole_operator(basis, q, f, fp)
            ops.append(c.tocsr())
    return CollapseSet(atomic_ops=tuple(ops), cavity_op=annihilation(basis), mode=mode)


@dataclass(frozen=True)
class Liouvillian:
    """Sparse superoperator over column-vectorized density matrices."""

    dim: int              # Hilbert-space dimension D; the matrix is D^2 x D^2
    matrix: sp.csr_matrix
    scale: float          # max absolute row sum, used for relative residuals

    @property
    def superdim(self) -> int:
        return self.dim * self.dim


def _dissipator(c: sp.spmatrix, identity: sp.spmatrix) -> sp.csr_matrix:
    cdc = (c.conj().T @ c).tocsr()
    return (
        2.0 * sp.kron(c.conj(), c, format="csr")
        - sp.kron(identity, cdc, format="csr")
        - sp.kron(cdc.T, identity, format="csr")
    )


def liouvillian(
    H: sp.spmatrix, collapses: CollapseSet, kappa: float, gamma: float
) -> Liouvillian:
    """L(rho) = -i[H,rho] + kappa D[a]rho + gamma sum_C D[C]rho, vectorized."""
    dim = H.shape[0]
    if H.shape != (dim, dim) or collapses.cavity_op.shape != (dim, dim):
        raise ValueError("operator dimensions do not match")
    hmax = abs(H).max() if H.nnz else 0.0
    if hmax and abs(H - H.conj().T).max() > 1e-12 * hmax:
        raise ValueError("Hamiltonian must be Hermitian")
    identity = sp.identity(dim, format="csr", dtype=complex)
    L = -1j * (sp.kron(identity, H, format="csr") - sp.kron(H.T, identity, format="csr"))
    L = L + kappa * _dissipator(collapses.cavity_op, identity)
    for c in collapses.atomic_ops:
        if c.shape != (dim, dim):
            raise ValueError("collapse operator dimension mismatch")
        L = L + gamma * _dissipator(c, identity)
    L = L.tocsr()
    scale = float(np.abs(L).sum(axis=1).max()) if L.nnz else 1.0
    return Liouvillian(dim=dim, matrix=L, scale=scale)


def m_reflection_unitary(basis: Basis) -> sp.csr_matrix:
    """Unitary relabeling m_F -> -m_F that commutes with the pi-driven models.

    Phases i*(-1)^F on ground and -i*(-1)^F' on excited states absorb the
    parity of the Condon-Shortley dipole signs, so U H U' = H for the
    Hamiltonians built here and U maps the sigma+ collapse operators onto
    the sigma- ones.
    """
    rows, cols, vals = [], [], []
    for i, s in enumerate(basis.atomic_states):
        mirror = AtomicState(s.excited, s.f, -s.m)
        if not basis.has_state(mirror):
            raise ValueError("basis is not closed under m -> -m")
        phase = (-1j if s.excited else 1j) * (-1) ** s.f
        for n in range(basis.n_fock):
            rows.append(basis.index(mirror, n))
            cols.append(basis.index(s, n))
            vals.append(phase)
    return sp.csr_matrix((vals, (rows, cols)), shape=(basis.dim, basis.dim), dtype=complex)


def symmetric_sector_isometry(basis: Basis) -> sp.csr_matrix:
    """Isometry Q from the reflection-symmetric sector into vectorized space.

    The superoperator rho -> U rho U' is a real signed involution on matrix
    units; Q's columns are its +1 eigenvectors.  Steady states of symmetric
    Liouvillians live entirely in that sector.
    """
    u = m_reflection_unitary(basis).tocoo()
    perm = np.empty(basis.dim, dtype=int)
    phase = np.empty(basis.dim, dtype=complex)
    for r, c, v in zip(u.row, u.col, u.data):
        perm[c] = r
        phase[c] = v
    dim = basis.dim
    rows, cols, vals = [], [], []
    col = 0
    # column-major vec: matrix unit |a><b| sits at index a + b*dim
    for a in range(dim):
        for b in range(dim):
            ka = perm[a] + perm[b] * dim
            k = a + b * dim
            sign = (phase[a] * np.conj(phase[b])).real  # always exactly +-1
            if ka == k:
                if sign > 0:
                    rows.append(k)
                    cols.append(col)
                    vals.append(1.0)
                    col += 1
                continue
            if ka < k:
                continue  # orbit already emitted from its smaller index
            rows.append(k)
            cols.append(col)
            vals.append(1.0 / np.sqrt(2.0))
            rows.append(ka)
            cols.append(col)
            vals.append(sign / np.sqrt(2.0))
            col += 1
    return sp.csr_matrix((vals, (rows, cols)), shape=(dim * dim, col), dtype=complex)


def _trace_vector(dim: int) -> sp.csr_matrix:
    cols = np.arange(dim) * dim + np.arange(dim)
    return sp.csr_matrix(
        (np.ones(dim), (np.zeros(dim, dtype=int), cols)), shape=(1, dim * dim), dtype=complex
    )


def steady_state(
    L: Liouvillian, sector: sp.spmatrix | None = None
) -> tuple[np.ndarray, float]:
    """Solve L rho = 0, Tr rho = 1; returns (Hermitized rho, relative residual).

    The first row of L (projected into the symmetric sector when one is
    given) is replaced by the trace functional.  Raises
    DegenerateSteadyStateError when the null space is not one-dimensional
    and SolverError on numerical failure.
    """
    dim = L.dim
    mat = L.matrix if sector is None else (sector.conj().T @ L.matrix @ sector).tocsr()
    trace_row = _trace_vector(dim) if sector is None else (_trace_vector(dim) @ sector).tocsr()

    n = mat.shape[0]
    system = sp.vstack([trace_row, mat.tocsr()[1:]], format="csc")
    rhs = np.zeros(n, dtype=complex)
    rhs[0] = 1.0

    try:
        lu = spla.splu(system)
        x = lu.solve(rhs)
        x += lu.solve(rhs - system @ x)  # one refinement pass
    except RuntimeError as exc:
        msg = str(exc).lower()
        if "singular" in msg or "factorize" in msg:
            raise DegenerateSteadyStateError(
                "steady state is not unique (no drive or repump selecting one?)"
            ) from exc
        raise SolverError(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SolverError("steady-state solve produced non-finite values")

    vec = x if sector is None else sector @ x
    residual = float(
        np.linalg.norm(L.matrix @ vec) / (L.scale * np.linalg.norm(vec))
    )
    if residual > 1e-6:
        raise DegenerateSteadyStateError(
            f"trace-constrained solve left relative residual {residual:.2e}; "
            "the null space is likely degenerate"
        )
    rho = vec.reshape((dim, dim), order="F")
    return 0.5 * (rho + rho.conj().T), residual


@dataclass(frozen=True)
class SteadyStateResult:
    rho: np.ndarray
    transmission: float
    zeeman_populations: Mapping[tuple[int, int], float]
    manifold_populations: Mapping[int, float]
    residual: float


def observables(
    rho: np.ndarray, params: SystemParams, basis: Basis, residual: float = float("nan")
) -> SteadyStateResult:
    """Normalized transmission T and ground-state populations of rho."""
    if params.epsilon_mod == 0.0:
        raise ValueError("transmission is undefined for epsilon = 0")
    a = annihilation(basis)
    n_phot = float(np.real(np.trace((a.conj().T @ a) @ rho)))
    transmission = n_phot * params.kappa**2 / params.epsilon_mod**2

    diag = np.real(np.diag(rho))
    zeeman: dict[tuple[int, int], float] = {}
    manifold: dict[int, float] = {}
    for f in basis.ground_f_present:
        total = 0.0
        for s in basis.manifold_states(False, f):
            pop = float(sum(diag[basis.index(s, n)] for n in range(basis.n_fock)))
            zeeman[(f, s.m)] = pop
            total += pop
        manifold[f] = total
    return SteadyStateResult(
        rho=rho,
        transmission=transmission,
        zeeman_populations=zeeman,
        manifold_populations=manifold,
        residual=residual,
    )


def solve_steady_state(
    H: sp.spmatrix,
    collapses: CollapseSet,
    params: SystemParams,
    basis: Basis,
    reduce_symmetry: bool = False,
) -> SteadyStateResult:
    """Assemble the Liouvillian, solve for the steady state, attach observables."""
    L = liouvillian(H, collapses, params.kappa, params.gamma)
    sector = symmetric_sector_isometry(basis) if reduce_symmetry else None
    rho, residual = steady_state(L, sector=sector)
    return observables(rho, params, basis, residual=residual)

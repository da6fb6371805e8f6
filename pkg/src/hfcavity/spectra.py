"""Undriven eigenstructure analysis of the excitation manifolds.

Extracts the N-quantum invariant subspace of an excitation-conserving
Hamiltonian, diagonalizes it per total-m_F block (the blocks are exact, so
the +-m degeneracies that produce the reduced unique-eigenvalue counts hold
to machine precision), reports cavity likeness <a'a> per eigenstate, and
derives the transition-difference diagram and dual-resonance crossings for
the big-coupling regime.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .model import (
    Basis,
    ModelKind,
    ModelScope,
    SystemParams,
    build_basis,
    number_operator,
    excitation_number_operator,
    total_mf_operator,
    undriven_hamiltonian,
)

__all__ = [
    "CommutationError",
    "Manifold",
    "ManifoldEigensystem",
    "EigenEntry",
    "EigenReport",
    "EigenSweepConfig",
    "Crossing",
    "TransitionLine",
    "TransitionDiagram",
    "excitation_manifold",
    "manifold_eigensystem",
    "eigen_report",
    "run_eigen_sweep",
    "write_eigen_csv",
    "transition_diagram",
    "find_dual_resonances",
]


class CommutationError(ValueError):
    """The Hamiltonian does not conserve the required quantum number."""


@dataclass(frozen=True)
class Manifold:
    """Indices of one excitation manifold, restricted to the cavity-coupled component."""

    basis: Basis
    excitation: int
    indices: tuple[int, ...]

    @property
    def dim(self) -> int:
        return len(self.indices)

    def m_values(self) -> np.ndarray:
        return np.array([self.basis.state(i)[0].m for i in self.indices])


def _commutator_norm(a: sp.spmatrix, b: sp.spmatrix) -> float:
    c = a @ b - b @ a
    return 0.0 if c.nnz == 0 else abs(c).max()


def _coupled_manifold_keys(H: sp.spmatrix, basis: Basis) -> set[tuple[bool, int]]:
    """Hyperfine manifolds touched by any off-diagonal element of H.

    Returns the empty set for a fully diagonal H (decoupled limit), in which
    case the caller keeps every manifold.
    """
    coo = H.tocoo()
    keys: set[tuple[bool, int]] = set()
    for r, c, v in zip(coo.row, coo.col, coo.data):
        if r == c or v == 0:
            continue
        for i in (r, c):
            s, _ = basis.state(int(i))
            keys.add((s.excited, s.f))
    return keys


def excitation_manifold(H: sp.spmatrix, basis: Basis, N: int) -> Manifold:
    """Invariant subspace with N total quanta, restricted to coupled manifolds.

    Hyperfine manifolds with no coupling anywhere in H (e.g. F=3 and F'=2
    under the toroid Hamiltonian on the full basis) are dropped; if H has no
    couplings at all, every manifold is kept.  Raises CommutationError when
    H does not commute with the excitation-number operator.
    """
    if not 0 <= N <= basis.n_max:
        raise ValueError(f"excitation number {N} outside 0..{basis.n_max}")
    nop = excitation_number_operator(basis)
    hscale = abs(H).max() if H.nnz else 0.0
    if hscale and _commutator_norm(H, nop) > 1e-12 * hscale:
        raise CommutationError("Hamiltonian does not conserve the excitation number")

    coupled = _coupled_manifold_keys(H, basis)
    indices = []
    for i in range(basis.dim):
        s, n = basis.state(i)
        if n + (1 if s.excited else 0) != N:
            continue
        if coupled and (s.excited, s.f) not in coupled:
            continue
        indices.append(i)
    return Manifold(basis=basis, excitation=N, indices=tuple(indices))


@dataclass(frozen=True)
class ManifoldEigensystem:
    """Eigenvalues (ascending), full-basis eigenvectors, and per-state <a'a>."""

    eigenvalues: np.ndarray
    vectors: np.ndarray  # (basis.dim, manifold.dim), column k belongs to eigenvalues[k]
    cavity_likeness: np.ndarray
    m_sector: np.ndarray


def manifold_eigensystem(H: sp.spmatrix, manifold: Manifold) -> ManifoldEigensystem:
    """Dense eigendecomposition of H on the manifold, block by total m_F."""
    basis = manifold.basis
    idx = np.asarray(manifold.indices)
    hscale = abs(H).max() if H.nnz else 0.0
    if hscale and _commutator_norm(H, total_mf_operator(basis)) > 1e-12 * hscale:
        raise CommutationError("Hamiltonian does not conserve total m_F")

    Hd = H.toarray()
    if np.abs(Hd - Hd.conj().T).max() > 1e-12 * max(hscale, 1.0):
        raise ValueError("Hamiltonian is not Hermitian")
    photon = np.array([basis.state(i)[1] for i in range(basis.dim)], dtype=float)

    ms = manifold.m_values()
    evals, vecs, likes, sectors = [], [], [], []
    for m in np.unique(ms):
        sub = idx[ms == m]
        w, v = np.linalg.eigh(Hd[np.ix_(sub, sub)])
        for k in range(len(w)):
            full = np.zeros(basis.dim, dtype=complex)
            full[sub] = v[:, k]
            evals.append(w[k])
            vecs.append(full)
            likes.append(float(np.sum(photon[sub] * np.abs(v[:, k]) ** 2)))
            sectors.append(m)
    order = np.argsort(np.asarray(evals), kind="stable")
    return ManifoldEigensystem(
        eigenvalues=np.asarray(evals)[order],
        vectors=np.asarray(vecs).T[:, order],
        cavity_likeness=np.asarray(likes)[order],
        m_sector=np.asarray(sectors)[order],
    )


@dataclass(frozen=True)
class EigenEntry:
    eigenfrequency: float
    cavity_likeness: float
    degeneracy: int
    band_id: int = 0


@dataclass(frozen=True)
class EigenReport:
    """Clustered eigenvalues of one manifold at one cavity detuning."""

    cavity_detuning: float
    entries: tuple[EigenEntry, ...]
    n_states: int

    @property
    def n_unique(self) -> int:
        return len(self.entries)

    @property
    def n_bands(self) -> int:
        return 1 + max(e.band_id for e in self.entries)


def _cluster_breaks(sorted_values: np.ndarray, gap: float) -> np.ndarray:
    if len(sorted_values) == 0:
        return np.zeros(0, dtype=int)
    return np.concatenate([[0], np.cumsum(np.diff(sorted_values) > gap)])


def eigen_report(
    H: sp.spmatrix,
    manifold: Manifold,
    tol_cluster: float = 1e-4,
    band_gap: float | None = None,
    cavity_detuning: float = float("nan"),
) -> EigenReport:
    """Cluster the manifold spectrum into degenerate groups and coarse bands.

    Entries within tol_cluster of each other (single-linkage on the sorted
    spectrum) form one degenerate cluster whose cavity likeness is the
    cluster average, which is basis-independent.  When band_gap is given,
    clusters separated by less than it share a band id.
    """
    eig = manifold_eigensystem(H, manifold)
    cluster_of = _cluster_breaks(eig.eigenvalues, tol_cluster)
    freqs, likes, degs = [], [], []
    for c in range(cluster_of.max() + 1 if len(cluster_of) else 0):
        sel = cluster_of == c
        freqs.append(float(np.mean(eig.eigenvalues[sel])))
        likes.append(float(np.mean(eig.cavity_likeness[sel])))
        degs.append(int(np.sum(sel)))
    if band_gap is not None:
        band_of = _cluster_breaks(np.asarray(freqs), band_gap)
    else:
        band_of = np.zeros(len(freqs), dtype=int)
    entries = tuple(
        EigenEntry(f, l, d, int(b)) for f, l, d, b in zip(freqs, likes, degs, band_of)
    )
    return EigenReport(cavity_detuning=cavity_detuning, entries=entries, n_states=manifold.dim)


@dataclass(frozen=True)
class EigenSweepConfig:
    """Eigenvalue fan versus cavity detuning (the undriven Hamiltonian of `model`)."""

    model: ModelKind
    params: SystemParams
    scope: ModelScope
    cavity_detunings: tuple[float, ...]
    n_max: int = 1
    excitation: int = 1
    tol_cluster: float = 1e-4
    band_gap: float | None = None
    output: str | None = None


def run_eigen_sweep(config: EigenSweepConfig) -> list[EigenReport]:
    basis = build_basis(config.scope, config.n_max)
    reports = []
    for wc in config.cavity_detunings:
        params = replace(config.params, cavity_detuning=wc)
        H = undriven_hamiltonian(config.model, params, basis)
        manifold = excitation_manifold(H, basis, config.excitation)
        reports.append(
            eigen_report(H, manifold, config.tol_cluster, config.band_gap, cavity_detuning=wc)
        )
    if config.output:
        write_eigen_csv(config.output, reports)
    return reports


def write_eigen_csv(path: str | Path, reports: Sequence[EigenReport]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["cavity_detuning_MHz", "eigenfrequency_MHz", "cavity_likeness", "degeneracy", "band_id"]
        )
        for report in reports:
            for e in report.entries:
                writer.writerow(
                    [repr(float(report.cavity_detuning)), repr(e.eigenfrequency),
                     repr(e.cavity_likeness), e.degeneracy, e.band_id]
                )


# --- transition differences and dual resonances -------------------------------

@dataclass(frozen=True)
class TransitionLine:
    ground_f: int            # 3 or 4
    difference_frequency: float
    excitable: bool


@dataclass(frozen=True)
class TransitionDiagram:
    cavity_detunings: tuple[float, ...]
    lines: tuple[tuple[TransitionLine, ...], ...]  # one tuple per detuning


@dataclass(frozen=True)
class Crossing:
    """A dual resonance: equal probe frequency from both ground manifolds."""

    cavity_detuning: float
    probe_frequency: float
    branch_f3: int  # index into the sorted excitable F=3 difference curve
    branch_f4: int


def _ground_photon_flags(basis: Basis, indices: Sequence[int]) -> dict[int, np.ndarray]:
    flags = {}
    for f in (3, 4):
        flags[f] = np.array(
            [
                (not basis.state(i)[0].excited)
                and basis.state(i)[0].f == f
                and basis.state(i)[1] >= 1
                for i in indices
            ]
        )
    return flags


def _difference_curves(
    params: SystemParams,
    basis: Basis,
    threshold: float,
    tol_cluster: float,
) -> dict[int, np.ndarray]:
    """Sorted excitable transition frequencies from each ground manifold.

    A unique eigenvalue cluster is excitable from ground manifold F when any
    of its eigenvectors has a photon-carrying |F,m>|1> amplitude above the
    threshold (that amplitude equals <phi|a'|F,m,0>).  Transitions out of
    F=3 are shifted by +omega_GSS, those out of F=4 start at 0.
    """
    H = undriven_hamiltonian(ModelKind.PBG, params, basis)
    manifold = excitation_manifold(H, basis, 1)
    eig = manifold_eigensystem(H, manifold)
    flags = _ground_photon_flags(basis, range(basis.dim))
    amps = {f: np.max(np.abs(eig.vectors[flags[f], :]), axis=0) for f in (3, 4)}

    cluster_of = _cluster_breaks(eig.eigenvalues, tol_cluster)
    curves: dict[int, list[float]] = {3: [], 4: []}
    for c in range(cluster_of.max() + 1):
        sel = cluster_of == c
        freq = float(np.mean(eig.eigenvalues[sel]))
        if np.max(amps[3][sel]) > threshold:
            curves[3].append(freq + params.ground_splitting)
        if np.max(amps[4][sel]) > threshold:
            curves[4].append(freq)
    return {f: np.sort(np.asarray(v)) for f, v in curves.items()}


def transition_diagram(
    params: SystemParams,
    cavity_detunings: Sequence[float],
    n_max: int = 1,
    threshold: float = 1e-6,
    tol_cluster: float = 1e-4,
) -> TransitionDiagram:
    """Single-quantum transition frequencies versus cavity detuning (PBG model)."""
    if len(cavity_detunings) == 0:
        raise ValueError("empty cavity grid")
    basis = build_basis(ModelScope.FULL, n_max)
    flags = _ground_photon_flags(basis, range(basis.dim))
    per_detuning = []
    for wc in cavity_detunings:
        p = replace(params, cavity_detuning=wc)
        H = undriven_hamiltonian(ModelKind.PBG, p, basis)
        manifold = excitation_manifold(H, basis, 1)
        eig = manifold_eigensystem(H, manifold)
        amps = {f: np.max(np.abs(eig.vectors[flags[f], :]), axis=0) for f in (3, 4)}
        cluster_of = _cluster_breaks(eig.eigenvalues, tol_cluster)
        lines = []
        for c in range(cluster_of.max() + 1):
            sel = cluster_of == c
            freq = float(np.mean(eig.eigenvalues[sel]))
            lines.append(TransitionLine(4, freq, bool(np.max(amps[4][sel]) > threshold)))
            lines.append(
                TransitionLine(3, freq + p.ground_splitting, bool(np.max(amps[3][sel]) > threshold))
            )
        per_detuning.append(tuple(lines))
    return TransitionDiagram(tuple(float(w) for w in cavity_detunings), tuple(per_detuning))


def find_dual_resonances(
    params: SystemParams,
    cavity_detunings: Sequence[float],
    n_max: int = 1,
    threshold: float = 1e-6,
    tol_cluster: float = 1e-4,
    refine_to: float = 1.0,
) -> list[Crossing]:
    """Cavity detunings where a transition out of F=3 and one out of F=4 coincide.

    Scans adjacent grid points for sign changes of every pairwise difference
    between the two sorted excitable curves, then refines each bracketed
    crossing by bisection to within refine_to (MHz).  Intervals where the
    number of excitable branches changes are skipped.
    """
    grid = [float(w) for w in cavity_detunings]
    if not grid:
        raise ValueError("empty cavity grid")
    basis = build_basis(ModelScope.FULL, n_max)

    def curves_at(wc: float) -> dict[int, np.ndarray]:
        return _difference_curves(
            replace(params, cavity_detuning=wc), basis, threshold, tol_cluster
        )

    crossings: list[Crossing] = []
    prev = curves_at(grid[0])
    prev_wc = grid[0]
    for wc in grid[1:]:
        cur = curves_at(wc)
        if len(prev[3]) == len(cur[3]) and len(prev[4]) == len(cur[4]):
            d0 = prev[3][:, None] - prev[4][None, :]
            d1 = cur[3][:, None] - cur[4][None, :]
            for i, j in np.argwhere(np.sign(d0) * np.sign(d1) < 0):
                lo, hi = prev_wc, wc
                flo = d0[i, j]
                while hi - lo > refine_to:
                    mid = 0.5 * (lo + hi)
                    cm = curves_at(mid)
                    if len(cm[3]) <= i or len(cm[4]) <= j:
                        break
                    fm = cm[3][i] - cm[4][j]
                    if np.sign(fm) == np.sign(flo):
                        lo, flo = mid, fm
                    else:
                        hi = mid
                wc_star = 0.5 * (lo + hi)
                cstar = curves_at(wc_star)
                probe = float(cstar[4][j]) if len(cstar[4]) > j else float(np.nan)
                crossings.append(
                    Crossing(
                        cavity_detuning=wc_star,
                        probe_frequency=probe,
                        branch_f3=int(i),
                        branch_f4=int(j),
                    )
                )
        prev, prev_wc = cur, wc
    return crossings

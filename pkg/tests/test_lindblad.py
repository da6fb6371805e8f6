from dataclasses import replace

import numpy as np
import pytest
import scipy.sparse as sp

from hfcavity.lindblad import (
    CollapseMode,
    CollapseSet,
    DegenerateSteadyStateError,
    collapse_mode_for,
    collapse_operators,
    liouvillian,
    m_reflection_unitary,
    observables,
    solve_steady_state,
    steady_state,
    symmetric_sector_isometry,
)
from hfcavity.model import (
    AtomicState,
    Basis,
    ModelKind,
    ModelScope,
    SystemParams,
    annihilation,
    build_basis,
    driven_hamiltonian,
    hamiltonian_h1,
    hamiltonian_h3,
    number_operator,
    transition_operator,
)

TOROID = SystemParams(
    g=450.0, kappa=1.75, gamma=2.6,
    epsilon_mod=1.75 * 2.6 / 450.0, omega_r_rabi=2.6,
    cavity_detuning=-100.0, repump_detuning=-251.0,
)
PBG = SystemParams(
    g=17000.0, kappa=4400.0, gamma=2.6,
    epsilon_mod=100.0 * 4400.0 * 2.6 / 17000.0,
)


def toroid_system(probe, scope=ModelScope.FULL, params=TOROID):
    basis = build_basis(scope, 1)
    p = replace(params, probe_detuning=probe)
    H = hamiltonian_h1(p, basis)
    cops = collapse_operators(basis, CollapseMode.PER_GROUND_MANIFOLD)
    return basis, p, H, cops


class TestCollapseOperators:
    def test_operator_counts(self):
        basis = build_basis(ModelScope.FULL, 1)
        assert len(collapse_operators(basis, CollapseMode.PER_GROUND_MANIFOLD).atomic_ops) == 6
        assert len(collapse_operators(basis, CollapseMode.GLOBAL_COMMON).atomic_ops) == 3

    def test_mode_for_model(self):
        assert collapse_mode_for(ModelKind.TOROID) is CollapseMode.PER_GROUND_MANIFOLD
        assert collapse_mode_for(ModelKind.PBG) is CollapseMode.GLOBAL_COMMON

    @pytest.mark.parametrize("mode", list(CollapseMode))
    def test_total_decay_rate_is_flat(self, mode):
        # diagonal of sum C'C is 1 on every excited state under either
        # reservoir convention: populations decay at exactly 2*gamma
        basis = build_basis(ModelScope.FULL, 1)
        cops = collapse_operators(basis, mode)
        total = sum((c.conj().T @ c for c in cops.atomic_ops),
                    sp.csr_matrix((basis.dim, basis.dim), dtype=complex))
        diag = np.real(total.diagonal())
        for i in range(basis.dim):
            s, _ = basis.state(i)
            assert diag[i] == pytest.approx(1.0 if s.excited else 0.0, abs=1e-12)

    def test_cross_terms_present_in_common_reservoir(self):
        # the common reservoir couples decays from different F' levels
        basis = build_basis(ModelScope.FULL, 1)
        cops = collapse_operators(basis, CollapseMode.GLOBAL_COMMON)
        pi_op = cops.atomic_ops[1]  # q = 0
        cdc = (pi_op.conj().T @ pi_op).tocoo()
        cross = [
            (basis.state(int(r))[0], basis.state(int(c))[0])
            for r, c, v in zip(cdc.row, cdc.col, cdc.data)
            if r != c and abs(v) > 1e-12
        ]
        assert any(s1.f != s2.f for s1, s2 in cross)


class TestLiouvillian:
    def test_matches_dense_master_equation(self):
        # anchor for the vectorization convention on a small random state
        rng = np.random.default_rng(3)
        basis = build_basis(ModelScope.TOROID_45_ONLY, 1)
        p = replace(TOROID, probe_detuning=40.0)
        H = hamiltonian_h1(p, basis)
        cops = collapse_operators(basis, CollapseMode.PER_GROUND_MANIFOLD)
        L = liouvillian(H, cops, p.kappa, p.gamma)

        d = basis.dim
        x = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        rho = x + x.conj().T

        Hd = H.toarray()
        rhs = -1j * (Hd @ rho - rho @ Hd)
        for c, rate in [(cops.cavity_op, p.kappa)] + [(c, p.gamma) for c in cops.atomic_ops]:
            cd = c.toarray()
            cdc = cd.conj().T @ cd
            rhs += rate * (2 * cd @ rho @ cd.conj().T - cdc @ rho - rho @ cdc)

        out = (L.matrix @ rho.reshape(-1, order="F")).reshape((d, d), order="F")
        assert np.abs(out - rhs).max() < 1e-9 * max(np.abs(rhs).max(), 1.0)

    def test_trace_preservation(self):
        basis, p, H, cops = toroid_system(-251.0, scope=ModelScope.TOROID_45_ONLY)
        L = liouvillian(H, cops, p.kappa, p.gamma)
        d = basis.dim
        mixed = (np.eye(d) / d).reshape(-1, order="F")
        out = (L.matrix @ mixed).reshape((d, d), order="F")
        assert abs(np.trace(out)) < 1e-12
        # the adjoint annihilates the identity
        ident = np.eye(d).reshape(-1, order="F")
        assert np.abs(L.matrix.conj().T @ ident).max() < 1e-12

    def test_requires_hermitian_hamiltonian(self):
        basis = build_basis(ModelScope.TOROID_45_ONLY, 1)
        bad = annihilation(basis)  # not Hermitian
        cops = collapse_operators(basis, CollapseMode.PER_GROUND_MANIFOLD)
        with pytest.raises(ValueError):
            liouvillian(bad, cops, 1.0, 1.0)

    def test_dimension_mismatch(self):
        basis = build_basis(ModelScope.TOROID_45_ONLY, 1)
        other = build_basis(ModelScope.FULL, 1)
        cops = collapse_operators(other, CollapseMode.PER_GROUND_MANIFOLD)
        H = hamiltonian_h1(replace(TOROID, probe_detuning=0.0), basis)
        with pytest.raises(ValueError):
            liouvillian(H, cops, 1.0, 1.0)


def empty_cavity_result(delta_c, kappa=1.75, epsilon_frac=1e-4, n_max=2):
    basis = build_basis(ModelScope.BARE_CAVITY, n_max)
    p = SystemParams(
        g=0.0, kappa=kappa, gamma=0.0, epsilon_mod=epsilon_frac * kappa,
        cavity_detuning=delta_c, probe_detuning=0.0,
    )
    H = driven_hamiltonian(ModelKind.TOROID, p, basis)
    cops = collapse_operators(basis, CollapseMode.PER_GROUND_MANIFOLD)
    return solve_steady_state(H, cops, p, basis), p


class TestSteadyState:
    def test_empty_cavity_lorentzian(self):
        for delta in (0.0, 0.7, -2.5, 10.0):
            result, p = empty_cavity_result(delta)
            expected = p.kappa**2 / (p.kappa**2 + delta**2)
            assert result.transmission == pytest.approx(expected, abs=1e-10)

    def test_two_level_jaynes_cummings_oracle(self):
        # one ground and one excited state with a single coupling g: the
        # weak-driving transmission has the closed form
        # T = kappa^2 (gamma^2 + Da^2) / |(kappa + i Dc)(gamma + i Da) + g^2|^2
        g_state = AtomicState(False, 4, 0)
        e_state = AtomicState(True, 5, 0)
        basis = Basis((g_state, e_state), 1)
        a = annihilation(basis)
        sigma = transition_operator(basis, g_state, e_state)
        kappa, gamma, gc = 1.0, 0.5, 2.0
        eps = 1e-5 * kappa
        for delta_p in np.linspace(-6.0, 6.0, 13):
            delta_c = delta_a = -delta_p  # cavity and atom both at the reference line
            proj_e = (sigma.conj().T @ sigma).tocsr()
            H = (delta_c * number_operator(basis) + delta_a * proj_e
                 + gc * (a.conj().T @ sigma + sigma.conj().T @ a)
                 + eps * (a + a.conj().T))
            cops = CollapseSet(atomic_ops=(sigma,), cavity_op=a)
            p = SystemParams(g=gc, kappa=kappa, gamma=gamma, epsilon_mod=eps)
            result = solve_steady_state(H.tocsr(), cops, p, basis)
            expected = kappa**2 * (gamma**2 + delta_a**2) / abs(
                (kappa + 1j * delta_c) * (gamma + 1j * delta_a) + gc**2
            ) ** 2
            assert result.transmission == pytest.approx(expected, abs=1e-9)

    def test_density_matrix_axioms(self):
        basis, p, H, cops = toroid_system(-251.0)
        result = solve_steady_state(H, cops, p, basis)
        rho = result.rho
        assert np.trace(rho).real == pytest.approx(1.0, abs=1e-10)
        assert np.abs(rho - rho.conj().T).max() < 1e-12
        assert np.linalg.eigvalsh(rho).min() >= -1e-8
        assert result.residual <= 1e-9

    def test_degenerate_null_space_detected(self):
        # no drive and no repump leaves ground populations unconstrained
        basis = build_basis(ModelScope.FULL, 1)
        p = replace(TOROID, epsilon_mod=0.0, omega_r_rabi=0.0, probe_detuning=0.0)
        H = hamiltonian_h1(p, basis)
        cops = collapse_operators(basis, CollapseMode.PER_GROUND_MANIFOLD)
        L = liouvillian(H, cops, p.kappa, p.gamma)
        with pytest.raises(DegenerateSteadyStateError):
            steady_state(L)

    def test_atomic_mixture_degeneracy_detected(self):
        # H = 0, gamma = 0, kappa > 0: any atomic mixture is stationary
        basis = build_basis(ModelScope.TOROID_45_ONLY, 1)
        H = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
        cops = CollapseSet(atomic_ops=(), cavity_op=annihilation(basis))
        L = liouvillian(H, cops, kappa=1.0, gamma=0.0)
        with pytest.raises(DegenerateSteadyStateError):
            steady_state(L)


class TestObservables:
    def test_epsilon_zero_rejected(self):
        basis = build_basis(ModelScope.BARE_CAVITY, 1)
        p = SystemParams(g=0.0, kappa=1.0, gamma=0.0, epsilon_mod=0.0)
        rho = np.zeros((basis.dim, basis.dim), dtype=complex)
        rho[0, 0] = 1.0
        with pytest.raises(ValueError):
            observables(rho, p, basis)

    def test_population_accounting(self):
        basis, p, H, cops = toroid_system(-450.0)
        result = solve_steady_state(H, cops, p, basis)
        ground = sum(result.manifold_populations.values())
        diag = np.real(np.diag(result.rho))
        excited = sum(
            diag[basis.index(s, n)]
            for s in basis.atomic_states if s.excited
            for n in range(basis.n_fock)
        )
        assert ground + excited == pytest.approx(1.0, abs=1e-10)
        zeeman_f4 = sum(v for (f, m), v in result.zeeman_populations.items() if f == 4)
        assert zeeman_f4 == pytest.approx(result.manifold_populations[4], abs=1e-12)

    def test_zeeman_reflection_symmetry(self):
        basis, p, H, cops = toroid_system(-251.0)
        result = solve_steady_state(H, cops, p, basis)
        for (f, m), v in result.zeeman_populations.items():
            assert v == pytest.approx(result.zeeman_populations[(f, -m)], abs=1e-8)


class TestInvariances:
    def test_drive_phase_invariance(self):
        basis, p, H, cops = toroid_system(-251.0, scope=ModelScope.TOROID_COUPLED)
        base = solve_steady_state(H, cops, p, basis)
        p2 = replace(p, epsilon_phase=1.1)
        H2 = hamiltonian_h1(p2, basis)
        shifted = solve_steady_state(H2, cops, p2, basis)
        assert shifted.transmission == pytest.approx(base.transmission, abs=1e-10)
        for key, v in base.zeeman_populations.items():
            assert shifted.zeeman_populations[key] == pytest.approx(v, abs=1e-10)

    @pytest.mark.parametrize("s", [2.0 * np.pi, 1000.0])
    def test_global_rate_scaling_invariance(self, s):
        basis, p, H, cops = toroid_system(-150.0, scope=ModelScope.TOROID_COUPLED)
        base = solve_steady_state(H, cops, p, basis)
        ps = replace(p.scaled(s), probe_detuning=p.probe_detuning * s)
        Hs = hamiltonian_h1(ps, basis)
        scaled = solve_steady_state(Hs, cops, ps, basis)
        assert scaled.transmission == pytest.approx(base.transmission, abs=1e-9)
        assert np.abs(scaled.rho - base.rho).max() < 1e-9

    def test_weak_drive_linearity(self):
        basis, p, H, cops = toroid_system(-251.0, scope=ModelScope.TOROID_COUPLED)
        base = solve_steady_state(H, cops, p, basis)
        p_quarter = replace(p, epsilon_mod=p.epsilon_mod / 4.0)
        H_quarter = hamiltonian_h1(p_quarter, basis)
        quarter = solve_steady_state(H_quarter, cops, p_quarter, basis)
        # T is already intensity-normalized, so linear response means equality
        assert abs(quarter.transmission - base.transmission) / base.transmission < 1e-3

    def test_symmetry_reduced_solve_matches_full(self):
        basis, p, H, cops = toroid_system(-251.0)
        full = solve_steady_state(H, cops, p, basis, reduce_symmetry=False)
        reduced = solve_steady_state(H, cops, p, basis, reduce_symmetry=True)
        assert np.abs(full.rho - reduced.rho).max() < 1e-9
        assert reduced.transmission == pytest.approx(full.transmission, abs=1e-9)

    def test_reflection_unitary_commutes(self):
        basis, p, H, cops = toroid_system(-77.0)
        u = m_reflection_unitary(basis)
        assert abs(u @ H - H @ u).max() < 1e-12 * abs(H).max()
        assert abs((u @ u.conj().T) - sp.identity(basis.dim, format="csr")).max() < 1e-14
        q = symmetric_sector_isometry(basis)
        assert abs((q.conj().T @ q) - sp.identity(q.shape[1], format="csr")).max() < 1e-14


class TestDarkBand:
    def test_central_band_suppression_is_strong(self):
        # the documented qualitative version of the interference suppression:
        # central-band likeness and pi-emission are orders of magnitude below
        # the bright bands (they are not exactly zero at finite splittings)
        from hfcavity.spectra import eigen_report, excitation_manifold, manifold_eigensystem
        from hfcavity.model import dipole_operator, hamiltonian_h2

        basis = build_basis(ModelScope.FULL, 1)
        H = hamiltonian_h2(PBG, basis)
        manifold = excitation_manifold(H, basis, 1)
        eig = manifold_eigensystem(H, manifold)
        pi_op = sum(
            (dipole_operator(basis, 0, f, fp) for f in (3, 4) for fp in (2, 3, 4, 5)),
            sp.csr_matrix((basis.dim, basis.dim), dtype=complex),
        )
        band_of = np.concatenate([[0], np.cumsum(np.diff(eig.eigenvalues) > PBG.g / 40.0)])
        assert band_of.max() == 4
        central = band_of == 2
        assert central.sum() == 16
        central_like = eig.cavity_likeness[central].max()
        bright_like = eig.cavity_likeness[~central].min()
        assert central_like < 1e-3
        assert bright_like > 0.1
        pi_norms = np.linalg.norm(pi_op @ eig.vectors, axis=0)
        assert pi_norms[central].max() / pi_norms[~central].min() < 0.05

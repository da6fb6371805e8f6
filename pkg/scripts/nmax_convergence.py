#!/usr/bin/env python3
"""Check the photon-cutoff convergence of the weak-driving transmission.

Solves a handful of probe detunings of the toroid slice at n_max = 1, 2, 3
and prints the transmission differences.  At the paper's drive strengths the
{0,1} Fock basis is converged to well below the solver residual.
"""

import sys
from dataclasses import replace

from hfcavity.lindblad import collapse_mode_for, collapse_operators, solve_steady_state
from hfcavity.model import ModelKind, build_basis, driven_hamiltonian
from hfcavity.sweep import preset


def main() -> int:
    config = preset("fig3")
    probes = (-450.0, -251.0, -100.0, 0.0)
    results = {}
    for n_max in (1, 2, 3):
        basis = build_basis(config.scope, n_max)
        cops = collapse_operators(basis, collapse_mode_for(config.model))
        for wp in probes:
            p = replace(config.params, probe_detuning=wp)
            H = driven_hamiltonian(config.model, p, basis)
            results[(n_max, wp)] = solve_steady_state(H, cops, p, basis).transmission

    print(f"{'probe (MHz)':>12}  {'T(n_max=1)':>14}  {'|T2-T1|':>10}  {'|T3-T2|':>10}")
    for wp in probes:
        t1, t2, t3 = (results[(n, wp)] for n in (1, 2, 3))
        print(f"{wp:12.1f}  {t1:14.6e}  {abs(t2 - t1):10.2e}  {abs(t3 - t2):10.2e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

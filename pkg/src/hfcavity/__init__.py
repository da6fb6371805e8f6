"""Cavity QED with the full cesium D2 hyperfine structure.

Builds the atom-cavity Hamiltonians for the strong-coupling regimes of
microtoroid and photonic-bandgap resonators, analyzes their excitation
manifolds, and computes weak-driving steady-state transmission spectra and
atomic populations over probe/cavity detuning grids.
"""

__version__ = "0.1.0"

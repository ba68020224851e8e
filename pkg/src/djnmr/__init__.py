"""djnmr: compile 3-qubit Deutsch-Jozsa oracles into liquid-state NMR pulse
programs, simulate the resulting density-operator dynamics, and analyse the
output spectra."""

__version__ = "0.1.0"

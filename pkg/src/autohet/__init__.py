"""Autoheterodyne characterization of narrow-band photon pairs.

Builds joint spectral amplitudes of filtered cavity-enhanced down-conversion,
predicts beamsplitter correlation functions, simulates detector time tags and
recovers beat notes, linewidths, visibilities and entanglement measures.
"""

__version__ = "0.1.0"

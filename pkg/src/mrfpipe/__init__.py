"""Desk-scale MR fingerprinting pipeline.

Simulates FISP acquisitions with the extended phase graph formalism,
compresses fingerprints with a truncated-SVD subspace, maps voxel series to
T1/T2/PD either by dictionary matching or by a small fully convolutional
network, and benchmarks the two against each other.
"""

__version__ = "0.1.0"

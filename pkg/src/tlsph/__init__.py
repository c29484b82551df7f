"""Total-Lagrangian SPH solid dynamics with hourglass-mode suppression."""

from tlsph.kernel import KernelModel
from tlsph.particles import Box, Cylinder, LatticeSpec, ParticleSet, generate_lattice
from tlsph.neighbors import BondTable, build_neighborhoods, compute_correction_matrices

__all__ = [
    "KernelModel",
    "Box",
    "Cylinder",
    "LatticeSpec",
    "ParticleSet",
    "generate_lattice",
    "BondTable",
    "build_neighborhoods",
    "compute_correction_matrices",
]

__version__ = "0.1.0"

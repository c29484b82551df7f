"""Particle storage, Cartesian lattice generation, and constraint tags.

Particles are kept as a structure of arrays so the solver kernels can
iterate flat buffers.  Lattice sites sit at half-spacing offsets from the
geometry faces, every particle carries the full lattice-cell volume dp^d,
and constrained regions are realized as extra particle layers grown beyond
a face of the shape.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

FREE = 0
CLAMPED = 1
PRESCRIBED = 2

_CONSTRAINT_NAMES = {FREE: "free", CLAMPED: "clamped", PRESCRIBED: "prescribed"}


@dataclass(frozen=True)
class Box:
    """Axis-aligned box; ``lengths`` has one entry per dimension."""

    lengths: tuple[float, ...]
    origin: tuple[float, ...] | None = None

    @property
    def dimension(self) -> int:
        return len(self.lengths)


@dataclass(frozen=True)
class Cylinder:
    """Circular cylinder, axis along the last (z) coordinate from z = 0."""

    radius: float
    length: float

    @property
    def dimension(self) -> int:
        return 3


@dataclass(frozen=True)
class FaceLayers:
    """Constrained particle layers grown beyond one face of the shape.

    ``side`` is -1 for the low face and +1 for the high face of ``axis``.
    """

    axis: int
    side: int
    layers: int
    kind: int = CLAMPED


@dataclass(frozen=True)
class LatticeSpec:
    shape: Box | Cylinder
    dp: float
    rho0: float
    constrained_regions: tuple[FaceLayers, ...] = ()

    def __post_init__(self) -> None:
        if self.dp <= 0.0:
            raise ValueError("dp must be positive")
        if self.rho0 <= 0.0:
            raise ValueError("rho0 must be positive")
        seen = set()
        for region in self.constrained_regions:
            key = (region.axis, region.side)
            if key in seen:
                raise ValueError(f"overlapping constrained regions on face {key}")
            seen.add(key)


@dataclass
class ParticleSet:
    """Structure-of-arrays particle state for one simulated body."""

    pos0: np.ndarray  # (n, d) reference positions
    pos: np.ndarray  # (n, d) current positions
    vel: np.ndarray  # (n, d)
    acc: np.ndarray  # (n, d)
    def_grad: np.ndarray  # (n, d, d) deformation gradient F
    def_grad_rate: np.ndarray  # (n, d, d)
    rho0: np.ndarray  # (n,)
    rho: np.ndarray  # (n,)
    vol0: np.ndarray  # (n,)
    constraint: np.ndarray  # (n,) uint8
    corr: np.ndarray | None = None  # (n, d, d) gradient-correction matrices
    prescribed_dir: np.ndarray | None = None  # (n, d) unit direction per particle
    dp: float = 0.0

    @property
    def n(self) -> int:
        return self.pos0.shape[0]

    @property
    def dimension(self) -> int:
        return self.pos0.shape[1]

    @property
    def free_mask(self) -> np.ndarray:
        return self.constraint == FREE

    def constraint_name(self, i: int) -> str:
        return _CONSTRAINT_NAMES[int(self.constraint[i])]


def _axis_centers(n: int, start: float, dp: float) -> np.ndarray:
    return start + (np.arange(n) + 0.5) * dp


def _box_grid(lengths: Sequence[float], origin: Sequence[float], dp: float):
    counts = [int(round(length / dp)) for length in lengths]
    if any(c <= 0 for c in counts):
        raise ValueError(f"empty geometry: lattice counts {counts} for dp={dp}")
    axes = [_axis_centers(c, o, dp) for c, o in zip(counts, origin)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _cylinder_grid(shape: Cylinder, dp: float) -> np.ndarray:
    n_cross = int(np.ceil(2.0 * shape.radius / dp))
    n_axial = int(round(shape.length / dp))
    if n_cross <= 0 or n_axial <= 0:
        raise ValueError("empty geometry: cylinder too small for dp")
    cross = _axis_centers(n_cross, -0.5 * n_cross * dp, dp)
    zs = _axis_centers(n_axial, 0.0, dp)
    xx, yy, zz = np.meshgrid(cross, cross, zs, indexing="ij")
    pts = np.stack([xx.ravel(), yy.ravel(), zz.ravel()], axis=1)
    keep = pts[:, 0] ** 2 + pts[:, 1] ** 2 <= shape.radius**2
    pts = pts[keep]
    if pts.shape[0] == 0:
        raise ValueError("empty geometry: no lattice points inside cylinder")
    return pts


def _layer_points(base: np.ndarray, region: FaceLayers, dp: float) -> np.ndarray:
    """Replicate the outermost slab of ``base`` beyond the requested face."""
    axis_vals = base[:, region.axis]
    if region.side < 0:
        face_val = axis_vals.min()
    else:
        face_val = axis_vals.max()
    slab = base[np.abs(axis_vals - face_val) < 0.25 * dp]
    chunks = []
    for layer in range(1, region.layers + 1):
        shifted = slab.copy()
        shifted[:, region.axis] = face_val + region.side * layer * dp
        chunks.append(shifted)
    return np.concatenate(chunks, axis=0)


def generate_lattice(spec: LatticeSpec) -> ParticleSet:
    """Fill the shape with a uniform lattice and tag constrained layers.

    Every particle gets volume dp^d, deformation gradient I, density rho0,
    and zero velocity; constrained layers are appended after the body
    particles so free particles occupy the leading index range.
    """
    dp = spec.dp
    if isinstance(spec.shape, Box):
        d = spec.shape.dimension
        origin = spec.shape.origin or tuple(0.0 for _ in range(d))
        body = _box_grid(spec.shape.lengths, origin, dp)
    elif isinstance(spec.shape, Cylinder):
        d = 3
        body = _cylinder_grid(spec.shape, dp)
    else:
        raise TypeError(f"unsupported shape {type(spec.shape)!r}")

    blocks = [body]
    kinds = [np.full(body.shape[0], FREE, dtype=np.uint8)]
    for region in spec.constrained_regions:
        pts = _layer_points(body, region, dp)
        blocks.append(pts)
        kinds.append(np.full(pts.shape[0], region.kind, dtype=np.uint8))

    pos0 = np.ascontiguousarray(np.concatenate(blocks, axis=0))
    constraint = np.concatenate(kinds)
    n = pos0.shape[0]

    eye = np.broadcast_to(np.eye(d), (n, d, d)).copy()
    pset = ParticleSet(
        pos0=pos0,
        pos=pos0.copy(),
        vel=np.zeros((n, d)),
        acc=np.zeros((n, d)),
        def_grad=eye,
        def_grad_rate=np.zeros((n, d, d)),
        rho0=np.full(n, spec.rho0),
        rho=np.full(n, spec.rho0),
        vol0=np.full(n, dp**d),
        constraint=constraint,
        prescribed_dir=np.zeros((n, d)),
        dp=dp,
    )
    return pset


def apply_initial_velocity(
    pset: ParticleSet, velocity_field: Callable[[np.ndarray], np.ndarray]
) -> None:
    """Assign initial velocities from a field of the reference position.

    Constrained particles keep zero velocity regardless of the field.
    """
    free = pset.free_mask
    for i in np.nonzero(free)[0]:
        pset.vel[i] = np.asarray(velocity_field(pset.pos0[i]), dtype=float)


def nearest_particle(pset: ParticleSet, target: Sequence[float]) -> int:
    """Index of the particle whose reference position is closest to target."""
    target = np.asarray(target, dtype=float)
    dist2 = np.sum((pset.pos0 - target) ** 2, axis=1)
    return int(np.argmin(dist2))

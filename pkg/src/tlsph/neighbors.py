"""Reference-configuration neighborhoods and gradient-correction matrices.

Neighborhoods are built once from the initial positions and never rebuilt;
bond lists are stored in CSR layout ordered by ascending neighbor index so
per-particle sums always accumulate in the same order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from tlsph.kernel import KernelModel
from tlsph.particles import ParticleSet

# Condition guard for the assembled moment matrix: reject when |det| falls
# below this fraction of the mean-diagonal scale raised to the dimension.
_DET_RTOL = 1e-10


@dataclass
class BondTable:
    """CSR bond storage; row i lists the neighbors of particle i."""

    indptr: np.ndarray  # (n+1,) int64
    j: np.ndarray  # (nnz,) int64 neighbor indices, ascending within a row
    r0: np.ndarray  # (nnz,) initial pair distance
    e0: np.ndarray  # (nnz, d) unit vector from j toward i
    w0: np.ndarray  # (nnz,) kernel value at r0
    dwdr0: np.ndarray  # (nnz,) radial kernel derivative at r0
    w_at_zero: float  # kernel value at zero separation

    @property
    def nnz(self) -> int:
        return self.j.shape[0]

    def row(self, i: int) -> slice:
        return slice(self.indptr[i], self.indptr[i + 1])


@njit(cache=True)
def _count_and_fill(pos, cell_of, cell_start, cell_order, strides, ncells, cutoff2):
    n, d = pos.shape
    counts = np.zeros(n, dtype=np.int64)
    # Neighbor-cell offsets: 3^d block around each particle's cell.
    n_off = 3**d
    for i in range(n):
        ci = cell_of[i]
        cnt = 0
        for off in range(n_off):
            rem = off
            cell = 0
            ok = True
            for k in range(d):
                step = rem % 3 - 1
                rem //= 3
                coord = ci // strides[k] % ncells[k] + step
                if coord < 0 or coord >= ncells[k]:
                    ok = False
                    break
                cell += coord * strides[k]
            if not ok:
                continue
            for p in range(cell_start[cell], cell_start[cell + 1]):
                jj = cell_order[p]
                if jj == i:
                    continue
                dist2 = 0.0
                for k in range(d):
                    dx = pos[i, k] - pos[jj, k]
                    dist2 += dx * dx
                if dist2 < cutoff2:
                    cnt += 1
        counts[i] = cnt

    indptr = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        indptr[i + 1] = indptr[i] + counts[i]
    jarr = np.empty(indptr[n], dtype=np.int64)
    for i in range(n):
        ci = cell_of[i]
        pos_out = indptr[i]
        for off in range(n_off):
            rem = off
            cell = 0
            ok = True
            for k in range(d):
                step = rem % 3 - 1
                rem //= 3
                coord = ci // strides[k] % ncells[k] + step
                if coord < 0 or coord >= ncells[k]:
                    ok = False
                    break
                cell += coord * strides[k]
            if not ok:
                continue
            for p in range(cell_start[cell], cell_start[cell + 1]):
                jj = cell_order[p]
                if jj == i:
                    continue
                dist2 = 0.0
                for k in range(d):
                    dx = pos[i, k] - pos[jj, k]
                    dist2 += dx * dx
                if dist2 < cutoff2:
                    jarr[pos_out] = jj
                    pos_out += 1
    return indptr, jarr


def build_neighborhoods(pset: ParticleSet, kernel: KernelModel) -> BondTable:
    """Cell-list search for all pairs with 0 < |r0_j - r0_i| < cutoff."""
    pos = pset.pos0
    n, d = pos.shape
    cutoff = kernel.cutoff

    lo = pos.min(axis=0)
    ncells = np.maximum(((pos.max(axis=0) - lo) / cutoff).astype(np.int64) + 1, 1)
    coords = np.minimum(((pos - lo) / cutoff).astype(np.int64), ncells - 1)
    strides = np.ones(d, dtype=np.int64)
    for k in range(d - 1, 0, -1):
        strides[k - 1] = strides[k] * ncells[k]
    cell_of = coords @ strides
    cell_order = np.argsort(cell_of, kind="stable").astype(np.int64)
    total_cells = int(np.prod(ncells))
    cell_start = np.zeros(total_cells + 1, dtype=np.int64)
    np.add.at(cell_start, cell_of + 1, 1)
    cell_start = np.cumsum(cell_start)

    indptr, jarr = _count_and_fill(
        pos, cell_of, cell_start, cell_order, strides, ncells, cutoff * cutoff
    )

    i_idx = np.repeat(np.arange(n, dtype=np.int64), np.diff(indptr))
    order = np.lexsort((jarr, i_idx))
    jarr = jarr[order]

    dvec = pos[i_idx] - pos[jarr]
    r0 = np.sqrt(np.sum(dvec * dvec, axis=1))
    if np.any(r0 <= 0.0):
        bad = int(i_idx[np.argmin(r0)])
        raise ValueError(f"duplicate particle positions detected near particle {bad}")
    e0 = dvec / r0[:, None]

    return BondTable(
        indptr=indptr,
        j=jarr,
        r0=r0,
        e0=np.ascontiguousarray(e0),
        w0=np.asarray(kernel.value(r0)),
        dwdr0=np.asarray(kernel.radial_derivative(r0)),
        w_at_zero=kernel.value(0.0),
    )


def moment_matrices(pset: ParticleSet, bonds: BondTable) -> np.ndarray:
    """Assembled matrices sum_j V0_j (r0_j - r0_i) x grad0_i W_ij per particle."""
    n, d = pset.pos0.shape
    i_idx = np.repeat(np.arange(n), np.diff(bonds.indptr))
    # (r0_j - r0_i) = -r0 e0 and grad0 W = dwdr e0, so each bond contributes
    # (-r0 dwdr V0_j) e0 x e0 which is positive semidefinite.
    coef = -bonds.r0 * bonds.dwdr0 * pset.vol0[bonds.j]
    moments = np.zeros((n, d, d))
    for a in range(d):
        for b in range(d):
            moments[:, a, b] = np.bincount(
                i_idx, weights=coef * bonds.e0[:, a] * bonds.e0[:, b], minlength=n
            )
    return moments


def compute_correction_matrices(pset: ParticleSet, bonds: BondTable) -> np.ndarray:
    """Invert the per-particle moment matrices, storing them on the set.

    Raises if any particle's moment matrix is singular to within the
    determinant guard (isolated or degenerate neighborhoods).
    """
    d = pset.dimension
    moments = moment_matrices(pset, bonds)
    dets = np.linalg.det(moments)
    scale = (np.trace(moments, axis1=1, axis2=2) / d) ** d
    bad = np.abs(dets) < _DET_RTOL * np.maximum(np.abs(scale), 1e-300)
    if np.any(bad):
        i = int(np.nonzero(bad)[0][0])
        raise ValueError(
            f"singular gradient moment matrix for particle {i} "
            f"(det={dets[i]:.3e}); check for isolated or degenerate particles"
        )
    corr = np.ascontiguousarray(np.linalg.inv(moments))
    pset.corr = corr
    return corr

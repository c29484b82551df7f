"""Force assembly, timestep control, and position-based Verlet integration.

The shear part of the Kirchhoff stress is assembled with a per-bond
correction direction e0 + phi * ehat, where ehat measures how far the pair
has drifted from the inter-particle direction predicted by tracing the
current bond vector back through the averaged inverse deformation
gradients.  phi vanishes inside a discrepancy dead zone, so smooth
(locally affine) deformation fields are integrated without any correction
at all, while zigzag hourglass patterns are penalized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from tlsph import _kernels
from tlsph.errors import NumericalFailure
from tlsph.materials import MaterialModel
from tlsph.neighbors import BondTable
from tlsph.particles import CLAMPED, FREE, PRESCRIBED, ParticleSet


@dataclass(frozen=True)
class HourglassParams:
    alpha: float = 8.0
    limiter_low: float = 0.05
    limiter_span: float = 1.0
    enabled: bool = True

    def __post_init__(self) -> None:
        if self.alpha < 0.0 or self.limiter_low < 0.0:
            raise ValueError("alpha and limiter_low must be non-negative")


@dataclass(frozen=True)
class StepControls:
    cfl: float = 0.6
    damping_scale: float = 1.0
    end_time: float = 1.0
    output_interval: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 < self.cfl <= 1.0:
            raise ValueError("cfl must be in (0, 1]")


@dataclass
class DecompositionArrays:
    """Per-particle stress decomposition fields."""

    c: np.ndarray  # (n,)
    b_e: np.ndarray  # (n, d, d)
    tau_r: np.ndarray  # (n, d, d)


# Abort threshold: velocities beyond this multiple of the initial
# characteristic velocity indicate divergence.
_DIVERGENCE_FACTOR = 100.0


def discrepancy(
    F_i: np.ndarray,
    F_j: np.ndarray,
    r_ij: np.ndarray,
    r0_ij: float,
    e0_ij: np.ndarray,
) -> np.ndarray:
    """Tracing-back mismatch 0.5 (F_i^-1 + F_j^-1) r_ij / r0 - e0.

    Exactly zero whenever both particles share an affine deformation that
    maps the bond consistently (r_ij = F r0_ij e0).
    """
    inv_avg = 0.5 * (np.linalg.inv(F_i) + np.linalg.inv(F_j))
    return inv_avg @ (np.asarray(r_ij) / r0_ij) - np.asarray(e0_ij)


def hourglass_coefficient(
    w0_ij: float, w_at_zero: float, e_hat_norm: float, params: HourglassParams, d: int
) -> float:
    """Correction magnitude phi = alpha * d * beta * gamma.

    beta = W0_ij / W(0) shrinks the correction for distant neighbors and
    gamma clips the discrepancy magnitude into [0, 1] past the dead zone.
    """
    if w_at_zero <= 0.0:
        raise ValueError("kernel value at zero separation must be positive")
    if not params.enabled:
        return 0.0
    gamma = min(max(e_hat_norm - params.limiter_low, 0.0), params.limiter_span)
    return params.alpha * d * (w0_ij / w_at_zero) * gamma


def coefficient_tensors(
    pset: ParticleSet, decos: DecompositionArrays
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(Finv, A, R) with A = c b_e F^-T B0 and R = tau_r F^-T B0^T."""
    if pset.corr is None:
        raise ValueError("correction matrices not computed")
    n, d = pset.pos.shape
    Finv = np.empty((n, d, d))
    A = np.empty((n, d, d))
    R = np.empty((n, d, d))
    err = np.zeros(n, dtype=np.uint8)
    _kernels.coefficient_pass(
        pset.def_grad,
        decos.c,
        decos.b_e,
        decos.tau_r,
        pset.corr,
        Finv,
        A,
        R,
        np.empty((n, d, d)),
        np.empty((n, d, d)),
        err,
    )
    if np.any(err):
        i = int(np.nonzero(err)[0][0])
        raise NumericalFailure(f"inverted element: det(F) <= 0 at particle {i}")
    return Finv, A, R


def _assemble(
    pset: ParticleSet,
    bonds: BondTable,
    decos: DecompositionArrays,
    hg: HourglassParams,
    fixed_phi: float | None,
) -> tuple[np.ndarray, np.ndarray]:
    Finv, A, R = coefficient_tensors(pset, decos)
    n, d = pset.pos.shape
    acc_s = np.empty((n, d))
    acc_r = np.empty((n, d))
    if fixed_phi is not None:
        use_formula = False
        phi_value = float(fixed_phi)
    else:
        use_formula = hg.enabled
        phi_value = 0.0
    _kernels.force_pass(
        pset.pos,
        bonds.indptr,
        bonds.j,
        bonds.r0,
        bonds.e0,
        bonds.w0,
        bonds.dwdr0,
        pset.vol0,
        pset.rho0,
        A,
        R,
        Finv,
        bonds.w_at_zero,
        hg.alpha,
        phi_value,
        use_formula,
        acc_s,
        acc_r,
    )
    return acc_s, acc_r


def shear_acceleration(
    pset: ParticleSet,
    bonds: BondTable,
    decos: DecompositionArrays,
    hg: HourglassParams,
    fixed_phi: float | None = None,
) -> np.ndarray:
    """Acceleration from the shear stress part c b_e, hourglass corrected."""
    return _assemble(pset, bonds, decos, hg, fixed_phi)[0]


def remaining_acceleration(
    pset: ParticleSet, bonds: BondTable, decos: DecompositionArrays
) -> np.ndarray:
    """Acceleration from the remaining stress tau_r (standard weak form)."""
    return _assemble(pset, bonds, decos, HourglassParams(enabled=False), None)[1]


def deformation_rate(pset: ParticleSet, bonds: BondTable) -> np.ndarray:
    """Fdot_i = sum_j V0_j (v_j - v_i) x grad0_i W_ij . B0_i."""
    if pset.corr is None:
        raise ValueError("correction matrices not computed")
    n, d = pset.pos.shape
    out = np.empty((n, d, d))
    _kernels.deformation_rate_pass(
        pset.vel, bonds.indptr, bonds.j, bonds.e0, bonds.dwdr0, pset.vol0, pset.corr, out
    )
    return out


def compute_timestep(
    pset: ParticleSet, sound_speed: np.ndarray, controls: StepControls, h: float
) -> float:
    """CFL-limited step from the velocity and acceleration criteria.

    Uses the accelerations assembled on the previous step; the acceleration
    branch drops out while all accelerations are exactly zero.
    """
    if not (np.all(np.isfinite(pset.vel)) and np.all(np.isfinite(pset.acc))):
        raise NumericalFailure("non-finite velocity or acceleration encountered")
    t_vel, t_acc = _kernels.timestep_candidates(pset.vel, pset.acc, sound_speed, h)
    return controls.cfl * min(t_vel, t_acc)


def kinetic_energy(pset: ParticleSet) -> float:
    mass = pset.rho0 * pset.vol0
    return 0.5 * float(np.sum(mass * np.sum(pset.vel**2, axis=1)))


def momentum(pset: ParticleSet) -> np.ndarray:
    mass = pset.rho0 * pset.vol0
    return (mass[:, None] * pset.vel).sum(axis=0)


@dataclass
class Wall:
    """Rigid frictionless wall blocking motion below ``position`` on ``axis``."""

    axis: int
    position: float


class Simulation:
    """Explicit TLSPH time integrator bound to one particle set."""

    def __init__(
        self,
        pset: ParticleSet,
        bonds: BondTable,
        material: MaterialModel,
        hourglass: HourglassParams,
        controls: StepControls,
        smoothing_length: float,
        wall: Wall | None = None,
        prescribed_profile: Callable[[float], float] | None = None,
        active_stress_field: np.ndarray | None = None,
        activation_ramp: Callable[[float], float] | None = None,
    ):
        if pset.corr is None:
            raise ValueError("correction matrices must be computed before solving")
        self.pset = pset
        self.bonds = bonds
        self.material = material
        self.hourglass = hourglass
        self.controls = controls
        self.h = smoothing_length
        self.wall = wall
        self.prescribed_profile = prescribed_profile
        self.activation_ramp = activation_ramp

        n, d = pset.pos.shape
        self.n = n
        self.d = d
        self.t = 0.0
        self.step_count = 0
        self.dt_last = 0.0

        self.cp_inv = np.broadcast_to(np.eye(d), (n, d, d)).copy()
        self.xi = np.zeros(n)
        self.Ta = (
            np.zeros(n) if active_stress_field is None else active_stress_field.copy()
        )
        self.sound_speed = np.full(n, material.sound_speed)
        # The exponential shear coefficient of the anisotropic model raises
        # the local wave speed far beyond its reference value under large
        # strain; track it per particle so the CFL criterion stays valid.
        self._state_aware_cv = material.kind == _kernels.MAT_HOLZAPFEL_OGDEN
        self.chi_eff = material.damping_factor(smoothing_length, controls.damping_scale)

        self.decos = DecompositionArrays(
            c=np.zeros(n), b_e=np.zeros((n, d, d)), tau_r=np.zeros((n, d, d))
        )
        self.acc_s = np.zeros((n, d))
        self.acc_r = np.zeros((n, d))
        self._Finv = np.zeros((n, d, d))
        self._A = np.zeros((n, d, d))
        self._R = np.zeros((n, d, d))
        self._ws1 = np.zeros((n, d, d))
        self._ws2 = np.zeros((n, d, d))
        self._err = np.zeros(n, dtype=np.uint8)

        self._prescribed_mask = pset.constraint == PRESCRIBED
        self._has_prescribed = bool(np.any(self._prescribed_mask))
        self._velocity_limit = _DIVERGENCE_FACTOR * max(
            float(np.max(np.linalg.norm(pset.vel, axis=1), initial=0.0)),
            material.sound_speed,
        )

    # -- state preparation -------------------------------------------------

    def _set_prescribed_velocities(self, t: float) -> None:
        if not self._has_prescribed or self.prescribed_profile is None:
            return
        speed = self.prescribed_profile(t)
        mask = self._prescribed_mask
        self.pset.vel[mask] = speed * self.pset.prescribed_dir[mask]

    def _check_err(self, what: str) -> None:
        if np.any(self._err):
            i = int(np.nonzero(self._err)[0][0])
            code = int(self._err[i])
            self._err[:] = 0
            detail = "inverted element" if code == 1 else "constitutive solve failure"
            raise NumericalFailure(
                f"{detail} at particle {i} during {what} (t = {self.t:.6e})"
            )

    def evaluate_forces(self, dt: float) -> None:
        """Constitutive pass plus force assembly into pset.acc."""
        p = self.pset
        ta = self.Ta
        if self.activation_ramp is not None:
            ta = self.Ta * self.activation_ramp(self.t)
        _kernels.constitutive_pass(
            p.def_grad,
            p.def_grad_rate,
            p.corr,
            self.cp_inv,
            self.xi,
            ta,
            self.material.kind,
            self.material.packed,
            self.material.f0,
            self.material.s0,
            self.chi_eff,
            dt,
            self.decos.c,
            self.decos.b_e,
            self.decos.tau_r,
            self._Finv,
            self._A,
            self._R,
            self._ws1,
            self._ws2,
            self._err,
        )
        self._check_err("constitutive evaluation")
        if self._state_aware_cv:
            mp = self.material.packed
            lam, b_exp = mp[0], mp[2]
            fiber = 4.0 * (mp[3] + mp[5]) + 2.0 * mp[7]
            modulus = lam + 2.0 * (1.0 + b_exp) * self.decos.c + fiber
            np.sqrt(modulus / self.material.rho0, out=self.sound_speed)
        use_formula = self.hourglass.enabled
        _kernels.force_pass(
            p.pos,
            self.bonds.indptr,
            self.bonds.j,
            self.bonds.r0,
            self.bonds.e0,
            self.bonds.w0,
            self.bonds.dwdr0,
            p.vol0,
            p.rho0,
            self._A,
            self._R,
            self._Finv,
            self.bonds.w_at_zero,
            self.hourglass.alpha,
            0.0,
            use_formula,
            self.acc_s,
            self.acc_r,
        )
        np.add(self.acc_s, self.acc_r, out=p.acc)

    def _enforce_wall(self) -> None:
        if self.wall is not None:
            _kernels.enforce_wall(
                self.pset.pos, self.pset.vel, self.wall.axis, self.wall.position
            )

    # -- time stepping -----------------------------------------------------

    def step(self) -> float:
        """One position-based Verlet step; returns the dt taken."""
        p = self.pset
        dt = compute_timestep(p, self.sound_speed, self.controls, self.h)
        vmax = float(np.max(np.abs(p.vel)))
        if vmax > self._velocity_limit:
            raise NumericalFailure(
                f"divergence guard tripped: |v| = {vmax:.3e} exceeds "
                f"{self._velocity_limit:.3e} (t = {self.t:.6e})"
            )
        half = 0.5 * dt

        self._set_prescribed_velocities(self.t)
        _kernels.half_kick_deformation(
            p.def_grad, p.def_grad_rate, p.rho, p.rho0, half, self._err
        )
        self._check_err("first half kick")
        _kernels.drift_positions(p.pos, p.vel, p.constraint, half)
        self._enforce_wall()

        self.evaluate_forces(dt)

        _kernels.kick_velocities(p.vel, p.acc, p.constraint, dt)
        # Filter inbound wall velocities before they feed the deformation
        # rate and the second drift, keeping positions and F consistent.
        self._enforce_wall()
        self._set_prescribed_velocities(self.t + dt)
        _kernels.deformation_rate_pass(
            p.vel,
            self.bonds.indptr,
            self.bonds.j,
            self.bonds.e0,
            self.bonds.dwdr0,
            p.vol0,
            p.corr,
            p.def_grad_rate,
        )
        _kernels.half_kick_deformation(
            p.def_grad, p.def_grad_rate, p.rho, p.rho0, half, self._err
        )
        self._check_err("second half kick")
        _kernels.drift_positions(p.pos, p.vel, p.constraint, half)
        self._enforce_wall()

        self.t += dt
        self.step_count += 1
        self.dt_last = dt
        return dt

    def prime(self) -> None:
        """Initialize Fdot from the initial velocities and zero the forces."""
        self._set_prescribed_velocities(0.0)
        _kernels.deformation_rate_pass(
            self.pset.vel,
            self.bonds.indptr,
            self.bonds.j,
            self.bonds.e0,
            self.bonds.dwdr0,
            self.pset.vol0,
            self.pset.corr,
            self.pset.def_grad_rate,
        )

    def run(
        self,
        end_time: float | None = None,
        sample_interval: float | None = None,
        on_sample: Callable[["Simulation"], None] | None = None,
        snapshot_interval: float | None = None,
        on_snapshot: Callable[["Simulation"], None] | None = None,
        stop_condition: Callable[["Simulation"], bool] | None = None,
        max_steps: int | None = None,
    ) -> None:
        """March to ``end_time`` firing the sampling hooks at fixed cadences."""
        end = self.controls.end_time if end_time is None else end_time
        if self.step_count == 0:
            self.prime()
            if on_sample is not None:
                on_sample(self)
            if on_snapshot is not None:
                on_snapshot(self)
        next_sample = (
            self.t + sample_interval if sample_interval is not None else math.inf
        )
        next_snapshot = (
            self.t + snapshot_interval if snapshot_interval is not None else math.inf
        )
        while self.t < end:
            self.step()
            if max_steps is not None and self.step_count >= max_steps:
                break
            if self.t >= next_sample:
                if on_sample is not None:
                    on_sample(self)
                next_sample += sample_interval
            if self.t >= next_snapshot:
                if on_snapshot is not None:
                    on_snapshot(self)
                next_snapshot += snapshot_interval
            if stop_condition is not None and stop_condition(self):
                break
        if on_sample is not None:
            on_sample(self)

    # -- diagnostics ---------------------------------------------------------

    def min_bond_distance(self) -> float:
        return float(
            _kernels.min_bond_distance(self.pset.pos, self.bonds.indptr, self.bonds.j)
        )

    def physical_stress(self) -> np.ndarray:
        """Kirchhoff stress without the artificial damping contribution."""
        p = self.pset
        bdot = p.def_grad_rate @ np.transpose(p.def_grad, (0, 2, 1))
        tau_d = self.chi_eff * (bdot + np.transpose(bdot, (0, 2, 1)))
        return (
            self.decos.c[:, None, None] * self.decos.b_e + self.decos.tau_r - tau_d
        )

"""Constitutive models with volumetric-deviatoric Kirchhoff stress split.

Every model returns a :class:`StressDecomposition` splitting the Kirchhoff
stress as ``tau = c * b_e + tau_r``, where ``c * b_e`` carries the dominant
shear components (the part the hourglass-corrected force assembly acts on)
and ``tau_r`` holds the remainder, including any artificial damping stress.

For the isotropic elastic/plastic family

    tau = (K/2) (J^2 - 1) I + G dev(b_e_bar),      b_e_bar = |b_e|^(-1/d) b_e

so ``c = |b_e|^(-1/d) G`` and
``tau_r = (K/2)(J^2 - 1) I - (1/d) c tr(b_e) I + tau_d``.

Plasticity follows multiplicative J2 flow theory: the elastic left
Cauchy-Green tensor comes from a trial ``b_e = F Cp_inv F^T``, and radial
return mapping rescales its deviator when the yield function goes positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from tlsph.errors import NumericalFailure

_SQ23 = math.sqrt(2.0 / 3.0)

# Newton solve for the nonlinear-hardening consistency condition.
_NEWTON_RTOL = 1e-10
_NEWTON_MAXIT = 50

# Sub-step target for the viscoplastic overstress relaxation: each RK2
# sub-step may relax at most this fraction of the current overstress.
_VISCO_STEP_FRACTION = 0.05
_VISCO_MAX_SUBSTEPS = 2000


def dev(m: np.ndarray) -> np.ndarray:
    """Trace-free part of a square matrix."""
    d = m.shape[0]
    return m - (np.trace(m) / d) * np.eye(d)


def _check_invertible(F: np.ndarray) -> float:
    J = float(np.linalg.det(F))
    if J <= 0.0:
        raise NumericalFailure(f"inverted element: det(F) = {J:.6e}")
    return J


# ---------------------------------------------------------------------------
# Parameter containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ElasticParams:
    """Isotropic elastic constants; K and G always use the 3D relations."""

    rho0: float
    K: float
    G: float

    def __post_init__(self) -> None:
        if self.K <= 0.0 or self.G <= 0.0 or self.rho0 <= 0.0:
            raise ValueError("rho0, K, and G must all be positive")

    @classmethod
    def from_youngs(cls, rho0: float, E: float, nu: float) -> "ElasticParams":
        return cls(rho0=rho0, K=E / (3.0 * (1.0 - 2.0 * nu)), G=E / (2.0 * (1.0 + nu)))

    @property
    def youngs(self) -> float:
        return 9.0 * self.K * self.G / (3.0 * self.K + self.G)

    @property
    def poisson(self) -> float:
        return (3.0 * self.K - 2.0 * self.G) / (2.0 * (3.0 * self.K + self.G))

    @property
    def sound_speed(self) -> float:
        return math.sqrt(self.K / self.rho0)


PERFECT = "perfect"
LINEAR = "linear"
NONLINEAR = "nonlinear"
HERSCHEL_BULKLEY = "herschel_bulkley"


@dataclass(frozen=True)
class Hardening:
    """Flow-stress law; use the named constructors."""

    kind: str
    kappa: float = 0.0  # linear hardening modulus
    tau_sat: float = 0.0  # saturation flow stress (nonlinear)
    exponent: float = 0.0  # saturation exponent (nonlinear)
    eta: float = 0.0  # viscoplastic consistency parameter
    power: float = 1.0  # viscoplastic rate exponent

    @classmethod
    def perfect(cls) -> "Hardening":
        return cls(kind=PERFECT)

    @classmethod
    def linear(cls, kappa: float) -> "Hardening":
        return cls(kind=LINEAR, kappa=kappa)

    @classmethod
    def nonlinear(
        cls, tau_sat: float, exponent: float, kappa_lin: float
    ) -> "Hardening":
        return cls(kind=NONLINEAR, kappa=kappa_lin, tau_sat=tau_sat, exponent=exponent)

    @classmethod
    def herschel_bulkley(cls, eta: float, power: float) -> "Hardening":
        return cls(kind=HERSCHEL_BULKLEY, eta=eta, power=power)


@dataclass(frozen=True)
class PlasticParams:
    base: ElasticParams
    tau_y: float
    hardening: Hardening = field(default_factory=Hardening.perfect)

    def __post_init__(self) -> None:
        if self.tau_y < 0.0:
            raise ValueError("yield stress must be non-negative")

    def flow_stress(self, xi: float) -> float:
        h = self.hardening
        if h.kind == LINEAR:
            return self.tau_y + h.kappa * xi
        if h.kind == NONLINEAR:
            return (
                self.tau_y
                + h.kappa * xi
                + (h.tau_sat - self.tau_y) * (1.0 - math.exp(-h.exponent * xi))
            )
        return self.tau_y

    def flow_stress_slope(self, xi: float) -> float:
        h = self.hardening
        if h.kind == LINEAR:
            return h.kappa
        if h.kind == NONLINEAR:
            return h.kappa + (h.tau_sat - self.tau_y) * h.exponent * math.exp(
                -h.exponent * xi
            )
        return 0.0


@dataclass
class PlasticState:
    """Per-particle plastic internal state.

    ``cp_inv`` is the inverse plastic right Cauchy tensor (identity before
    any yielding) and ``xi`` the accumulated hardening factor (starts at 0,
    never decreases).
    """

    cp_inv: np.ndarray
    xi: float = 0.0

    @classmethod
    def initial(cls, d: int) -> "PlasticState":
        return cls(cp_inv=np.eye(d), xi=0.0)


@dataclass(frozen=True)
class HolzapfelOgdenParams:
    """Anisotropic muscle model constants plus fiber/sheet directions."""

    rho0: float
    a: float
    b: float
    a_f: float
    b_f: float
    a_s: float
    b_s: float
    a_fs: float
    b_fs: float
    lam: float
    f0: np.ndarray
    s0: np.ndarray

    def __post_init__(self) -> None:
        for name in ("a", "a_f", "a_s", "a_fs", "b", "b_f", "b_s", "b_fs"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("f0", "s0"):
            v = np.asarray(getattr(self, name), dtype=float)
            norm = np.linalg.norm(v)
            if abs(norm - 1.0) > 1e-9:
                raise ValueError(f"{name} must be a unit vector")
            object.__setattr__(self, name, v)

    @classmethod
    def from_poisson(cls, rho0: float, a: float, nu: float, **kw) -> "HolzapfelOgdenParams":
        """Treat ``a`` as the shear-modulus analogue and derive the Lamé
        parameter from a Poisson ratio via lam = 2 a nu / (1 - 2 nu)."""
        lam = 2.0 * a * nu / (1.0 - 2.0 * nu)
        return cls(rho0=rho0, a=a, lam=lam, **kw)

    @property
    def sound_speed(self) -> float:
        # Reference-state p-wave modulus estimate; the exponential terms
        # stiffen further under strain, which the acceleration-based
        # timestep criterion picks up.
        modulus = (
            self.lam
            + 2.0 * self.a * (1.0 + self.b)
            + 4.0 * (self.a_f + self.a_s)
            + 2.0 * self.a_fs
        )
        return math.sqrt(modulus / self.rho0)

    @property
    def bulk_like_modulus(self) -> float:
        return self.lam + 2.0 * self.a / 3.0


@dataclass
class StressDecomposition:
    """Kirchhoff stress split ``tau = c * b_e + tau_r``."""

    c: float
    b_e: np.ndarray
    tau_r: np.ndarray

    def total(self) -> np.ndarray:
        return self.c * self.b_e + self.tau_r


# ---------------------------------------------------------------------------
# Constitutive evaluations
# ---------------------------------------------------------------------------


def neo_hookean_stress(
    F: np.ndarray, params: ElasticParams, damping: np.ndarray | None = None
) -> StressDecomposition:
    """Neo-Hookean Kirchhoff stress, decomposed for the shear-force assembly."""
    d = F.shape[0]
    J = _check_invertible(F)
    b = F @ F.T
    c = float(np.linalg.det(b)) ** (-1.0 / d) * params.G
    tau_r = (0.5 * params.K * (J * J - 1.0) - c * np.trace(b) / d) * np.eye(d)
    if damping is not None:
        tau_r = tau_r + damping
    return StressDecomposition(c=c, b_e=b, tau_r=tau_r)


def yield_function(tau_de: np.ndarray, xi: float, params: PlasticParams) -> float:
    """J2 yield indicator f = ||tau_de||_F - sqrt(2/3) * flow_stress(xi)."""
    norm = float(np.linalg.norm(tau_de))
    tr = abs(float(np.trace(tau_de)))
    if tr > 1e-8 * (norm + params.tau_y):
        raise ValueError(f"tau_de is not trace-free (trace {tr:.3e})")
    return norm - _SQ23 * params.flow_stress(xi)


def _trial_state(F: np.ndarray, state: PlasticState, G: float):
    d = F.shape[0]
    be_trial = F @ state.cp_inv @ F.T
    be_trial = 0.5 * (be_trial + be_trial.T)
    det_be = float(np.linalg.det(be_trial))
    scale = det_be ** (-1.0 / d)
    tr_be = float(np.trace(be_trial))
    tau_de_trial = G * scale * (be_trial - (tr_be / d) * np.eye(d))
    return be_trial, scale, tr_be, tau_de_trial


def _solve_hardening_increment(
    norm_trial: float, f_trial: float, G_tilde: float, xi: float, params: PlasticParams
) -> float:
    """Consistency solve for the hardening-factor increment of one return map."""
    h = params.hardening
    if h.kind != NONLINEAR:
        return 0.5 * f_trial / (G_tilde + h.kappa / 3.0)
    # Newton iteration on g(x) = ||tau_de_trial|| - 2 G~ x
    #                            - sqrt(2/3) flow(xi + sqrt(2/3) x)
    x = 0.5 * f_trial / (G_tilde + params.flow_stress_slope(xi) / 3.0)
    tol = _NEWTON_RTOL * params.tau_y
    for _ in range(_NEWTON_MAXIT):
        xi_new = xi + _SQ23 * x
        g = norm_trial - 2.0 * G_tilde * x - _SQ23 * params.flow_stress(xi_new)
        if abs(g) <= tol:
            return x
        dg = -2.0 * G_tilde - (2.0 / 3.0) * params.flow_stress_slope(xi_new)
        x -= g / dg
    raise NumericalFailure(
        f"return-map Newton iteration failed to converge (residual {g:.3e})"
    )


def _finish_return_map(
    F: np.ndarray,
    be_trial: np.ndarray,
    tr_be: float,
    tau_de: np.ndarray,
    xi_new: float,
    params: PlasticParams,
    damping: np.ndarray | None,
) -> tuple[StressDecomposition, PlasticState]:
    d = F.shape[0]
    J = float(np.linalg.det(F))
    be = tau_de / params.base.G + (tr_be / d) * np.eye(d)
    Finv = np.linalg.inv(F)
    cp_inv = Finv @ be @ Finv.T
    cp_inv = 0.5 * (cp_inv + cp_inv.T)
    c = float(np.linalg.det(be)) ** (-1.0 / d) * params.base.G
    tau_r = (0.5 * params.base.K * (J * J - 1.0) - c * np.trace(be) / d) * np.eye(d)
    if damping is not None:
        tau_r = tau_r + damping
    return (
        StressDecomposition(c=c, b_e=be, tau_r=tau_r),
        PlasticState(cp_inv=cp_inv, xi=xi_new),
    )


def plastic_return_map(
    F: np.ndarray,
    state: PlasticState,
    params: PlasticParams,
    damping: np.ndarray | None = None,
) -> tuple[StressDecomposition, PlasticState]:
    """Rate-independent J2 return map (perfect / linear / nonlinear hardening).

    The trial elastic state is ``b_e = F Cp_inv F^T``; if its deviatoric
    stress exceeds the flow stress, the deviator is scaled radially back to
    the yield surface, the hardening factor grows, and ``Cp_inv`` is rebuilt
    from the corrected ``b_e``.
    """
    d = F.shape[0]
    _check_invertible(F)
    G = params.base.G
    be_trial, scale, tr_be, tau_de_trial = _trial_state(F, state, G)
    norm_trial = float(np.linalg.norm(tau_de_trial))
    f_trial = norm_trial - _SQ23 * params.flow_stress(state.xi)

    if f_trial <= 0.0:
        K = params.base.K
        J = float(np.linalg.det(F))
        c = float(np.linalg.det(be_trial)) ** (-1.0 / d) * G
        tau_r = (0.5 * K * (J * J - 1.0) - c * tr_be / d) * np.eye(d)
        if damping is not None:
            tau_r = tau_r + damping
        return StressDecomposition(c=c, b_e=be_trial, tau_r=tau_r), state

    assert norm_trial > 0.0, "positive yield function with vanishing deviator"
    G_tilde = (scale * tr_be / d) * G
    dxi = _solve_hardening_increment(norm_trial, f_trial, G_tilde, state.xi, params)
    xi_new = state.xi + _SQ23 * dxi
    tau_de = tau_de_trial * (1.0 - 2.0 * G_tilde * dxi / norm_trial)
    return _finish_return_map(F, be_trial, tr_be, tau_de, xi_new, params, damping)


def herschel_bulkley_return_map(
    F: np.ndarray,
    state: PlasticState,
    params: PlasticParams,
    dt: float,
    damping: np.ndarray | None = None,
) -> tuple[StressDecomposition, PlasticState]:
    """Viscoplastic overstress relaxation of the deviatoric trial stress.

    The deviator norm s relaxes by ds/dt = -2 G~ ((s - s_y)/eta)^(1/n) while
    above the yield surface; the relaxation is integrated with adaptive RK2
    sub-steps so a single call stays within ~1% of a finely sub-stepped
    integration of the same flow rule.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive for rate-dependent flow")
    d = F.shape[0]
    _check_invertible(F)
    G = params.base.G
    h = params.hardening
    be_trial, scale, tr_be, tau_de_trial = _trial_state(F, state, G)
    norm_trial = float(np.linalg.norm(tau_de_trial))
    s_yield = _SQ23 * params.tau_y

    if norm_trial <= s_yield:
        K = params.base.K
        J = float(np.linalg.det(F))
        c = float(np.linalg.det(be_trial)) ** (-1.0 / d) * G
        tau_r = (0.5 * K * (J * J - 1.0) - c * tr_be / d) * np.eye(d)
        if damping is not None:
            tau_r = tau_r + damping
        return StressDecomposition(c=c, b_e=be_trial, tau_r=tau_r), state

    G_tilde = (scale * tr_be / d) * G
    inv_power = 1.0 / h.power
    s = norm_trial
    over0 = s - s_yield
    rate0 = (over0 / h.eta) ** inv_power
    n_sub = int(
        min(
            _VISCO_MAX_SUBSTEPS,
            max(1, math.ceil(2.0 * G_tilde * rate0 * dt / (_VISCO_STEP_FRACTION * over0))),
        )
    )
    h_sub = dt / n_sub
    for _ in range(n_sub):
        over = s - s_yield
        if over <= 0.0:
            s = s_yield
            break
        k1 = -2.0 * G_tilde * (over / h.eta) ** inv_power
        over_mid = max(s + 0.5 * h_sub * k1 - s_yield, 0.0)
        k2 = -2.0 * G_tilde * (over_mid / h.eta) ** inv_power
        s = max(s + h_sub * k2, s_yield)

    d_gamma = (norm_trial - s) / (2.0 * G_tilde)
    xi_new = state.xi + _SQ23 * d_gamma
    tau_de = tau_de_trial * (s / norm_trial)
    return _finish_return_map(F, be_trial, tr_be, tau_de, xi_new, params, damping)


def holzapfel_ogden_stress(
    F: np.ndarray, params: HolzapfelOgdenParams, damping: np.ndarray | None = None
) -> StressDecomposition:
    """Holzapfel-Ogden Kirchhoff stress with fiber/sheet/cross terms.

    The shear coefficient is ``c = a exp(b (I1 - 3))`` with ``b_e = F F^T``;
    the remainder collects the volumetric term and the directional
    exponential terms mapped through F ( . ) F^T.
    """
    if F.shape[0] != 3:
        raise ValueError("Holzapfel-Ogden model is three-dimensional")
    J = _check_invertible(F)
    b = F @ F.T
    I1 = float(np.trace(b))
    Ff = F @ params.f0
    Fs = F @ params.s0
    I_ff = float(Ff @ Ff)
    I_ss = float(Fs @ Fs)
    I_fs = float(Ff @ Fs)

    c = params.a * math.exp(params.b * (I1 - 3.0))
    tau_r = (params.lam * math.log(J) - params.a) * np.eye(3)
    if params.a_f > 0.0:
        coef = 2.0 * params.a_f * (I_ff - 1.0) * math.exp(params.b_f * (I_ff - 1.0) ** 2)
        tau_r = tau_r + coef * np.outer(Ff, Ff)
    if params.a_s > 0.0:
        coef = 2.0 * params.a_s * (I_ss - 1.0) * math.exp(params.b_s * (I_ss - 1.0) ** 2)
        tau_r = tau_r + coef * np.outer(Fs, Fs)
    if params.a_fs > 0.0:
        coef = params.a_fs * I_fs * math.exp(params.b_fs * I_fs**2)
        tau_r = tau_r + coef * (np.outer(Ff, Fs) + np.outer(Fs, Ff))
    if damping is not None:
        tau_r = tau_r + damping
    return StressDecomposition(c=c, b_e=b, tau_r=tau_r)


def active_stress(F: np.ndarray, Vm: float, params: HolzapfelOgdenParams) -> np.ndarray:
    """Active contraction stress Ta F (f0 x f0) F^T with Ta = -0.5 Vm."""
    if F.shape[0] != 3:
        raise ValueError("active stress model is three-dimensional")
    Ta = -0.5 * Vm
    Ff = F @ params.f0
    return Ta * np.outer(Ff, Ff)


def damping_stress(
    F: np.ndarray,
    Fdot: np.ndarray,
    params,
    h: float,
    damping_scale: float = 1.0,
) -> np.ndarray:
    """Kelvin-Voigt artificial damping stress tau_d = scale (chi/2) db/dt.

    chi = rho c h / 2 with c the material sound speed and h the smoothing
    length; db/dt = Fdot F^T + F Fdot^T is symmetric by construction.
    """
    chi = params.rho0 * params.sound_speed * h / 2.0
    bdot = Fdot @ F.T + F @ Fdot.T
    return damping_scale * 0.5 * chi * bdot


# ---------------------------------------------------------------------------
# Solver-facing material binding
# ---------------------------------------------------------------------------


_HARDENING_CODES = {PERFECT: 0, LINEAR: 1, NONLINEAR: 2}


@dataclass(frozen=True)
class MaterialModel:
    """One body's constitutive binding, packed for the batch solver kernels.

    ``kind`` and ``packed`` mirror the dispatch codes used by the compiled
    constitutive pass; ``f0``/``s0`` are only meaningful for the anisotropic
    model and default to zero vectors otherwise.
    """

    kind: int
    packed: np.ndarray
    rho0: float
    sound_speed: float
    params: object
    f0: np.ndarray
    s0: np.ndarray
    name: str

    @classmethod
    def neo_hookean(cls, params: ElasticParams) -> "MaterialModel":
        mp = np.zeros(9)
        mp[0] = params.K
        mp[1] = params.G
        return cls(
            kind=0,
            packed=mp,
            rho0=params.rho0,
            sound_speed=params.sound_speed,
            params=params,
            f0=np.zeros(3),
            s0=np.zeros(3),
            name="neo-hookean",
        )

    @classmethod
    def plastic(cls, params: PlasticParams) -> "MaterialModel":
        base = params.base
        mp = np.zeros(9)
        mp[0] = base.K
        mp[1] = base.G
        mp[2] = params.tau_y
        h = params.hardening
        if h.kind == HERSCHEL_BULKLEY:
            mp[3] = h.eta
            mp[4] = h.power
            kind = 2
            name = "herschel-bulkley"
        else:
            mp[3] = float(_HARDENING_CODES[h.kind])
            mp[4] = h.kappa
            mp[5] = h.tau_sat
            mp[6] = h.exponent
            kind = 1
            name = f"j2-plastic-{h.kind}"
        return cls(
            kind=kind,
            packed=mp,
            rho0=base.rho0,
            sound_speed=base.sound_speed,
            params=params,
            f0=np.zeros(3),
            s0=np.zeros(3),
            name=name,
        )

    @classmethod
    def holzapfel_ogden(cls, params: HolzapfelOgdenParams) -> "MaterialModel":
        mp = np.array(
            [
                params.lam,
                params.a,
                params.b,
                params.a_f,
                params.b_f,
                params.a_s,
                params.b_s,
                params.a_fs,
                params.b_fs,
            ]
        )
        return cls(
            kind=3,
            packed=mp,
            rho0=params.rho0,
            sound_speed=params.sound_speed,
            params=params,
            f0=np.asarray(params.f0, dtype=float),
            s0=np.asarray(params.s0, dtype=float),
            name="holzapfel-ogden",
        )

    @property
    def is_plastic(self) -> bool:
        return self.kind in (1, 2)

    def damping_factor(self, h: float, damping_scale: float) -> float:
        """chi_eff such that tau_d = chi_eff * db/dt."""
        chi = self.rho0 * self.sound_speed * h / 2.0
        return damping_scale * 0.5 * chi


def von_mises_stress(tau: np.ndarray, J: float) -> float:
    """Equivalent Cauchy stress sqrt(3/2) ||dev(tau / J)||_F."""
    sigma = tau / J
    return math.sqrt(1.5) * float(np.linalg.norm(dev(sigma)))


def von_mises_strain(F: np.ndarray) -> float:
    """Equivalent Green-Lagrange strain sqrt(2/3) ||dev(E)||_F."""
    d = F.shape[0]
    E = 0.5 * (F.T @ F - np.eye(d))
    return math.sqrt(2.0 / 3.0) * float(np.linalg.norm(dev(E)))

"""Constitutive-model oracles: energy finite differences, scalar return-map
solves, sub-stepped viscoplastic flow, and decomposition completeness."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tlsph.errors import NumericalFailure
from tlsph.materials import (
    ElasticParams,
    Hardening,
    HolzapfelOgdenParams,
    PlasticParams,
    PlasticState,
    StressDecomposition,
    active_stress,
    damping_stress,
    dev,
    herschel_bulkley_return_map,
    holzapfel_ogden_stress,
    neo_hookean_stress,
    plastic_return_map,
    von_mises_stress,
    yield_function,
)

SQ23 = math.sqrt(2.0 / 3.0)

ELASTIC_2D = ElasticParams.from_youngs(1000.0, 2.0e6, 0.4)
ELASTIC_3D = ElasticParams.from_youngs(8930.0, 117.0e9, 0.35)
COPPER = PlasticParams(base=ELASTIC_3D, tau_y=0.4e9, hardening=Hardening.linear(0.1e9))


def random_F(rng, d, spread=0.3):
    while True:
        F = np.eye(d) + spread * rng.normal(size=(d, d))
        if np.linalg.det(F) > 0.3:
            return F


def kirchhoff_from_energy(energy, F, eps=1e-6):
    """Independent oracle: tau = (dW/dF) F^T by central differences."""
    d = F.shape[0]
    P = np.zeros((d, d))
    for a in range(d):
        for b in range(d):
            Fp = F.copy()
            Fp[a, b] += eps
            Fm = F.copy()
            Fm[a, b] -= eps
            P[a, b] = (energy(Fp) - energy(Fm)) / (2.0 * eps)
    return P @ F.T


def neo_hookean_energy(F, K, G):
    d = F.shape[0]
    J = np.linalg.det(F)
    b = F @ F.T
    W_v = 0.5 * K * (0.5 * (J**2 - 1.0) - math.log(J))
    W_s = 0.5 * G * (np.linalg.det(b) ** (-1.0 / d) * np.trace(b) - d)
    return W_v + W_s


# ---------------------------------------------------------------------------
# Conversions and helpers
# ---------------------------------------------------------------------------


def test_modulus_conversions():
    p = ElasticParams.from_youngs(1000.0, 2.0e6, 0.4)
    assert p.K == pytest.approx(2.0e6 / (3.0 * 0.2))
    assert p.G == pytest.approx(2.0e6 / 2.8)
    assert p.youngs == pytest.approx(2.0e6)
    assert p.poisson == pytest.approx(0.4)
    assert p.sound_speed == pytest.approx(math.sqrt(p.K / 1000.0))


@given(st.integers(min_value=0, max_value=2**32 - 1), st.sampled_from([2, 3]))
@settings(max_examples=50, deadline=None)
def test_dev_trace_free(seed, d):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(d, d))
    spd = A @ A.T + d * np.eye(d)
    assert abs(np.trace(dev(spd))) <= 1e-12 * np.linalg.norm(spd)


# ---------------------------------------------------------------------------
# Neo-Hookean
# ---------------------------------------------------------------------------


def test_neo_hookean_reference_state_2d():
    dec = neo_hookean_stress(np.eye(2), ELASTIC_2D)
    assert dec.c == pytest.approx(ELASTIC_2D.G)
    assert np.allclose(dec.b_e, np.eye(2))
    assert np.allclose(dec.tau_r, -ELASTIC_2D.G * np.eye(2))
    assert np.allclose(dec.total(), 0.0, atol=1e-12 * ELASTIC_2D.G)


def test_neo_hookean_small_strain_limit():
    params = ElasticParams.from_youngs(1000.0, 2.0e6, 0.3)
    eps = 1e-6
    F = np.diag([1.0 + eps, 1.0, 1.0])
    tau = neo_hookean_stress(F, params).total()
    lam = params.K - 2.0 * params.G / 3.0
    strain = np.diag([eps, 0.0, 0.0])
    expected = lam * np.trace(strain) * np.eye(3) + 2.0 * params.G * strain
    assert np.allclose(tau, expected, rtol=1e-3, atol=1e-3 * np.linalg.norm(expected))


@pytest.mark.parametrize("d", [2, 3])
def test_neo_hookean_matches_energy_derivative(d):
    params = ELASTIC_2D
    rng = np.random.default_rng(42)
    for _ in range(20):
        F = random_F(rng, d)
        tau = neo_hookean_stress(F, params).total()
        oracle = kirchhoff_from_energy(
            lambda F_: neo_hookean_energy(F_, params.K, params.G), F
        )
        assert np.linalg.norm(tau - oracle) <= 1e-5 * np.linalg.norm(oracle)


def test_neo_hookean_inverted_element_fatal():
    F = np.diag([-1.0, 1.0])
    with pytest.raises(NumericalFailure, match="inverted"):
        neo_hookean_stress(F, ELASTIC_2D)


@pytest.mark.parametrize("d", [2, 3])
def test_decomposition_completeness_neo_hookean(d):
    # c b_e + tau_r must reconstruct the full Kirchhoff stress.
    rng = np.random.default_rng(3)
    for _ in range(1000):
        F = random_F(rng, d)
        dec = neo_hookean_stress(F, ELASTIC_2D)
        J = np.linalg.det(F)
        b = F @ F.T
        b_bar = np.linalg.det(b) ** (-1.0 / d) * b
        full = 0.5 * ELASTIC_2D.K * (J**2 - 1.0) * np.eye(d) + ELASTIC_2D.G * dev(b_bar)
        scale = max(np.linalg.norm(full), ELASTIC_2D.G * 1e-9)
        assert np.linalg.norm(dec.total() - full) <= 1e-10 * scale


# ---------------------------------------------------------------------------
# Yield function and J2 return mapping
# ---------------------------------------------------------------------------


def test_yield_function_at_origin():
    tau_de = np.zeros((3, 3))
    assert yield_function(tau_de, 0.0, COPPER) == pytest.approx(-SQ23 * 0.4e9)


def test_yield_function_on_surface():
    norm = SQ23 * COPPER.tau_y
    a = norm / math.sqrt(2.0)
    tau_de = np.diag([a, -a, 0.0])
    assert yield_function(tau_de, 0.0, COPPER) == pytest.approx(0.0, abs=1e-3)


def test_yield_function_linear_hardening_value():
    a = 1.0e9 / math.sqrt(2.0)
    tau_de = np.diag([a, -a, 0.0])
    f = yield_function(tau_de, 1.0, COPPER)
    assert f == pytest.approx(1.0e9 - SQ23 * 5.0e8)


def test_yield_function_rejects_non_deviatoric():
    with pytest.raises(ValueError, match="trace"):
        yield_function(np.eye(3) * 1e9, 0.0, COPPER)


def test_elastic_branch_leaves_state_unchanged():
    state = PlasticState.initial(2)
    params = PlasticParams(base=ELASTIC_2D, tau_y=1.0e6, hardening=Hardening.linear(1e5))
    F = np.array([[1.0, 1e-4], [0.0, 1.0]])
    dec, new_state = plastic_return_map(F, state, params)
    assert new_state.xi == state.xi == 0.0
    assert np.array_equal(new_state.cp_inv, np.eye(2))
    assert np.allclose(dec.b_e, F @ F.T)


def simple_shear_trial(gamma, params, xi=0.0):
    """Independent scalar evaluation of the simple-shear trial state."""
    G = params.base.G
    # b = F F^T for F = [[1, g], [0, 1]] has det 1, trace 2 + g^2.
    tr_b = 2.0 + gamma**2
    dev_norm = math.sqrt(gamma**4 / 2.0 + 2.0 * gamma**2)
    norm_trial = G * dev_norm
    f_trial = norm_trial - SQ23 * params.flow_stress(xi)
    G_tilde = (tr_b / 2.0) * G
    return norm_trial, f_trial, G_tilde


def test_simple_shear_increment_matches_scalar_oracle():
    params = PlasticParams(
        base=ElasticParams(rho0=1000.0, K=1.0e9, G=0.5e9),
        tau_y=10.0e6,
        hardening=Hardening.linear(2.0e6),
    )
    gamma = 0.08
    F = np.array([[1.0, gamma], [0.0, 1.0]])
    norm_trial, f_trial, G_tilde = simple_shear_trial(gamma, params)
    assert f_trial > 0.0
    dxi_expected = 0.5 * f_trial / (G_tilde + params.hardening.kappa / 3.0)

    dec, state = plastic_return_map(F, PlasticState.initial(2), params)
    assert state.xi == pytest.approx(SQ23 * dxi_expected, rel=1e-12)


@pytest.mark.parametrize(
    "hardening",
    [
        Hardening.perfect(),
        Hardening.linear(0.1e9),
        Hardening.nonlinear(tau_sat=715.0e6, exponent=16.93, kappa_lin=129.24e6),
    ],
)
def test_return_map_yield_consistency(hardening):
    base = ElasticParams(rho0=7850.0, K=164.21e9, G=80.1938e9)
    params = PlasticParams(base=base, tau_y=450.0e6, hardening=hardening)
    rng = np.random.default_rng(11)
    state = PlasticState.initial(3)
    for _ in range(30):
        F = random_F(rng, 3, spread=0.02)
        norm_trial = np.linalg.norm(
            base.G
            * dev(
                np.linalg.det(F @ state.cp_inv @ F.T) ** (-1.0 / 3.0)
                * (F @ state.cp_inv @ F.T)
            )
        )
        dec, new_state = plastic_return_map(F, state, params)
        if new_state.xi > state.xi:
            # scalar consistency: f(||tau_trial|| - 2 G~ dxi, xi_new) == 0
            be_trial = F @ state.cp_inv @ F.T
            scale = np.linalg.det(be_trial) ** (-1.0 / 3.0)
            G_tilde = scale * np.trace(be_trial) / 3.0 * base.G
            dxi = (new_state.xi - state.xi) / SQ23
            f_res = (
                norm_trial
                - 2.0 * G_tilde * dxi
                - SQ23 * params.flow_stress(new_state.xi)
            )
            assert abs(f_res) <= 1e-9 * params.tau_y
            # trace of b_e preserved by the radial return
            assert np.trace(dec.b_e) == pytest.approx(np.trace(be_trial), rel=1e-12)
        assert new_state.xi >= state.xi
        sym_err = np.max(np.abs(new_state.cp_inv - new_state.cp_inv.T))
        assert sym_err <= 1e-12 * max(1.0, np.max(np.abs(new_state.cp_inv)))
        assert np.all(np.linalg.eigvalsh(new_state.cp_inv) > 0.0)
        state = new_state


def test_nonlinear_hardening_matches_bisection_oracle():
    base = ElasticParams(rho0=7850.0, K=164.21e9, G=80.1938e9)
    params = PlasticParams(
        base=base,
        tau_y=450.0e6,
        hardening=Hardening.nonlinear(tau_sat=715.0e6, exponent=16.93, kappa_lin=129.24e6),
    )
    gamma = 0.02
    F = np.array([[1.0, gamma, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    state = PlasticState.initial(3)
    be = F @ F.T
    scale = np.linalg.det(be) ** (-1.0 / 3.0)
    norm_trial = np.linalg.norm(base.G * dev(scale * be))
    G_tilde = scale * np.trace(be) / 3.0 * base.G

    def g(x):
        return norm_trial - 2.0 * G_tilde * x - SQ23 * params.flow_stress(SQ23 * x)

    lo, hi = 0.0, norm_trial / (2.0 * G_tilde)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    dxi_oracle = 0.5 * (lo + hi)

    _, new_state = plastic_return_map(F, state, params)
    assert new_state.xi == pytest.approx(SQ23 * dxi_oracle, rel=1e-10)


def test_plastic_decomposition_reconstructs_full_stress():
    rng = np.random.default_rng(5)
    params = COPPER
    state = PlasticState.initial(3)
    for _ in range(200):
        F = random_F(rng, 3, spread=0.05)
        dec, state = plastic_return_map(F, state, params)
        J = np.linalg.det(F)
        b_bar = np.linalg.det(dec.b_e) ** (-1.0 / 3.0) * dec.b_e
        full = (
            0.5 * params.base.K * (J**2 - 1.0) * np.eye(3)
            + params.base.G * dev(b_bar)
        )
        scale = max(np.linalg.norm(full), params.base.G * 1e-9)
        assert np.linalg.norm(dec.total() - full) <= 1e-10 * scale


# ---------------------------------------------------------------------------
# Herschel-Bulkley viscoplasticity
# ---------------------------------------------------------------------------

OOBLECK = PlasticParams(
    base=ElasticParams(rho0=1000.0, K=109.0e3, G=11.2e3),
    tau_y=0.1,
    hardening=Hardening.herschel_bulkley(eta=10.0, power=2.8),
)


def test_hb_below_yield_unchanged():
    state = PlasticState.initial(3)
    F = np.eye(3)
    dec, new_state = herschel_bulkley_return_map(F, state, OOBLECK, dt=1e-4)
    assert new_state.xi == 0.0
    assert np.array_equal(new_state.cp_inv, np.eye(3))


def hb_deviator_norm(dec, G):
    return G * np.linalg.norm(dev(dec.b_e))


def test_hb_small_dt_approaches_trial():
    gamma = 0.05
    F = np.array([[1.0, gamma, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    state = PlasticState.initial(3)
    be = F @ F.T
    scale = np.linalg.det(be) ** (-1.0 / 3.0)
    norm_trial = np.linalg.norm(OOBLECK.base.G * dev(scale * be))
    dec, _ = herschel_bulkley_return_map(F, state, OOBLECK, dt=1e-12)
    s_out = hb_deviator_norm(dec, OOBLECK.base.G)
    assert s_out == pytest.approx(norm_trial, rel=1e-6)


def test_hb_single_step_matches_substepped_ode():
    gamma = 0.05
    F = np.array([[1.0, gamma, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    state = PlasticState.initial(3)
    G = OOBLECK.base.G
    h = OOBLECK.hardening
    be = F @ F.T
    scale = np.linalg.det(be) ** (-1.0 / 3.0)
    norm_trial = np.linalg.norm(G * dev(scale * be))
    G_tilde = scale * np.trace(be) / 3.0 * G
    s_yield = SQ23 * OOBLECK.tau_y

    dt = 0.02
    n_fine = 100_000
    s = norm_trial
    for _ in range(n_fine):
        over = max(s - s_yield, 0.0)
        s -= (dt / n_fine) * 2.0 * G_tilde * (over / h.eta) ** (1.0 / h.power)
        s = max(s, s_yield)
    s_oracle = s

    dec, new_state = herschel_bulkley_return_map(F, state, OOBLECK, dt=dt)
    s_impl = hb_deviator_norm(dec, G)
    relaxed = norm_trial - s_oracle
    assert relaxed > 0.0
    assert abs(s_impl - s_oracle) <= 0.01 * relaxed
    assert new_state.xi == pytest.approx(SQ23 * (norm_trial - s_impl) / (2 * G_tilde), rel=1e-9)


def test_hb_rejects_nonpositive_dt():
    with pytest.raises(ValueError):
        herschel_bulkley_return_map(np.eye(3), PlasticState.initial(3), OOBLECK, dt=0.0)


# ---------------------------------------------------------------------------
# Holzapfel-Ogden and active stress
# ---------------------------------------------------------------------------


def muscle_params(a_f=18.472e3, a_s=2.841e3, a_fs=0.216e3):
    return HolzapfelOgdenParams(
        rho0=1000.0,
        a=0.059e3,
        b=8.023,
        a_f=a_f,
        b_f=16.026,
        a_s=a_s,
        b_s=11.12,
        a_fs=a_fs,
        b_fs=11.436,
        lam=0.059e3 * 2.0 * 0.495 / 0.01,
        f0=np.array([1.0, 0.0, 0.0]),
        s0=np.array([0.0, 1.0, 0.0]),
    )


def holzapfel_energy(F, p):
    J = np.linalg.det(F)
    C = F.T @ F
    I1 = np.trace(C)
    I_ff = p.f0 @ C @ p.f0
    I_ss = p.s0 @ C @ p.s0
    I_fs = p.f0 @ C @ p.s0
    W = (
        p.a / (2.0 * p.b) * math.exp(p.b * (I1 - 3.0))
        - p.a * math.log(J)
        + 0.5 * p.lam * math.log(J) ** 2
    )
    for a_i, b_i, inv in ((p.a_f, p.b_f, I_ff), (p.a_s, p.b_s, I_ss)):
        if a_i > 0.0:
            if b_i > 0.0:
                W += a_i / (2.0 * b_i) * (math.exp(b_i * (inv - 1.0) ** 2) - 1.0)
            else:
                W += 0.5 * a_i * (inv - 1.0) ** 2
    if p.a_fs > 0.0:
        if p.b_fs > 0.0:
            W += p.a_fs / (2.0 * p.b_fs) * (math.exp(p.b_fs * I_fs**2) - 1.0)
        else:
            W += 0.5 * p.a_fs * I_fs**2
    return W


def test_holzapfel_stress_free_reference():
    for params in (muscle_params(), muscle_params(0.0, 0.0, 0.0)):
        dec = holzapfel_ogden_stress(np.eye(3), params)
        assert np.allclose(dec.total(), 0.0, atol=1e-12 * params.a)


def test_holzapfel_isotropic_reduction():
    p = muscle_params(a_f=0.0, a_s=0.0, a_fs=0.0)
    rng = np.random.default_rng(2)
    F = random_F(rng, 3, spread=0.2)
    dec = holzapfel_ogden_stress(F, p)
    J = np.linalg.det(F)
    b = F @ F.T
    I1 = np.trace(b)
    expected = (p.lam * math.log(J) - p.a) * np.eye(3) + p.a * math.exp(
        p.b * (I1 - 3.0)
    ) * b
    assert np.allclose(dec.total(), expected, rtol=1e-12)


def test_holzapfel_matches_energy_derivative():
    p = muscle_params()
    rng = np.random.default_rng(9)
    for _ in range(10):
        F = random_F(rng, 3, spread=0.1)
        tau = holzapfel_ogden_stress(F, p).total()
        oracle = kirchhoff_from_energy(lambda F_: holzapfel_energy(F_, p), F, eps=1e-7)
        assert np.linalg.norm(tau - oracle) <= 1e-5 * np.linalg.norm(oracle)


def test_holzapfel_energy_derivative_with_zero_exponent():
    # Bending-column parameter family: a_f > 0 with b_f = 0.
    p = HolzapfelOgdenParams(
        rho0=1100.0,
        a=5.86e6,
        b=1.0,
        a_f=0.5 * 5.86e6,
        b_f=0.0,
        a_s=0.0,
        b_s=0.0,
        a_fs=0.0,
        b_fs=0.0,
        lam=2.0 * 5.86e6 * 0.45 / 0.1,
        f0=np.array([0.0, 0.0, 1.0]),
        s0=np.array([1.0, 0.0, 0.0]),
    )
    rng = np.random.default_rng(17)
    for _ in range(5):
        F = random_F(rng, 3, spread=0.15)
        tau = holzapfel_ogden_stress(F, p).total()
        oracle = kirchhoff_from_energy(lambda F_: holzapfel_energy(F_, p), F, eps=1e-7)
        assert np.linalg.norm(tau - oracle) <= 1e-5 * np.linalg.norm(oracle)


def test_holzapfel_decomposition_completeness():
    p = muscle_params()
    rng = np.random.default_rng(31)
    for _ in range(1000):
        F = random_F(rng, 3, spread=0.15)
        dec = holzapfel_ogden_stress(F, p)
        oracle = holzapfel_ogden_stress(F, p).total()
        assert np.linalg.norm(dec.c * dec.b_e + dec.tau_r - oracle) <= 1e-10 * max(
            np.linalg.norm(oracle), p.a
        )


def test_holzapfel_requires_3d():
    with pytest.raises(ValueError):
        holzapfel_ogden_stress(np.eye(2), muscle_params())


def test_active_stress_values():
    p = muscle_params()
    assert np.allclose(active_stress(np.eye(3), 0.0, p), 0.0)
    s30 = active_stress(np.eye(3), 30.0, p)
    expected = -15.0 * np.outer(p.f0, p.f0)
    assert np.allclose(s30, expected)
    s300 = active_stress(np.eye(3), 300.0, p)
    assert np.allclose(s300, 10.0 * s30)


# ---------------------------------------------------------------------------
# Damping stress
# ---------------------------------------------------------------------------


def test_damping_zero_rate():
    out = damping_stress(np.eye(2), np.zeros((2, 2)), ELASTIC_2D, h=0.0023)
    assert np.allclose(out, 0.0)


def test_damping_scale_factor():
    rng = np.random.default_rng(1)
    F = random_F(rng, 2)
    Fdot = rng.normal(size=(2, 2))
    full = damping_stress(F, Fdot, ELASTIC_2D, h=0.0023, damping_scale=1.0)
    eighth = damping_stress(F, Fdot, ELASTIC_2D, h=0.0023, damping_scale=0.125)
    assert np.allclose(eighth, 0.125 * full)


@given(st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_damping_symmetry(seed):
    rng = np.random.default_rng(seed)
    F = rng.normal(size=(3, 3))
    Fdot = rng.normal(size=(3, 3))
    out = damping_stress(F, Fdot, ELASTIC_3D, h=1e-3)
    assert np.allclose(out, out.T, atol=1e-9 * max(1.0, np.abs(out).max()))


def test_damping_expected_magnitude():
    # tau_d = scale * (chi/2) * db/dt with chi = rho c h / 2.
    F = np.eye(2)
    Fdot = np.array([[0.1, 0.0], [0.0, 0.0]])
    h = 0.0023
    chi = ELASTIC_2D.rho0 * ELASTIC_2D.sound_speed * h / 2.0
    out = damping_stress(F, Fdot, ELASTIC_2D, h=h)
    assert out[0, 0] == pytest.approx(0.5 * chi * 0.2)


def test_von_mises_stress_of_uniaxial():
    tau = np.diag([2.0e6, 0.0, 0.0])
    assert von_mises_stress(tau, 1.0) == pytest.approx(2.0e6)

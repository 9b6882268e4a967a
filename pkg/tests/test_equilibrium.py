"""Fermi-Dirac statistics: thresholds, solver goldens, grid evaluation.

Golden (a, b) pairs come from tests/_oracles.py (mpmath polylog closed forms
plus 30-digit root finding), generated once and frozen here.
"""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lfdlab.equilibrium import (FermiDiracParams, GasMoments,
                                classical_params, electron_quantum_parameter,
                                equilibrium_relative_entropy, evaluate_equilibrium,
                                fd_mass_energy, lemma_brackets, measure_moments,
                                saturated_state, saturation_threshold,
                                solve_fermi_dirac)
from lfdlab.errors import BallTooLarge, NoEquilibrium
from lfdlab.grid import DistributionField, VelocityGrid

# mpmath oracle output for (rho=1, E=1); see tests/_oracles.py __main__
GOLDEN_AB = {
    1e-12: (0.063493635934243464, 0.50000000000000561),
    0.01: (0.063518587455947396, 0.50005612976069037),
    0.1: (0.063743895747216225, 0.50056208964285694),
    1.0: (0.066073002173844936, 0.50570149554135735),
    4.0: (0.074971650725961601, 0.52395978291449934),
}

GOLDEN_THRESHOLDS = {
    "eps_max": 46.832098206938176,
    "eps_bar": 8.2813599736126888,
    "eps_dagger": 0.60114767544394041,
    "eps_one": 4.3918543460912854,
}


# -- thresholds ------------------------------------------------------------------

def test_threshold_goldens(thresholds11):
    for key, want in GOLDEN_THRESHOLDS.items():
        assert getattr(thresholds11, key) == pytest.approx(want, rel=1e-13)


def test_threshold_paper_values(thresholds11):
    assert thresholds11.eps_dagger == pytest.approx(0.6011, abs=1e-3)
    assert thresholds11.eps_max == pytest.approx(46.832, abs=1e-2)
    assert thresholds11.eps_one == pytest.approx(
        (3.0 / 5.0) ** 2.5 * (2.0 * np.pi) ** 1.5)


@given(rho=st.floats(0.1, 10.0), E=st.floats(0.1, 10.0))
def test_threshold_ordering(rho, E):
    th = saturation_threshold(GasMoments(rho=rho, E=E))
    assert th.ordered()


def test_threshold_scaling():
    # all four scale as E^{3/2} / rho
    t1 = saturation_threshold(GasMoments(rho=1.0, E=1.0))
    t2 = saturation_threshold(GasMoments(rho=2.0, E=4.0))
    for key in GOLDEN_THRESHOLDS:
        assert getattr(t2, key) == pytest.approx(
            getattr(t1, key) * 8.0 / 2.0, rel=1e-12)


def test_gas_moments_validation():
    with pytest.raises(ValueError):
        GasMoments(rho=0.0, E=1.0)
    with pytest.raises(ValueError):
        GasMoments(rho=1.0, E=-1.0)
    with pytest.raises(ValueError):
        GasMoments(rho=1.0, E=1.0, u=(0.1, 0.0, 0.0))


# -- solver ----------------------------------------------------------------------

@pytest.mark.parametrize("eps,ab", sorted(GOLDEN_AB.items()))
def test_solver_matches_oracle(moments11, eps, ab):
    params = solve_fermi_dirac(moments11, eps)
    assert params.a == pytest.approx(ab[0], rel=2e-10)
    assert params.b == pytest.approx(ab[1], rel=2e-10)


def test_solver_classical_limit(moments11):
    params = solve_fermi_dirac(moments11, 1e-12)
    a0 = (2.0 * np.pi) ** -1.5
    assert abs(params.a - a0) <= 1e-9
    assert abs(params.b - 0.5) <= 1e-9


def test_solver_moment_residuals(moments11):
    for eps in (0.01, 1.0, 4.0):
        params = solve_fermi_dirac(moments11, eps)
        mass, energy = fd_mass_energy(params)
        assert mass == pytest.approx(1.0, rel=1e-10)
        assert energy == pytest.approx(3.0, rel=1e-10)


def test_solver_rejects_supercritical(moments11):
    with pytest.raises(NoEquilibrium):
        solve_fermi_dirac(moments11, 50.0)


def test_solver_rejects_negative_eps(moments11):
    with pytest.raises(ValueError):
        solve_fermi_dirac(moments11, -0.1)


def test_solver_nontrivial_moments():
    moments = GasMoments(rho=2.5, E=0.7)
    params = solve_fermi_dirac(moments, 0.3)
    mass, energy = fd_mass_energy(params)
    assert mass == pytest.approx(2.5, rel=1e-10)
    assert energy == pytest.approx(3.0 * 2.5 * 0.7, rel=1e-10)


def test_lemma_brackets_sweep(moments11, thresholds11):
    # rigorous (a, b) windows hold on a 20-point sweep up to eps_bar
    br = lemma_brackets(moments11)
    for eps in np.linspace(1e-6, thresholds11.eps_bar, 20):
        p = solve_fermi_dirac(moments11, float(eps))
        assert br["b_lo"] <= p.b <= br["b_hi"]
        assert br["a_lo"] <= p.a <= br["a_hi"]


def test_type_invariant_brackets(moments11, thresholds11):
    # the FermiDiracParams bracket invariant, restated around 1/(2E)
    E = moments11.E
    scale = moments11.rho / (2.0 * np.pi * E) ** 1.5
    for eps in (0.05, 1.0, thresholds11.eps_bar):
        p = solve_fermi_dirac(moments11, eps)
        assert 0.6 * p.b <= 1.0 / (2.0 * E) <= (4.0 / 3.0) * p.b
        assert (3.0 / 5.0) ** 2.5 * p.a <= scale <= (4.0 / 3.0) ** 1.5 * p.a


def test_eps_a_vanishes_classically(moments11):
    # continuity sweep: eps a_eps decreasing to 0 along a log grid
    values = []
    for eps in np.logspace(1, -6, 15):
        p = solve_fermi_dirac(moments11, float(eps))
        values.append(eps * p.a)
    assert all(b < a for a, b in zip(values, values[1:]))
    assert values[-1] < 1e-6


def test_derived_params():
    p = FermiDiracParams(a=0.2, b=0.4, eps=0.5)
    assert p.rho_eps == pytest.approx(0.2 * (np.pi / 0.4) ** 1.5)
    assert p.E_eps == pytest.approx(1.25)
    assert p.c_eps == pytest.approx(1.1)
    assert p.kappa_eps == pytest.approx(1.1 ** -2)


def test_weight_sandwich(moments11, grid16):
    # kappa M <= m <= M pointwise
    p = solve_fermi_dirac(moments11, 1.0)
    M = p.a * np.exp(-p.b * grid16.v2)
    m = p.weight_profile(grid16.v2)
    assert np.all(m <= M * (1.0 + 1e-12))
    assert np.all(m >= p.kappa_eps * M * (1.0 - 1e-12))


# -- grid evaluation ---------------------------------------------------------------

def test_evaluate_classical_is_maxwellian(moments11, grid16):
    field = evaluate_equilibrium(classical_params(moments11), grid16)
    m0 = (2.0 * np.pi) ** -1.5 * np.exp(-grid16.v2 / 2.0)
    assert np.allclose(field.values, m0, rtol=1e-13)


def test_evaluate_max_at_center(moments11, grid32):
    params = solve_fermi_dirac(moments11, 1.0)
    field = evaluate_equilibrium(params, grid32)
    peak = params.a / (1.0 + params.eps * params.a)
    assert field.values.max() <= peak
    assert field.values.max() == pytest.approx(
        float(params.profile(grid32.v2.min())))
    assert field.values.max() < 1.0 / params.eps
    assert np.all(field.values < params.a)


def test_evaluate_grid_mass(moments11, grid32):
    params = solve_fermi_dirac(moments11, 1.0)
    field = evaluate_equilibrium(params, grid32)
    assert field.mass() == pytest.approx(1.0, abs=1e-6)


def test_measure_moments_roundtrip(moments11, grid32):
    params = solve_fermi_dirac(moments11, 0.5)
    field = evaluate_equilibrium(params, grid32)
    m = measure_moments(field)
    assert m.rho == pytest.approx(1.0, rel=1e-6)
    assert m.E == pytest.approx(1.0, rel=1e-6)


def test_measure_moments_frame_shift(grid16):
    # drifting Maxwellian: energy must be measured in the co-moving frame
    g = grid16
    shift = 0.75
    vals = (2.0 * np.pi * 0.8) ** -1.5 * np.exp(
        -((g.vx - shift) ** 2 + g.vy ** 2 + g.vz ** 2) / 1.6)
    m = measure_moments(DistributionField(g, vals, 0.0))
    assert m.rho == pytest.approx(1.0, rel=1e-4)
    assert m.E == pytest.approx(0.8, rel=1e-3)


# -- saturated state ---------------------------------------------------------------

def test_saturated_radius_unity(grid32):
    eps = 4.0 * np.pi / 3.0
    field = saturated_state(1.0, eps, grid32)
    # plateau at 1/eps inside the unit ball
    inside = grid32.vnorm <= 0.8
    assert np.allclose(field.values[inside], 1.0 / eps)
    assert field.mass() == pytest.approx(1.0, abs=5.0 * grid32.h)


def test_saturated_small_eps_spike(grid32):
    # R = (3 rho eps / 4 pi)^{1/3} shrinks with eps; support follows
    f1 = saturated_state(1.0, 4.0, grid32)
    f2 = saturated_state(1.0, 0.5, grid32)
    assert f2.radius < f1.radius
    support1 = np.count_nonzero(f1.values)
    support2 = np.count_nonzero(f2.values)
    assert 0 < support2 < support1
    # innermost 2x2x2 block of nodes is the terminal support
    assert support2 == 8


def test_saturated_ball_too_large(grid8):
    with pytest.raises(BallTooLarge):
        saturated_state(1.0, 400.0, grid8)


# -- relative entropy --------------------------------------------------------------

def test_equilibrium_relative_entropy_zero_at_classical(moments11):
    params = classical_params(moments11)
    assert equilibrium_relative_entropy(params, moments11) == pytest.approx(
        0.0, abs=1e-12)


# |H(M_0) - H(M_eps)| from tests/_oracles.py entropy_gap_radial (rho=E=1)
GOLDEN_ENTROPY_GAP = {
    0.2: 1.66176657362e-6,
    0.1: 4.15088399423e-7,
    0.05: 1.03728059651e-7,
    0.025: 2.5926517074e-8,
}


def test_equilibrium_relative_entropy_goldens(moments11):
    for eps, want in GOLDEN_ENTROPY_GAP.items():
        p = solve_fermi_dirac(moments11, eps)
        got = equilibrium_relative_entropy(p, moments11)
        assert got == pytest.approx(want, rel=1e-6)


def test_equilibrium_relative_entropy_small_eps(moments11):
    p = solve_fermi_dirac(moments11, 1e-6)
    val = equilibrium_relative_entropy(p, moments11)
    assert 0.0 <= val <= 1e-5


def test_equilibrium_relative_entropy_sweep(moments11):
    # value/eps decreases monotonically (gap is quadratic in eps), so it is
    # a monotone bounded sequence and the C eps envelope holds with the
    # constant fitted at the largest eps
    sweep = (0.1, 0.05, 0.025)
    ratios = []
    for eps in sweep:
        p = solve_fermi_dirac(moments11, eps)
        ratios.append(equilibrium_relative_entropy(p, moments11) / eps)
    assert all(r > 0 for r in ratios)
    assert ratios[0] > ratios[1] > ratios[2]
    c_fit = ratios[0]
    for eps, r in zip(sweep, ratios):
        assert r * eps <= c_fit * eps
    # the genuinely stable ratio is value / eps^2
    quad_ratios = [r / eps for eps, r in zip(sweep, ratios)]
    assert max(quad_ratios) / min(quad_ratios) <= 1.01


def test_csiszar_kullback_classical_gap(moments11, grid32):
    # ||M_eps - M_0||_{L^1}^2 <= 2 |H(M_0) - H(M_eps)|
    p = solve_fermi_dirac(moments11, 0.2)
    m_eps = evaluate_equilibrium(p, grid32)
    m_0 = evaluate_equilibrium(classical_params(moments11), grid32)
    l1 = grid32.integrate(np.abs(m_eps.values - m_0.values))
    h0 = equilibrium_relative_entropy(p, moments11)
    assert l1 ** 2 <= 2.0 * h0


def test_electron_parameter():
    assert electron_quantum_parameter() == pytest.approx(1.93e-10, rel=0.05)

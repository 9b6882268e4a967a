"""Grid quadrature, stencils, and the two convolution paths."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lfdlab import _fastfft
from lfdlab.errors import AliasingRisk, InvalidGrid, PauliViolation
from lfdlab.grid import (Convolver, DistributionField, VelocityGrid,
                         build_grid, convolve, kernel_drift, kernel_scalar,
                         kernel_tensor, stencil_matrix)


# -- construction ----------------------------------------------------------------

def test_build_grid_geometry():
    g = build_grid(8, 4.0)
    assert g.h == 1.0
    assert np.allclose(g.axis, np.arange(-3.5, 4.0, 1.0))
    assert g.shape == (8, 8, 8)


def test_build_grid_counts():
    g = build_grid(16, 8.0)
    assert g.h == 1.0
    assert g.n_nodes == 4096


@pytest.mark.parametrize("n,vmax", [(7, 4.0), (6, 4.0), (9, 2.0)])
def test_build_grid_rejects_bad_n(n, vmax):
    with pytest.raises(InvalidGrid):
        build_grid(n, vmax)


@pytest.mark.parametrize("vmax", [0.0, -1.0, np.nan])
def test_build_grid_rejects_bad_vmax(vmax):
    with pytest.raises(InvalidGrid):
        build_grid(8, vmax)


def test_nodes_strictly_inside():
    g = build_grid(10, 3.0)
    assert np.all(np.abs(g.nodes()) < g.v_max)


# -- quadrature ------------------------------------------------------------------

def test_integrate_box_volume(grid8):
    assert grid8.integrate(np.ones(grid8.shape)) == pytest.approx(512.0)


def test_integrate_maxwellian_mass(grid32):
    m0 = (2.0 * np.pi) ** -1.5 * np.exp(-grid32.v2 / 2.0)
    assert abs(grid32.integrate(m0) - 1.0) <= 1e-8


def test_integrate_maxwellian_energy(grid32):
    m0 = (2.0 * np.pi) ** -1.5 * np.exp(-grid32.v2 / 2.0)
    assert abs(grid32.integrate(m0, weight=grid32.v2) - 3.0) <= 1e-6


@given(a=st.floats(-3, 3), bx=st.floats(-2, 2), by=st.floats(-2, 2),
       bz=st.floats(-2, 2))
def test_integrate_exact_on_linears(grid8, a, bx, by, bz):
    # odd monomials cancel exactly on the symmetric node set
    g = grid8
    poly = a + bx * g.vx + by * g.vy + bz * g.vz
    exact = a * (2.0 * g.v_max) ** 3
    assert abs(g.integrate(poly) - exact) <= 1e-12 * max(1.0, abs(exact))


def test_integrate_rejects_nan(grid8):
    vals = np.ones(grid8.shape)
    vals[0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        grid8.integrate(vals)


def test_moments5_matches_integrate(grid16, bimodal16):
    f = bimodal16.values
    m = grid16.moments5(f)
    assert m[0] == pytest.approx(grid16.integrate(f), rel=1e-14)
    assert m[1] == pytest.approx(grid16.integrate(f, weight=grid16.vx),
                                 abs=1e-14)
    assert m[4] == pytest.approx(grid16.integrate(f, weight=grid16.v2),
                                 rel=1e-14)


# -- stencils --------------------------------------------------------------------

def test_stencil_exact_on_quadratics():
    D = stencil_matrix(12, 0.5)
    x = np.arange(12) * 0.5
    for coeffs in [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (2.0, -1.0, 0.5)]:
        p = coeffs[0] + coeffs[1] * x + coeffs[2] * x * x
        dp = coeffs[1] + 2.0 * coeffs[2] * x
        assert np.allclose(D @ p, dp, atol=1e-12)


def test_gradient_of_coordinate(grid8):
    grad = grid8.gradient(grid8.vx)
    assert np.allclose(grad[0], 1.0, atol=1e-12)
    assert np.allclose(grad[1], 0.0, atol=1e-12)
    assert np.allclose(grad[2], 0.0, atol=1e-12)


def test_gradient_of_speed_squared(grid8):
    # |v|^2 is a quadratic, so the stencil is node-exact on it
    grad = grid8.gradient(grid8.v2)
    assert np.allclose(grad[0], 2.0 * grid8.vx, atol=1e-11)
    assert np.allclose(grad[2], 2.0 * grid8.vz, atol=1e-11)


def test_divergence_of_identity_field(grid12):
    flux = np.stack([grid12.vx, grid12.vy, grid12.vz])
    div = grid12.divergence(flux)
    # the adjoint stencil agrees with the central difference three or more
    # cells from the wall; the outer layers carry the boundary terms
    interior = div[3:-3, 3:-3, 3:-3]
    assert np.allclose(interior, 3.0, atol=1e-11)


def test_gradient_maxwellian_second_order():
    # analytic derivative oracle: error should shrink ~h^2 under refinement
    errs = []
    for n in (24, 48):
        g = VelocityGrid(n, 6.0)
        f = np.exp(-g.v2 / 2.0)
        grad = g.gradient(f)
        exact = -g.vx * f
        c = g.n // 4
        sl = slice(c, -c)
        errs.append(np.max(np.abs(grad[0] - exact)[sl, sl, sl]))
    assert errs[1] <= errs[0] / 3.0


def test_adjointness(grid12):
    rng = np.random.default_rng(3)
    u = rng.normal(size=grid12.shape)
    F = rng.normal(size=(3,) + grid12.shape)
    grad_u = grid12.gradient(u)
    div_F = grid12.divergence(F)
    pair = grid12.integrate((grad_u * F).sum(axis=0)) \
        + grid12.integrate(u * div_F)
    scale = np.linalg.norm(u) * np.linalg.norm(F) * grid12.cell_volume
    assert abs(pair) <= 1e-12 * scale


def test_integral_of_divergence_vanishes(grid12):
    rng = np.random.default_rng(4)
    F = rng.normal(size=(3,) + grid12.shape)
    assert abs(grid12.integrate(grid12.divergence(F))) <= 1e-12 * np.abs(F).sum()


# -- kernels ---------------------------------------------------------------------

def test_kernel_point_values():
    a = kernel_tensor(np.array([1.0, 0.0, 0.0]), 1.0)
    assert np.allclose(a, np.diag([0.0, 1.0, 1.0]), atol=1e-14)
    a2 = kernel_tensor(np.array([0.0, 0.0, 2.0]), 1.0)
    assert np.allclose(a2, 8.0 * np.diag([1.0, 1.0, 0.0]), atol=1e-13)
    assert kernel_scalar(np.array([1.0, 0.0, 0.0]), 1.0) == pytest.approx(-8.0)
    assert kernel_scalar(np.array([0.0, 0.0, 2.0]), 1.0) == pytest.approx(-16.0)
    assert np.allclose(kernel_drift(np.array([1.0, 0.0, 0.0]), 1.0),
                       [-2.0, 0.0, 0.0])


def test_kernel_zero_offset():
    z0 = np.zeros(3)
    assert np.allclose(kernel_tensor(z0, 1.0), 0.0)
    assert np.allclose(kernel_drift(z0, 0.5), 0.0)
    assert kernel_scalar(z0, 0.7) == pytest.approx(0.0)
    # gamma = 0 keeps the finite limit -2 (0+3) |0|^0 = -6
    assert kernel_scalar(z0, 0.0) == pytest.approx(-6.0)


@given(st.floats(0.1, 1.0), st.integers(0, 10 ** 6))
def test_kernel_projection_property(gamma, seed):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(5, 3)) * 3.0
    a = kernel_tensor(z, gamma)
    az = np.einsum("nij,nj->ni", a, z)
    assert np.max(np.abs(az)) <= 1e-12 * max(1.0, np.max(np.abs(a)))


@given(st.floats(0.1, 1.0))
def test_kernel_trace_identity(gamma):
    rng = np.random.default_rng(11)
    z = rng.normal(size=(6, 3)) * 2.0
    a = kernel_tensor(z, gamma)
    r = np.linalg.norm(z, axis=-1)
    assert np.allclose(np.trace(a, axis1=-2, axis2=-1),
                       2.0 * r ** (gamma + 2.0), rtol=1e-12)


# -- distribution fields -----------------------------------------------------------

def test_field_validation(grid8):
    vals = np.full(grid8.shape, 0.5)
    f = DistributionField(grid8, vals, 1.0)
    assert f.ceiling == 1.0
    assert f.mass() == pytest.approx(0.5 * 512.0)
    with pytest.raises(PauliViolation):
        DistributionField(grid8, np.full(grid8.shape, 1.1), 1.0)
    with pytest.raises(ValueError):
        DistributionField(grid8, -vals, 1.0)
    with pytest.raises(ValueError):
        DistributionField(grid8, np.full(grid8.shape, np.inf), 1.0)
    with pytest.raises(ValueError):
        DistributionField(grid8, vals, -0.5)


def test_field_clips_roundoff_negatives(grid8):
    vals = np.full(grid8.shape, 0.5)
    vals[0, 0, 0] = -1e-16
    f = DistributionField(grid8, vals, 0.0)
    assert f.values.min() == 0.0
    assert f.ceiling == np.inf


def test_field_saturation_clipped(grid8):
    f = DistributionField(grid8, np.full(grid8.shape, 1.0), 1.0)
    assert np.all(f.saturation() == 0.0)


# -- convolution paths -------------------------------------------------------------

def test_convolve_point_mass_scalar(grid12):
    # single-node spike: the convolution is the kernel sampled at offsets
    g = grid12
    spike = np.zeros(g.shape)
    j = (3, 4, 5)
    rho = 0.7
    spike[j] = rho / g.cell_volume
    out = convolve(g, "c", spike, gamma=1.0)
    dx = g.vx - g.axis[j[0]]
    dy = g.vy - g.axis[j[1]]
    dz = g.vz - g.axis[j[2]]
    r = np.sqrt(dx**2 + dy**2 + dz**2)
    assert np.allclose(out, -8.0 * rho * r, atol=1e-10 * np.max(r))


def test_convolve_point_mass_tensor(grid12):
    g = grid12
    spike = np.zeros(g.shape)
    j = (6, 6, 6)
    spike[j] = 1.0 / g.cell_volume
    out = convolve(g, "a", spike, gamma=1.0)
    z = np.stack([g.vx - g.axis[6], g.vy - g.axis[6], g.vz - g.axis[6]],
                 axis=-1)
    exact = np.moveaxis(kernel_tensor(z, 1.0), (-2, -1), (0, 1))
    assert np.max(np.abs(out - exact)) <= 1e-10 * np.max(np.abs(exact))


@pytest.mark.parametrize("kernel", ["a", "b", "c", "power"])
@pytest.mark.filterwarnings("ignore::lfdlab.errors.AliasingRisk")
def test_convolve_fft_vs_direct_16(kernel, maxwellian16):
    f = maxwellian16.values
    g = maxwellian16.grid
    fast = convolve(g, kernel, f, gamma=1.0, p=2.5)
    ref = convolve(g, kernel, f, gamma=1.0, p=2.5, method="direct")
    scale = np.max(np.abs(ref))
    assert np.max(np.abs(fast - ref)) <= 1e-10 * scale


@pytest.mark.parametrize("kernel", ["a", "b", "c", "power"])
@pytest.mark.filterwarnings("ignore::lfdlab.errors.AliasingRisk")
def test_convolve_fft_vs_direct_24(kernel):
    g = VelocityGrid(24, 6.0)
    f = (2.0 * np.pi) ** -1.5 * np.exp(-g.v2 / 2.0)
    fast = convolve(g, kernel, f, gamma=0.5, p=1.5)
    ref = convolve(g, kernel, f, gamma=0.5, p=1.5, method="direct")
    scale = np.max(np.abs(ref))
    assert np.max(np.abs(fast - ref)) <= 1e-10 * scale


def test_convolve_unknown_kernel(grid8):
    with pytest.raises(ValueError):
        convolve(grid8, "q", np.ones(grid8.shape))


@pytest.mark.filterwarnings("ignore::lfdlab.errors.AliasingRisk")
def test_tensor_dot_matches_componentwise(grid12, bimodal16):
    g = grid12
    rng = np.random.default_rng(5)
    w = np.exp(-g.v2 / 2.0) * rng.normal(size=(3,) + g.shape)
    conv = g.convolver(1.0)
    fast = conv.tensor_dot(w)
    ref = conv.tensor_dot(w, method="direct")
    assert np.max(np.abs(fast - ref)) <= 1e-10 * np.max(np.abs(ref))


@pytest.mark.filterwarnings("ignore::lfdlab.errors.AliasingRisk")
def test_pair_blocks_matches_separate_calls(grid12):
    g = grid12
    rng = np.random.default_rng(6)
    w = np.exp(-g.v2 / 2.0)
    u = rng.normal(size=(3,) + g.shape)
    conv = g.convolver(1.0)
    T, drift = conv.pair_blocks(w, u)
    T_ref = conv.tensor(w)
    d_ref = conv.tensor_dot(w * u)
    assert np.max(np.abs(T - T_ref)) <= 1e-12 * np.max(np.abs(T_ref))
    assert np.max(np.abs(drift - d_ref)) <= 1e-12 * np.max(np.abs(d_ref))


@pytest.mark.filterwarnings("ignore::lfdlab.errors.AliasingRisk")
def test_pair_blocks_scipy_fallback(monkeypatch):
    # force the scipy path on a fresh grid and compare against the default
    g1 = VelocityGrid(12, 6.0)
    g2 = VelocityGrid(12, 6.0)
    monkeypatch.setattr(_fastfft, "get_plans", lambda n, p: None)
    w = np.exp(-g1.v2 / 2.0)
    u = 0.3 * np.stack([g1.vx, g1.vy * g1.vx, np.cos(g1.vz)])
    T2, d2 = g2.convolver(1.0).pair_blocks(w, u)
    monkeypatch.undo()
    T1, d1 = g1.convolver(1.0).pair_blocks(w, u)
    assert np.max(np.abs(T1 - T2)) <= 1e-12 * np.max(np.abs(T1))
    assert np.max(np.abs(d1 - d2)) <= 1e-12 * np.max(np.abs(d1))


def test_pruned_transform_matches_padded_rfftn(grid12):
    conv = grid12.convolver(1.0)
    rng = np.random.default_rng(7)
    f = rng.normal(size=grid12.shape)
    P = conv.npad
    padded = np.zeros((P, P, P))
    padded[:12, :12, :12] = f
    import scipy.fft
    ref = scipy.fft.rfftn(padded)
    got = conv.forward(f)
    assert np.max(np.abs(got - ref)) <= 1e-12 * np.max(np.abs(ref))
    back = conv.inverse(got)
    ref_back = scipy.fft.irfftn(ref, s=(P, P, P))[:12, :12, :12] \
        * grid12.cell_volume
    assert np.max(np.abs(back - ref_back)) <= 1e-12 * np.max(np.abs(ref_back))


def test_aliasing_warning(grid8):
    vals = np.zeros(grid8.shape)
    vals[0, 0, 0] = 1.0  # all mass hugging the boundary
    with pytest.warns(AliasingRisk):
        convolve(grid8, "c", vals)


def test_no_aliasing_warning_for_compact(grid16):
    import warnings as _w
    f = np.exp(-grid16.v2)  # tail ~ e^-36 at the wall
    with _w.catch_warnings():
        _w.simplefilter("error", AliasingRisk)
        convolve(grid16, "c", f)

"""Entropy, entropy production, distances, and decay-rate fitting.

The production functional is evaluated two ways: a fast route that reuses
the convolution identity behind the collision flux, and a literal chunked
double sum over node pairs.  Both compute the same discrete quantity

    D = (h^6 / 2) sum_{ij} F_i F_j (u_i - u_j) . a(v_i - v_j) (u_i - u_j),

with F = f (1 - eps f) and u the gradient of log(f / (1 - eps f)), so the
fast route can be validated against the slow one on small grids.  By the
same identity, D equals the discrete time derivative of the entropy along
the flow exactly, not just to discretization order.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import xlogy

from .errors import DegenerateFit, MassMismatch
from .grid import DistributionField

_X_SMALL = 1e-8


def moment_l1(field: DistributionField, s: float = 0.0) -> float:
    """int f <v>^s dv (the weighted L^1 norm for nonnegative states)."""
    g = field.grid
    w = None if s == 0 else g.bracket2 ** (s / 2.0)
    return g.integrate(field.values, weight=w)


def weighted_l2_sq(field: DistributionField, s: float = 0.0) -> float:
    """int f^2 <v>^{2s} dv."""
    g = field.grid
    w = None if s == 0 else g.bracket2 ** s
    return g.integrate(field.values ** 2, weight=w)


def grad_l2_sq(field: DistributionField, s: float = 0.0) -> float:
    """int |grad f|^2 <v>^{2s} dv with the grid derivative."""
    g = field.grid
    df = g.gradient(field.values)
    mag = np.sum(df * df, axis=0)
    w = None if s == 0 else g.bracket2 ** s
    return g.integrate(mag, weight=w)


def l12_distance(f: DistributionField, g: DistributionField) -> float:
    """|| f - g ||_{L^1_2}, the convergence metric."""
    if f.grid is not g.grid and f.grid.shape != g.grid.shape:
        raise ValueError("fields live on different grids")
    gr = f.grid
    return gr.integrate(np.abs(f.values - g.values), weight=gr.bracket2)


def boltzmann_entropy(field: DistributionField) -> float:
    """S_0 = - int f log f, with 0 log 0 = 0."""
    return -field.grid.integrate(xlogy(field.values, field.values))


def fd_entropy(field: DistributionField) -> float:
    """S_eps = -(1/eps) int [x log x + (1-x) log(1-x)], x = eps f.

    The x -> 0 branch switches to the series x log x - x + x^2/2 because
    (1-x) log(1-x) computed directly underflows to 0 there and its -x
    term is not negligible against x log x.
    """
    eps = field.eps
    if eps == 0:
        raise ValueError("fd_entropy needs eps > 0; use boltzmann_entropy")
    x = eps * field.values
    head = xlogy(x, x)
    small = x < _X_SMALL
    series = head - x + 0.5 * x * x
    exact = head + xlogy(1.0 - x, 1.0 - x)
    term = np.where(small, series, exact)
    return -field.grid.integrate(term) / eps


def entropy(field: DistributionField) -> float:
    return fd_entropy(field) if field.eps > 0 else boltzmann_entropy(field)


def entropy_upper_bound_check(field: DistributionField, R: float,
                              c0: float = 1.0, c1: float = 1.0) -> dict:
    """Signed slack of the a priori entropy ceiling at cutoff radius R.

    rhs = 80 (|log eps| + log R) int_{|v|<=R} f(1-eps f) dv
          + C/R + |log eps| E/R^2,     C = c1 + c0 E^{4/5} + 3E,

    E the full second moment of f.  The ceiling's own constants are
    existential, so c0 and c1 are caller-supplied fit values and the
    slack is reported, never asserted.
    """
    if R <= 1.0:
        raise ValueError("the ceiling needs R > 1")
    eps = field.eps
    if eps <= 0:
        raise ValueError("the ceiling is a quantum statement; eps > 0")
    g = field.grid
    f = field.values
    inside = g.vnorm <= R
    window_mass = g.integrate(np.where(inside, f * (1.0 - eps * f), 0.0))
    e2 = g.integrate(f, weight=g.v2)
    log_eps = abs(np.log(eps))
    c_f0 = c1 + c0 * e2 ** 0.8 + 3.0 * e2
    tail = c_f0 / R + log_eps * e2 / R ** 2
    rhs = 80.0 * (log_eps + np.log(R)) * window_mass + tail
    lhs = fd_entropy(field)
    return {"S_eps": lhs, "rhs": rhs, "slack": rhs - lhs,
            "window_mass": window_mass, "tail_terms": tail, "R": R}


def relative_entropy(f: DistributionField, g: DistributionField,
                     mass_tol: float = 1e-6) -> float:
    """H(f | g) = S(g) - S(f) for states sharing mass and energy.

    Only meaningful when the conserved moments agree, since the linear
    part of S then cancels; mismatched inputs raise MassMismatch.  The
    default tolerance admits quadrature-level truncation differences.
    """
    if f.eps != g.eps:
        raise ValueError("relative entropy needs a common eps")
    mf = f.grid.moments5(f.values)
    mg = g.grid.moments5(g.values)
    scale = abs(mf[0]) + abs(mg[0])
    if abs(mf[0] - mg[0]) > mass_tol * scale:
        raise MassMismatch(
            f"mass mismatch {mf[0]:.12g} vs {mg[0]:.12g}")
    if abs(mf[4] - mg[4]) > mass_tol * (abs(mf[4]) + abs(mg[4])):
        raise MassMismatch(
            f"energy mismatch {mf[4]:.12g} vs {mg[4]:.12g}")
    return entropy(g) - entropy(f)


def classical_relative_entropy(f: DistributionField,
                               g: DistributionField) -> float:
    """S_0(g) - S_0(f) regardless of the stored eps (for comparisons)."""
    return boltzmann_entropy(g) - boltzmann_entropy(f)


def entropy_difference_bound(f: DistributionField,
                             g: DistributionField) -> dict:
    """|H_eps - H_0| against eps * max(||f||_2^2, ||g||_2^2)."""
    h_eps = relative_entropy(f, g)
    h_zero = classical_relative_entropy(f, g)
    bound = f.eps * max(weighted_l2_sq(f), weighted_l2_sq(g))
    gap = abs(h_eps - h_zero)
    return {"h_eps": h_eps, "h_zero": h_zero, "bound": bound,
            "gap": gap, "holds": bool(gap <= bound + 1e-12)}


def csiszar_kullback_check(f: DistributionField,
                           g: DistributionField) -> dict:
    """|| f - g ||_{L^1}^2 <= 2 rho H(f | g)."""
    l1 = f.grid.integrate(np.abs(f.values - g.values))
    h = relative_entropy(f, g)
    rho = f.grid.integrate(f.values)
    bound = 2.0 * rho * h
    return {"l1_sq": l1 * l1, "h_rel": h, "bound": bound,
            "holds": bool(l1 * l1 <= bound + 1e-12)}


# -- entropy production -------------------------------------------------------

def entropy_production(field: DistributionField, gamma: float,
                       method: str = "fft",
                       fmin_frac: float = 1e-14,
                       floor_frac: float = None) -> float:
    """The discrete production D >= 0 of a state.

    method "fft" contracts the collision flux against u (two convolutions);
    method "pairs" runs the literal double sum, truncated to nodes with
    f > fmin_frac * max f.  The two agree to roundoff when the truncation
    removes only negligible mass.  floor_frac is the tail mask of
    pair_weight_potential; both routes use the same masked weight, so the
    value matches what the time stepper dissipates.
    """
    if method == "fft":
        from .collision import pair_flux, pair_weight_potential
        _, u = pair_weight_potential(field, floor_frac)
        flux = pair_flux(field, gamma, method="fft", floor_frac=floor_frac)
        return field.grid.integrate(np.sum(u * flux, axis=0))
    if method != "pairs":
        raise ValueError(f"unknown method {method!r}")
    return _production_pairs(field, gamma, fmin_frac, floor_frac)


def _production_pairs(field: DistributionField, gamma: float,
                      fmin_frac: float, floor_frac: float = None) -> float:
    from .collision import pair_weight_potential
    g = field.grid
    w, ug = pair_weight_potential(field, floor_frac)
    f = field.values.ravel()
    keep = (f > fmin_frac * float(f.max())) & (w.ravel() > 0)
    idx = np.flatnonzero(keep)
    V = g.nodes()[idx]
    Fw = w.ravel()[idx]
    u = ug.reshape(3, -1).T[idx]

    acc = 0.0
    # cap the (chunk, M, 3) scratch blocks near 50 MB
    chunk = max(1, int(2**21 // max(len(idx), 1)))
    for start in range(0, len(idx), chunk):
        sl = slice(start, start + chunk)
        z = V[sl, None, :] - V[None, :, :]
        r2 = np.einsum("ijk,ijk->ij", z, z)
        du = u[sl, None, :] - u[None, :, :]
        du2 = np.einsum("ijk,ijk->ij", du, du)
        zdu = np.einsum("ijk,ijk->ij", z, du)
        rg = r2 ** (gamma / 2.0)
        q = rg * (r2 * du2 - zdu * zdu)
        acc += float(np.sum(Fw[sl, None] * Fw[None, :] * q))
    return 0.5 * g.cell_volume ** 2 * acc


def classical_production(field: DistributionField, gamma: float,
                         fmin_frac: float = 1e-14) -> float:
    """D_0 of the same state: pair sum with weights f and u = grad log f."""
    bare = DistributionField(field.grid, field.values, 0.0)
    return _production_pairs(bare, gamma, fmin_frac)


def production_comparison(field: DistributionField, gamma: float) -> dict:
    """Domination of the classical production by the quantum one.

    kappa_0^2 D_0 <= 2 D_eps + (4 eps^2 / kappa_0) int f |grad f|^2 (|z|^{gamma+2} * f),
    with kappa_0 = 1 - eps ||f||_inf.  Returns both sides and the margin.
    """
    g = field.grid
    eps = field.eps
    kappa0 = 1.0 - eps * float(field.values.max())
    d_eps = entropy_production(field, gamma, method="fft")
    d_zero = classical_production(field, gamma)
    if eps > 0 and kappa0 > 0:
        conv = g.convolver(gamma)
        P = conv.power(field.values, gamma + 2.0)
        df = g.gradient(field.values)
        mag = np.sum(df * df, axis=0)
        extra = (4.0 * eps * eps / kappa0) * g.integrate(
            field.values * mag * P)
    else:
        extra = np.inf if kappa0 <= 0 else 0.0
    lhs = kappa0 ** 2 * d_zero if kappa0 > 0 else 0.0
    rhs = 2.0 * d_eps + extra
    slack = 1e-10 * max(abs(lhs), abs(rhs), 1.0) + 1e-14
    return {"d_zero": d_zero, "d_eps": d_eps, "kappa0": kappa0,
            "extra": extra, "lhs": lhs, "rhs": rhs,
            "holds": bool(lhs <= rhs + slack)}


def fit_decay_rate(times, values, t_min: float = 1.0,
                   floor: float = 1e-14, window: float = None) -> dict:
    """Least-squares exponential fit value ~ C exp(-rate t).

    Points at or below ``floor`` are dropped (they are quadrature noise,
    not signal).  The fit runs on t >= t_min, or, when ``window`` is given,
    on the final ``window`` fraction of the surviving points instead.
    Raises DegenerateFit with fewer than 3 usable points.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    keep = y > max(floor, 0.0)
    if window is not None:
        if not 0 < window <= 1:
            raise ValueError("window must lie in (0, 1]")
        idx = np.flatnonzero(keep)
        keep = np.zeros_like(keep)
        keep[idx[-max(1, int(np.ceil(window * len(idx)))):]] = True
    else:
        keep &= t >= t_min
    if keep.sum() < 3:
        raise DegenerateFit(
            f"only {int(keep.sum())} usable points past t = {t_min}")
    t, y = t[keep], y[keep]
    A = np.stack([np.ones_like(t), -t], axis=1)
    coef, *_ = np.linalg.lstsq(A, np.log(y), rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((np.log(y) - pred) ** 2))
    ss_tot = float(np.sum((np.log(y) - np.log(y).mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return {"rate": float(coef[1]), "amplitude": float(np.exp(coef[0])),
            "r_squared": r2, "n_points": int(len(t))}


def state_row(field: DistributionField, t: float, gamma: float,
              equilibrium: DistributionField = None,
              floor_frac: float = None) -> dict:
    """One trajectory record; keys match fieldio.TRAJECTORY_COLUMNS."""
    g = field.grid
    f = field.values
    row = {
        "t": t,
        "m0": moment_l1(field, 0.0),
        "m2": moment_l1(field, 2.0),
        "m3": moment_l1(field, 3.0),
        "m4": moment_l1(field, 4.0),
        "M0": weighted_l2_sq(field, 0.0),
        "Mg2": weighted_l2_sq(field, gamma / 2.0),
        "Dg2": grad_l2_sq(field, gamma / 2.0),
        "S_eps": entropy(field),
        "D_eps": entropy_production(field, gamma, method="fft",
                                    floor_frac=floor_frac),
        "fmin": float(f.min()),
        "fmax": float(f.max()),
        "one_minus_eps_f_min": float(field.saturation().min()),
    }
    if equilibrium is not None:
        try:
            row["H_rel"] = relative_entropy(field, equilibrium)
        except MassMismatch:
            row["H_rel"] = float("nan")
        row["L12_dist"] = l12_distance(field, equilibrium)
    else:
        row["H_rel"] = float("nan")
        row["L12_dist"] = float("nan")
    return row

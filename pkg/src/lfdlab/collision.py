"""Collision operator and its coefficient fields.

The operator is assembled in pair form.  Writing w = f (1 - eps f) and
u = grad log(f / (1 - eps f)), the flux at node i is

    Phi(v_i) = h^3 sum_j w_i w_j a(v_i - v_j) (u_i - u_j),

evaluated with two convolutions per component: w_i (a*w) u_i minus
w_i a*(w u).  Because a(z) z = 0 and a is even, the pair sum kills all
five collision invariants identically, and the inner product
h^3 <u, Phi> reproduces the entropy production pair sum exactly.  So
conservation, the entropy balance, and the fixed-point property of the
Fermi-Dirac states hold at machine precision by construction instead of
to discretization order.

Nodes whose density sits below a small fraction of the peak carry no
usable log-gradient (their values are at or below convolution roundoff,
and log ratios between such nodes are arbitrarily steep, which makes an
explicit step amplify tail noise).  pair_weight_potential therefore
floors the potential at that fraction and masks the weight to zero
there.  All the pair identities above hold exactly for the masked
weight; the mask touches only nodes that are numerically empty.

The coefficient fields sigma, Sigma, b, B, c, c_tilde are still exposed
literally (as convolutions against f and F) for inspection and bounds
checking; the evolution itself only ever uses a*w and a*(wu).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotRadial, PauliViolation
from .grid import (DistributionField, VelocityGrid, _SYM, kernel_drift,
                   kernel_scalar, kernel_tensor)

# logit floor; keeps phi finite where f hits 0 or the Pauli ceiling exactly
_ETA = 1e-300

# default relative floor under which tail nodes are treated as empty
DEFAULT_FLOOR_FRAC = 1e-13


def kernel_eval(z, gamma: float) -> dict:
    """Pointwise kernels at displacement(s) z of shape (..., 3)."""
    return {
        "a": kernel_tensor(z, gamma),
        "b": kernel_drift(z, gamma),
        "c": kernel_scalar(z, gamma),
    }


@dataclass
class CollisionCoefficients:
    """The six convolution fields of a state, symmetric tensors in 6-row form."""

    gamma: float
    eps: float
    sigma: np.ndarray    # (6, n, n, n), a * f
    Sigma: np.ndarray    # (6, n, n, n), a * F
    b: np.ndarray        # (3, n, n, n), b * f
    B: np.ndarray        # (3, n, n, n), b * F
    c: np.ndarray        # (n, n, n), c * f
    c_tilde: np.ndarray  # (n, n, n), c * F

    def sigma_full(self) -> np.ndarray:
        from .grid import Convolver
        return Convolver.expand_sym(self.sigma)

    def Sigma_full(self) -> np.ndarray:
        from .grid import Convolver
        return Convolver.expand_sym(self.Sigma)


def coefficients(field: DistributionField, gamma: float,
                 method: str = "fft") -> CollisionCoefficients:
    conv = field.grid.convolver(gamma)
    f = field.values
    F = f * field.saturation()
    return CollisionCoefficients(
        gamma=gamma, eps=field.eps,
        sigma=conv.tensor(f, method=method),
        Sigma=conv.tensor(F, method=method),
        b=conv.drift(f, method=method),
        B=conv.drift(F, method=method),
        c=conv.cfield(f, method=method),
        c_tilde=conv.cfield(F, method=method),
    )


def coefficient_bounds_report(field: DistributionField,
                              coeffs: CollisionCoefficients) -> dict:
    """Margins of the pointwise coefficient bounds.

    |c*f| <= 8 <v>^gamma ||f||_{L^1_2} and |b*f| <= 2 <v>^{gamma+1} ||f||_{L^1_2}.
    Ratios <= 1 mean the bound holds; F-versions satisfy the same bounds
    since 0 <= F <= f.
    """
    g = field.grid
    l12 = g.integrate(field.values, weight=g.bracket2)
    gam = coeffs.gamma
    env_c = 8.0 * g.bracket2 ** (gam / 2.0) * l12
    env_b = 2.0 * g.bracket2 ** ((gam + 1.0) / 2.0) * l12
    bnorm = np.sqrt(np.sum(coeffs.b ** 2, axis=0))
    Bnorm = np.sqrt(np.sum(coeffs.B ** 2, axis=0))
    return {
        "l12_norm": float(l12),
        "c_ratio": float(np.max(np.abs(coeffs.c) / env_c)),
        "c_tilde_ratio": float(np.max(np.abs(coeffs.c_tilde) / env_c)),
        "b_ratio": float(np.max(bnorm / env_b)),
        "B_ratio": float(np.max(Bnorm / env_b)),
    }


def _logit(field: DistributionField) -> np.ndarray:
    f = field.values
    if field.eps == 0:
        return np.log(f + _ETA)
    return np.log(f + _ETA) - np.log(field.saturation() + _ETA)


def pair_weight_potential(field: DistributionField,
                          floor_frac: float = None):
    """Masked pair weight w and potential gradient u = grad log(f/(1-eps f)).

    Nodes with f <= floor_frac * max f get weight zero and the log is
    floored at that level, so u stays bounded and the empty tail
    exchanges nothing.  floor_frac = 0 disables the mask (the raw logit
    is used, floored only at 1e-300).
    """
    if floor_frac is None:
        floor_frac = DEFAULT_FLOOR_FRAC
    f = field.values
    s = field.saturation()
    if floor_frac > 0 and float(f.max()) > 0:
        eta = floor_frac * float(f.max())
        w = np.where(f > eta, f * s, 0.0)
        phi = np.log(np.maximum(f, eta))
        if field.eps > 0:
            phi -= np.log(np.maximum(s, floor_frac))
    else:
        w = f * s
        phi = _logit(field)
    return w, field.grid.gradient(phi)


def pair_flux(field: DistributionField, gamma: float,
              method: str = "fft", floor_frac: float = None) -> np.ndarray:
    """The (3, n, n, n) collision flux in pair-consistent form."""
    conv = field.grid.convolver(gamma)
    w, u = pair_weight_potential(field, floor_frac)
    if method == "fft":
        T, drift = conv.pair_blocks(w, u)
    else:
        T = conv.tensor(w, method=method)            # a * w, 6 rows
        drift = conv.tensor_dot(w[None] * u, method=method)
    Tu = np.empty_like(u)
    tmp = np.empty(w.shape)
    # row k of the symmetric tensor contraction: indices into the 6-row form
    for k, (r0, r1, r2) in enumerate(((0, 3, 4), (3, 1, 5), (4, 5, 2))):
        np.multiply(T[r0], u[0], out=Tu[k])
        np.multiply(T[r1], u[1], out=tmp)
        Tu[k] += tmp
        np.multiply(T[r2], u[2], out=tmp)
        Tu[k] += tmp
    Tu -= drift
    Tu *= w[None]
    return Tu


def collision_operator(field: DistributionField, gamma: float,
                       method: str = "fft",
                       floor_frac: float = None) -> np.ndarray:
    """Right-hand side Q(f) on the grid nodes.

    Raises PauliViolation if the state strays outside [0, 1/eps] beyond
    roundoff; the operator is not defined there.
    """
    if not 0 < gamma <= 1:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    f = field.values
    lo = float(f.min())
    if lo < -1e-12 * max(1.0, float(f.max())):
        raise PauliViolation(f"negative values down to {lo:.3e}")
    if field.eps > 0:
        hi = float(f.max()) * field.eps - 1.0
        if hi > 1e-10:
            raise PauliViolation(
                f"values exceed the Pauli ceiling by {hi:.3e} relative")
    flux = pair_flux(field, gamma, method=method, floor_frac=floor_frac)
    return field.grid.divergence(flux)


def invariant_residuals(grid: VelocityGrid, rhs: np.ndarray) -> dict:
    """Integrals of (1, v, |v|^2) against a right-hand side."""
    m = grid.moments5(rhs)
    return {"mass": float(m[0]), "momentum": [float(x) for x in m[1:4]],
            "energy": float(m[4])}


# -- ellipticity --------------------------------------------------------------

def _direction_set(seed: int = 0, extra: int = 50) -> np.ndarray:
    dirs = []
    for i in (-1, 0, 1):
        for j in (-1, 0, 1):
            for k in (-1, 0, 1):
                if i == j == k == 0:
                    continue
                dirs.append((i, j, k))
    dirs = np.array(dirs, dtype=float)
    rng = np.random.default_rng(seed)
    rnd = rng.normal(size=(extra, 3))
    dirs = np.vstack([dirs, rnd])
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


@dataclass(frozen=True)
class EllipticityReport:
    min_ratio: float
    max_ratio: float
    min_node: tuple
    degenerate: bool
    n_directions: int


def ellipticity_estimate(field: DistributionField, gamma: float,
                         coeffs: CollisionCoefficients = None,
                         seed: int = 0) -> EllipticityReport:
    """Directional bounds on Sigma against the weight <v>^gamma.

    Samples e . Sigma e over 26 lattice and 50 seeded random unit vectors
    and reports min/max of the ratio to <v>^gamma over all nodes.  A state
    pinned at 0 or at the ceiling almost everywhere has Sigma ~ 0; that is
    reported as degenerate rather than failed.
    """
    g = field.grid
    if coeffs is None:
        coeffs = coefficients(field, gamma)
    dirs = _direction_set(seed=seed)
    S = coeffs.Sigma
    env = g.bracket2 ** (gamma / 2.0)
    qmin = np.full(g.shape, np.inf)
    qmax = np.full(g.shape, -np.inf)
    for d in dirs:
        q = np.zeros(g.shape)
        for row, (k, l) in enumerate(_SYM):
            w = d[k] * d[l]
            if k != l:
                w = 2.0 * w
            q += w * S[row]
        np.minimum(qmin, q, out=qmin)
        np.maximum(qmax, q, out=qmax)
    ratio_lo = qmin / env
    ratio_hi = qmax / env
    idx = np.unravel_index(np.argmin(ratio_lo), g.shape)
    min_ratio = float(ratio_lo[idx])
    scale = float(np.max(np.abs(S)))
    degenerate = scale <= 1e-14 or min_ratio <= 1e-10 * scale
    return EllipticityReport(
        min_ratio=min_ratio,
        max_ratio=float(np.max(ratio_hi)),
        min_node=tuple(int(i) for i in idx),
        degenerate=degenerate,
        n_directions=len(dirs),
    )


# -- radial structure ---------------------------------------------------------

def _is_radial(values: np.ndarray) -> bool:
    # grid is symmetric about 0, so radial implies full octahedral symmetry
    for ax in range(3):
        if not np.allclose(values, np.flip(values, axis=ax),
                           rtol=1e-10, atol=1e-12):
            return False
    if not np.allclose(values, np.swapaxes(values, 0, 1),
                       rtol=1e-10, atol=1e-12):
        return False
    if not np.allclose(values, np.swapaxes(values, 0, 2),
                       rtol=1e-10, atol=1e-12):
        return False
    return True


def sigma_spectral_decomposition(field: DistributionField, gamma: float,
                                 method: str = "fft") -> dict:
    """Split sigma[f] of a radial state into radial/tangential eigenvalues.

    For radial f the tensor a*f at v has eigenvector v/|v| with some
    eigenvalue lam_par(|v|) and a doubly degenerate tangential eigenvalue
    lam_perp(|v|).  Returns per-shell profiles plus the worst-case
    alignment residual, and checks tr sigma = 2 rho J_{gamma+2}.
    """
    if not _is_radial(field.values):
        raise NotRadial("sigma decomposition requires a radial state")
    g = field.grid
    conv = g.convolver(gamma)
    S6 = conv.tensor(field.values, method=method)
    tr = S6[0] + S6[1] + S6[2]
    vn = np.maximum(g.vnorm, 1e-300)
    vhat = np.stack([g.vx, g.vy, g.vz]) / vn

    Sv = np.zeros((3,) + g.shape)
    for row, (k, l) in enumerate(_SYM):
        Sv[k] += S6[row] * vhat[l]
        if k != l:
            Sv[l] += S6[row] * vhat[k]
    lam_par = np.sum(vhat * Sv, axis=0)
    lam_perp = 0.5 * (tr - lam_par)
    resid = Sv - lam_par[None] * vhat
    scale = np.abs(lam_par) + np.abs(lam_perp) + 1e-300
    align = float(np.max(np.sqrt(np.sum(resid**2, axis=0)) / scale))

    r = np.round(g.vnorm, 9).ravel()
    order = np.argsort(r, kind="stable")
    r_sorted = r[order]
    edges = np.flatnonzero(np.diff(r_sorted)) + 1
    groups = np.split(order, edges)
    radii = np.array([r_sorted[0]] + list(r_sorted[edges]))
    lp = np.array([lam_par.ravel()[gidx].mean() for gidx in groups])
    lt = np.array([lam_perp.ravel()[gidx].mean() for gidx in groups])
    spread = max(float(np.ptp(lam_par.ravel()[gidx])) for gidx in groups)
    return {
        "radii": radii,
        "lambda_par": lp,
        "lambda_perp": lt,
        "alignment_residual": align,
        "shell_spread": spread,
        "trace": tr,
    }


def j_p_moment(profile, rho: float, p: float, speeds) -> np.ndarray:
    """J_p(|v|) = (1/rho) int M(|w|) |v - w|^p dw for a radial profile.

    ``profile`` maps squared radius to M; reduced to a 1D integral
    (2 pi / (rho (p+2) |v|)) int r M(r) [(|v|+r)^{p+2} - ||v|-r|^{p+2}] dr.
    J_0 = 1 and J_2(v) = |v|^2 + 3 E hold exactly.
    """
    from scipy.integrate import quad

    speeds = np.atleast_1d(np.asarray(speeds, dtype=float))
    out = np.empty_like(speeds)
    # finite window: scipy rejects break points on infinite intervals
    r_max = 8.0
    while r_max < 1e4 and abs(profile(r_max * r_max)) \
            * (1.0 + r_max) ** (p + 4) > 1e-22:
        r_max *= 2.0
    opts = {"epsabs": 1e-13, "epsrel": 1e-12, "limit": 200}
    for i, s in enumerate(speeds):
        if s < 1e-12:
            val, _ = quad(lambda r: 4.0 * np.pi * r**(2 + p) * profile(r * r),
                          0.0, r_max, **opts)
            out[i] = val / rho
            continue

        def integrand(r, s=s):
            return (r * profile(r * r)
                    * ((s + r) ** (p + 2) - abs(s - r) ** (p + 2)))

        val, _ = quad(integrand, 0.0, r_max,
                      points=[s] if s < r_max else None, **opts)
        out[i] = 2.0 * np.pi * val / (rho * (p + 2) * s)
    return out

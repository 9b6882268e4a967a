"""Linearization around an equilibrium: Dirichlet form, spectral gap, constants.

The operator acts on perturbations h of f = M + m h with weight
m = M (1 - eps M).  In pair form

    L h = (1/m) div[ m ( (a*m) grad h - a*(m grad h) ) ],

which is self-adjoint and nonpositive in L^2(m) exactly (not merely to
discretization order), with kernel spanned by {1, v1, v2, v3, |v|^2}:
the pair sum sees only grad h differences, and a(z) annihilates z.

The numeric gap comes from Lanczos on the symmetrized operator
B = diag(sqrt(m)) L diag(1/sqrt(m)) with the five kernel vectors deflated
on every product, full reorthogonalization, and a dense eigensolver path
at small sizes as the cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.linalg import eigh, eigh_tridiagonal, qr
from scipy.special import expit

from .equilibrium import FermiDiracParams, GasMoments, saturation_threshold
from .errors import EpsilonOutOfRange, GramSingular, NonConvergence
from .grid import VelocityGrid, _SYM


def weight_m(params: FermiDiracParams, grid: VelocityGrid) -> np.ndarray:
    """m = M_eps (1 - eps M_eps) at the nodes.

    Satisfies (1 + eps a)^{-2} M <= m <= M with M = a e^{-b |v|^2}.
    """
    return params.weight_profile(grid.v2)


def _contract_sym(T6: np.ndarray, u: np.ndarray) -> np.ndarray:
    out = np.zeros_like(u)
    for row, (k, l) in enumerate(_SYM):
        out[k] += T6[row] * u[l]
        if k != l:
            out[l] += T6[row] * u[k]
    return out


class LinearizedOperator:
    """Matrix-free L around M_eps on a fixed grid, for one gamma.

    gamma = 0 is allowed here (the Maxwell comparison case) even though
    the nonlinear solver requires gamma > 0.
    """

    def __init__(self, grid: VelocityGrid, params: FermiDiracParams,
                 gamma: float):
        if not 0 <= gamma <= 1:
            raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
        self.grid = grid
        self.params = params
        self.gamma = gamma
        self.m = weight_m(params, grid)
        self.sqrt_m = np.sqrt(self.m)
        self.conv = grid.convolver(gamma)
        self.T6 = self.conv.tensor(self.m)       # a * m, fixed
        self._n = grid.shape[0]
        self._kernel_q = None

    @property
    def n_nodes(self) -> int:
        return self.m.size

    def inner_m(self, g: np.ndarray, h: np.ndarray) -> float:
        return self.grid.integrate(self.m * g * h)

    def norm_m(self, h: np.ndarray) -> float:
        return float(np.sqrt(max(self.inner_m(h, h), 0.0)))

    def apply(self, h: np.ndarray) -> np.ndarray:
        """L h as a nodal field."""
        g = self.grid
        u = g.gradient(h)
        mu = self.m[None] * u
        flux = self.m[None] * (_contract_sym(self.T6, u)
                               - self.conv.tensor_dot(mu))
        return g.divergence(flux) / self.m

    def apply_sym(self, w: np.ndarray) -> np.ndarray:
        """B w = sqrt(m) L (w / sqrt(m)), symmetric in plain l^2."""
        return self.sqrt_m * self.apply(w / self.sqrt_m)

    # -- kernel handling -------------------------------------------------

    def _invariant_basis(self) -> np.ndarray:
        g = self.grid
        cols = [np.ones(g.shape), g.vx, g.vy, g.vz, g.v2]
        return np.stack([c.ravel() for c in cols], axis=1)

    def kernel_basis(self) -> np.ndarray:
        """Orthonormal (l^2) basis of the deflation space sqrt(m) psi."""
        if self._kernel_q is None:
            raw = self.sqrt_m.ravel()[:, None] * self._invariant_basis()
            q, r = qr(raw, mode="economic")
            if np.min(np.abs(np.diag(r))) < 1e-12 * np.max(np.abs(np.diag(r))):
                raise GramSingular("collision invariants degenerate under m")
            self._kernel_q = q
        return self._kernel_q

    def deflate(self, w: np.ndarray) -> np.ndarray:
        q = self.kernel_basis()
        return w - q @ (q.T @ w)


def apply_linearized(op: LinearizedOperator, h: np.ndarray) -> np.ndarray:
    return op.apply(h)


def spectral_projection(h: np.ndarray, op: LinearizedOperator) -> np.ndarray:
    """Remove the L^2(m)-projection onto the five collision invariants."""
    g = op.grid
    basis = op._invariant_basis()
    w = (op.m.ravel() * g.cell_volume)
    gram = basis.T @ (w[:, None] * basis)
    rhs = basis.T @ (w * h.ravel())
    try:
        lam = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError as exc:
        raise GramSingular(f"invariant Gram matrix singular: {exc}") from exc
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > 1e14:
        raise GramSingular(f"invariant Gram matrix ill-conditioned ({cond:.2e})")
    out = h.ravel() - basis @ lam
    return out.reshape(op.grid.shape)


def dirichlet_form(h: np.ndarray, op: LinearizedOperator,
                   method: str = "fft") -> float:
    """D(h) = -<h, L h>_m >= 0.

    "fft" contracts the operator flux against grad h; "pairs" evaluates
    the literal half double sum over node pairs (small grids only).
    """
    g = op.grid
    if method == "fft":
        u = g.gradient(h)
        mu = op.m[None] * u
        flux = op.m[None] * (_contract_sym(op.T6, u)
                             - op.conv.tensor_dot(mu))
        return g.integrate(np.sum(u * flux, axis=0))
    if method != "pairs":
        raise ValueError(f"unknown method {method!r}")
    u = g.gradient(h).reshape(3, -1).T
    V = g.nodes()
    mw = op.m.ravel()
    gamma = op.gamma
    acc = 0.0
    chunk = max(1, int(2**21 // len(mw)))
    for start in range(0, len(mw), chunk):
        sl = slice(start, start + chunk)
        z = V[sl, None, :] - V[None, :, :]
        r2 = np.einsum("ijk,ijk->ij", z, z)
        du = u[sl, None, :] - u[None, :, :]
        du2 = np.einsum("ijk,ijk->ij", du, du)
        zdu = np.einsum("ijk,ijk->ij", z, du)
        q = r2 ** (gamma / 2.0) * (r2 * du2 - zdu * zdu)
        acc += float(np.sum(mw[sl, None] * mw[None, :] * q))
    return 0.5 * g.cell_volume ** 2 * acc


# -- spectral gap --------------------------------------------------------------

def _dense_matrix(op: LinearizedOperator) -> np.ndarray:
    n3 = op.n_nodes
    B = np.empty((n3, n3))
    e = np.zeros(op.grid.shape)
    flat = e.ravel()
    for j in range(n3):
        flat[j] = 1.0
        B[:, j] = op.apply_sym(e).ravel()
        flat[j] = 0.0
    return 0.5 * (B + B.T)


def dense_spectrum(op: LinearizedOperator, k: int = 12) -> np.ndarray:
    """Lowest k eigenvalues of -B (dense path, n_per_axis <= 14 only)."""
    if op.grid.shape[0] > 14:
        raise ValueError("dense path is restricted to n_per_axis <= 14")
    B = _dense_matrix(op)
    vals = eigh(-B, eigvals_only=True)
    return vals[:k]


def numeric_spectral_gap(op: LinearizedOperator, method: str = "auto",
                         budget: int = 0, tol: float = 1e-8,
                         seed: int = 0) -> float:
    """Smallest eigenvalue of -L restricted off the 5-dim kernel.

    Dense eigensolver for n_per_axis <= 14 (or on request); otherwise
    Lanczos on the deflated symmetrized operator with the kernel
    projection re-applied at every product.  Raises NoConvergence when
    the iteration budget runs out before the residual bound meets tol.
    """
    n = op.grid.shape[0]
    if method == "dense" or (method == "auto" and n <= 14):
        vals = dense_spectrum(op, k=8)
        # the first five are the deflated kernel; they must sit at zero
        scale = max(abs(vals[0]), abs(vals[7]), 1e-30)
        if abs(vals[4]) > 1e-6 * max(1.0, scale):
            raise NonConvergence(
                f"kernel eigenvalues not resolved: {vals[:5]}")
        return float(vals[5])
    return _lanczos_gap(op, budget=budget, tol=tol, seed=seed)


def _lanczos_gap(op: LinearizedOperator, budget: int, tol: float,
                 seed: int) -> float:
    n3 = op.n_nodes
    if budget <= 0:
        budget = min(n3 - 5, 1800)
    rng = np.random.default_rng(seed)
    shape = op.grid.shape

    q = op.deflate(rng.standard_normal(n3))
    q /= np.linalg.norm(q)
    Q = np.empty((n3, budget + 1))
    Q[:, 0] = q
    alphas, betas = [], []
    theta_prev = np.inf
    stall = 0

    for k in range(budget):
        y = -op.apply_sym(Q[:, k].reshape(shape)).ravel()
        y = op.deflate(y)
        alpha = float(Q[:, k] @ y)
        alphas.append(alpha)
        y -= alpha * Q[:, k]
        if k > 0:
            y -= betas[-1] * Q[:, k - 1]
        # full reorthogonalization, twice
        y -= Q[:, :k + 1] @ (Q[:, :k + 1].T @ y)
        y -= Q[:, :k + 1] @ (Q[:, :k + 1].T @ y)
        beta = float(np.linalg.norm(y))

        if k >= 4 and (k % 10 == 0 or beta < 1e-13 or k == budget - 1):
            w, v = eigh_tridiagonal(np.array(alphas), np.array(betas[:k]))
            theta = float(w[0])
            resid = beta * abs(float(v[-1, 0]))
            scale = max(abs(float(w[-1])), 1.0)
            if resid <= tol * scale:
                return theta
            if abs(theta - theta_prev) <= 1e-13 * scale:
                stall += 1
                if stall >= 8:
                    # Ritz value frozen well below the residual bound
                    return theta
            else:
                stall = 0
            theta_prev = theta
        if beta < 1e-13:
            # invariant subspace exhausted; spectrum fully resolved
            w = eigh_tridiagonal(np.array(alphas), np.array(betas[:k]),
                                 eigvals_only=True)
            return float(w[0])
        betas.append(beta)
        Q[:, k + 1] = y / beta

    raise NonConvergence(
        f"Lanczos budget {budget} exhausted (last residual above tol)")


def gap_with_uncertainty(params: FermiDiracParams, gamma: float,
                         v_max: float, n_coarse: int, n_fine: int,
                         **kwargs) -> dict:
    """Gap on two resolutions with the relative change as uncertainty."""
    from .grid import build_grid
    gaps = {}
    for n in (n_coarse, n_fine):
        op = LinearizedOperator(build_grid(n, v_max), params, gamma)
        gaps[n] = numeric_spectral_gap(op, **kwargs)
    fine = gaps[n_fine]
    unc = abs(fine - gaps[n_coarse]) / abs(fine) if fine else np.inf
    return {"gap": fine, "gap_coarse": gaps[n_coarse],
            "uncertainty": unc, "resolutions": [n_coarse, n_fine],
            "v_max": v_max}


# -- explicit constants ---------------------------------------------------------

@dataclass(frozen=True)
class GapConstants:
    C_P: float
    nu: float
    C_ab: float
    lambda2: float
    kappa_eps: float
    C_gamma_eps: float
    lambda_gamma: float
    zeta_eps: float
    k_dagger: float

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "C_P", "nu", "C_ab", "lambda2", "kappa_eps", "C_gamma_eps",
            "lambda_gamma", "zeta_eps", "k_dagger")}


def zeta_eps(params: FermiDiracParams) -> float:
    """(2 b / 3) int |w|^2 m (1 - 2 eps M) dw by radial quadrature."""
    a, b, eps = params.a, params.b, params.eps
    if eps == 0:
        return 2.0 * b * params.rho_eps * params.E_eps  # = rho in the limit
    la = np.log(eps * a)

    def integrand(r):
        s = expit(la - b * r * r)
        return 4.0 * np.pi * r**4 * (s * (1.0 - s) / eps) * (1.0 - 2.0 * s)

    r_edge = np.sqrt(max(la, 0.0) / b) if la > 0 else 0.0
    r_inf = np.sqrt((max(la, 0.0) + 45.0) / b)
    val, _ = quad(integrand, 0.0, r_inf,
                  points=[r_edge] if r_edge > 0 else None,
                  epsabs=1e-14, epsrel=1e-13, limit=200)
    return (2.0 * b / 3.0) * val


def gap_constants(params: FermiDiracParams, moments: GasMoments,
                  gamma: float, strict: bool = True) -> GapConstants:
    """All explicit constants of the gap chain, gated by the thresholds.

    With strict=True (the default) eps must lie below eps_dagger, where
    positivity of lambda2 is guaranteed; eps a_eps < 1 is required for
    the moment constants zeta and k_dagger regardless.
    """
    eps = params.eps
    th = saturation_threshold(moments)
    if strict and eps >= th.eps_dagger:
        raise EpsilonOutOfRange(
            f"eps = {eps:.6g} >= eps_dagger = {th.eps_dagger:.6g}",
            threshold="eps_dagger")
    if eps * params.a >= 1.0:
        raise EpsilonOutOfRange(
            f"eps a = {eps * params.a:.6g} >= 1 (zeta undefined)",
            threshold="eps_one")
    a, b = params.a, params.b
    rho, E = moments.rho, moments.E
    C_P = 2.0 * b * (1.0 + eps * a) ** -4
    C_ab = (a / (2.0 * b)) * (np.pi / b) ** 1.5
    nu = rho**2 * E**2 / (2.0 * C_ab * (1.0 + eps * a))
    lambda2 = nu * (C_P / 3.0
                    - (eps**2 / (rho * E)) * a**3 * (np.pi / (3.0 * b)) ** 1.5)
    kappa = (1.0 + eps * a) ** -2
    if gamma == 0:
        C_ge = 1.0 / 8.0
    else:
        C_ge = (1.0 / 8.0) * (gamma / (8.0 * np.e * b)) ** (gamma / 2.0)
    lam_g = kappa**2 * C_ge * lambda2
    zeta = zeta_eps(params)
    if zeta <= 0:
        raise EpsilonOutOfRange(
            f"zeta_eps = {zeta:.6g} <= 0", threshold="eps_one")
    k_dag = max(rho * (gamma + 3.0) / zeta, 2.0 * gamma + 7.0)
    return GapConstants(C_P=C_P, nu=nu, C_ab=C_ab, lambda2=lambda2,
                        kappa_eps=kappa, C_gamma_eps=C_ge,
                        lambda_gamma=lam_g, zeta_eps=zeta, k_dagger=k_dag)


def classical_lambda2_floor(rho: float) -> float:
    """The eps -> 0 guaranteed floor 3^6/(32 (3+4 sqrt 2)^5) rho."""
    return 3.0**6 / (32.0 * (3.0 + 4.0 * np.sqrt(2.0)) ** 5) * rho


# -- moment confinement ---------------------------------------------------------

def lambda1_field(grid: VelocityGrid, values: np.ndarray,
                  gamma: float) -> np.ndarray:
    """Radial eigenvalue v.(a*g)v/|v|^2 of the tensor a*g, nodewise."""
    S6 = grid.convolver(gamma).tensor(values)
    vn2 = np.maximum(grid.v2, 1e-300)
    num = np.zeros(grid.shape)
    vhat = [grid.vx, grid.vy, grid.vz]
    for row, (k, l) in enumerate(_SYM):
        w = vhat[k] * vhat[l] * S6[row]
        num += w if k == l else 2.0 * w
    return num / vn2


@dataclass
class ConfinementReport:
    k: float
    k_dagger: float
    values: np.ndarray
    shell_sup: float
    dissipative: bool


def confinement_profile(k: float, params: FermiDiracParams, gamma: float,
                        grid: VelocityGrid,
                        k_dagger: float = float("nan")) -> ConfinementReport:
    """Phi_k(v), the drift balance for the k-th weighted moment.

    Phi_k = (k^2/4) lam1[m] |v|^2 <v>^-4
            - b k |v|^2 <v>^-2 (lam1[m] - 2 eps lam1[m M])
            + (gamma+3) (|z|^gamma * m),
    with lam1 the radial eigenvalue of a * (.).  Reports the sup of
    |v|^{-gamma} Phi_k over the outer shell; negative values mean the
    moment eventually dissipates (k above the threshold).
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    if params.eps * params.a >= 1.0:
        raise EpsilonOutOfRange("confinement needs eps a_eps < 1",
                                threshold="eps_one")
    m = weight_m(params, grid)
    M = params.profile(grid.v2)
    lam_m = lambda1_field(grid, m, gamma)
    lam_mM = lambda1_field(grid, m * M, gamma)
    conv = grid.convolver(gamma)
    tail = (gamma + 3.0) * conv.power(m, gamma)
    br2 = grid.bracket2
    phi = (0.25 * k * k * lam_m * grid.v2 / br2**2
           - params.b * k * grid.v2 / br2 * (lam_m - 2.0 * params.eps * lam_mM)
           + tail)
    shell = grid.boundary_mask
    scaled = phi[shell] / np.maximum(grid.vnorm[shell], 1e-300) ** gamma
    sup = float(np.max(scaled))
    return ConfinementReport(k=k, k_dagger=k_dagger, values=phi,
                             shell_sup=sup, dissipative=bool(sup < 0.0))

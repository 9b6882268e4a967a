"""Fermi-Dirac equilibria, saturation thresholds, and their explicit bounds.

The steady states are M_eps(v) = a e^{-b|v|^2} / (1 + eps a e^{-b|v|^2})
with (a, b) fixed by the mass and energy constraints.  A state with mass
rho and energy integral 3 rho E exists iff eps < eps_max(rho, E); at the
threshold the equilibrium degenerates into the saturated ball 1/eps on
|v| <= R.  All radial quadratures here are grid-independent (adaptive 1D),
so solved parameters carry no velocity-grid truncation error.

The ball radius uses R = (3 rho eps / (4 pi))^{1/3}; mass consistency
forces the 4 pi here to be the surface area of the unit sphere, and that
convention is used throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.special import expit

from .errors import BallTooLarge, NoEquilibrium, NonConvergence
from .grid import DistributionField, VelocityGrid

_QUAD_OPTS = dict(epsabs=1e-14, epsrel=1e-13, limit=200)


@dataclass(frozen=True)
class GasMoments:
    """Conserved triple: mass rho, bulk velocity u, energy parameter E.

    The energy convention is integral f |v|^2 dv = 3 rho E.  The model
    assumes u = 0; nonzero u inputs must be removed by a frame shift
    before solving.
    """

    rho: float
    E: float
    u: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not (self.rho > 0 and np.isfinite(self.rho)):
            raise ValueError(f"rho must be positive, got {self.rho}")
        if not (self.E > 0 and np.isfinite(self.E)):
            raise ValueError(f"E must be positive, got {self.E}")
        if np.linalg.norm(self.u) > 1e-12 * max(1.0, np.sqrt(self.E)):
            raise ValueError("bulk velocity must vanish; shift frames first")


def measure_moments(field: DistributionField) -> GasMoments:
    """Grid moments of a field, frame-shifted to zero bulk velocity."""
    g = field.grid
    m = g.moments5(field.values)
    rho = m[0]
    if rho <= 0:
        raise ValueError("field has nonpositive mass")
    u = m[1:4] / rho
    if np.linalg.norm(u) > 1e-10:
        # energy in the co-moving frame
        e2 = m[4] / rho - float(u @ u)
    else:
        u = np.zeros(3)
        e2 = m[4] / rho
    return GasMoments(rho=float(rho), E=float(e2 / 3.0), u=(0.0, 0.0, 0.0))


@dataclass(frozen=True)
class Thresholds:
    eps_max: float
    eps_bar: float
    eps_dagger: float
    eps_one: float

    def ordered(self) -> bool:
        return 0 < self.eps_dagger < self.eps_one < self.eps_bar < self.eps_max


def saturation_threshold(moments: GasMoments) -> Thresholds:
    """The four explicit eps thresholds for given (rho, E)."""
    rho, E = moments.rho, moments.E
    return Thresholds(
        eps_max=(4.0 * np.pi / 3.0) * (5.0 * E) ** 1.5 / rho,
        eps_bar=(2.0 / 5.0) ** 2.5 * (6.0 * np.pi * E) ** 1.5 / rho,
        eps_dagger=(5.0 ** -2.5 * 3.0 ** (21.0 / 4.0)
                    / (3.0 + 4.0 * np.sqrt(2.0)) ** 2
                    * (2.0 * np.pi * E) ** 1.5 / (2.0 * rho)),
        eps_one=(3.0 / 5.0) ** 2.5 * (2.0 * np.pi * E) ** 1.5 / rho,
    )


def lemma_brackets(moments: GasMoments) -> dict:
    """Rigorous (a, b) brackets valid for all eps <= eps_bar."""
    rho, E = moments.rho, moments.E
    scale = rho / (2.0 * np.pi * E) ** 1.5
    return {
        "b_lo": 3.0 / (8.0 * E),
        "b_hi": 5.0 / (6.0 * E),
        "a_lo": (3.0 / 4.0) ** 1.5 * scale,
        "a_hi": (5.0 / 3.0) ** 2.5 * scale,
    }


@dataclass(frozen=True)
class FermiDiracParams:
    """Solved (a, b, eps) with the derived scalar constants."""

    a: float
    b: float
    eps: float

    @property
    def rho_eps(self) -> float:
        """Mass of the Maxwellian envelope a e^{-b|v|^2}."""
        return self.a * (np.pi / self.b) ** 1.5

    @property
    def E_eps(self) -> float:
        return 1.0 / (2.0 * self.b)

    @property
    def c_eps(self) -> float:
        return 1.0 + self.eps * self.a

    @property
    def kappa_eps(self) -> float:
        return (1.0 + self.eps * self.a) ** -2

    def profile(self, r2):
        """M_eps at squared radius r2, overflow-safe for any eps a."""
        if self.eps == 0:
            return self.a * np.exp(-self.b * np.asarray(r2, dtype=float))
        y = np.log(self.eps * self.a) - self.b * np.asarray(r2, dtype=float)
        return expit(y) / self.eps

    def weight_profile(self, r2):
        """m = M_eps (1 - eps M_eps) at squared radius r2."""
        if self.eps == 0:
            return self.profile(r2)
        y = np.log(self.eps * self.a) - self.b * np.asarray(r2, dtype=float)
        s = expit(y)
        return s * (1.0 - s) / self.eps


def classical_params(moments: GasMoments) -> FermiDiracParams:
    a = moments.rho / (2.0 * np.pi * moments.E) ** 1.5
    return FermiDiracParams(a=a, b=1.0 / (2.0 * moments.E), eps=0.0)


# -- radial quadratures -------------------------------------------------------

def _radial_moment(params: FermiDiracParams, power: int,
                   weight: str = "M") -> float:
    """4 pi int r^power w(r) dr for w = M_eps or m = M_eps(1 - eps M_eps)."""
    a, b, eps = params.a, params.b, params.eps
    if eps == 0:
        # Gaussian moments in closed form: 4 pi int r^{2k} e^{-b r^2}
        k = (power - 2) // 2
        base = a * (np.pi / b) ** 1.5
        extra = {0: 1.0, 1: 1.5 / b, 2: 3.75 / b**2, 3: 13.125 / b**3}[k]
        if power % 2 == 0:
            return base * extra
        raise ValueError("odd radial powers not needed for eps = 0")
    la = np.log(eps * a)

    def integrand(r):
        y = la - b * r * r
        s = expit(y)
        w = s if weight == "M" else s * (1.0 - s)
        return 4.0 * np.pi * r**power * w / eps

    r_edge = np.sqrt(max(la, 0.0) / b) if la > 0 else 0.0
    r_inf = np.sqrt((max(la, 0.0) + 45.0) / b)
    pts = [r_edge] if r_edge > 0 else None
    val, _ = quad(integrand, 0.0, r_inf, points=pts, **_QUAD_OPTS)
    return val


def fd_mass_energy(params: FermiDiracParams) -> tuple:
    mass = _radial_moment(params, 2, "M")
    energy = _radial_moment(params, 4, "M")
    return mass, energy


def solve_fermi_dirac(moments: GasMoments, eps: float) -> FermiDiracParams:
    """Match (a, b) to the mass/energy constraints at quantum parameter eps.

    Damped Newton on (log a, log b) with the analytic Jacobian; if Newton
    stalls, falls back to bracketed root finding on the strictly increasing
    map t = eps a -> eps implied by eliminating b.  Residuals are accepted
    at 1e-10 relative.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    thresholds = saturation_threshold(moments)
    if eps >= thresholds.eps_max:
        raise NoEquilibrium(
            f"eps = {eps:.6g} >= eps_max = {thresholds.eps_max:.6g} "
            f"for (rho, E) = ({moments.rho}, {moments.E})")
    if eps == 0:
        return classical_params(moments)

    rho, E = moments.rho, moments.E
    target_energy = 3.0 * rho * E
    brackets = lemma_brackets(moments)
    in_brackets = eps <= thresholds.eps_bar

    start = classical_params(moments)
    la, lb = np.log(start.a), np.log(start.b)
    for _ in range(60):
        p = FermiDiracParams(a=np.exp(la), b=np.exp(lb), eps=eps)
        mass, energy = fd_mass_energy(p)
        r1 = np.log(mass / rho)
        r2 = np.log(energy / target_energy)
        if max(abs(r1), abs(r2)) < 1e-13:
            return p
        m0 = _radial_moment(p, 2, "m")
        mE = _radial_moment(p, 4, "m")
        m4 = _radial_moment(p, 6, "m")
        J = np.array([[m0 / mass, -p.b * mE / mass],
                      [mE / energy, -p.b * m4 / energy]])
        try:
            step = np.linalg.solve(J, [r1, r2])
        except np.linalg.LinAlgError:
            break
        scale = max(1.0, np.max(np.abs(step)))
        dla, dlb = -step[0] / scale, -step[1] / scale
        for _ in range(12):
            na, nb = np.exp(la + dla), np.exp(lb + dlb)
            if not in_brackets:
                break
            if (brackets["a_lo"] * 0.5 <= na <= brackets["a_hi"] * 2.0
                    and brackets["b_lo"] * 0.5 <= nb <= brackets["b_hi"] * 2.0):
                break
            dla *= 0.5
            dlb *= 0.5
        la += dla
        lb += dlb
    else:
        p = FermiDiracParams(a=np.exp(la), b=np.exp(lb), eps=eps)
        mass, energy = fd_mass_energy(p)
        if (abs(mass / rho - 1.0) < 1e-10
                and abs(energy / target_energy - 1.0) < 1e-10):
            return p

    return _solve_monotone(moments, eps)


def _dimensionless_moments(log_t: float) -> tuple:
    """g1 = int x^2 s dx and g2 = int x^4 s dx with s = expit(log_t - x^2)."""
    edge = np.sqrt(max(log_t, 0.0))
    upper = np.sqrt(max(log_t, 0.0) + 45.0)
    pts = [edge] if edge > 0 else None
    g1, _ = quad(lambda x: x * x * expit(log_t - x * x), 0.0, upper,
                 points=pts, **_QUAD_OPTS)
    g2, _ = quad(lambda x: x**4 * expit(log_t - x * x), 0.0, upper,
                 points=pts, **_QUAD_OPTS)
    return g1, g2


def _solve_monotone(moments: GasMoments, eps: float) -> FermiDiracParams:
    """Bracketed 1D solve on t = eps a; eps(t) is strictly increasing."""
    rho, E = moments.rho, moments.E

    def eps_of(log_t):
        g1, g2 = _dimensionless_moments(log_t)
        b = g2 / (3.0 * E * g1)
        return 4.0 * np.pi * g1 / (rho * b ** 1.5)

    def objective(log_t):
        return np.log(eps_of(log_t) / eps)

    lo, hi = -40.0, 5.0
    for _ in range(60):
        if objective(hi) > 0:
            break
        hi += 3.0
    else:
        raise NonConvergence("monotone bracket expansion failed")
    if objective(lo) > 0:
        raise NonConvergence("monotone map has no lower bracket")
    log_t = brentq(objective, lo, hi, xtol=1e-14, rtol=8.9e-16)
    g1, g2 = _dimensionless_moments(log_t)
    b = g2 / (3.0 * E * g1)
    p = FermiDiracParams(a=np.exp(log_t) / eps, b=b, eps=eps)
    mass, energy = fd_mass_energy(p)
    if (abs(mass / rho - 1.0) > 1e-10
            or abs(energy / (3 * rho * E) - 1.0) > 1e-10):
        raise NonConvergence(
            f"equilibrium residuals too large: mass {mass / rho - 1.0:.3e}, "
            f"energy {energy / (3 * rho * E) - 1.0:.3e}")
    return p


def evaluate_equilibrium(params: FermiDiracParams,
                         grid: VelocityGrid) -> DistributionField:
    """Sample M_eps at the grid nodes."""
    return DistributionField(grid, params.profile(grid.v2), params.eps)


def saturated_state(rho: float, eps: float,
                    grid: VelocityGrid) -> DistributionField:
    """The degenerate state: 1/eps inside the ball carrying mass rho.

    The measured grid mass differs from rho by an O(h) surface term; the
    field carries it as the attribute ``mass_error``.
    """
    if eps <= 0:
        raise ValueError("saturated state needs eps > 0")
    radius = (3.0 * rho * eps / (4.0 * np.pi)) ** (1.0 / 3.0)
    if radius > grid.v_max / 2.0:
        raise BallTooLarge(
            f"ball radius {radius:.4g} exceeds v_max/2 = {grid.v_max / 2.0:.4g}")
    values = np.where(grid.v2 <= radius * radius, 1.0 / eps, 0.0)
    out = DistributionField(grid, values, eps)
    out.mass_error = out.mass() - rho
    out.radius = radius
    return out


def equilibrium_relative_entropy(params: FermiDiracParams,
                                 moments: GasMoments) -> float:
    """Entropy gap |H(M_0) - H(M_eps)| between the two equilibria.

    M_0 is the Maxwellian sharing mass and energy with M_eps, so log M_0
    lies in the span of the collision invariants and the gap equals the
    Kullback-Leibler divergence of M_eps from M_0.  Computed as

        -(rho (log rho - log rho_eps - (3/2) Psi(E / E_eps))
          + int M_eps log(1 + eps a e^{-b |v|^2}) dv),

    Psi(x) = log x + 1 - x, head in closed form, tail by radial quadrature.
    The signed sum is <= 0 because M_0 minimizes Boltzmann entropy under
    the moment constraints; the magnitude is O(eps^2), comfortably below
    any C eps envelope.
    """
    if params.eps == 0:
        return 0.0
    rho, E = moments.rho, moments.E
    x = E / params.E_eps
    psi = np.log(x) + 1.0 - x
    head = rho * (np.log(rho) - np.log(params.rho_eps) - 1.5 * psi)
    a, b, eps = params.a, params.b, params.eps
    la = np.log(eps * a)

    def integrand(r):
        y = la - b * r * r
        # M_eps * softplus(y), both overflow-safe
        return 4.0 * np.pi * r * r * expit(y) / eps * np.logaddexp(0.0, y)

    r_edge = np.sqrt(max(la, 0.0) / b) if la > 0 else 0.0
    r_inf = np.sqrt((max(la, 0.0) + 45.0) / b)
    tail, _ = quad(integrand, 0.0, r_inf,
                   points=[r_edge] if r_edge > 0 else None, **_QUAD_OPTS)
    return abs(head + tail)


def electron_quantum_parameter() -> float:
    """eps = (2 pi hbar)^3 / (m^3 beta) for electrons, beta = 2 spin states.

    Context note only (SI magnitudes); the solver itself is dimensionless.
    """
    hbar = 1.054571817e-34
    m_e = 9.1093837015e-31
    beta = 2.0
    return (2.0 * np.pi * hbar) ** 3 / (m_e**3 * beta)

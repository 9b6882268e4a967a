"""Time stepping for the relaxation problem.

Heun's method with a parabolic step-size rule dt = cfl h^2 / (2 L), where
L is the largest spectral radius of the diffusion tensor over the grid.
L is re-estimated at record boundaries and frozen in between, so a run is
reproducible from its config alone.

Each accepted step is clipped to the physical slab [0, 1/eps] and then
re-projected onto the initial (mass, momentum, energy) by a
multiplicative correction f (alpha + beta . v + delta |v|^2) restricted
to nodes strictly inside the slab, so it cannot push f across either
bound.  The flux form conserves the five invariants to roundoff already;
the projection removes the random walk of that roundoff over long runs.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass

import numpy as np

from .collision import collision_operator, pair_flux
from .diagnostics import state_row
from .equilibrium import (classical_params, evaluate_equilibrium,
                          measure_moments, solve_fermi_dirac)
from .errors import (BlowUp, NoEquilibrium, PauliViolation,
                     ProjectionInfeasible, StepTooLarge)
from .fieldio import TRAJECTORY_COLUMNS
from .grid import DistributionField, VelocityGrid


@dataclass(frozen=True)
class SimulationConfig:
    gamma: float
    eps: float
    t_end: float
    dt: float = 0.0          # 0 means automatic
    cfl: float = 0.9
    record_dt: float = 0.1
    method: str = "fft"
    project: bool = True
    max_steps: int = 2_000_000
    floor_frac: float = None  # None: collision.DEFAULT_FLOOR_FRAC
    snapshot_times: tuple = ()  # record boundaries at which to keep the field

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if self.t_end <= 0 or self.record_dt <= 0:
            raise ValueError("t_end and record_dt must be positive")
        if not 0 < self.cfl <= 0.9:
            raise ValueError("cfl must lie in (0, 0.9]")
        if self.floor_frac is not None and not 0 <= self.floor_frac <= 1e-3:
            raise ValueError("floor_frac must lie in [0, 1e-3]")
        if any(not 0 <= s <= self.t_end for s in self.snapshot_times):
            raise ValueError("snapshot times must lie in [0, t_end]")


@dataclass
class TrajectoryRecord:
    t: float
    m0: float
    m2: float
    m3: float
    m4: float
    M0: float
    Mg2: float
    Dg2: float
    S_eps: float
    D_eps: float
    H_rel: float
    L12_dist: float
    fmin: float
    fmax: float
    one_minus_eps_f_min: float

    @classmethod
    def from_row(cls, row: dict) -> "TrajectoryRecord":
        return cls(**{k: float(row[k]) for k in TRAJECTORY_COLUMNS})

    def as_row(self) -> dict:
        return {k: getattr(self, k) for k in TRAJECTORY_COLUMNS}


# -- initial states ------------------------------------------------------------

def _gaussian(grid, rho, theta):
    return rho * (2.0 * np.pi * theta) ** -1.5 * np.exp(-grid.v2 / (2.0 * theta))


def make_initial(grid: VelocityGrid, preset: str, eps: float,
                 **params) -> DistributionField:
    """Named initial states.

    maxwellian(rho, E); bimaxwellian(rho, theta1, theta2, weight);
    anisotropic(rho, thetas=(tx, ty, tz)); near_saturated(rho, width).
    All are aliasing-checked against the grid.
    """
    if preset == "maxwellian":
        rho = params.get("rho", 1.0)
        E = params.get("E", 1.0)
        values = _gaussian(grid, rho, E)
    elif preset == "bimaxwellian":
        rho = params.get("rho", 1.0)
        t1 = params.get("theta1", 0.7)
        t2 = params.get("theta2", 1.3)
        w = params.get("weight", 0.5)
        if not 0 <= w <= 1:
            raise ValueError("weight must lie in [0, 1]")
        values = w * _gaussian(grid, rho, t1) + (1 - w) * _gaussian(grid, rho, t2)
    elif preset == "anisotropic":
        rho = params.get("rho", 1.0)
        tx, ty, tz = params.get("thetas", (0.5, 1.0, 1.5))
        values = rho * np.ones(grid.shape)
        for t, ax in ((tx, grid.vx), (ty, grid.vy), (tz, grid.vz)):
            values = values * ((2.0 * np.pi * t) ** -0.5
                               * np.exp(-ax * ax / (2.0 * t)))
    elif preset == "near_saturated":
        if eps <= 0:
            raise ValueError("near_saturated needs eps > 0")
        rho = params.get("rho", 1.0)
        width = params.get("width", 2.0 * grid.h)
        from scipy.special import expit
        from scipy.optimize import brentq

        headroom = 1.0 - 1e-6

        def mass_of(R):
            prof = headroom / eps * expit((R - grid.vnorm) / width)
            return grid.integrate(prof) - rho

        r_hi = grid.v_max - 2.0 * grid.h
        if mass_of(r_hi) < 0:
            raise ValueError("grid too small to hold the requested mass")
        R = brentq(mass_of, 1e-6, r_hi, xtol=1e-12)
        values = headroom / eps * expit((R - grid.vnorm) / width)
    else:
        raise ValueError(f"unknown preset {preset!r}")
    if eps > 0 and float(values.max()) > 1.0 / eps:
        raise PauliViolation(
            f"preset peaks at {float(values.max()):.4g} > 1/eps = {1.0 / eps:.4g}")
    grid.check_aliasing(values)
    return DistributionField(grid, values, eps)


# -- stepping ------------------------------------------------------------------

def spectral_radius_bound(field: DistributionField, gamma: float) -> float:
    """max over nodes of the largest eigenvalue of Sigma[f]."""
    from .grid import Convolver
    S6 = field.grid.convolver(gamma).tensor(field.values)
    full = Convolver.expand_sym(S6)          # (3, 3, n, n, n)
    mats = np.moveaxis(full.reshape(3, 3, -1), -1, 0)
    lam = np.linalg.eigvalsh(mats)
    return float(lam[:, -1].max())


def stable_dt(field: DistributionField, gamma: float, cfl: float) -> float:
    L = spectral_radius_bound(field, gamma)
    if L <= 0:
        raise BlowUp("diffusion tensor vanished; state is degenerate")
    return cfl * field.grid.h ** 2 / (2.0 * L)


def conservative_projection(field: DistributionField,
                            targets: np.ndarray) -> DistributionField:
    """Restore the five moments exactly via a multiplicative correction.

    f <- f (alpha + beta . v + delta |v|^2) on the nodes strictly inside
    the slab (0 < f < (1 - 1e-6)/eps), unchanged elsewhere; the five
    coefficients solve the 5x5 Gram system of the moment constraints.
    The correction is proportional to f, so small deficits cannot push
    the state across either physical bound.
    """
    g = field.grid
    f = field.values
    w = np.where(f < (1.0 - 1e-6) * field.ceiling, f, 0.0)
    psi = g.invariant_basis()
    wpsi = psi * w.ravel()
    gram = (wpsi @ psi.T) * g.cell_volume
    defect = np.asarray(targets, dtype=float) - g.moments5(f)
    scale = np.abs(np.asarray(targets, dtype=float))
    if np.any(np.abs(defect) > 0.01 * np.maximum(scale, scale[0])):
        raise ProjectionInfeasible(
            f"moment deficit {defect} beyond 1% of targets")
    try:
        lam = np.linalg.solve(gram, defect)
    except np.linalg.LinAlgError as exc:
        raise ProjectionInfeasible(
            f"projection Gram system singular: {exc}") from exc
    if not np.all(np.isfinite(lam)):
        raise ProjectionInfeasible("projection coefficients not finite")
    out = f + (lam @ wpsi).reshape(g.shape)
    return DistributionField(g, out, field.eps)


class Stepper:
    """Heun stepper bound to one config and one grid."""

    def __init__(self, grid: VelocityGrid, config: SimulationConfig):
        self.grid = grid
        self.config = config
        self.clipped_mass = 0.0
        self.targets = None

    def rhs(self, field: DistributionField) -> np.ndarray:
        # stepper states are clipped into range before each call, so the
        # admissibility re-checks of collision_operator are skipped here
        flux = pair_flux(field, self.config.gamma,
                         method=self.config.method,
                         floor_frac=self.config.floor_frac)
        return self.grid.divergence(flux)

    def step(self, field: DistributionField, dt: float) -> DistributionField:
        eps = self.config.eps
        hi = np.inf if eps == 0 else 1.0 / eps
        k1 = self.rhs(field)
        # midpoint clip is a scratch safeguard; only mass clipped from the
        # accepted state counts toward the reported total
        mid_raw = k1 * dt
        mid_raw += field.values
        np.clip(mid_raw, 0.0, hi, out=mid_raw)
        mid = DistributionField._wrap(self.grid, mid_raw, eps)
        k2 = self.rhs(mid)
        k1 += k2
        k1 *= 0.5 * dt
        k1 += field.values
        out = np.clip(k1, 0.0, hi)
        np.subtract(k1, out, out=k2)
        np.abs(k2, out=k2)
        self.clipped_mass += self.grid.integrate(k2)
        new = DistributionField._wrap(self.grid, out, eps)
        if self.config.project and self.targets is not None:
            new = conservative_projection(new, self.targets)
        return new


@dataclass
class SimulationResult:
    records: list
    final: DistributionField
    initial_moments: np.ndarray
    summary: dict
    equilibrium: DistributionField = None
    snapshots: dict = None  # requested time -> field at the next record boundary

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def rows(self) -> list:
        return [r.as_row() for r in self.records]


def _reference_equilibrium(initial: DistributionField, eps: float):
    moments = measure_moments(initial)
    if eps == 0:
        return evaluate_equilibrium(classical_params(moments), initial.grid)
    try:
        params = solve_fermi_dirac(moments, eps)
    except NoEquilibrium:
        return None
    return evaluate_equilibrium(params, initial.grid)


def simulate(initial: DistributionField, config: SimulationConfig,
             equilibrium: DistributionField = None) -> SimulationResult:
    """Run the relaxation from ``initial`` to t_end, recording diagnostics.

    With dt = 0 the step size follows the parabolic rule, re-evaluated at
    record boundaries.  An explicit dt above the current stability bound
    raises StepTooLarge up front.
    """
    if initial.eps != config.eps:
        raise ValueError("initial state and config disagree on eps")
    grid = initial.grid
    stepper = Stepper(grid, config)
    stepper.targets = grid.moments5(initial.values)
    rho0 = stepper.targets[0]
    scale_mom = rho0 * max(np.sqrt(stepper.targets[4] / (3 * rho0)), 1e-30)

    if equilibrium is None:
        equilibrium = _reference_equilibrium(initial, config.eps)

    tick = _time.perf_counter()
    dt_auto = stable_dt(initial, config.gamma, config.cfl)
    if config.dt > 0:
        if config.dt > dt_auto / config.cfl:
            raise StepTooLarge(
                f"dt = {config.dt:.3e} exceeds the stability bound "
                f"{dt_auto / config.cfl:.3e}")
        dt_auto = config.dt

    f = initial
    t = 0.0
    records = [TrajectoryRecord.from_row(
        state_row(f, 0.0, config.gamma, equilibrium,
                  floor_frac=config.floor_frac))]
    pending_snaps = sorted(config.snapshot_times)
    snapshots = {}
    while pending_snaps and pending_snaps[0] <= 1e-12:
        snapshots[pending_snaps.pop(0)] = f
    steps = 0
    drift = {"mass": 0.0, "momentum": 0.0, "energy": 0.0}
    n_records = int(round(config.t_end / config.record_dt))
    times = [min(config.record_dt * (i + 1), config.t_end)
             for i in range(n_records)]
    if not times or abs(times[-1] - config.t_end) > 1e-12:
        times.append(config.t_end)
    dt_sub = dt_auto

    for t_next in times:
        if config.dt == 0.0:
            dt_auto = stable_dt(f, config.gamma, config.cfl)
        n_sub = max(1, int(np.ceil((t_next - t) / dt_auto - 1e-12)))
        dt_sub = (t_next - t) / n_sub
        for _ in range(n_sub):
            f = stepper.step(f, dt_sub)
            steps += 1
            if steps > config.max_steps:
                raise BlowUp(f"step budget {config.max_steps} exhausted "
                             f"at t = {t:.4g}")
        t = t_next
        if not np.isfinite(f.values).all():
            raise BlowUp(f"state lost finiteness at t = {t:.4g}")
        records.append(TrajectoryRecord.from_row(
            state_row(f, t, config.gamma, equilibrium,
                      floor_frac=config.floor_frac)))
        while pending_snaps and pending_snaps[0] <= t + 1e-12:
            snapshots[pending_snaps.pop(0)] = f
        m = grid.moments5(f.values)
        drift["mass"] = max(drift["mass"], abs(m[0] - stepper.targets[0]) / rho0)
        drift["momentum"] = max(
            drift["momentum"],
            float(np.max(np.abs(m[1:4] - stepper.targets[1:4]))) / scale_mom)
        drift["energy"] = max(
            drift["energy"],
            abs(m[4] - stepper.targets[4]) / abs(stepper.targets[4]))

    summary = {
        "steps": steps,
        "elapsed_s": _time.perf_counter() - tick,
        "dt_last": dt_sub if steps else dt_auto,
        "clipped_mass": stepper.clipped_mass,
        "max_mass_drift": drift["mass"],
        "max_momentum_drift": drift["momentum"],
        "max_energy_drift": drift["energy"],
        "final_l12": records[-1].L12_dist,
        "final_entropy": records[-1].S_eps,
    }
    return SimulationResult(records=records, final=f,
                            initial_moments=stepper.targets,
                            summary=summary, equilibrium=equilibrium,
                            snapshots=snapshots)

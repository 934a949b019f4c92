"""
Dirichlet Solver Module

Solves −D^s·(a(x,|D^s u|)D^s u) = F with u = 0 outside Ω by minimizing the
convex energy

    E(u) = ∫ A(x,|D^s u|) dx − ⟨F, u⟩

over grid fields that vanish outside the domain mask. Also hosts the
continuous-dependence-in-s experiment.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple
import logging

import numpy as np

from src.modules.orlicz_space import DualPairRHS, conjugate_norm, dual_pairing, luxemburg_norm, modular
from src.modules.phi_functions import PhiFunction, SamplingPlan, audit_family
from src.modules.spectral_ops import (
    Field,
    Grid,
    GridField,
    VectorGridField,
    band_limited_field,
    riesz_divergence,
    riesz_gradient,
)
from src.utils.constants import DEFAULT_SOLVER, DEPENDENCE_RTOL, DEPENDENCE_WINDOW, R_MIN, XI_GROWTH
from src.utils.errors import (
    ConfigurationError,
    ConstraintError,
    DomainError,
    ExperimentAbortedError,
    SolverStallError,
)

logger = logging.getLogger(__name__)

CONSTRAINT_RTOL = 1e-12
PSI_SEEDS = (101, 102, 103, 104, 105)


@dataclass(frozen=True, eq=False)
class DomainMask:
    """
    Indicator of Ω on a grid.

    A bounded mask lies strictly inside the central half of the box. The
    periodic full-torus mask (`DomainMask.full`) instead constrains fields to
    the mean-zero sector.
    """

    grid: Grid
    indicator: np.ndarray
    periodic: bool = False

    def __post_init__(self):
        indicator = np.array(self.indicator, dtype=bool)
        if indicator.shape != self.grid.shape:
            raise ConfigurationError(f"mask shape {indicator.shape} does not match grid {self.grid.shape}")
        if not indicator.any():
            raise ConfigurationError("domain mask is empty")
        if not self.periodic:
            if indicator.all():
                raise ConfigurationError("domain mask has an empty complement")
            if np.any(indicator & ~self.grid.central_half()):
                raise ConfigurationError("domain mask must lie inside the central half of the box")
        indicator.flags.writeable = False
        object.__setattr__(self, 'indicator', indicator)

    @classmethod
    def ball(cls, grid: Grid, radius: float, center: Optional[Sequence[float]] = None) -> 'DomainMask':
        center = np.zeros(grid.d) if center is None else np.asarray(center, dtype=float)
        distance = np.sqrt(sum((x - c) ** 2 for x, c in zip(grid.coordinates(), center)))
        return cls(grid, distance < radius)

    @classmethod
    def box(cls, grid: Grid, half_width: float) -> 'DomainMask':
        inside = np.ones(grid.shape, dtype=bool)
        for x in grid.coordinates():
            inside &= np.abs(x) < half_width
        return cls(grid, inside)

    @classmethod
    def full(cls, grid: Grid) -> 'DomainMask':
        return cls(grid, np.ones(grid.shape, dtype=bool), periodic=True)

    @property
    def cell_count(self) -> int:
        return int(self.indicator.sum())

    @property
    def measure(self) -> float:
        return self.cell_count * self.grid.cell_volume

    def centroid(self) -> np.ndarray:
        return np.array([float(x[self.indicator].mean()) for x in self.grid.coordinates()])

    def inscribed_radius(self) -> float:
        """Distance from the centroid to the nearest cell outside Ω."""
        if self.periodic:
            return 0.5 * self.grid.length
        centre = self.centroid()
        distance = np.sqrt(sum((x - c) ** 2 for x, c in zip(self.grid.coordinates(), centre)))
        return float(distance[~self.indicator].min())

    def project(self, u: GridField) -> GridField:
        """Zero outside Ω; on the full torus, remove the mean."""
        if self.periodic:
            return u.with_samples(u.samples - u.samples.mean())
        return u.with_samples(np.where(self.indicator, u.samples, 0.0))

    def violation(self, u: GridField) -> float:
        if self.periodic:
            return abs(u.mean())
        return float(np.max(np.abs(np.where(self.indicator, 0.0, u.samples))))

    def require(self, u: GridField) -> None:
        """
        Raises:
            ConstraintError: u does not vanish outside Ω (or has a mean on the torus)
        """
        if u.grid != self.grid:
            raise ConfigurationError("field and mask live on different grids")
        if self.violation(u) > CONSTRAINT_RTOL * max(u.max_abs(), 1.0):
            raise ConstraintError(f"field violates the domain constraint by {self.violation(u):.3e}")


@dataclass(frozen=True, eq=False)
class DirichletProblem:
    """−D^s·(a(x,|D^s u|)D^s u) = F in Ω, u = 0 outside."""

    s: float
    phi: PhiFunction
    rhs: DualPairRHS
    mask: DomainMask
    audit: bool = True

    def __post_init__(self):
        if not 0.0 < self.s <= 1.0:
            raise DomainError(f"s must lie in (0, 1], got {self.s}")
        if self.rhs.s != self.s:
            raise ConfigurationError(f"right-hand side order {self.rhs.s} differs from s = {self.s}")
        if self.rhs.f.grid != self.mask.grid:
            raise ConfigurationError("right-hand side and mask live on different grids")
        shape = self.phi.param_shape
        if shape and shape != self.mask.grid.shape:
            raise ConfigurationError(f"Φ-function parameters have shape {shape}, grid has {self.mask.grid.shape}")
        if not self.mask.periodic and self.mask.violation(self.rhs.f) > 0.0:
            raise ConstraintError("f must vanish outside the domain mask")
        if self.audit:
            failed = [r.condition for r in audit_family(self.phi, SamplingPlan.for_phi(self.phi)) if not r.passed]
            if failed:
                raise ConfigurationError(f"{self.phi.name} fails the {', '.join(failed)} audit(s)")

    @property
    def grid(self) -> Grid:
        return self.mask.grid

    def with_rhs(self, rhs: DualPairRHS) -> 'DirichletProblem':
        return DirichletProblem(rhs.s, self.phi, rhs, self.mask, audit=False)


@dataclass(frozen=True)
class SolverConfig:
    """Stopping rule and line-search parameters of `solve`."""

    max_iter: int = DEFAULT_SOLVER['max_iter']
    energy_tol: float = DEFAULT_SOLVER['energy_tol']
    residual_tol: float = DEFAULT_SOLVER['residual_tol']
    armijo: float = DEFAULT_SOLVER['armijo']
    backtrack: float = DEFAULT_SOLVER['backtrack']
    max_backtracks: int = DEFAULT_SOLVER['max_backtracks']
    restart_every: int = DEFAULT_SOLVER['restart_every']
    initial: str = DEFAULT_SOLVER['initial']

    def __post_init__(self):
        if self.max_iter < 1:
            raise ConfigurationError("max_iter must be >= 1")
        if not (self.energy_tol > 0 and self.residual_tol > 0):
            raise ConfigurationError("solver tolerances must be positive")
        if not 0.0 < self.armijo <= 0.5:
            raise ConfigurationError(f"Armijo factor must lie in (0, 1/2], got {self.armijo}")
        if not 0.0 < self.backtrack < 1.0:
            raise ConfigurationError(f"backtrack ratio must lie in (0, 1), got {self.backtrack}")
        if self.initial not in ('zero', 'supplied'):
            raise ConfigurationError(f"initial iterate policy must be 'zero' or 'supplied', got {self.initial}")


@dataclass
class SolverReport:
    """Iteration history and final diagnostics of one solve."""

    iterations: int = 0
    energy_history: List[float] = field(default_factory=list)
    residual_history: List[float] = field(default_factory=list)
    residual: float = np.inf
    norm_u: float = np.nan
    norm_dsu: float = np.nan
    converged: bool = False
    restarts: int = 0
    message: str = ''

    @property
    def energy(self) -> float:
        return self.energy_history[-1] if self.energy_history else np.nan

    def history_rows(self) -> List[Dict[str, float]]:
        return [
            {'iteration': k, 'energy': e, 'residual': r}
            for k, (e, r) in enumerate(zip(self.energy_history, self.residual_history))
        ]

    def to_summary(self) -> Dict[str, Any]:
        return {
            'iterations': self.iterations,
            'energy': self.energy,
            'residual': self.residual,
            'norm_u': self.norm_u,
            'norm_dsu': self.norm_dsu,
            'converged': self.converged,
            'restarts': self.restarts,
            'message': self.message,
        }


# -- operator -----------------------------------------------------------------

def flux(phi: PhiFunction, xi: Field) -> Field:
    """a(x,|ξ|)ξ with |ξ| floored at R_MIN."""
    magnitude = np.maximum(xi.magnitude(), R_MIN)
    return xi.with_samples(phi.density(magnitude) * xi.samples)


def apply_operator(u: GridField, prob: DirichletProblem) -> GridField:
    """The nonlinear operator −D^s·(a(x,|D^s u|)D^s u)."""
    return -riesz_divergence(flux(prob.phi, riesz_gradient(u, prob.s)), prob.s)


def manufactured_rhs(u_star: GridField, s: float, phi: PhiFunction) -> DualPairRHS:
    """F = −D^s·𝒇 with 𝒇 = a(x,|D^s u*|)D^s u*, so u* solves the equation."""
    return DualPairRHS.from_potential(flux(phi, riesz_gradient(u_star, s)), s)


def energy(u: GridField, prob: DirichletProblem) -> float:
    """
    E(u) = Σ A(x,|D^s u|)·cellvol − ⟨F, u⟩.

    Raises:
        ConstraintError: u does not vanish outside the mask
    """
    prob.mask.require(u)
    return _energy(u, prob)


def _energy(u: GridField, prob: DirichletProblem) -> float:
    return modular(riesz_gradient(u, prob.s), prob.phi).value - dual_pairing(prob.rhs, u)


def energy_gradient(u: GridField, prob: DirichletProblem) -> GridField:
    """
    L²-representation of dE at u on the constraint set:

        g = Π_Ω[ −D^s·(a(x,|D^s u|)D^s u) − (f − D^s·𝒇) ]
    """
    prob.mask.require(u)
    return _gradient(u, prob)


def _gradient(u: GridField, prob: DirichletProblem) -> GridField:
    rhs = prob.rhs.f - riesz_divergence(prob.rhs.fvec, prob.s)
    return prob.mask.project(apply_operator(u, prob) - rhs)


def _masked_l2(g: GridField, mask: DomainMask) -> float:
    return float(np.sqrt(np.sum(np.where(mask.indicator, g.samples, 0.0) ** 2) * g.grid.cell_volume))


def solve(prob: DirichletProblem, config: Optional[SolverConfig] = None,
          initial: Optional[GridField] = None) -> Tuple[GridField, SolverReport]:
    """
    Minimize the energy by projected nonlinear conjugate gradients.

    Directions follow Polak–Ribière+ with restarts every `restart_every`
    iterations or when the direction stops descending. Each step takes one
    secant step on the directional derivative, then Armijo backtracking.
    Iterates are projected onto the constraint set after every update.

    Args:
        prob: The Dirichlet problem
        config: Solver configuration (defaults to SolverConfig())
        initial: Starting iterate when config.initial == 'supplied'

    Returns:
        Tuple of (solution, report)

    Raises:
        SolverStallError: the line search could not decrease the energy
    """
    config = config or SolverConfig()
    mask = prob.mask
    if config.initial == 'supplied':
        if initial is None:
            raise ConfigurationError("initial iterate policy 'supplied' needs an initial field")
        u = mask.project(initial)
    else:
        u = GridField.zeros(prob.grid)

    report = SolverReport()
    e = _energy(u, prob)
    g = _gradient(u, prob)
    residual = _masked_l2(g, mask)
    report.energy_history.append(e)
    report.residual_history.append(residual)
    direction = -g
    step = 1.0
    eps = np.finfo(float).eps

    if residual == 0.0:
        report.converged = True
        report.message = 'zero gradient at the initial iterate'

    while not report.converged and report.iterations < config.max_iter:
        report.iterations += 1
        gg = g.inner(g)
        slope = g.inner(direction)
        if slope >= 0.0:
            direction = -g
            slope = -gg
            report.restarts += 1

        # secant on φ'(α) = ⟨g(u + αd), d⟩; exact for quadratic energies
        trial = _gradient(u + step * direction, prob).inner(direction)
        if trial > slope:
            alpha = step * slope / (slope - trial)
        else:
            alpha = 2.0 * step

        slack = 64.0 * eps * (abs(e) + modular(riesz_gradient(u, prob.s), prob.phi).value)
        for _ in range(config.max_backtracks):
            candidate = mask.project(u + alpha * direction)
            e_new = _energy(candidate, prob)
            if e_new <= e + config.armijo * alpha * slope + slack:
                break
            alpha *= config.backtrack
        else:
            report.residual = residual
            report.message = f'line search failed at iteration {report.iterations}'
            raise SolverStallError(report.message, report)

        g_new = _gradient(candidate, prob)
        decrease = e - e_new
        restart = report.iterations % config.restart_every == 0
        beta = 0.0 if restart or gg == 0.0 else max(0.0, g_new.inner(g_new - g) / gg)
        direction = -g_new + beta * direction
        u, e, g, step = candidate, e_new, g_new, alpha
        residual = _masked_l2(g, mask)
        report.energy_history.append(e)
        report.residual_history.append(residual)

        if report.iterations % 100 == 0:
            logger.debug("iteration %d: E=%.12e residual=%.3e", report.iterations, e, residual)
        if residual == 0.0 or (decrease <= config.energy_tol and residual <= config.residual_tol):
            report.converged = True
            report.message = 'energy and residual tolerances met'

    if not report.converged:
        report.message = f'max_iter={config.max_iter} reached'
    report.residual = residual
    report.norm_u = luxemburg_norm(u, prob.phi, None if mask.periodic else mask.indicator)
    report.norm_dsu = luxemburg_norm(riesz_gradient(u, prob.s), prob.phi)
    logger.info("solve s=%.4g: %s after %d iterations (residual %.3e)",
                prob.s, 'converged' if report.converged else 'not converged', report.iterations, residual)
    return u, report


def monotonicity_check(u: GridField, v: GridField, prob: DirichletProblem) -> float:
    """M(u,v) = ∫ (a(|D^s u|)D^s u − a(|D^s v|)D^s v)·(D^s u − D^s v) dx."""
    du = riesz_gradient(u, prob.s)
    dv = riesz_gradient(v, prob.s)
    return (flux(prob.phi, du) - flux(prob.phi, dv)).inner(du - dv)


def dual_bound_checks(xi_sequence: Sequence[Field], phi: PhiFunction,
                      plan: Optional[SamplingPlan] = None, rtol: float = 1e-9,
                      primal_bound: Optional[float] = None) -> Dict[str, Any]:
    """
    A′(x, a(x,r)r) ≤ (q−1)A(x,r) on sampled (x,r), plus the L^{A′} norms of
    a(x,|ξ_n|)ξ_n along a sequence bounded in L^A.

    The sequence must satisfy ∥ξ_n∥_{L^A} ≤ primal_bound; the default bound is
    XI_GROWTH times the first nonzero norm.
    """
    plan = plan or SamplingPlan.for_phi(phi, max_points=8)
    ladder = np.asarray(plan.ladder, dtype=float)
    q = phi.growth.q
    excess = -np.inf
    for x in plan.x_samples:
        values = phi.value(ladder, x)
        dual = phi.conjugate(phi.derivative(ladder, x), x)
        excess = max(excess, float(np.max((dual - (q - 1.0) * values) / values)))
    pointwise_pass = excess <= rtol

    primal = [luxemburg_norm(xi, phi) for xi in xi_sequence]
    dual_norms = [conjugate_norm(flux(phi, xi), phi) for xi in xi_sequence]
    finite = bool(np.all(np.isfinite(primal + dual_norms)))
    if primal_bound is None:
        first = next((norm for norm in primal if norm > 0.0), 0.0)
        primal_bound = XI_GROWTH * first
    max_primal = max(primal, default=0.0)
    primal_pass = finite and max_primal <= primal_bound
    return {
        'phi': phi.name,
        'pointwise_excess': excess,
        'pointwise_pass': bool(pointwise_pass),
        'primal_norms': primal,
        'primal_bound': float(primal_bound),
        'primal_pass': bool(primal_pass),
        'dual_norms': dual_norms,
        'max_primal': max_primal,
        'max_dual': max(dual_norms, default=0.0),
        'pass': bool(pointwise_pass and primal_pass),
    }


# -- continuous dependence ------------------------------------------------------------

@dataclass
class DependenceReport:
    """Per-n errors of the solutions u_n against the limit solution u_σ."""

    sigma: float
    rows: List[Dict[str, float]] = field(default_factory=list)
    limit_report: Optional[SolverReport] = None
    coercivity: List[float] = field(default_factory=list)
    rhs_distance: List[float] = field(default_factory=list)
    complete: bool = False

    @property
    def limit_norm(self) -> float:
        """∥u_σ∥_{L^A(Ω)}."""
        return self.limit_report.norm_u if self.limit_report else np.nan

    def tail(self, window: float = DEPENDENCE_WINDOW) -> List[Dict[str, float]]:
        return [row for row in self.rows if abs(row['s_n'] - self.sigma) <= window]

    def tail_max(self, window: float = DEPENDENCE_WINDOW) -> float:
        """Largest e_n or max_ψ w_n in the tail; infinite when no s_n reaches the window."""
        return max((max(row['e_n'], row['w_n_max']) for row in self.tail(window)), default=np.inf)

    def decreasing(self, slack: float = 0.0) -> bool:
        """e_n strictly decreasing and max_ψ w_n nonincreasing up to `slack`."""
        errors = [row['e_n'] for row in self.rows]
        if any(b >= a for a, b in zip(errors, errors[1:])):
            return False
        proxies = [row['w_n_max'] for row in self.rows]
        return not any(b > a + slack for a, b in zip(proxies, proxies[1:]))

    def assess(self, rtol: float = DEPENDENCE_RTOL, window: float = DEPENDENCE_WINDOW,
               slack: float = 0.0) -> List[str]:
        """Failure messages for the trend, the tail and the final relative error."""
        failures = []
        if not self.rows:
            return ["no solutions along the s sequence"]
        if not self.tail(window):
            failures.append(f"no s_n within {window:g} of σ={self.sigma:g}")
        if not self.decreasing(slack):
            failures.append("e_n not strictly decreasing or max_ψ w_n increasing along the sequence")
        last = self.rows[-1]['e_n']
        limit = rtol * self.limit_norm
        if not last <= limit:
            failures.append(f"e_{self.rows[-1]['n']} = {last:.3e} above {rtol:g}·∥u_σ∥ = {limit:.3e}")
        return failures

    def to_summary(self) -> Dict[str, Any]:
        return {
            'sigma': self.sigma,
            'complete': self.complete,
            'rows': len(self.rows),
            'limit_norm': self.limit_norm,
            'tail_max': self.tail_max(),
            'max_coercivity': max(self.coercivity, default=0.0),
            'limit': self.limit_report.to_summary() if self.limit_report else None,
        }


def psi_battery(grid: Grid) -> List[VectorGridField]:
    """Five fixed smooth vector test fields for the weak-convergence proxy."""
    modes = min(4, grid.n // 2 - 1)
    battery = []
    for seed in PSI_SEEDS:
        parts = [band_limited_field(grid, seed * 10 + j, max_mode=modes) for j in range(grid.d)]
        battery.append(VectorGridField.from_components(parts))
    return battery


def dependence_sequence(sigma: float, length: int) -> List[float]:
    """s_n = σ + 2^{−n}, n = 1..length, keeping the terms that stay in (σ, 1]."""
    if not 0.0 < sigma < 1.0:
        raise DomainError(f"σ must lie in (0, 1) for a sequence s_n → σ⁺, got {sigma}")
    return [sigma + 2.0 ** (-n) for n in range(1, length + 1) if sigma + 2.0 ** (-n) <= 1.0]


def continuous_dependence_experiment(
    sigma: float,
    s_sequence: Sequence[float],
    f_sequence: Sequence[Tuple[GridField, VectorGridField]],
    phi: PhiFunction,
    mask: DomainMask,
    config: Optional[SolverConfig] = None,
    f_limit: Optional[Tuple[GridField, VectorGridField]] = None,
) -> DependenceReport:
    """
    Solve for every (s_n, F_n) and for (σ, F), then compare.

    Records e_n = ∥u_n − u_σ∥_{L^A(Ω)} and w_n = max_ψ |⟨D^{s_n}u_n − D^σ u_σ, ψ⟩|
    over a fixed battery of five ψ. F_n = f_n − D^{s_n}·𝒇_n; the limit data
    default to the last pair of `f_sequence`.

    Raises:
        ExperimentAbortedError: an inner solve failed or did not converge
    """
    if len(s_sequence) != len(f_sequence):
        raise ConfigurationError("s_sequence and f_sequence must have the same length")
    if not 0.0 < sigma <= 1.0 or any(not 0.0 < s <= 1.0 for s in s_sequence):
        raise DomainError("all orders must lie in (0, 1]")
    config = config or SolverConfig()
    f_limit = f_limit or f_sequence[-1]
    report = DependenceReport(sigma)
    region = None if mask.periodic else mask.indicator

    def run(s: float, data: Tuple[GridField, VectorGridField], audit: bool) -> Tuple[GridField, SolverReport]:
        prob = DirichletProblem(s, phi, DualPairRHS(data[0], data[1], s), mask, audit=audit)
        try:
            u, solver_report = solve(prob, config)
        except SolverStallError as e:
            raise ExperimentAbortedError(f"solve at s={s:.6g} stalled: {e}", report) from e
        if not solver_report.converged:
            raise ExperimentAbortedError(f"solve at s={s:.6g} did not converge", report)
        return u, solver_report

    u_sigma, report.limit_report = run(sigma, f_limit, audit=True)
    du_sigma = riesz_gradient(u_sigma, sigma)
    battery = psi_battery(mask.grid)

    for n, (s_n, data) in enumerate(zip(s_sequence, f_sequence), start=1):
        u_n, solver_report = run(s_n, data, audit=False)
        du_n = riesz_gradient(u_n, s_n)
        gap = du_n - du_sigma
        report.rows.append({
            'n': n,
            's_n': float(s_n),
            'e_n': luxemburg_norm(u_n - u_sigma, phi, region),
            'w_n_max': max(abs(gap.inner(psi)) for psi in battery),
            'iterations': solver_report.iterations,
            'energy': solver_report.energy,
        })
        rhs_size = conjugate_norm(data[0], phi, region) + conjugate_norm(data[1], phi)
        report.coercivity.append(solver_report.norm_dsu / (rhs_size + 1.0))
        report.rhs_distance.append(
            conjugate_norm(data[0] - f_limit[0], phi, region) + conjugate_norm(data[1] - f_limit[1], phi))
        logger.info("dependence n=%d s_n=%.6g e_n=%.3e", n, s_n, report.rows[-1]['e_n'])

    report.complete = True
    return report

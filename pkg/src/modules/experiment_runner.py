"""
Experiment Runner Module

Provides a single entry point to the five experiment kinds.
Builds Φ-functions, masks and right-hand sides from a RunConfig, runs the
numerical modules and collects records, summaries and observed constants.
"""

from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple
import logging

import numpy as np

from src.modules.config_manager import RunConfig
from src.modules.dirichlet_solver import (
    DirichletProblem,
    DomainMask,
    continuous_dependence_experiment,
    dependence_sequence,
    dual_bound_checks,
    energy,
    manufactured_rhs,
    monotonicity_check,
    solve,
)
from src.modules.field_handler import FieldHandler
from src.modules.inequality_lab import (
    build_test_suite,
    capture_baselines,
    run_inequality_sweep,
    smooth_bump,
)
from src.modules.orlicz_space import (
    DualPairRHS,
    conjugate_norm,
    lebesgue_comparison_report,
    verify_norm_modular,
)
from src.modules.phi_functions import (
    CALCULUS_TOLERANCES,
    PhiFunction,
    SamplingPlan,
    calculus_report,
    check_condition,
)
from src.modules.spectral_ops import (
    Field,
    GridField,
    VectorGridField,
    oracle_deviation,
    riesz_gradient,
    verify_operator_identities,
)
from src.utils.constants import (
    BASELINE_DRIFT,
    DEPENDENCE_COLUMNS,
    HISTORY_FILE,
    INEQUALITY_COLUMNS,
    ORACLE_MAX_N,
    SOLUTION_FILE,
)
from src.utils.errors import (
    ConfigurationError,
    ExperimentAbortedError,
    FractionalOrliczError,
    SolverStallError,
)

logger = logging.getLogger(__name__)

CHECK_COLUMNS = ['check', 'value', 'limit', 'pass']


@dataclass
class ExperimentOutcome:
    """Everything a run produces before it is written to disk."""

    kind: str
    records: List[Dict[str, Any]] = field(default_factory=list)
    columns: Optional[List[str]] = None
    summary: Dict[str, Any] = field(default_factory=dict)
    failures: List[str] = field(default_factory=list)
    observed: Dict[str, float] = field(default_factory=dict)
    tables: Dict[str, List[Dict[str, Any]]] = field(default_factory=dict)
    fields: Dict[str, Field] = field(default_factory=dict)
    complete: bool = True

    @property
    def passed(self) -> bool:
        return self.complete and not self.failures


class ExperimentRunner:
    """
    Runs configured experiments.

    Each kind returns an ExperimentOutcome; configuration problems are
    reported as (None, error_message) so the caller can map them to the
    invalid-input exit status. Numerical failures (a stalled solver, a
    Luxemburg bracket that cannot be found) end the run with an incomplete
    outcome, which maps to the check-failed status.
    """

    def __init__(self, field_handler: Optional[FieldHandler] = None):
        """Initialize the experiment runner."""
        self.field_handler = field_handler or FieldHandler()
        self.baselines: Dict[str, float] = {}
        self.enforce_baselines = True

    def run(
        self,
        config: RunConfig,
        baselines: Optional[Dict[str, float]] = None,
        enforce_baselines: bool = True,
    ) -> Tuple[Optional[ExperimentOutcome], Optional[str]]:
        """
        Run the experiment described by `config`.

        Args:
            config: Validated run configuration
            baselines: Captured constants keyed by baseline name
            enforce_baselines: False when capturing (ratios only need to be finite)

        Returns:
            Tuple of (outcome, error_message)
        """
        self.baselines = dict(baselines or {})
        self.enforce_baselines = enforce_baselines
        try:
            phi = self.build_phi(config)
        except FractionalOrliczError as e:
            return None, f"Invalid Φ-function for {config.kind}: {e}"
        try:
            if config.kind == 'phi-audit':
                outcome = self._phi_audit(config, phi)
            elif config.kind == 'ops-verify':
                outcome = self._ops_verify(config)
            elif config.kind == 'ineq-sweep':
                outcome = self._inequality_sweep(config, phi)
            elif config.kind == 'solve':
                outcome = self._solve(config, phi)
            elif config.kind == 's-dependence':
                outcome = self._s_dependence(config, phi)
            else:
                return None, f"Unsupported experiment kind: {config.kind}"
        except ConfigurationError as e:
            return None, f"Error running {config.kind}: {e}"
        except FractionalOrliczError as e:
            logger.error("%s aborted: %s: %s", config.kind, type(e).__name__, e)
            outcome = ExperimentOutcome(config.kind, complete=False)
            outcome.failures.append(f"{type(e).__name__}: {e}")

        outcome.summary.setdefault('checks', len(outcome.records))
        outcome.summary['failures'] = len(outcome.failures)
        outcome.summary['observed'] = dict(outcome.observed)
        logger.info("%s finished: %d records, %d failures", config.kind, len(outcome.records), len(outcome.failures))
        return outcome, None

    # -- builders -----------------------------------------------------------------

    def build_phi(self, config: RunConfig) -> PhiFunction:
        """
        Build the configured Φ-function.

        Raises:
            ConfigurationError: missing parameters or unreadable parameter files
        """
        section = config.phi
        family = section['family']
        if family == 'power':
            return PhiFunction.power(self._scalar(section, 'p'), float(section.get('scale', 1.0)))
        elif family == 'variable-exponent':
            return PhiFunction.variable_exponent(self._parameter(config, 'p'),
                                                 self._parameter(config, 'alpha', 1.0))
        elif family == 'log-perturbed':
            return PhiFunction.log_perturbed(self._parameter(config, 'p'))
        elif family == 'double-phase':
            return PhiFunction.double_phase(self._scalar(section, 'p'), self._scalar(section, 'q'),
                                            self._parameter(config, 'alpha', 1.0))
        raise ConfigurationError(f"Unsupported Φ-function family: {family}")

    @staticmethod
    def _scalar(section: Dict[str, Any], name: str) -> float:
        if name not in section:
            raise ConfigurationError(f"phi.{name} is required for the {section['family']} family")
        return float(section[name])

    def _parameter(self, config: RunConfig, name: str, default: Optional[float] = None) -> Any:
        """A parameter given as a field file, a cosine profile between _min and _max, or a number."""
        section, grid = config.phi, config.grid
        if f'{name}_field' in section:
            samples, error = self.field_handler.load_parameter(section[f'{name}_field'], grid)
            if error:
                raise ConfigurationError(error)
            return samples
        if f'{name}_min' in section and f'{name}_max' in section:
            low, high = float(section[f'{name}_min']), float(section[f'{name}_max'])
            x = grid.coordinates()[0]
            return low + (high - low) * 0.5 * (1.0 + np.cos(2.0 * np.pi * x / grid.length))
        if name in section:
            return float(section[name])
        if default is None:
            raise ConfigurationError(f"phi.{name} (or {name}_field, {name}_min/{name}_max) is required")
        return default

    def build_mask(self, config: RunConfig) -> DomainMask:
        section, grid = config.mask, config.grid
        kind = section['kind']
        if kind == 'ball':
            return DomainMask.ball(grid, float(section.get('radius', 0.2 * grid.length)), section.get('center'))
        elif kind == 'box':
            return DomainMask.box(grid, float(section.get('half_width', 0.2 * grid.length)))
        elif kind == 'full':
            return DomainMask.full(grid)
        indicator, error = self.field_handler.load_parameter(section['file'], grid)
        if error:
            raise ConfigurationError(error)
        return DomainMask(grid, indicator > 0.5)

    def build_rhs(self, config: RunConfig, mask: DomainMask, phi: PhiFunction,
                  s: float) -> Tuple[GridField, VectorGridField, Optional[GridField]]:
        """
        Right-hand side data (f, 𝒇) and, for manufactured problems, the exact solution.

        Raises:
            ConfigurationError: an eigenmode right-hand side on a bounded mask
        """
        grid = config.grid
        kind = config.experiment['rhs']
        if kind == 'sine':
            if not mask.periodic:
                raise ConfigurationError("rhs = 'sine' needs mask.kind = 'full'")
            u_star = GridField(grid, np.sin(2.0 * np.pi * grid.coordinates()[0] / grid.length))
            return GridField.zeros(grid), manufactured_rhs(u_star, s, phi).fvec, u_star
        elif kind == 'manufactured':
            radius = 0.8 * (0.25 * grid.length if mask.periodic else mask.inscribed_radius())
            centre = np.zeros(grid.d) if mask.periodic else mask.centroid()
            u_star = mask.project(smooth_bump(grid, centre, radius))
            return GridField.zeros(grid), manufactured_rhs(u_star, s, phi).fvec, u_star
        elif kind == 'bump':
            radius = 0.5 * (0.25 * grid.length if mask.periodic else mask.inscribed_radius())
            centre = np.zeros(grid.d) if mask.periodic else mask.centroid()
            f = smooth_bump(grid, centre, radius)
            if not mask.periodic:
                f = mask.project(f)
            return f, VectorGridField.zeros(grid), None
        f = self._load(config, 'f', vector=False) or GridField.zeros(grid)
        fvec = self._load(config, 'fvec', vector=True) or VectorGridField.zeros(grid)
        return f, fvec, None

    def _load(self, config: RunConfig, name: str, vector: bool) -> Optional[Field]:
        if name not in config.fields:
            return None
        loaded, error = self.field_handler.load_field(config.fields[name], vector=vector)
        if error:
            raise ConfigurationError(error)
        is_valid, error = self.field_handler.validate_field(loaded, config.grid)
        if not is_valid:
            raise ConfigurationError(f"fields.{name}: {error}")
        return loaded

    # -- baselines ----------------------------------------------------------------

    def _check(self, outcome: ExperimentOutcome, name: str, value: float,
               limit: Optional[float], passed: bool) -> None:
        outcome.records.append({'check': name, 'value': value, 'limit': limit, 'pass': bool(passed)})
        if not passed:
            outcome.failures.append(f"{name}: value {value:.6g} exceeds limit {limit}")

    def _baseline_check(self, outcome: ExperimentOutcome, key: str, value: float) -> None:
        outcome.observed[key] = max(outcome.observed.get(key, 0.0), float(value))
        baseline = self.baselines.get(key) if self.enforce_baselines else None
        if baseline is None:
            if self.enforce_baselines:
                logger.warning("no baseline for %s; checking finiteness only", key)
            self._check(outcome, key, value, None, bool(np.isfinite(value)))
            return
        limit = baseline * (1.0 + BASELINE_DRIFT)
        self._check(outcome, key, value, limit, bool(np.isfinite(value) and value <= limit))

    # -- experiment kinds ---------------------------------------------------------

    def _phi_audit(self, config: RunConfig, phi: PhiFunction) -> ExperimentOutcome:
        outcome = ExperimentOutcome('phi-audit')
        experiment = config.experiment
        plan = SamplingPlan.for_phi(phi)
        exponents = experiment.get('exponents', {})

        for condition in experiment['conditions']:
            condition_plan = replace(plan, exponent=exponents.get(condition))
            if condition in ('a1', 'a2'):
                condition_plan = self._inverse_plan(config, condition_plan)
            report = check_condition(phi, condition, condition_plan)
            outcome.records.append(report.to_record())
            if not report.passed:
                witness = report.witness or {}
                outcome.failures.append(
                    f"{condition}: violated at x={witness.get('x')} arg={witness.get('arg')} "
                    f"by {witness.get('violation')}")

        if experiment.get('calculus', True):
            for name, gap in calculus_report(phi, replace(plan, x_samples=plan.x_samples[:4])).items():
                passed = gap <= CALCULUS_TOLERANCES[name]
                outcome.records.append({'condition': f'calculus-{name}', 'pass': passed,
                                        'label': 'checked', 'violation': gap})
                if not passed:
                    outcome.failures.append(f"calculus-{name}: gap {gap:.3e} above {CALCULUS_TOLERANCES[name]:g}")
        outcome.summary = {'phi': phi.name, 'growth': {'p': phi.growth.p, 'q': phi.growth.q}}
        return outcome

    def _inverse_plan(self, config: RunConfig, plan: SamplingPlan) -> SamplingPlan:
        """Balls of neighbouring cells around each sample for (A1); the samples for (A2)."""
        grid, experiment = config.grid, config.experiment
        balls = []
        for x in plan.x_samples:
            if x is None:
                balls.append(((None,), min(1.0, 3 * grid.cell_volume)))
                continue
            index = (x,) if isinstance(x, int) else tuple(x)
            offsets = np.stack(np.meshgrid(*([np.arange(-1, 2)] * grid.d), indexing='ij')).reshape(grid.d, -1).T
            points = tuple(
                tuple(int((i + o) % grid.n) for i, o in zip(index, offset)) if grid.d > 1
                else int((index[0] + offset[0]) % grid.n)
                for offset in offsets
            )
            measure = len(points) * grid.cell_volume
            if measure <= 1.0:
                balls.append((points, measure))
        return replace(plan, balls=tuple(balls), points=plan.x_samples,
                       h=float(experiment.get('a2_h', 0.0)), sigma=float(experiment.get('a2_sigma', 1.0)),
                       beta=experiment.get('beta'))

    def _ops_verify(self, config: RunConfig) -> ExperimentOutcome:
        outcome = ExperimentOutcome('ops-verify')
        experiment, grid = config.experiment, config.grid
        rows = verify_operator_identities(grid, seed=config.seed, s_values=tuple(experiment['s_values']),
                                          tolerance=float(experiment['tolerance']))

        if grid.n <= ORACLE_MAX_N[grid.d]:
            x = grid.coordinates()[0]
            bump = smooth_bump(grid, np.zeros(grid.d), grid.length / 8.0)
            u = GridField(grid, x * bump.samples / grid.length)
            tolerance = float(experiment['oracle_tolerance'])
            for s in experiment['oracle_s']:
                error = oracle_deviation(u, float(s))
                rows.append({'identity': 'oracle', 's': float(s), 'error': error,
                             'tolerance': tolerance, 'pass': error <= tolerance})
        else:
            logger.info("oracle cross-check skipped: N=%d above the %dD limit", grid.n, grid.d)

        outcome.records = rows
        outcome.failures = [f"{row['identity']} at s={row['s']:g}: error {row['error']:.3e}"
                            for row in rows if not row['pass']]
        outcome.summary = {'identities': len(rows), 'max_error': max(row['error'] for row in rows)}
        return outcome

    def _inequality_sweep(self, config: RunConfig, phi: PhiFunction) -> ExperimentOutcome:
        outcome = ExperimentOutcome('ineq-sweep', columns=list(INEQUALITY_COLUMNS))
        experiment = config.experiment
        mask = self.build_mask(config)
        suite = build_test_suite(mask, seed=config.seed)
        baselines = self.baselines if self.enforce_baselines else None
        result = run_inequality_sweep(suite, phi, experiment['s_values'], baselines=baselines,
                                      include_sobolev=experiment.get('sobolev', True))
        outcome.records = result.rows()
        outcome.observed = capture_baselines(result.records)
        outcome.failures = [f"{row['inequality_id']} {row['field_id']} s={row['s']}: ratio {row['ratio']:.6g}"
                            for row in result.failures]

        region = None if mask.periodic else mask.indicator
        norm_reports = []
        if experiment.get('norm_checks', True):
            for name, u in suite:
                report = verify_norm_modular(u, phi, name, region)
                norm_reports.append(report.to_record())
                if not report.passed:
                    outcome.failures.append(f"norm-modular {name}: bounds violated")
        comparison = {name: lebesgue_comparison_report(u, phi, region) for name, u in suite}
        outcome.failures += [f"lebesgue-comparison {name}: non-finite" for name, r in comparison.items() if not r['pass']]
        outcome.summary = {
            'phi': phi.name,
            'fields': len(suite),
            'records': len(result.records),
            'norm_modular': norm_reports,
            'lebesgue_comparison': comparison,
        }
        return outcome

    def _solve(self, config: RunConfig, phi: PhiFunction) -> ExperimentOutcome:
        outcome = ExperimentOutcome('solve', columns=list(CHECK_COLUMNS))
        s = float(config.experiment['s'])
        mask = self.build_mask(config)
        f, fvec, u_star = self.build_rhs(config, mask, phi, s)
        prob = DirichletProblem(s, phi, DualPairRHS(f, fvec, s), mask)

        try:
            u, report = solve(prob, config.solver)
        except SolverStallError as e:
            outcome.complete = False
            outcome.failures.append(str(e))
            outcome.summary = {'solver': e.report.to_summary() if e.report else None}
            return outcome

        residual_tol = config.solver.residual_tol
        self._check(outcome, 'converged', report.residual, residual_tol, report.converged)
        if u_star is not None:
            if mask.periodic:
                target = mask.project(u_star)
                error = (u - target).l2_norm() / target.l2_norm()
                self._check(outcome, 'recovery', error, float(config.experiment['recovery_tol']),
                            error <= float(config.experiment['recovery_tol']))
            else:
                gap = energy(u, prob) - energy(u_star, prob)
                self._check(outcome, 'energy-gap', gap, config.solver.energy_tol,
                            gap <= config.solver.energy_tol)

        zero = GridField.zeros(config.grid)
        m = monotonicity_check(u, zero, prob)
        self._check(outcome, 'monotonicity', m, -1e-12, m >= -1e-12)
        dual = dual_bound_checks([riesz_gradient(u, s)], phi)
        self._check(outcome, 'dual-pointwise', dual['pointwise_excess'], 1e-9, dual['pointwise_pass'])
        self._baseline_check(outcome, 'dual_bound', dual['max_dual'])
        region = None if mask.periodic else mask.indicator
        rhs_size = conjugate_norm(f, phi, region) + conjugate_norm(fvec, phi)
        self._baseline_check(outcome, 'coercivity', report.norm_dsu / (rhs_size + 1.0))

        outcome.tables[HISTORY_FILE] = report.history_rows()
        outcome.fields[SOLUTION_FILE] = u
        outcome.summary = {'phi': phi.name, 's': s, 'solver': report.to_summary()}
        return outcome

    def _s_dependence(self, config: RunConfig, phi: PhiFunction) -> ExperimentOutcome:
        outcome = ExperimentOutcome('s-dependence', columns=list(DEPENDENCE_COLUMNS))
        experiment = config.experiment
        sigma = float(experiment['sigma'])
        mask = self.build_mask(config)
        f, fvec, _ = self.build_rhs(config, mask, phi, sigma)
        length = int(experiment['sequence_length'])
        s_sequence = dependence_sequence(sigma, length)

        try:
            report = continuous_dependence_experiment(sigma, s_sequence, [(f, fvec)] * len(s_sequence),
                                                      phi, mask, config.solver)
        except ExperimentAbortedError as e:
            partial = e.partial_report
            outcome.complete = False
            outcome.records = list(partial.rows) if partial else []
            outcome.failures.append(str(e))
            outcome.summary = partial.to_summary() if partial else {}
            return outcome

        outcome.records = report.rows
        slack = 10.0 * config.solver.residual_tol
        outcome.failures += report.assess(float(experiment['dependence_rtol']), slack=slack)
        scale = max(report.limit_report.norm_u, np.finfo(float).tiny)
        checks = ExperimentOutcome('s-dependence')
        self._baseline_check(checks, 'dependence', report.tail_max() / scale)
        self._baseline_check(checks, 'coercivity', max(report.coercivity))
        outcome.observed = checks.observed
        outcome.failures += checks.failures
        outcome.summary = {'phi': phi.name, 'checks': checks.records, **report.to_summary()}
        return outcome

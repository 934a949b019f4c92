"""
Configuration Manager Module

Manages experiment configuration loading and validation.
Handles experiment-kind-specific defaults and command-line overrides.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple
import copy
import logging
import math
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from src.modules.dirichlet_solver import SolverConfig
from src.modules.spectral_ops import Grid
from src.utils.constants import (
    BASELINES_FILE,
    CONDITION_IDS,
    CONFIGURABLE_FAMILIES,
    DEFAULT_SOLVER,
    DEPENDENCE_RTOL,
    DEPENDENCE_WINDOW,
    EXPERIMENT_KINDS,
)
from src.utils.errors import FractionalOrliczError

logger = logging.getLogger(__name__)

MASK_KINDS = ['ball', 'box', 'full', 'file']
RHS_KINDS = ['sine', 'bump', 'manufactured', 'file']


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration of one run. Built only by ConfigManager."""

    kind: str
    grid: Grid
    phi: Dict[str, Any]
    mask: Dict[str, Any]
    experiment: Dict[str, Any]
    solver: SolverConfig
    fields: Dict[str, Path] = field(default_factory=dict)
    seed: int = 0
    output_dir: Path = Path('output')
    baselines_path: Path = Path('output') / BASELINES_FILE


class ConfigManager:
    """
    Manages configuration for experiment runs.

    Reads the TOML configuration file, merges it over the defaults of the
    selected experiment kind, applies command-line overrides and validates
    the result.
    """

    DEFAULT_CONFIG = {
        'grid': {'d': 1, 'n': 256, 'length': 2.0 * math.pi},
        'phi': {'family': 'power', 'p': 2.0, 'scale': 1.0},
        'mask': {'kind': 'ball'},
        'experiment': {'seed': 0, 'output_dir': 'output'},
        'solver': dict(DEFAULT_SOLVER),
        'fields': {},
    }

    EXPERIMENT_KIND_CONFIGS = {
        'phi-audit': {
            'conditions': ['definition', 'inc', 'dec', 'a0', 'hypothesis-on-a', 'pointwise-bounds', 'delta2'],
            'exponents': {},
            'calculus': True,
        },
        'ops-verify': {
            's_values': [0.0, 0.25, 0.5, 0.75, 1.0],
            'tolerance': 1e-12,
            'oracle_s': [0.3, 0.5, 0.7],
            'oracle_tolerance': 2e-2,
        },
        'ineq-sweep': {
            's_values': [0.25, 0.5, 0.75, 1.0],
            'sobolev': True,
            'norm_checks': True,
        },
        'solve': {
            's': 0.5,
            'rhs': 'sine',
            'recovery_tol': 1e-4,
        },
        's-dependence': {
            'sigma': 0.5,
            'sequence_length': 12,
            'dependence_rtol': DEPENDENCE_RTOL,
            'rhs': 'bump',
        },
    }

    def __init__(self):
        """Initialize the configuration manager."""
        pass

    def load_config(self, path: str, overrides: Optional[Dict[str, Any]] = None) -> Tuple[Optional[RunConfig], Optional[str]]:
        """
        Load, merge, override and validate a configuration file.

        Args:
            path: Path to the TOML configuration file
            overrides: Command-line overrides ('seed', 'grid_n', 'out')

        Returns:
            Tuple of (RunConfig, error_message)
        """
        try:
            with open(path, 'rb') as f:
                raw = tomllib.load(f)
        except FileNotFoundError:
            return None, f"Configuration file not found: {path}"
        except tomllib.TOMLDecodeError as e:
            return None, f"Configuration file is not valid TOML: {e}"

        merged = self.merge_config(raw, overrides or {})
        is_valid, error = self.validate_config(merged, base_dir=Path(path).parent)
        if not is_valid:
            return None, error
        try:
            return self.build_run_config(merged, base_dir=Path(path).parent), None
        except FractionalOrliczError as e:
            return None, str(e)

    def merge_config(self, raw: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
        """
        Merge a parsed file over the defaults of its experiment kind.

        Args:
            raw: Parsed configuration sections
            overrides: Command-line overrides

        Returns:
            Dictionary with every section filled in
        """
        config = copy.deepcopy(self.DEFAULT_CONFIG)
        kind = raw.get('experiment', {}).get('kind')
        if kind in self.EXPERIMENT_KIND_CONFIGS:
            config['experiment'].update(copy.deepcopy(self.EXPERIMENT_KIND_CONFIGS[kind]))
        for section, values in raw.items():
            if isinstance(values, dict) and section in config:
                if section == 'phi' and values.get('family', config['phi']['family']) != config['phi']['family']:
                    config['phi'] = {}
                config[section].update(values)
            else:
                config[section] = values

        if overrides.get('seed') is not None:
            config['experiment']['seed'] = overrides['seed']
        if overrides.get('grid_n') is not None:
            config['grid']['n'] = overrides['grid_n']
        if overrides.get('out') is not None:
            config['experiment']['output_dir'] = overrides['out']
        return config

    def validate_config(self, config: Dict[str, Any], base_dir: Path = Path('.')) -> Tuple[bool, Optional[str]]:
        """
        Validate configuration parameters.

        Args:
            config: Merged configuration dictionary
            base_dir: Directory that relative field paths resolve against

        Returns:
            Tuple of (is_valid, error_message)
        """
        experiment = config.get('experiment', {})
        kind = experiment.get('kind')
        if kind not in EXPERIMENT_KINDS:
            return False, f"experiment.kind must be one of {', '.join(EXPERIMENT_KINDS)}"

        grid = config['grid']
        if grid.get('d') not in (1, 2):
            return False, "grid.d must be 1 or 2"
        n = grid.get('n')
        if not isinstance(n, int) or n < 8 or n & (n - 1):
            return False, "grid.n must be a power of two >= 8"
        if not isinstance(grid.get('length'), (int, float)) or grid['length'] <= 0:
            return False, "grid.length must be positive"

        seed = experiment.get('seed')
        if not isinstance(seed, int) or seed < 0 or seed >= 2 ** 64:
            return False, "experiment.seed must be an unsigned 64-bit integer"

        phi = config['phi']
        if phi.get('family') not in CONFIGURABLE_FAMILIES:
            return False, f"phi.family must be one of {', '.join(CONFIGURABLE_FAMILIES)}"

        mask = config['mask']
        if mask.get('kind') not in MASK_KINDS:
            return False, f"mask.kind must be one of {', '.join(MASK_KINDS)}"
        if mask['kind'] == 'file' and 'file' not in mask:
            return False, "mask.kind = 'file' needs mask.file"

        for name, value in list(config.get('fields', {}).items()) + self._phi_files(phi) + self._mask_files(mask):
            if not (base_dir / value).exists():
                return False, f"referenced field file does not exist: {name} = {value}"

        if kind == 'phi-audit':
            unknown = [c for c in experiment.get('conditions', []) if c not in CONDITION_IDS]
            if unknown:
                return False, f"unknown condition ids: {', '.join(unknown)}"
        if kind in ('ops-verify', 'ineq-sweep'):
            values = experiment.get('s_values', [])
            if not values or any(not 0.0 <= s <= 1.0 for s in values):
                return False, "experiment.s_values must be a nonempty list in [0, 1]"
            if kind == 'ineq-sweep' and any(s == 0.0 for s in values):
                return False, "inequality sweeps need s_values in (0, 1]"
        if kind == 'solve':
            if not 0.0 < experiment.get('s', 0.0) <= 1.0:
                return False, "experiment.s must lie in (0, 1]"
        if kind == 's-dependence':
            if not 0.0 < experiment.get('sigma', 0.0) < 1.0:
                return False, "experiment.sigma must lie in (0, 1)"
            if not isinstance(experiment.get('sequence_length'), int) or experiment['sequence_length'] < 1:
                return False, "experiment.sequence_length must be a positive integer"
            if 2.0 ** -experiment['sequence_length'] > DEPENDENCE_WINDOW:
                return False, (f"experiment.sequence_length must reach |s_n − σ| <= {DEPENDENCE_WINDOW:g} "
                               f"(at least {math.ceil(-math.log2(DEPENDENCE_WINDOW))} terms)")
            if not 0.0 < experiment.get('dependence_rtol', 0.0) < 1.0:
                return False, "experiment.dependence_rtol must lie in (0, 1)"
        if kind in ('solve', 's-dependence'):
            if experiment.get('rhs') not in RHS_KINDS:
                return False, f"experiment.rhs must be one of {', '.join(RHS_KINDS)}"
            if experiment['rhs'] == 'file' and not {'f', 'fvec'} & set(config.get('fields', {})):
                return False, "experiment.rhs = 'file' needs fields.f or fields.fvec"

        solver = config['solver']
        unknown = set(solver) - set(DEFAULT_SOLVER)
        if unknown:
            return False, f"unknown solver keys: {', '.join(sorted(unknown))}"
        try:
            SolverConfig(**solver)
        except FractionalOrliczError as e:
            return False, str(e)
        return True, None

    @staticmethod
    def _phi_files(phi: Dict[str, Any]) -> list:
        return [(f'phi.{key}', value) for key, value in phi.items() if key.endswith('_field')]

    @staticmethod
    def _mask_files(mask: Dict[str, Any]) -> list:
        return [('mask.file', mask['file'])] if mask.get('kind') == 'file' else []

    def build_run_config(self, config: Dict[str, Any], base_dir: Path = Path('.')) -> RunConfig:
        """
        Build the frozen RunConfig from a merged, validated dictionary.

        Relative field paths are resolved against `base_dir`.
        """
        grid = Grid(config['grid']['d'], config['grid']['n'], float(config['grid']['length']))
        phi = dict(config['phi'])
        for key, value in self._phi_files(phi):
            phi[key.split('.', 1)[1]] = base_dir / value
        mask = dict(config['mask'])
        if mask['kind'] == 'file':
            mask['file'] = base_dir / mask['file']
        experiment = dict(config['experiment'])
        output_dir = Path(experiment.pop('output_dir'))
        baselines = experiment.pop('baselines', None)
        return RunConfig(
            kind=experiment.pop('kind'),
            grid=grid,
            phi=phi,
            mask=mask,
            experiment=experiment,
            solver=SolverConfig(**config['solver']),
            fields={name: base_dir / value for name, value in config.get('fields', {}).items()},
            seed=experiment.pop('seed'),
            output_dir=output_dir,
            baselines_path=Path(baselines) if baselines else output_dir / BASELINES_FILE,
        )

    def get_run_summary(self, config: RunConfig) -> Dict[str, Any]:
        """
        Generate a human-readable summary of the configuration.

        Args:
            config: Run configuration

        Returns:
            Dictionary with formatted summary
        """
        return {
            'kind': config.kind,
            'grid': {'d': config.grid.d, 'n': config.grid.n, 'length': config.grid.length},
            'phi': {k: str(v) if isinstance(v, Path) else v for k, v in config.phi.items()},
            'mask': {k: str(v) if isinstance(v, Path) else v for k, v in config.mask.items()},
            'experiment': dict(config.experiment),
            'seed': config.seed,
        }

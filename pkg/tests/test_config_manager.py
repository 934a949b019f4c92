"""Tests for configuration loading, merging and validation."""

from pathlib import Path

import pytest

from src.modules.config_manager import ConfigManager
from src.modules.dirichlet_solver import SolverConfig
from src.modules.field_handler import FieldHandler
from src.modules.spectral_ops import GridField, Grid
from src.utils.constants import BASELINES_FILE


@pytest.fixture
def manager():
    return ConfigManager()


def test_kind_defaults_are_merged(manager, write_config):
    path = write_config('[experiment]\nkind = "solve"\n[mask]\nkind = "full"\n')
    config, error = manager.load_config(str(path))
    assert error is None
    assert config.kind == 'solve'
    assert config.experiment['s'] == 0.5
    assert config.experiment['rhs'] == 'sine'
    assert config.grid == Grid(1, 256, config.grid.length)
    assert config.solver == SolverConfig()
    assert config.seed == 0
    assert config.baselines_path == Path('output') / BASELINES_FILE


def test_file_values_and_overrides_win(manager, write_config):
    path = write_config(
        '[grid]\nn = 128\n'
        '[experiment]\nkind = "ops-verify"\nseed = 3\ns_values = [0.5]\noutput_dir = "runs/a"\n'
        '[solver]\nmax_iter = 10\n'
    )
    config, error = manager.load_config(str(path), {'seed': 9, 'grid_n': 64, 'out': 'elsewhere'})
    assert error is None
    assert config.seed == 9
    assert config.grid.n == 64
    assert config.output_dir == Path('elsewhere')
    assert config.experiment['s_values'] == [0.5]
    assert config.experiment['oracle_tolerance'] == 2e-2
    assert config.solver.max_iter == 10


def test_changing_family_drops_default_parameters(manager, write_config):
    path = write_config('[phi]\nfamily = "double-phase"\np = 2.0\nq = 3.0\n[experiment]\nkind = "phi-audit"\n')
    config, error = manager.load_config(str(path))
    assert error is None
    assert config.phi == {'family': 'double-phase', 'p': 2.0, 'q': 3.0}


@pytest.mark.parametrize('text, message', [
    ('[experiment]\nkind = "train"\n', 'experiment.kind'),
    ('[experiment]\nkind = "solve"\n[grid]\nn = 100\n', 'power of two'),
    ('[experiment]\nkind = "solve"\n[grid]\nd = 3\n', 'grid.d'),
    ('[experiment]\nkind = "solve"\nseed = -1\n', 'seed'),
    ('[experiment]\nkind = "solve"\n[phi]\nfamily = "tabulated"\n', 'phi.family'),
    ('[experiment]\nkind = "solve"\n[mask]\nkind = "disc"\n', 'mask.kind'),
    ('[experiment]\nkind = "solve"\ns = 1.5\n', 'experiment.s'),
    ('[experiment]\nkind = "solve"\nrhs = "noise"\n', 'experiment.rhs'),
    ('[experiment]\nkind = "solve"\nrhs = "file"\n', 'fields.f'),
    ('[experiment]\nkind = "phi-audit"\nconditions = ["inc", "convex"]\n', 'convex'),
    ('[experiment]\nkind = "ineq-sweep"\ns_values = [0.0, 0.5]\n', 's_values'),
    ('[experiment]\nkind = "s-dependence"\nsigma = 1.0\n', 'sigma'),
    ('[experiment]\nkind = "s-dependence"\nsequence_length = 6\n', 'at least 7 terms'),
    ('[experiment]\nkind = "s-dependence"\ndependence_rtol = 0.0\n', 'dependence_rtol'),
    ('[experiment]\nkind = "solve"\n[solver]\nmomentum = 0.9\n', 'momentum'),
    ('[experiment]\nkind = "solve"\n[solver]\narmijo = 0.9\n', 'Armijo'),
    ('[experiment]\nkind = "solve"\n[fields]\nf = "missing.fogf"\n', 'does not exist'),
])
def test_invalid_configurations(manager, write_config, text, message):
    config, error = manager.load_config(str(write_config(text)))
    assert config is None
    assert message in error


def test_unreadable_files(manager, write_config, tmp_path):
    _, error = manager.load_config(str(tmp_path / 'absent.toml'))
    assert 'not found' in error
    _, error = manager.load_config(str(write_config('[experiment\nkind = 1')))
    assert 'not valid TOML' in error


def test_field_paths_resolve_against_the_config_directory(manager, write_config, tmp_path):
    grid = Grid(1, 64, 1.0)
    FieldHandler().save_field(GridField.zeros(grid), tmp_path / 'p.fogf')
    path = write_config(
        '[grid]\nn = 64\nlength = 1.0\n'
        '[phi]\nfamily = "variable-exponent"\np_field = "p.fogf"\n'
        '[experiment]\nkind = "phi-audit"\n'
    )
    config, error = manager.load_config(str(path))
    assert error is None
    assert config.phi['p_field'] == tmp_path / 'p.fogf'
    summary = manager.get_run_summary(config)
    assert summary['phi']['p_field'] == str(tmp_path / 'p.fogf')
    assert summary['grid'] == {'d': 1, 'n': 64, 'length': 1.0}


def test_sample_configurations_are_valid(manager):
    root = Path(__file__).resolve().parent.parent / 'configs'
    for path in sorted(root.glob('*.toml')):
        config, error = manager.load_config(str(path))
        assert error is None, (path.name, error)

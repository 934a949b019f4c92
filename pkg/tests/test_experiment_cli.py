"""End-to-end tests of the command-line runner."""

import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from src.app import main
from src.modules.artifact_manager import ArtifactManager
from src.modules.config_manager import ConfigManager
from src.modules.experiment_runner import ExperimentOutcome, ExperimentRunner
from src.modules.field_handler import FieldHandler
from src.modules.state_manager import RunStateManager
from src.utils.constants import EXIT_CHECK_FAILED, EXIT_INVALID, EXIT_OK
from src.utils.errors import RangeError

CONFIGS = Path(__file__).resolve().parents[1] / 'configs'

SOLVE_EIGENMODE = """
[grid]
n = 64

[phi]
family = "power"
p = 2.0
scale = 0.5

[mask]
kind = "full"

[experiment]
kind = "solve"
s = 0.5
rhs = "sine"
recovery_tol = 1e-6
"""


def _run(path, out, *extra):
    return main(['--config', str(path), '--out', str(out), *extra])


def _summary(out):
    return json.loads((out / 'summary.json').read_text())


def test_known_growth_failure_exits_with_one(write_config, tmp_path, capsys):
    path = write_config(
        '[phi]\nfamily = "power"\np = 3.0\n'
        '[experiment]\nkind = "phi-audit"\nconditions = ["inc", "dec"]\ncalculus = false\n'
        'exponents = { inc = 2.0, dec = 2.0 }\n'
    )
    out = tmp_path / 'out'
    assert _run(path, out) == EXIT_CHECK_FAILED

    records = pd.read_csv(out / 'records.csv')
    verdicts = dict(zip(records['condition'], records['pass']))
    assert verdicts == {'inc': True, 'dec': False}
    summary = _summary(out)
    assert summary['passed'] is False
    assert summary['failures'][0].startswith('dec')
    assert '❌' in capsys.readouterr().out


def test_double_phase_audit_passes(write_config, tmp_path):
    path = write_config(
        '[grid]\nn = 64\n'
        '[phi]\nfamily = "double-phase"\np = 2.0\nq = 3.0\nalpha_min = 0.0\nalpha_max = 1.0\n'
        '[experiment]\nkind = "phi-audit"\n'
    )
    out = tmp_path / 'out'
    assert _run(path, out, '--quiet') == EXIT_OK
    records = pd.read_csv(out / 'records.csv')
    assert records['pass'].all()
    assert 'calculus-young' in set(records['condition'])
    assert _summary(out)['results']['growth'] == {'p': 2.0, 'q': 3.0}


def test_operator_verification(write_config, tmp_path):
    path = write_config('[experiment]\nkind = "ops-verify"\noracle_s = [0.5]\n')
    out = tmp_path / 'out'
    assert _run(path, out, '--quiet') == EXIT_OK
    records = pd.read_csv(out / 'records.csv')
    assert 'oracle' in set(records['identity'])
    assert records['pass'].all()


def test_solve_writes_solution_and_history(write_config, tmp_path, capsys):
    out = tmp_path / 'out'
    assert _run(write_config(SOLVE_EIGENMODE), out) == EXIT_OK
    assert '✅' in capsys.readouterr().out

    checks = pd.read_csv(out / 'records.csv')
    assert list(checks.columns) == ['check', 'value', 'limit', 'pass']
    assert {'converged', 'recovery', 'monotonicity', 'dual_bound', 'coercivity'} <= set(checks['check'])

    history = pd.read_csv(out / 'history.csv')
    assert list(history.columns) == ['iteration', 'energy', 'residual']
    assert history['energy'].iloc[-1] <= history['energy'].iloc[0]

    u, error = FieldHandler().load_field(out / 'solution.fogf')
    assert error is None
    np.testing.assert_allclose(u.samples, np.sin(u.grid.axis()), atol=1e-5)
    assert _summary(out)['results']['solver']['converged'] is True


def test_capture_then_enforce_baselines(write_config, tmp_path):
    path = write_config(SOLVE_EIGENMODE)
    out = tmp_path / 'out'
    assert _run(path, out, '--capture-baselines', '--quiet') == EXIT_OK

    content = json.loads((out / 'baselines.json').read_text())
    assert content['version'] == 1
    assert set(content['constants']) == {'dual_bound', 'coercivity'}

    assert _run(path, out, '--quiet') == EXIT_OK
    checks = pd.read_csv(out / 'records.csv')
    assert checks.loc[checks['check'] == 'coercivity', 'limit'].notna().all()


def test_runs_are_reproducible(write_config, tmp_path):
    path = write_config(SOLVE_EIGENMODE)
    assert _run(path, tmp_path / 'a', '--quiet') == EXIT_OK
    assert _run(path, tmp_path / 'b', '--quiet') == EXIT_OK
    for name in ('records.csv', 'history.csv', 'solution.fogf', 'summary.json'):
        assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes()


def test_inequality_sweep_with_captured_baselines(write_config, tmp_path):
    path = write_config(
        '[grid]\nn = 64\n'
        '[mask]\nkind = "ball"\nradius = 1.2\n'
        '[experiment]\nkind = "ineq-sweep"\ns_values = [0.5, 1.0]\n'
    )
    out = tmp_path / 'out'
    assert _run(path, out, '--quiet') == EXIT_OK
    assert _run(path, out, '--capture-baselines', '--quiet') == EXIT_OK
    constants = json.loads((out / 'baselines.json').read_text())['constants']
    assert {'poincare', 'interpolation', 'spaces_decrease', 'multiplier'} <= set(constants)
    assert _run(path, out, '--quiet') == EXIT_OK

    records = pd.read_csv(out / 'records.csv')
    assert records.loc[records['inequality_id'] == 'poincare', 'baseline'].notna().all()


def test_s_dependence(write_config, tmp_path):
    path = write_config(
        '[grid]\nn = 64\n'
        '[phi]\nfamily = "power"\np = 2.0\nscale = 0.5\n'
        '[mask]\nkind = "ball"\nradius = 1.2\n'
        '[experiment]\nkind = "s-dependence"\nsigma = 0.5\nsequence_length = 12\n'
        '[solver]\nresidual_tol = 1e-9\n'
    )
    out = tmp_path / 'out'
    assert _run(path, out, '--quiet') == EXIT_OK
    rows = pd.read_csv(out / 'records.csv')
    assert list(rows['n']) == list(range(1, 13))
    assert (np.diff(rows['e_n']) < 0.0).all()
    assert rows['s_n'].iloc[-1] - 0.5 <= 1e-2
    summary = _summary(out)
    assert summary['passed'] is True
    assert rows['e_n'].iloc[-1] <= 1e-3 * summary['results']['limit_norm']


def test_manufactured_double_phase_solve_on_the_torus(tmp_path):
    config, error = ConfigManager().load_config(str(CONFIGS / 'solve_manufactured.toml'), {'out': str(tmp_path)})
    assert error is None
    assert config.mask['kind'] == 'full' and config.experiment['s'] == 0.6

    outcome, error = ExperimentRunner().run(config, enforce_baselines=False)
    assert error is None
    assert outcome.passed, outcome.failures
    checks = {record['check']: record for record in outcome.records}
    assert checks['recovery']['pass']
    assert checks['recovery']['value'] <= 1e-4

    energies = [row['energy'] for row in outcome.tables['history.csv']]
    assert energies[-1] < energies[0]
    assert np.all(np.diff(energies) <= 1e-12)


def test_numerical_failure_exits_with_one(write_config, tmp_path, monkeypatch, capsys):
    def diverging(prob, config=None, initial=None):
        raise RangeError("Luxemburg bracket failed above")

    monkeypatch.setattr('src.modules.experiment_runner.solve', diverging)
    path = write_config(SOLVE_EIGENMODE)
    config, error = ConfigManager().load_config(str(path), {'out': str(tmp_path / 'runner')})
    outcome, error = ExperimentRunner().run(config)
    assert error is None
    assert not outcome.complete
    assert outcome.failures == ['RangeError: Luxemburg bracket failed above']

    out = tmp_path / 'out'
    assert _run(path, out) == EXIT_CHECK_FAILED
    assert 'run aborted' in capsys.readouterr().out
    assert _summary(out)['passed'] is False


@pytest.mark.parametrize('text', [
    '[experiment]\nkind = "train"\n',
    '[experiment]\nkind = "solve"\nrhs = "sine"\n[mask]\nkind = "ball"\nradius = 1.0\n',
    '[experiment]\nkind = "ops-verify"\n[grid]\nn = 64\n[phi]\nfamily = "power"\np = 0.5\n',
])
def test_invalid_input_exits_with_two(write_config, tmp_path, capsys, text):
    assert _run(write_config(text), tmp_path / 'out') == EXIT_INVALID
    assert 'Error' in capsys.readouterr().err


# -- artifacts and run state --------------------------------------------------------------------

def test_baseline_files_are_merged_and_checked(tmp_path):
    manager = ArtifactManager()
    path = tmp_path / 'baselines.json'
    assert manager.load_baselines(path) == ({}, None)
    manager.save_baselines({'poincare': 2.0}, path)
    manager.save_baselines({'sobolev': 1.5}, path)
    assert manager.load_baselines(path) == ({'poincare': 2.0, 'sobolev': 1.5}, None)

    _, error = manager.save_baselines({'speedup': 1.0}, path)
    assert 'Unknown baseline keys' in error
    path.write_text('{"version": 2, "constants": {}}')
    _, error = manager.load_baselines(path)
    assert 'version' in error


def test_run_state():
    state = RunStateManager()
    assert not state.passed
    state.add_artifact('records.csv', '/tmp/records.csv')
    state.add_failure('write failed')
    assert state.get_artifacts() == {'records.csv': '/tmp/records.csv'}
    state.reset()
    assert state.failures == [] and state.get_artifacts() == {}


def test_run_state_follows_the_outcome():
    state = RunStateManager()
    state.set_outcome(ExperimentOutcome('solve', records=[{'check': 'converged'}]))
    assert state.passed
    state.add_failure('records.csv: disk full')
    assert not state.passed

    state.set_outcome(ExperimentOutcome('solve', failures=['recovery: value 1 exceeds limit 1e-06']))
    assert state.failures == ['recovery: value 1 exceeds limit 1e-06']
    assert not state.passed
    state.set_outcome(ExperimentOutcome('s-dependence', complete=False))
    assert not state.passed

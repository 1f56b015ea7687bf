import json
import os

import numpy as np
import pandas as pd
import pytest
from click.testing import CliRunner
from scipy.sparse.linalg import ArpackNoConvergence

import cli as cli_module
import database
from cli import cli


@pytest.fixture
def run(tmp_path):
    out = str(tmp_path / 'out')

    def invoke(*args):
        return CliRunner().invoke(cli, ['--output-dir', out, *args])

    invoke.out = out
    return invoke


def test_te_analytic_writes_csv_manifest_and_ledger(run):
    result = run('te-analytic', '--disk', '2', '--a', '1', '--n', '3', '--k-min', '0.5', '--k-max', '3')
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(os.path.join(run.out, 'te-analytic.csv'))
    assert frame['k_value'].iloc[0] == pytest.approx(2.079617909939, abs=1e-7)
    assert list(frame['k_index']) == [1]

    with open(os.path.join(run.out, 'te-analytic.manifest.json'), encoding='utf-8') as f:
        manifest = json.load(f)
    assert manifest['subcommand'] == 'te-analytic'
    assert manifest['toolkit'] == 'tevhom'
    assert [a['path'] for a in manifest['artifacts']] == ['te-analytic.csv']
    assert 'constant:1,3' in manifest['config']

    runs = database.recent_runs(path=database.ledger_path(run.out))
    assert runs[0]['subcommand'] == 'te-analytic'
    assert runs[0]['exit_code'] == 0
    assert runs[0]['config_hash'] == manifest['config_hash']
    assert runs[0]['artifacts'] == 2


def test_same_config_gives_same_hash(run):
    args = ('te-analytic', '--disk', '1', '--a', '0.5', '--n', '3', '--k-max', '3')
    run(*args)
    run(*args)
    runs = database.recent_runs(path=database.ledger_path(run.out))
    assert runs[0]['config_hash'] == runs[1]['config_hash']


def test_validation_error_writes_nothing(run):
    result = run('te-analytic', '--k-min', '3', '--k-max', '1')
    assert result.exit_code == 2
    assert not os.path.exists(run.out)


def test_solver_error_is_recorded(run):
    result = run('te-analytic', '--a', '2', '--n', '2')
    assert result.exit_code == 3
    assert not os.path.exists(os.path.join(run.out, 'te-analytic.csv'))
    runs = database.recent_runs(path=database.ledger_path(run.out))
    assert runs[0]['status'] == 'failed'
    assert runs[0]['exit_code'] == 3


@pytest.mark.parametrize('failure', [np.linalg.LinAlgError("singular matrix"),
                                     ArpackNoConvergence("no convergence", np.array([]), np.array([]))])
def test_library_failures_exit_with_three(run, monkeypatch, failure):
    def broken(*args, **kwargs):
        raise failure

    monkeypatch.setattr(cli_module, 'roots_disk', broken)
    result = run('te-analytic', '--a', '1', '--n', '3')
    assert result.exit_code == 3
    assert type(failure).__name__ in result.output
    runs = database.recent_runs(path=database.ledger_path(run.out))
    assert runs[0]['status'] == 'failed'
    assert runs[0]['exit_code'] == 3


def test_noisy_synthesis_needs_a_seed(run):
    result = run('farfield-synth', '--k', '2', '--directions', '16')
    assert result.exit_code == 2
    assert 'seed' in result.output


def test_farfield_synthesis(run):
    result = run('farfield-synth', '--k', '2', '--a', '0.5', '--n', '1.5', '--directions', '16',
                 '--delta', '0.01', '--seed', '4')
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(os.path.join(run.out, 'farfield-synth.csv'))
    assert len(frame) == 256
    assert list(frame.columns) == ['theta', 'phi', 're', 'im']


def test_homogenize(run):
    result = run('homogenize', '--preset', 'layered-A:1,4', '--divisions', '8')
    assert result.exit_code == 0, result.output
    row = pd.read_csv(os.path.join(run.out, 'homogenize.csv')).iloc[0]
    assert row['a11'] == pytest.approx(1.6, abs=1e-9)
    assert row['a22'] == pytest.approx(2.5, abs=1e-9)
    assert bool(row['bounds_ok'])


def test_rate_from_flags(run):
    result = run('rate', '--epsilon', '0.5', '--epsilon', '0.25', '--epsilon', '0.125',
                 '--k1', '1.5', '--k1', '1.125', '--k1', '1.03125', '--k-ref', '1.0')
    assert result.exit_code == 0, result.output
    row = pd.read_csv(os.path.join(run.out, 'rate.csv')).iloc[0]
    assert row['p'] == pytest.approx(2.0, abs=1e-9)
    assert len(pd.read_csv(os.path.join(run.out, 'rate-points.csv'))) == 3


def test_rate_from_a_te_csv(run, tmp_path):
    source = tmp_path / 'sweep.csv'
    pd.DataFrame({'epsilon': [0.5, 0.25, 0.125], 'k_index': [1, 1, 1],
                  'k_value': [1.5, 1.125, 1.03125]}).to_csv(source, index=False)
    result = run('rate', '--from-csv', str(source), '--k-ref', '1.0')
    assert result.exit_code == 0, result.output


def test_reconstruct_index(run):
    result = run('reconstruct', '--mode', 'index', '--k1', '5.0296323444', '--domain', 'disk:1')
    assert result.exit_code == 0, result.output
    row = pd.read_csv(os.path.join(run.out, 'reconstruct.csv')).iloc[0]
    assert row['recovered'] == pytest.approx(2.5, abs=1e-6)


def test_reconstruct_needs_k1(run):
    assert run('reconstruct', '--mode', 'index').exit_code == 2


def test_config_file_and_flag_precedence(run, tmp_path):
    config = tmp_path / 'experiment.ini'
    config.write_text("[domain]\ndomain = disk:2\n\n[medium]\npreset = constant:1,3\n\n"
                      "[solver]\nk_min = 0.5\nk_max = 3.0\n", encoding='utf-8')
    result = CliRunner().invoke(cli, ['--config', str(config), '--output-dir', run.out,
                                      'te-analytic', '--n', '4'])
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(os.path.join(run.out, 'te-analytic.csv'))
    assert frame['n'].iloc[0] == 4.0
    assert frame['radius'].iloc[0] == 2.0


def test_paper_table(run):
    result = run('paper-table', 't4')
    assert result.exit_code == 0, result.output
    frame = pd.read_csv(os.path.join(run.out, 'paper-table-t4.csv'))
    assert frame['quantity'].iloc[0] == 'recovered index'


def test_unknown_table(run):
    assert run('paper-table', 't42').exit_code == 2


def test_ledger_command(run):
    run('te-analytic', '--k-max', '5')
    result = run('ledger')
    assert result.exit_code == 0
    assert 'RUN LEDGER SUMMARY' in result.output
    assert 'te-analytic' in result.output

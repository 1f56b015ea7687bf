#!/usr/bin/env python3
"""
tevhom Command Line
Runs the homogenization, transmission eigenvalue, detection and reconstruction pipelines and writes CSV artifacts with manifests

Usage: python cli.py [--config FILE] [--output-dir DIR] [--verbose] SUBCOMMAND [OPTIONS]
"""

import json
import logging
import os
import sqlite3
import sys
import tempfile
import time
from dataclasses import dataclass

import click
import numpy as np
import pandas as pd
from scipy.sparse.linalg import ArpackError

import database
from coeffs import parse_preset, rescale
from config import DEFAULT_OUTPUT_DIR, KNOWN_BRANCHES, KNOWN_METHODS, KNOWN_MODES, KNOWN_NORMS
from config import TOOLKIT_NAME, TOOLKIT_VERSION, ExperimentConfig
from errors import (ConfigError, DomainError, InvalidParameterError, SolverError, ToolkitError,
                    ValidationError)
from homogenize import homogenize
from mesh import Domain
from recon import invert_fem, invert_index, invert_ratio, invert_tensor_scalar
from scatter import add_noise, detect_te, farfield_disk
from tables import RESOLUTIONS, run_table, summarize
from te_solver import TEQuery, bracket_check, export_mode, fit_rate, roots_disk, solve_te

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = '%.12g'
TE_COLUMNS = ['preset', 'method', 'epsilon', 'k_index', 'k_value', 'residual', 'h']
NUMERICAL_FAILURES = (np.linalg.LinAlgError, ArpackError, FloatingPointError, ZeroDivisionError)


@dataclass
class Output:
    """One artifact: rows to be written as <stem>.csv, or a file the action already wrote"""

    stem: str
    rows: list = None
    columns: list = None
    path: str = None
    kind: str = 'csv'


def write_atomic(path, write):
    """write(tmp_path) into a temp file in the target directory, then rename over path"""
    directory = os.path.dirname(path) or '.'
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix='.tmp-', suffix=os.path.basename(path))
    os.close(fd)
    try:
        write(tmp)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)
    return path


def write_csv(rows, path, columns=None):
    frame = pd.DataFrame(rows, columns=columns)
    write_atomic(path, lambda tmp: frame.to_csv(tmp, index=False, float_format=CSV_FLOAT_FORMAT,
                                                lineterminator='\n'))
    return len(frame)


def write_manifest(path, manifest):
    def dump(tmp):
        with open(tmp, 'w', encoding='utf-8', newline='\n') as f:
            json.dump(manifest, f, indent=2, sort_keys=True, default=str)
            f.write('\n')

    return write_atomic(path, dump)


def _config_from(ctx):
    path = ctx.obj.get('config_path')
    config = ExperimentConfig.load(path) if path else ExperimentConfig()
    if ctx.obj.get('output_dir'):
        config = config.updated(output_dir=ctx.obj['output_dir'])
    return config


def run_subcommand(ctx, name, overrides, action, require_seed=False):
    """
    Build and validate the config, run the action and write its artifacts.

    Exit codes: 0 on success, 2 on a validation error (nothing written), 3 on a solver error.
    """
    started = time.perf_counter()
    config = None
    try:
        config = _config_from(ctx)
        extras = overrides.pop('extras', None)
        medium = {key: overrides.pop(key) for key in ('a', 'n') if key in overrides}
        config = config.updated(**overrides)
        if medium:
            config = config.updated(preset=_constant_preset(config.preset, **medium))
        if extras:
            config = config.updated(extras={**config.extras, **extras})
        config.validate()
        if require_seed and config.delta > 0 and config.seed is None:
            raise ConfigError("--seed is required for noisy runs (delta > 0)")
        outputs = action(config)
    except ValidationError as e:
        click.echo(f"❌ {name}: {e}", err=True)
        ctx.exit(2)
    except (ToolkitError, *NUMERICAL_FAILURES) as e:
        error = e if isinstance(e, ToolkitError) else SolverError(f"{type(e).__name__}: {e}")
        click.echo(f"❌ {name}: {error}", err=True)
        _record(name, config, 'failed', error.exit_code, time.perf_counter() - started, [])
        ctx.exit(error.exit_code)

    artifacts = []
    for output in outputs:
        if output.path is None:
            path = os.path.join(config.output_dir, f"{output.stem}.csv")
            rows = write_csv(output.rows, path, output.columns)
        else:
            path, rows = output.path, None
        artifacts.append({'path': path, 'kind': output.kind, 'rows': rows})

    wall_time = time.perf_counter() - started
    manifest = {
        'toolkit': TOOLKIT_NAME,
        'version': TOOLKIT_VERSION,
        'subcommand': name,
        'config_hash': config.config_hash(),
        'config': config.emit(),
        'wall_time_s': round(wall_time, 3),
        'artifacts': [{**a, 'path': os.path.basename(a['path'])} for a in artifacts],
    }
    manifest_path = write_manifest(os.path.join(config.output_dir, f"{name}.manifest.json"), manifest)
    artifacts.append({'path': manifest_path, 'kind': 'manifest', 'rows': None})
    _record(name, config, 'ok', 0, wall_time, artifacts)
    click.echo(f"✅ {name}: {len(artifacts)} artifact(s) in {config.output_dir} "
               f"(config {config.config_hash()}, {wall_time:.2f}s)")
    return artifacts


def _record(name, config, status, exit_code, wall_time, artifacts):
    if config is None:
        return
    path = database.ledger_path(config.output_dir)
    try:
        database.init_db(path)
        run_id = database.record_run(name, config.config_hash(), status, exit_code, wall_time, path=path)
        for artifact in artifacts:
            database.record_artifact(run_id, artifact['path'], artifact['kind'], artifact['rows'], path=path)
    except sqlite3.Error as e:
        logger.warning(f"⚠️ run not recorded in the ledger: {e}")


def _parse_orders(text):
    try:
        orders = tuple(int(part) for part in text.split(',') if part.strip())
    except ValueError:
        raise InvalidParameterError(f"orders must be comma-separated integers, got {text!r}")
    if not orders:
        raise InvalidParameterError("at least one order required")
    return orders


def _disk_parameters(config):
    domain = Domain.parse(config.domain)
    if not domain.is_disk:
        raise DomainError(f"this subcommand needs a disk domain, got {config.domain}")
    medium = parse_preset(config.preset)
    if not medium.is_constant:
        raise InvalidParameterError(f"this subcommand needs a constant medium, got {config.preset}")
    return domain.radius, medium.params['a'], medium.params['n']


def _medium_overrides(disk, a, n):
    overrides = {key: value for key, value in (('a', a), ('n', n)) if value is not None}
    if disk is not None:
        overrides['domain'] = f'disk:{disk:.12g}'
    return overrides


def _constant_preset(preset, a=None, n=None):
    """--a/--n on top of the configured preset; a flag left out keeps the configured constant, else 1"""
    try:
        current = parse_preset(preset)
        base = current.params if current.is_constant else {}
    except ToolkitError:
        base = {}
    a = base.get('a', 1.0) if a is None else a
    n = base.get('n', 1.0) if n is None else n
    return f'constant:{a:.12g},{n:.12g}'


@click.group()
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), default=None,
              help='Experiment config file (INI sections, see SETUP.md).')
@click.option('--output-dir', default=None, help=f'Artifact directory (default {DEFAULT_OUTPUT_DIR}).')
@click.option('--verbose', is_flag=True, help='Debug logging on stderr.')
@click.pass_context
def cli(ctx, config_path, output_dir, verbose):
    """Transmission eigenvalues of periodic media and their homogenized limits."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        format='%(asctime)s - %(levelname)s - %(message)s', stream=sys.stderr, force=True)
    ctx.ensure_object(dict)
    ctx.obj.update(config_path=config_path, output_dir=output_dir)


@cli.command('homogenize')
@click.option('--preset', default=None, help='Coefficient preset, e.g. sincos-A+sincos-n.')
@click.option('--divisions', 'cell_divisions', type=int, default=None, help='Unit-cell mesh divisions.')
@click.pass_context
def homogenize_command(ctx, preset, cell_divisions):
    """Effective tensor A_h, mean index n_h and the Voigt-Reuss bounds."""
    def action(config):
        field = parse_preset(config.preset)
        cell, medium = homogenize(field, config.cell_divisions)
        row = {'preset': config.preset, 'divisions': config.cell_divisions, **medium.to_dict(),
               'bounds_ok': medium.check_bounds(), 'cell_residual': cell.residual,
               'mean_zero': cell.mean_zero}
        click.echo(f"A_h = [[{medium.a_h[0, 0]:.8f}, {medium.a_h[0, 1]:.8f}], "
                   f"[{medium.a_h[1, 0]:.8f}, {medium.a_h[1, 1]:.8f}]]  n_h = {medium.n_h:.8f}")
        return [Output('homogenize', [row])]

    run_subcommand(ctx, 'homogenize', {'preset': preset, 'cell_divisions': cell_divisions}, action)


@cli.command('te-analytic')
@click.option('--disk', type=float, default=None, help='Disk radius R.')
@click.option('--a', type=float, default=None, help='Scalar tensor A = a I.')
@click.option('--n', type=float, default=None, help='Constant index n.')
@click.option('--k-min', type=float, default=None)
@click.option('--k-max', type=float, default=None)
@click.option('--count', type=int, default=None)
@click.option('--orders', default='0', show_default=True, help='Angular orders to merge, e.g. 0,1,2.')
@click.pass_context
def te_analytic_command(ctx, disk, a, n, k_min, k_max, count, orders):
    """Real transmission eigenvalues of a homogeneous disk from the Bessel determinant."""
    def action(config):
        radius, a_value, n_value = _disk_parameters(config)
        result = roots_disk(radius, a_value, n_value, config.k_min, config.k_max, config.count,
                            orders=_parse_orders(orders))
        rows = [{'radius': radius, 'a': a_value, 'n': n_value, **row} for row in result.to_rows()]
        for row in rows:
            click.echo(f"k{row['k_index']} = {row['k_value']:.10f}")
        return [Output('te-analytic', rows,
                       columns=['radius', 'a', 'n', 'method', 'epsilon', 'k_index', 'k_value', 'residual', 'h'])]

    overrides = {'k_min': k_min, 'k_max': k_max, 'count': count, 'extras': {'orders': orders},
                 **_medium_overrides(disk, a, n)}
    run_subcommand(ctx, 'te-analytic', overrides, action)


@cli.command('te-fem')
@click.option('--domain', default=None, help='disk:R or square:lo,hi.')
@click.option('--preset', default=None)
@click.option('--epsilon', 'epsilons', type=float, multiple=True, help='Period; repeat for a sweep.')
@click.option('--k-min', type=float, default=None)
@click.option('--k-max', type=float, default=None)
@click.option('--count', type=int, default=None)
@click.option('--method', type=click.Choice(KNOWN_METHODS), default=None)
@click.option('--h-max', type=float, default=None)
@click.option('--tau-steps', type=int, default=None)
@click.option('--strict-regime/--no-strict-regime', default=None)
@click.option('--bracket', is_flag=True, help='Check each eigenvalue against the constant-coefficient bracket.')
@click.option('--export-modes', is_flag=True, help='Write the first eigenfunction of each run as x y u v text.')
@click.pass_context
def te_fem_command(ctx, domain, preset, epsilons, k_min, k_max, count, method, h_max, tau_steps,
                   strict_regime, bracket, export_modes):
    """Finite element transmission eigenvalues for a periodic medium, one run per epsilon."""
    def action(config):
        base = parse_preset(config.preset)
        rows, outputs = [], []
        for j, eps in enumerate(config.epsilons):
            field = rescale(base, eps)
            query = TEQuery(domain=config.domain, field=field, k_min=config.k_min, k_max=config.k_max,
                            count=config.count, method=config.method, h_max=config.h_max,
                            tau_steps=config.tau_steps, strict_regime=config.strict_regime)
            result = solve_te(query)
            report = bracket_check(result, field, query.domain) if bracket else None
            for i, row in enumerate(result.to_rows()):
                row = {'preset': config.preset, **row}
                if report is not None and report.applicable:
                    row.update(bracket_rule=report.rule, bracket_lower=report.lower[i],
                               bracket_upper=report.upper[i], bracket_ok=report.satisfied[i])
                rows.append(row)
                click.echo(f"epsilon={eps:g} k{row['k_index']} = {row['k_value']:.8f}")
            if export_modes and result.modes:
                path = os.path.join(config.output_dir, f"te-fem-mode-{j + 1}.txt")
                os.makedirs(config.output_dir, exist_ok=True)
                outputs.append(Output(f"te-fem-mode-{j + 1}", path=export_mode(result, path), kind='mode'))
        columns = TE_COLUMNS if not any('bracket_rule' in r for r in rows) else None
        return [Output('te-fem', rows, columns=columns)] + outputs

    overrides = {'domain': domain, 'preset': preset, 'epsilons': tuple(epsilons) or None,
                 'k_min': k_min, 'k_max': k_max, 'count': count, 'method': method, 'h_max': h_max,
                 'tau_steps': tau_steps, 'strict_regime': strict_regime}
    run_subcommand(ctx, 'te-fem', overrides, action)


def _rate_inputs(epsilons, values, from_csv):
    if from_csv:
        try:
            frame = pd.read_csv(from_csv)
        except (OSError, pd.errors.ParserError) as e:
            raise ConfigError(f"cannot read {from_csv}: {e}")
        if not {'epsilon', 'k_index', 'k_value'} <= set(frame.columns):
            raise ConfigError(f"{from_csv} needs epsilon, k_index and k_value columns")
        first = frame[frame['k_index'] == 1].sort_values('epsilon', ascending=False)
        return first['epsilon'].tolist(), first['k_value'].tolist()
    if len(epsilons) != len(values):
        raise InvalidParameterError(f"{len(epsilons)} epsilons but {len(values)} eigenvalues")
    return list(epsilons), list(values)


@cli.command('rate')
@click.option('--epsilon', 'epsilons', type=float, multiple=True)
@click.option('--k1', 'values', type=float, multiple=True, help='First eigenvalue per epsilon.')
@click.option('--k-ref', type=float, default=None, help='Homogenized k_h; omit for successive relative errors.')
@click.option('--from-csv', type=click.Path(dir_okay=False), default=None, help='A te-fem CSV.')
@click.pass_context
def rate_command(ctx, epsilons, values, k_ref, from_csv):
    """Fit log(error) = log(C) + p log(epsilon)."""
    def action(config):
        eps_list, k1s = _rate_inputs(epsilons, values, from_csv)
        fit = fit_rate(eps_list, k1s, k_ref)
        click.echo(f"p = {fit.p:.6f}, C = {np.exp(fit.c):.6g} ({fit.reference})")
        points = [{'x': x, 'error': err} for x, err in zip(fit.x, fit.errors)]
        return [Output('rate', [fit.to_dict()]), Output('rate-points', points, columns=['x', 'error'])]

    extras = {'epsilons': ','.join(repr(e) for e in epsilons), 'k1_values': ','.join(repr(v) for v in values),
              'k_ref': '' if k_ref is None else repr(k_ref), 'from_csv': from_csv or ''}
    run_subcommand(ctx, 'rate', {'extras': extras}, action)


@cli.command('farfield-synth')
@click.option('--disk', type=float, default=None)
@click.option('--a', type=float, default=None)
@click.option('--n', type=float, default=None)
@click.option('--k', 'wavenumber', type=float, required=True)
@click.option('--directions', type=int, default=None)
@click.option('--delta', type=float, default=None, help='Relative noise level.')
@click.option('--seed', type=int, default=None, help='Required when delta > 0.')
@click.pass_context
def farfield_synth_command(ctx, disk, a, n, wavenumber, directions, delta, seed):
    """Far-field matrix of a homogeneous disk from the separated-variables series."""
    def action(config):
        radius, a_value, n_value = _disk_parameters(config)
        matrix = farfield_disk(wavenumber, radius, a_value, n_value, config.directions)
        if config.delta > 0:
            matrix = add_noise(matrix, config.delta, np.random.default_rng(config.seed))
        click.echo(f"far field at k={wavenumber:g}: N={config.directions}, "
                   f"|F| = {np.linalg.norm(matrix.entries):.6g}")
        return [Output('farfield-synth', matrix.to_rows())]

    overrides = {'directions': directions, 'delta': delta, 'seed': seed,
                 'extras': {'k': repr(wavenumber)}, **_medium_overrides(disk, a, n)}
    run_subcommand(ctx, 'farfield-synth', overrides, action, require_seed=True)


@cli.command('lsm-detect')
@click.option('--disk', type=float, default=None)
@click.option('--a', type=float, default=None)
@click.option('--n', type=float, default=None)
@click.option('--k-min', type=float, default=None)
@click.option('--k-max', type=float, default=None)
@click.option('--k-step', type=float, default=None)
@click.option('--directions', type=int, default=None)
@click.option('--delta', type=float, default=None)
@click.option('--num-z', type=int, default=None)
@click.option('--spike-factor', type=float, default=None, help='Rise over the k-trend, in median absolute residuals.')
@click.option('--norm', type=click.Choice(KNOWN_NORMS), default=None)
@click.option('--seed', type=int, default=None, help='Required when delta > 0.')
@click.pass_context
def lsm_detect_command(ctx, disk, a, n, k_min, k_max, k_step, directions, delta, num_z,
                       spike_factor, norm, seed):
    """Sampling-method detection: median Herglotz norm over a k-grid and its spikes."""
    def action(config):
        radius, a_value, n_value = _disk_parameters(config)
        curve = detect_te(config.k_min, config.k_max, radius, a_value, n_value, delta=config.delta,
                          directions=config.directions, num_z=config.num_z, k_step=config.k_step,
                          spike_factor=config.spike_factor, seed=config.seed or 0, norm=config.norm)
        spikes = [{'spike': i + 1, 'k': k} for i, k in enumerate(curve.detected_ks)]
        for spike in spikes:
            click.echo(f"spike {spike['spike']}: k = {spike['k']:.4f}")
        return [Output('lsm-detect', curve.to_rows()), Output('lsm-spikes', spikes, columns=['spike', 'k'])]

    overrides = {'k_min': k_min, 'k_max': k_max, 'k_step': k_step, 'directions': directions,
                 'delta': delta, 'num_z': num_z, 'spike_factor': spike_factor, 'norm': norm, 'seed': seed,
                 **_medium_overrides(disk, a, n)}
    run_subcommand(ctx, 'lsm-detect', overrides, action, require_seed=True)


@cli.command('reconstruct')
@click.option('--mode', type=click.Choice(KNOWN_MODES), default=None)
@click.option('--k1', type=float, default=None, help='Measured first transmission eigenvalue.')
@click.option('--domain', default=None, help='disk:R inverts analytically; square:lo,hi uses the FEM map.')
@click.option('--branch', type=click.Choice(KNOWN_BRANCHES), default=None)
@click.option('--known-index', type=float, default=None, help='n_h, to derive a_h in ratio mode.')
@click.option('--h-max', type=float, default=None)
@click.pass_context
def reconstruct_command(ctx, mode, k1, domain, branch, known_index, h_max):
    """Constant index, scalar tensor or ratio n_h/a_h matching a measured k1."""
    def action(config):
        if config.k1 is None:
            raise InvalidParameterError("--k1 is required")
        target = Domain.parse(config.domain)
        if not target.is_disk:
            report = invert_fem(config.mode, config.k1, target, h_max=config.h_max, branch=config.branch,
                                known_index=known_index)
        elif config.mode == 'index':
            report = invert_index(config.k1, target)
        elif config.mode == 'tensor':
            report = invert_tensor_scalar(config.k1, target, config.branch)
        else:
            report = invert_ratio(config.k1, target, known_index)
        marker = '✅' if report.converged else '⚠️'
        click.echo(f"{marker} {config.mode}: recovered {report.recovered:.8f} "
                   f"(residual {report.residual:.2e})")
        return [Output('reconstruct', [report.to_dict()])]

    overrides = {'mode': mode, 'k1': k1, 'domain': domain, 'branch': branch, 'h_max': h_max,
                 'extras': {'known_index': '' if known_index is None else repr(known_index)}}
    run_subcommand(ctx, 'reconstruct', overrides, action)


@cli.command('paper-table')
@click.argument('table_id')
@click.option('--resolution', type=click.Choice(sorted(RESOLUTIONS)), default='desk', show_default=True)
@click.pass_context
def paper_table_command(ctx, table_id, resolution):
    """Recompute a published table (t1..t9) with pass/fail against the printed values."""
    def action(config):
        rows = run_table(table_id, resolution)
        for row in rows:
            marker = {True: '✅', False: '❌', None: 'ℹ️'}[row['passed']]
            computed = 'n/a' if row['computed'] is None else f"{row['computed']:.6g}"
            click.echo(f"{marker} {row['quantity']:<26} {computed:>12} vs {row['reference']}"
                       + (f"  ({row['error']})" if row['error'] else ''))
        passed, failed, reference_only = summarize(rows)
        click.echo(f"{table_id}: {passed} passed, {failed} failed, {reference_only} reference-only")
        return [Output(f'paper-table-{table_id}', rows)]

    overrides = {'extras': {'table': table_id, 'resolution': resolution}}
    run_subcommand(ctx, f'paper-table-{table_id}', overrides, action)


@cli.command('ledger')
@click.option('--limit', type=int, default=10, show_default=True)
@click.option('--config-hash', default=None, help='Only runs of this configuration.')
@click.pass_context
def ledger_command(ctx, limit, config_hash):
    """Recent runs recorded in the output directory's ledger."""
    output_dir = ctx.obj.get('output_dir') or DEFAULT_OUTPUT_DIR
    path = database.ledger_path(output_dir)
    database.init_db(path)
    if config_hash:
        for run in database.runs_for_config(config_hash, path):
            marker = '✅' if run['exit_code'] == 0 else '❌'
            click.echo(f"{marker} #{run['id']} {run['subcommand']} exit={run['exit_code']} {run['started_at']}")
        return
    database.print_ledger_summary(path, limit)


if __name__ == "__main__":
    cli(obj={})

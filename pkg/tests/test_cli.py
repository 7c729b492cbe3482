import json

import numpy as np
import pytest

import falqon
from src.oracle_metrics import brute_force
from src.problem import cost_table, problem_from_dict


def _stdout_json(capsys):
    return json.loads(capsys.readouterr().out)


def test_spectrum(configs_dir, capsys):
    assert falqon.main(['spectrum', str(configs_dir / 'svp.json')]) == 0
    out = _stdout_json(capsys)
    assert out['e_f_min'] == 1.0 and out['optimal_set'] == [[1, 0, 0]]


def test_resources(configs_dir, capsys):
    assert falqon.main(['resources', str(configs_dir / 'svp.json'), '--algorithm', 'falqon_ic']) == 0
    assert _stdout_json(capsys)['qubits'] == 3
    assert falqon.main(['resources', str(configs_dir / 'svp.json'), '--algorithm', 'falqon']) == 0
    assert _stdout_json(capsys)['qubits'] == 4


def test_arguments_go_to_stderr(configs_dir, capsys):
    assert falqon.main(['spectrum', str(configs_dir / 'svp.json')]) == 0
    captured = capsys.readouterr()
    assert 'Namespace(' in captured.err
    assert json.loads(captured.out)['e_min'] == 0.0


def test_convert_svp(configs_dir, tmp_path):
    out = tmp_path / 'qubo.json'
    assert falqon.main(['convert', str(configs_dir / 'svp.json'), '--gamma', '3', '--output', str(out)]) == 0
    d = json.loads(out.read_text())
    assert d['n'] == 4 and d['n_slack'] == 1 and d['penalties']['gammas'] == [3.0]
    assert d['penalties']['slack_indices'] == [3]
    qubo = problem_from_dict(d)
    assert np.allclose(cost_table(qubo), [3, 3, 5, 8, 2, 5, 9, 15, 4, 1, 6, 6, 3, 3, 10, 13], atol=1e-12)
    assert brute_force(qubo).optimal_set == [(1, 0, 0)]


def test_convert_unconstrained(tmp_path, capsys):
    path = tmp_path / 'plain.json'
    path.write_text(json.dumps({'c': [1.0, -2.0], 'T': [[0.0, 0.5], [0.5, 0.0]], 'a': 1.0}))
    assert falqon.main(['convert', str(path)]) == 0
    out = _stdout_json(capsys)
    assert out['c'] == [1.0, -2.0] and out['T'] == [[0.0, 0.5], [0.5, 0.0]] and 'n_slack' not in out
    assert out['penalties']['slack_indices'] == []


def test_convert_rejects_bad_gamma(configs_dir, capsys):
    assert falqon.main(['convert', str(configs_dir / 'svp.json'), '--gamma', '-1']) == 2
    assert _stdout_json(capsys)['error'] == 'InvalidHyperparameterError'


def test_convert_gamma_strategies(configs_dir, capsys):
    svp = str(configs_dir / 'svp.json')
    cases = [(['--gamma-strategy', 'bound'], 12.0),
             (['--gamma-strategy', 'reference', '--x-ref', '0', '1', '0'], 3.0),
             (['--gamma-strategy', 'iterative', '--gamma-init', '0.5'], 2.0)]
    for flags, gamma in cases:
        assert falqon.main(['convert', svp] + flags) == 0
        penalties = _stdout_json(capsys)['penalties']
        assert penalties['gammas'] == [gamma] and penalties['strategy'] == flags[1]


def test_convert_gamma_strategy_errors(configs_dir, capsys):
    svp = str(configs_dir / 'svp.json')
    assert falqon.main(['convert', svp, '--gamma', '3', '--gamma-strategy', 'bound']) == 2
    assert _stdout_json(capsys)['error'] == 'InputError'
    assert falqon.main(['convert', svp, '--gamma-strategy', 'reference']) == 2
    assert _stdout_json(capsys)['error'] == 'ConfigError'
    assert falqon.main(['convert', svp, '--gamma-strategy', 'reference', '--x-ref', '0', '0', '0']) == 2
    assert _stdout_json(capsys)['error'] == 'InputError'


def test_solve(configs_dir, tmp_path):
    args = ['solve', str(configs_dir / 'svp.json'), '--config', str(configs_dir / 'ic_deflation.json'),
            '--set', 'layers=200']
    assert falqon.main(args + ['--output', str(tmp_path / 'a')]) == 0
    assert falqon.main(args + ['--output', str(tmp_path / 'b')]) == 0
    for name in ('trajectory.csv', 'trajectory.json', 'histogram.json', 'manifest.json'):
        assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes()
    manifest = json.loads((tmp_path / 'a' / 'manifest.json').read_text())
    assert manifest['config']['observable']['gamma'] == [3.0]
    assert manifest['config']['dt'] == 0.1 and manifest['config']['layers'] == 200
    assert 'gamma_selection' not in manifest
    header = (tmp_path / 'a' / 'trajectory.csv').read_text().splitlines()[0]
    assert header == 'layer,theta,lyapunov,energy,approx_ratio,success_prob'


def test_solve_histogram_counts(configs_dir, tmp_path):
    args = ['solve', str(configs_dir / 'svp.json'), '--config', str(configs_dir / 'ic_deflation.json'),
            '--set', 'layers=200', '--output', str(tmp_path)]
    assert falqon.main(args) == 0
    histogram = json.loads((tmp_path / 'histogram.json').read_text())
    assert sum(histogram['counts'].values()) == histogram['shots'] == 1024
    assert all(len(key) == 3 for key in histogram['counts'])
    assert sum(histogram['probabilities'].values()) == pytest.approx(1.0)

    assert falqon.main(args[:-2] + ['--set', 'shots=50', '--output', str(tmp_path / 'fifty')]) == 0
    histogram = json.loads((tmp_path / 'fifty' / 'histogram.json').read_text())
    assert sum(histogram['counts'].values()) == 50


def test_solve_gamma_strategy(configs_dir, tmp_path, capsys):
    base = ['solve', str(configs_dir / 'svp.json'), '--config', str(configs_dir / 'ic_deflation.json'),
            '--set', 'layers=20']
    assert falqon.main(base + ['--gamma-strategy', 'reference', '--x-ref', '0', '1', '0',
                               '--output', str(tmp_path / 'ref')]) == 0
    manifest = json.loads((tmp_path / 'ref' / 'manifest.json').read_text())
    assert manifest['gamma_selection'] == {'strategy': 'reference', 'gammas': [3.0]}
    assert manifest['config']['observable']['gamma'] == [3.0]

    assert falqon.main(base + ['--gamma-strategy', 'bound', '--output', str(tmp_path / 'bound')]) == 0
    manifest = json.loads((tmp_path / 'bound' / 'manifest.json').read_text())
    assert manifest['config']['observable']['gamma'] == [12.0]
    capsys.readouterr()

    folded = ['solve', str(configs_dir / 'svp.json'), '--config', str(configs_dir / 'ic_folded.json'),
              '--gamma-strategy', 'bound', '--output', str(tmp_path / 'fs')]
    assert falqon.main(folded) == 2
    assert _stdout_json(capsys)['error'] == 'ConfigError'


def test_missing_file(configs_dir, capsys):
    code = falqon.main(['solve', 'nowhere.json', '--config', str(configs_dir / 'ic_deflation.json')])
    assert code == 2
    out = _stdout_json(capsys)
    assert out['error'] == 'FileNotFoundError' and out['path'] == 'nowhere.json'


def test_bad_override(configs_dir, capsys, tmp_path):
    code = falqon.main(['solve', str(configs_dir / 'svp.json'), '--config', str(configs_dir / 'ic_deflation.json'),
                        '--set', 'observable.variant=penalty', '--output', str(tmp_path)])
    assert code == 2
    assert _stdout_json(capsys)['error'] == 'ConfigError'


def test_qubit_cap(tmp_path, capsys):
    path = tmp_path / 'big.json'
    path.write_text(json.dumps({'c': [1.0] * 25}))
    assert falqon.main(['spectrum', str(path)]) == 3
    assert _stdout_json(capsys)['error'] == 'QubitCapError'


def test_tune_dt(configs_dir, capsys):
    code = falqon.main(['tune-dt', str(configs_dir / 'svp.json'), '--config', str(configs_dir / 'falqon.json'),
                        '--grid', '0.08', '0.07', '0.06'])
    assert code == 0
    assert _stdout_json(capsys)['dt'] == 0.07


def test_experiment(tmp_path, capsys):
    plan = tmp_path / 'plan.json'
    plan.write_text(json.dumps({
        'family': 'random_scaling', 'sizes': [3], 'instances_per_size': 2, 'dt_table': {'3': 0.02},
        'base': {'algorithm': 'falqon_ic', 'observable': {'variant': 'deflation', 'gamma': [8.0]},
                 'dt': 0.02, 'layers': 10}}))
    assert falqon.main(['experiment', str(plan), '--output', str(tmp_path / 'out'), '--workers', '1']) == 0
    assert (tmp_path / 'out' / 'n3' / 'instance_001.csv').exists()
    assert (tmp_path / 'out' / 'manifest.json').exists()
    assert capsys.readouterr().out == ''


def test_overrides():
    d = falqon.apply_overrides({'law': {'kappa': 1.0}}, ['law.kappa=2.5', 'observable.variant=deflation', 'dt=0.1'])
    assert d == {'law': {'kappa': 2.5}, 'observable': {'variant': 'deflation'}, 'dt': 0.1}

import json

import numpy as np
import pytest

from src.algorithms import (RunConfig, estimate_energy_gap, make_ic_runner, prepare, run, run_sweep)
from src.control import FeedbackLaw
from src.errors import ConfigError, InstanceError
from src.problem import QcboProblem, random_instance
from src.qc_observable import ObservableSpec, iterative_hyperparameter
from src.simulator import MixerSpec


def _cfg(algorithm='falqon_ic', variant='deflation', **kwargs):
    spec = {'deflation': ObservableSpec('deflation', gammas=[3.0]),
            'folded_spectrum': ObservableSpec('folded_spectrum', alpha=1.3),
            'penalty_ic': ObservableSpec('penalty_ic', gammas=[3.0])}[variant]
    return RunConfig(algorithm, spec, FeedbackLaw('identity', 1.0), **kwargs)


def test_pairing_is_checked():
    with pytest.raises(ConfigError):
        _cfg('falqon', 'deflation')
    with pytest.raises(ConfigError):
        _cfg('falqon_ic', 'penalty_ic')


def test_config_validation():
    with pytest.raises(ConfigError):
        _cfg(dt=0.0)
    with pytest.raises(ConfigError):
        _cfg(layers=0)
    with pytest.raises(ConfigError):
        _cfg(controller_mode='magic')
    with pytest.raises(ConfigError):
        RunConfig.from_dict({'algorithm': 'falqon_ic', 'depth': 3})


def test_controller_mode_defaults():
    assert _cfg().controller_mode == 'expectation_split'
    assert _cfg(variant='folded_spectrum').controller_mode == 'analytic'


def test_config_dict_round_trip():
    cfg = _cfg(dt=0.05, layers=7, mixer=MixerSpec.from_dict({'kind': 'pauli_sum',
                                                             'terms': [{'string': 'XII', 'coeff': 1.0}]}))
    again = RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again.to_dict() == cfg.to_dict()


def test_generators(svp):
    hp, qc = prepare(svp, _cfg('falqon', 'penalty_ic'))
    assert hp is qc.diag and qc.n == 4
    hp, qc = prepare(svp, _cfg('falqon_c', 'penalty_ic'))
    assert np.array_equal(hp.diag, np.repeat([0, 5, 2, 9, 1, 6, 3, 10], 2))
    hp, qc = prepare(svp, _cfg())
    assert np.array_equal(hp.diag, [0, 5, 2, 9, 1, 6, 3, 10])


def test_single_layer_records_the_initial_state(svp):
    traj = run(svp, _cfg(dt=0.1, layers=1))
    assert len(traj.records) == 1
    record = traj.records[0]
    assert record.theta == 0.0 and record.layer == 1
    assert record.success_prob == pytest.approx(1 / 8)
    assert record.approx_ratio == pytest.approx(34 / 72)
    assert record.energy == pytest.approx(4.5)


def test_deflation_on_svp(svp):
    traj = run(svp, _cfg(dt=0.1, layers=1000))
    assert len(traj.records) == 1000
    assert traj.argmax() == 4
    assert traj.records[-1].success_prob >= 0.9
    assert traj.is_monotone()


def test_folded_spectrum_on_svp(svp):
    traj = run(svp, _cfg(variant='folded_spectrum', dt=0.03, layers=1000))
    assert traj.argmax() == 4
    assert traj.is_monotone()


def test_falqon_c_on_svp(svp):
    traj = run(svp, _cfg('falqon_c', 'penalty_ic', dt=0.08, layers=1000))
    probs = traj.final_state.probabilities()
    others = np.delete(probs, [8, 9])
    assert min(probs[8], probs[9]) > others.max()
    assert traj.is_monotone()


def test_falqon_on_svp(svp):
    traj = run(svp, _cfg('falqon', 'penalty_ic', dt=0.08, layers=1000))
    assert int(np.argmax(traj.final_state.probabilities())) == 9
    assert traj.argmax() == 4
    assert run(svp, _cfg('falqon', 'penalty_ic', dt=0.07, layers=1000)).is_monotone()


@pytest.mark.parametrize('mode', ['analytic', 'expectation_split', 'finite_diff'])
def test_controller_modes_agree(svp, mode):
    reference = run(svp, _cfg(dt=0.1, layers=40, controller_mode='analytic'))
    traj = run(svp, _cfg(dt=0.1, layers=40, controller_mode=mode))
    assert np.allclose(traj.thetas, reference.thetas, atol=1e-6)


def test_pauli_controller_mode(svp):
    reference = run(svp, _cfg(variant='folded_spectrum', dt=0.03, layers=40))
    traj = run(svp, _cfg(variant='folded_spectrum', dt=0.03, layers=40, controller_mode='pauli'))
    assert np.allclose(traj.thetas, reference.thetas, atol=1e-9)
    with pytest.raises(ConfigError):
        run(svp, _cfg(dt=0.1, layers=2, controller_mode='pauli'))


def test_theta_follows_the_previous_layer(svp):
    traj = run(svp, _cfg(dt=0.1, layers=5))
    assert traj.thetas[0] == 0.0
    assert traj.thetas[1] != 0.0


def test_adaptive_step_stays_below_the_bound(svp):
    traj = run(svp, _cfg(dt=0.5, layers=100, adaptive_dt=True))
    for prev, record in zip(traj.records, traj.records[1:]):
        if record.dt_bound:
            assert record.dt <= 0.9 * record.dt_bound + 1e-15
    assert traj.is_monotone()


def test_runs_are_deterministic(svp):
    a = run(svp, _cfg(dt=0.1, layers=50, shots=100, seed=4))
    b = run(svp, _cfg(dt=0.1, layers=50, shots=100, seed=4))
    assert a.to_dict() == b.to_dict()
    assert sum(a.counts.values()) == 100


def test_counts_cover_decision_bits_only(svp):
    traj = run(svp, _cfg('falqon', 'penalty_ic', dt=0.08, layers=30, shots=200, seed=1))
    assert traj.final_state.n == 4
    assert all(len(key) == 3 for key in traj.counts) and sum(traj.counts.values()) == 200
    out = traj.histogram_json(shots=500, seed=2)
    assert set(out) == {'counts', 'shots', 'probabilities'}
    assert sum(out['counts'].values()) == 500
    assert set(out['counts']) <= set(out['probabilities'])


def test_flat_costs_record_nan_ratio():
    p = QcboProblem(c=[0.0, 0.0], invalid_configs=[[0, 0]])
    traj = run(p, RunConfig('falqon_ic', ObservableSpec('deflation', gammas=[1.0]), dt=0.1, layers=3))
    assert np.isnan(traj.records[-1].approx_ratio)
    assert traj.to_dict()['records'][-1]['approx_ratio'] is None


def test_sweep_is_ordered_and_worker_independent():
    problems = [random_instance(4, seed=s) for s in range(3)]
    cfg = RunConfig('falqon_ic', ObservableSpec('deflation', gammas=[8.0]), dt=0.02, layers=30)
    serial = run_sweep(problems, cfg, workers=1)
    pooled = run_sweep(problems, cfg, workers=2)
    assert [t.to_dict() for t in serial] == [t.to_dict() for t in pooled]
    assert [t.config['seed'] for t in serial] == [0, 1, 2]
    assert run_sweep([], cfg) == []


def test_sweep_attaches_the_instance_index():
    # the second problem has an equality constraint but the observable carries no beta
    problems = [random_instance(3, seed=0), QcboProblem(c=[0.0, 0.0, 0.0], equalities=[{'c': [1, 1, 1], 'a': -1}])]
    cfg = RunConfig('falqon_ic', ObservableSpec('folded_spectrum', alpha=0.0, trust_fs=True), dt=0.02, layers=3)
    with pytest.raises(InstanceError) as info:
        run_sweep(problems, cfg, workers=1)
    assert info.value.index == 1
    kept = run_sweep(problems, cfg, workers=1, keep_errors=True)
    assert isinstance(kept[1], InstanceError)


def test_energy_gap_estimate(svp):
    gap = estimate_energy_gap(svp, _cfg(dt=0.08, layers=300))
    assert 0.0 < gap <= 10.0 + 1e-9


def test_dynamic_gamma_runner(svp):
    runner = make_ic_runner(svp, _cfg(dt=0.1, layers=1000))
    assert runner(3.0) is False
    assert iterative_hyperparameter(runner, 3.0) == 3.0

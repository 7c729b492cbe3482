import argparse
import json
import logging
import os
import sys
from dataclasses import replace

from src.algorithms import CSV_HEADER, DEFAULT_SHOTS, RunConfig, default_workers, make_ic_runner, run
from src.errors import ConfigError, FalqonError, InputError, QubitCapError
from src.experiments import ExperimentPlan, run_plan, tune_dt
from src.optim_utils import manifest, set_random_seed, write_csv, write_json
from src.oracle_metrics import ALGORITHMS, brute_force, resource_estimate
from src.problem import QcboProblem, inequality_to_equality, load_problem, problem_to_dict, to_qubo
from src.qc_observable import GAMMA_STRATEGIES, ObservableSpec, argmin_is_invalid, penalty_by_bound, select_gammas

logger = logging.getLogger('falqon')


def build_parser():
    parser = argparse.ArgumentParser('falqon')
    parser.add_argument('-v', '--verbose', action='store_true')
    sub = parser.add_subparsers(dest='command', required=True)

    solve = sub.add_parser('solve')
    solve.add_argument('problem')
    solve.add_argument('--config', required=True)
    solve.add_argument('--output', default='results')
    solve.add_argument('--progress', action='store_true')

    convert = sub.add_parser('convert')
    convert.add_argument('problem')
    convert.add_argument('--output', default=None)

    spectrum = sub.add_parser('spectrum')
    spectrum.add_argument('problem')
    spectrum.add_argument('--output', default=None)

    resources = sub.add_parser('resources')
    resources.add_argument('problem')
    resources.add_argument('--algorithm', choices=ALGORITHMS, default='falqon_ic')
    resources.add_argument('--output', default=None)

    experiment = sub.add_parser('experiment')
    experiment.add_argument('plan')
    experiment.add_argument('--output', default=None)
    experiment.add_argument('--workers', type=int, default=None)
    experiment.add_argument('--progress', action='store_true')

    tune = sub.add_parser('tune-dt')
    tune.add_argument('problem', nargs='+')
    tune.add_argument('--config', required=True)
    tune.add_argument('--grid', type=float, nargs='+', required=True)
    tune.add_argument('--workers', type=int, default=None)
    tune.add_argument('--output', default=None)

    for p in (convert, resources):
        p.add_argument('--gamma', type=float, nargs='+', default=None)
        p.add_argument('--beta', type=float, nargs='+', default=None)
    for p in (convert, solve):
        p.add_argument('--gamma-strategy', choices=GAMMA_STRATEGIES, default=None)
        p.add_argument('--x-ref', type=int, nargs='+', default=None,
                       help='feasible outcome for --gamma-strategy reference')
        p.add_argument('--gamma-init', type=float, default=1.0, help='starting value for --gamma-strategy iterative')
    for p in (solve, experiment, tune):
        p.add_argument('--set', dest='overrides', action='append', default=[], metavar='KEY=VALUE')
    return parser


def apply_overrides(d, overrides):
    """--set a.b.c=value on a nested dict; values are JSON where they parse, strings otherwise."""
    for item in overrides:
        if '=' not in item:
            raise InputError(f'override {item!r} is not of the form key=value')
        key, raw = item.split('=', 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = d
        *parents, leaf = key.split('.')
        for part in parents:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise InputError(f'override {key!r} descends into a non-object')
        node[leaf] = value
    return d


def load_json(path):
    with open(path) as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            raise InputError(f'{path}: {e}') from e


def load_config(path, overrides):
    return RunConfig.from_dict(apply_overrides(load_json(path), overrides))


def emit(obj, output=None):
    if output:
        write_json(output, obj)
    else:
        print(json.dumps(obj, sort_keys=True))


def resolve_gammas(args, problem, make_runner):
    """Explicit --gamma values, or the ones --gamma-strategy picks. None when neither is given."""
    if args.gamma_strategy is None:
        return getattr(args, 'gamma', None)
    if getattr(args, 'gamma', None) is not None:
        raise InputError('--gamma and --gamma-strategy cannot be combined')
    runner = make_runner() if args.gamma_strategy == 'iterative' else None
    gammas = select_gammas(problem, args.gamma_strategy, x_ref=args.x_ref, initial=args.gamma_init, runner=runner)
    logger.info(f'Gamma strategy {args.gamma_strategy}: {gammas}')
    return gammas


def cmd_solve(args):
    problem = load_problem(args.problem)
    cfg = load_config(args.config, args.overrides)
    extra = {}
    if args.gamma_strategy is not None:
        if cfg.observable.variant not in ('penalty_ic', 'deflation'):
            raise ConfigError(f'a {cfg.observable.variant} observable has no gamma to select')
        gammas = resolve_gammas(args, problem, lambda: make_ic_runner(problem, cfg))
        cfg = replace(cfg, observable=replace(cfg.observable, gammas=gammas))
        extra['gamma_selection'] = {'strategy': args.gamma_strategy, 'gammas': gammas}
    set_random_seed(cfg.seed)
    traj = run(problem, cfg, progress=args.progress)
    write_csv(os.path.join(args.output, 'trajectory.csv'), CSV_HEADER, traj.csv_rows())
    write_json(os.path.join(args.output, 'trajectory.json'), traj.to_dict())
    write_json(os.path.join(args.output, 'histogram.json'), traj.histogram_json(cfg.shots or DEFAULT_SHOTS, cfg.seed))
    write_json(os.path.join(args.output, 'manifest.json'),
               manifest(cfg.to_dict(), cfg.seed, problem=problem_to_dict(problem), **extra))
    logger.info(f'Final success probability {traj.records[-1].success_prob:.4f}, results in {args.output}')


def cmd_convert(args):
    problem = inequality_to_equality(load_problem(args.problem))
    bound = penalty_by_bound(problem) if problem.has_constraints else None
    betas = args.beta if args.beta is not None else bound
    spec = ObservableSpec('penalty_ic', betas=betas if problem.equalities else [])
    gammas = resolve_gammas(args, problem, lambda: argmin_is_invalid(problem, spec))
    if gammas is None:
        gammas = bound
    qubo = to_qubo(problem, gammas, betas)
    out = problem_to_dict(QcboProblem(c=qubo.c, T=qubo.T, a=qubo.a, n_slack=qubo.n_slack))
    out['penalties'] = {**qubo.penalties, 'slack_indices': list(qubo.slack_indices)}
    if args.gamma_strategy is not None:
        out['penalties']['strategy'] = args.gamma_strategy
    emit(out, args.output)


def cmd_spectrum(args):
    emit(brute_force(load_problem(args.problem)).to_dict(), args.output)


def cmd_resources(args):
    est = resource_estimate(load_problem(args.problem), args.algorithm, args.gamma, args.beta)
    emit(est.to_dict(), args.output)


def cmd_experiment(args):
    plan_dict = apply_overrides(load_json(args.plan), args.overrides)
    if args.output:
        plan_dict['output_dir'] = args.output
    if args.workers is not None:
        plan_dict['workers'] = args.workers
    plan = ExperimentPlan.from_dict(plan_dict)
    if plan.workers is None:
        plan.workers = default_workers()
    set_random_seed(plan.seed)
    run_plan(plan, progress=args.progress)
    if plan.output_dir:
        write_json(os.path.join(plan.output_dir, 'manifest.json'), manifest(plan.to_dict(), plan.seed))


def cmd_tune_dt(args):
    problems = [load_problem(path) for path in args.problem]
    cfg = load_config(args.config, args.overrides)
    dt = tune_dt(problems, cfg, args.grid, args.workers)
    emit({'dt': dt, 'grid': args.grid}, args.output)


COMMANDS = {'solve': cmd_solve, 'convert': cmd_convert, 'spectrum': cmd_spectrum, 'resources': cmd_resources,
            'experiment': cmd_experiment, 'tune-dt': cmd_tune_dt}


def _fail(e, path=None):
    print(json.dumps({'error': type(e).__name__, 'message': str(e), 'path': path}, sort_keys=True))


def main(argv=None):
    args = build_parser().parse_args(argv)
    # stdout carries JSON only
    print(args, file=sys.stderr)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format='%(asctime)s %(name)s %(levelname)s %(message)s')
    try:
        COMMANDS[args.command](args)
    except FileNotFoundError as e:
        _fail(e, e.filename)
        return 2
    except QubitCapError as e:
        _fail(e)
        return 3
    except ValueError as e:
        _fail(e)
        return 2
    except FalqonError as e:
        _fail(e)
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(main())

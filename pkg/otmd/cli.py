"""Command line interface: ``otmd <command> [flags]``.

Every flag may also come from a JSON file given with ``--config`` whose keys
are the flag names (``n_list`` or ``n-list``); flags on the command line win.
Exit codes: 0 success, 2 scenario or configuration error, 3 protocol error,
4 internal error.
"""
import argparse
import json
import os
import sys

from . import __version__
from .errors import ConfigurationError, EXIT_OK, OtmdError
from .grid import DEFAULT_DEMAND_VPH_PER_LANE, LinkParams, generate_grid
from .helpers import dump_json, load_json
from .logger import LoggingProvider, config, getLogger
from .partition import (
    all_decoder_maps, build_metagraph, build_subnetworks, load_decoder_maps,
    load_metagraph, load_partition, load_subnetwork, partition_nodes,
    save_distribution,
)
from .runner import (
    RunConfig, RunMode, benchmark, diff_dumps, run, run_worker, slower_counts,
    write_dump,
)
from .scenario import SimulationParams, load_scenario, save_scenario
from .transports import TransportName, get_transport


def _add_common(parser):
    parser.add_argument('--config', help='JSON file with default flag values')


def build_parser():
    parser = argparse.ArgumentParser(
        prog='otmd', description='Distributed macroscopic traffic simulation.')
    parser.add_argument('--version', action='version', version=__version__)
    _add_common(parser)
    commands = parser.add_subparsers(dest='command')
    subparsers = {}

    grid = commands.add_parser('gen-grid', help='write a synthetic grid scenario')
    grid.add_argument('--rows', type=int)
    grid.add_argument('--cols', type=int)
    grid.add_argument('--demand', '--demand-vph-per-lane', dest='demand',
                      type=float, default=DEFAULT_DEMAND_VPH_PER_LANE,
                      help='vehicles per hour per lane on every source link')
    grid.add_argument('--lanes', type=int, default=1)
    grid.add_argument('--length', type=float, default=250.0)
    grid.add_argument('--dt', type=float, default=2.0)
    grid.add_argument('--steps', type=int, default=100)
    grid.add_argument('--out')
    subparsers['gen-grid'] = grid

    part = commands.add_parser('partition', help='split a scenario into fragments')
    part.add_argument('--scenario')
    part.add_argument('--n', type=int)
    part.add_argument('--seed', type=int, default=0)
    part.add_argument('--import', dest='import_path',
                      help='use a partition computed elsewhere')
    part.add_argument('--out-dir')
    subparsers['partition'] = part

    sim = commands.add_parser('run', help='simulate a scenario')
    sim.add_argument('--scenario')
    sim.add_argument('--fragments-dir', help='output of the partition command')
    sim.add_argument('--mode', choices=[RunMode.SEQUENTIAL, RunMode.LOCAL, RunMode.TCP],
                     default=RunMode.SEQUENTIAL)
    sim.add_argument('--n', type=int,
                     help='worker count; defaults to 1 or to the fragments directory')
    sim.add_argument('--steps', type=int)
    sim.add_argument('--seed', type=int, default=0)
    sim.add_argument('--import', dest='import_path')
    sim.add_argument('--dump', help='CSV file for state dumps')
    sim.add_argument('--dump-every', type=int, default=10)
    sim.add_argument('--metrics', help='CSV file for per-step metrics')
    sim.add_argument('--timing', help='JSON file for the timing report')
    sim.add_argument('--link-metrics', action='store_true',
                     help='record per-link densities and flows with every dump')
    sim.add_argument('--timeout', type=float, default=30.0)
    sim.add_argument('--roster', help='worker addresses for tcp mode')
    sim.add_argument('--worker', type=int, help='join a tcp run as this worker')
    sim.add_argument('--spawn-local', action='store_true',
                     help='start every tcp worker on this host')
    subparsers['run'] = sim

    bench = commands.add_parser('bench', help='time runs over several worker counts')
    bench.add_argument('--scenario')
    bench.add_argument('--n-list', default='1,2,4')
    bench.add_argument('--transport', choices=[TransportName.LOCAL, TransportName.TCP],
                       default=TransportName.LOCAL)
    bench.add_argument('--steps', type=int)
    bench.add_argument('--seed', type=int, default=0)
    bench.add_argument('--timeout', type=float, default=30.0)
    bench.add_argument('--out', help='CSV file for the timing table')
    subparsers['bench'] = bench

    diff = commands.add_parser('diff', help='compare two state dumps')
    diff.add_argument('--a')
    diff.add_argument('--b')
    diff.add_argument('--tol', type=float)
    subparsers['diff'] = diff

    for sub in subparsers.values():
        _add_common(sub)
    return parser, subparsers


def parse_args(argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument('--config')
    known, _ = pre.parse_known_args(argv)
    parser, subparsers = build_parser()
    if known.config:
        try:
            defaults = load_json(known.config)
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigurationError('cannot read config %s: %s' % (known.config, err)) from err
        if not isinstance(defaults, dict):
            raise ConfigurationError('config %s must hold a JSON object' % known.config)
        defaults = {key.replace('-', '_'): value for key, value in defaults.items()}
        for sub in subparsers.values():
            sub.set_defaults(**defaults)
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_usage(sys.stderr)
        raise ConfigurationError('a command is required')
    return args


def _required(args, *names):
    for name in names:
        if getattr(args, name, None) is None:
            raise ConfigurationError('--%s is required for %s'
                                     % (name.replace('_', '-'), args.command))


def load_roster(path):
    """Worker addresses: a JSON object or ``index host port`` lines."""
    try:
        if path.endswith('.json'):
            doc = load_json(path)
            return {int(i): (host, int(port)) for i, (host, port) in doc.items()}
        roster = {}
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith('#'):
                    continue
                fields = line.split()
                if len(fields) == 2:
                    index, address = fields
                    host, port = address.rsplit(':', 1)
                else:
                    index, host, port = fields
                roster[int(index)] = (host, int(port))
        return roster
    except (OSError, ValueError, json.JSONDecodeError) as err:
        raise ConfigurationError('cannot read roster %s: %s' % (path, err)) from err


def cmd_gen_grid(args):
    _required(args, 'rows', 'cols', 'out')
    params = LinkParams(length=args.length, lanes=args.lanes)
    scenario = generate_grid(args.rows, args.cols, params, args.demand,
                             simulation=SimulationParams(dt=args.dt, steps=args.steps))
    save_scenario(scenario, args.out)
    print('%s: %d nodes, %d links' % (args.out, len(scenario.nodes), len(scenario.links)))


def cmd_partition(args):
    _required(args, 'scenario', 'out_dir')
    scenario = load_scenario(args.scenario)
    if args.import_path:
        partition = load_partition(args.import_path, scenario)
    else:
        _required(args, 'n')
        partition = partition_nodes(scenario, args.n, args.seed)
    subnetworks = build_subnetworks(scenario, partition)
    metagraph = build_metagraph(subnetworks)
    decoder_maps = all_decoder_maps(subnetworks, metagraph)
    save_distribution(args.out_dir, partition, subnetworks, metagraph, decoder_maps)
    print('%d subnetworks, %d neighbour pairs written to %s'
          % (partition.n, len(metagraph.edges), args.out_dir))


def _run_config(args):
    roster = load_roster(args.roster) if args.roster else None
    return RunConfig(
        scenario_path=args.scenario,
        mode=args.mode,
        n=1 if args.n is None else args.n,
        steps=args.steps,
        seed=args.seed,
        partition_path=args.import_path,
        fragments_dir=args.fragments_dir,
        dump_every=args.dump_every,
        dump=bool(args.dump),
        link_metrics=args.link_metrics,
        timeout=args.timeout,
        roster=roster,
    )


def _join_tcp(args, run_config):
    _required(args, 'fragments_dir', 'roster')
    subnetwork = load_subnetwork(args.fragments_dir, args.worker)
    metagraph = load_metagraph(args.fragments_dir)
    decoder_maps = load_decoder_maps(args.fragments_dir, args.worker, metagraph)
    transport = get_transport(TransportName.TCP, roster=run_config.roster)
    result = run_worker(subnetwork, metagraph, decoder_maps, transport, run_config)
    owned = set(subnetwork.owned_links)
    if args.dump:
        rows = sorted(row for snapshot in result.snapshots for row in snapshot.rows
                      if row[1] in owned)
        write_dump(rows, args.dump)
    if args.timing:
        dump_json(dict(vars(result.timing), setup=result.timing.setup), args.timing)
    print('worker %d finished %d steps' % (args.worker, len(result.metrics)))


def cmd_run(args):
    run_config = _run_config(args)
    if args.mode == RunMode.TCP and args.worker is not None:
        run_config.validate()
        return _join_tcp(args, run_config)
    if args.mode == RunMode.TCP and not args.spawn_local:
        raise ConfigurationError('tcp mode needs --worker (join a run) or --spawn-local')
    if args.scenario is None and args.fragments_dir is None:
        raise ConfigurationError('--scenario or --fragments-dir is required for run')
    if args.scenario and args.fragments_dir:
        raise ConfigurationError('--scenario and --fragments-dir exclude each other')
    if args.fragments_dir and args.mode != RunMode.SEQUENTIAL:
        try:
            size = load_metagraph(args.fragments_dir).n
        except OSError as err:
            raise ConfigurationError('%s is not a fragments directory: %s'
                                     % (args.fragments_dir, err.strerror or err)) from err
        if args.n is not None and args.n != size:
            raise ConfigurationError('%s holds %d subnetworks, --n is %d'
                                     % (args.fragments_dir, size, args.n))
        run_config.n = size
    run_config.validate()

    result = run(run_config)
    if args.dump:
        write_dump(result.dumps, args.dump)
    if args.metrics:
        result.metrics.to_frame().to_csv(args.metrics, index=False)
        base, ext = os.path.splitext(args.metrics)
        result.metrics.queues_frame().to_csv(base + '-queues' + (ext or '.csv'), index=False)
        if args.link_metrics:
            result.metrics.links_frame().to_csv(base + '-links' + (ext or '.csv'),
                                                index=False)
    if args.timing:
        dump_json(result.timing.to_dict(), args.timing)
    final = result.metrics.steps[-1]
    print('%s run, n=%d, %d steps: %.3f s, %.1f vehicles in network, %.1f exited'
          % (result.mode, result.n, result.steps, result.timing.total,
             final.in_network, final.exited))


def cmd_bench(args):
    _required(args, 'scenario')
    try:
        n_list = [int(v) for v in str(args.n_list).split(',') if v.strip()]
    except ValueError as err:
        raise ConfigurationError('--n-list must be comma separated integers') from err
    run_config = RunConfig(scenario_path=args.scenario, mode=args.transport,
                           n=max(n_list or [1]), steps=args.steps, seed=args.seed,
                           timeout=args.timeout, dump=False)
    run_config.validate()
    table = benchmark(run_config, n_list)
    if args.out:
        table.to_csv(args.out, index=False)
    print(table.to_string(index=False))
    for before, after in slower_counts(table):
        print('warning: total time grew from n=%d to n=%d' % (before, after))


def cmd_diff(args):
    _required(args, 'a', 'b')
    result = diff_dumps(args.a, args.b, args.tol)
    print('equal' if result.equal else result.message)
    return EXIT_OK if result.equal else 1


COMMANDS = {
    'gen-grid': cmd_gen_grid,
    'partition': cmd_partition,
    'run': cmd_run,
    'bench': cmd_bench,
    'diff': cmd_diff,
}


def main(argv=None):
    if not os.getenv('OTMD_LOG_PROVIDER'):
        config.set_provider(LoggingProvider.CONSOLE)
    log = getLogger(__name__)
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
        code = COMMANDS[args.command](args)
        return EXIT_OK if code is None else code
    except OtmdError as err:
        log.error('Command failed', extra={'error': err.message,
                                           'kind': type(err).__name__})
        print('error: %s' % err.message, file=sys.stderr)
        return err.exit_code

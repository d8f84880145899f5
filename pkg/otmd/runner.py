"""Runs a scenario in one process or across worker processes.

Distributed runs partition the network, hand each worker its fragment and
decoder maps, and merge the workers' owned-link states afterwards. Merged
state dumps are written with :func:`write_dump` and compared with
:func:`diff_dumps`; equal inputs give byte-identical dumps for every worker
count.
"""
import csv
import glob
import math
import multiprocessing
import socket
import time
import traceback

from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, NamedTuple, Optional, Tuple

import pandas as pd

from . import logger as otmd_logger
from .comm import DEFAULT_TIMEOUT, decode, encode, establish, exchange
from .engine import StepMetrics, SubnetworkEngine, log_step
from .errors import (
    ConfigurationError, InternalError, OtmdError, ProtocolError, rebuild_error,
)
from .helpers import Stopwatch
from .logger import getLogger
from .partition import (
    all_decoder_maps, build_metagraph, build_subnetworks, load_distribution,
    load_partition, merge_fragments, partition_nodes,
)
from .scenario import load_scenario
from .transports import TransportName, get_transport


DUMP_EVERY = 10
DUMP_COLUMNS = ('step', 'link', 'lane_group', 'cell', 'vehicle_type', 'next_link',
                'vehicles')
CONSERVATION_TOLERANCE = 1e-9


class RunMode:
    SEQUENTIAL = 'seq'
    LOCAL = 'local'
    TCP = 'tcp'


@dataclass
class RunConfig:
    scenario_path: Optional[str] = None
    mode: str = RunMode.SEQUENTIAL
    n: int = 1
    steps: Optional[int] = None
    seed: int = 0
    partition_path: Optional[str] = None
    fragments_dir: Optional[str] = None
    dump_every: int = DUMP_EVERY
    dump: bool = True
    link_metrics: bool = False
    timeout: float = DEFAULT_TIMEOUT
    roster: Optional[Mapping[int, Tuple[str, int]]] = None

    def validate(self):
        if self.mode not in (RunMode.SEQUENTIAL, RunMode.LOCAL, RunMode.TCP):
            raise ConfigurationError("unknown mode '%s'" % self.mode)
        if self.n < 1:
            raise ConfigurationError('n must be at least 1, got %d' % self.n)
        if self.mode == RunMode.SEQUENTIAL and self.n != 1:
            raise ConfigurationError('sequential mode runs a single process, got n=%d'
                                     % self.n)
        if self.steps is not None and self.steps < 1:
            raise ConfigurationError('steps must be at least 1, got %d' % self.steps)
        if self.dump_every < 1:
            raise ConfigurationError('dump interval must be at least 1')
        if self.timeout <= 0:
            raise ConfigurationError('timeout must be positive')
        if self.roster is not None and len(self.roster) < self.n:
            raise ConfigurationError('roster lists %d workers, need %d'
                                     % (len(self.roster), self.n))
        if self.partition_path and self.fragments_dir:
            raise ConfigurationError('--import and --fragments-dir exclude each other')


@dataclass
class StateSnapshot:
    worker: int
    step: int
    owned: Tuple[int, ...]
    rows: List[tuple]


@dataclass
class WorkerTiming:
    index: int
    load: float = 0.0
    communicator: float = 0.0
    decoders: float = 0.0
    compute: float = 0.0
    comm: float = 0.0
    comm_min: float = 0.0
    comm_mean: float = 0.0
    comm_max: float = 0.0
    total: float = 0.0

    @property
    def setup(self):
        return self.load + self.communicator + self.decoders


@dataclass
class WorkerResult:
    index: int
    timing: WorkerTiming
    metrics: List[StepMetrics]
    snapshots: List[StateSnapshot]
    densities: Dict[int, Dict[int, float]] = field(default_factory=dict)
    flows: Dict[int, Dict[int, float]] = field(default_factory=dict)
    queues: Dict[int, Dict[int, float]] = field(default_factory=dict)


@dataclass
class RunMetrics:
    steps: List[StepMetrics]
    link_densities: Dict[int, Dict[int, float]] = field(default_factory=dict)
    link_flows: Dict[int, Dict[int, float]] = field(default_factory=dict)
    source_queues: Dict[int, Dict[int, float]] = field(default_factory=dict)

    def conservation_residual(self, index=-1):
        entry = self.steps[index]
        return entry.entered - entry.exited - entry.in_network

    def max_conservation_residual(self):
        return max((abs(self.conservation_residual(i)) for i in range(len(self.steps))),
                   default=0.0)

    def to_frame(self):
        return pd.DataFrame([vars(s) for s in self.steps],
                            columns=['step', 'in_network', 'entered', 'exited', 'queued'])

    def links_frame(self):
        records = [{'step': step, 'link': lid, 'density': value,
                    'flow': self.link_flows.get(step, {}).get(lid, 0.0)}
                   for step, links in sorted(self.link_densities.items())
                   for lid, value in sorted(links.items())]
        return pd.DataFrame(records, columns=['step', 'link', 'density', 'flow'])

    def queues_frame(self):
        records = [{'step': step, 'link': lid, 'queued': value}
                   for step, links in sorted(self.source_queues.items())
                   for lid, value in sorted(links.items())]
        return pd.DataFrame(records, columns=['step', 'link', 'queued'])


@dataclass
class TimingReport:
    setup: Dict[str, float]
    workers: List[WorkerTiming]
    wall_clock: float = 0.0

    @property
    def total(self):
        return self.wall_clock

    @property
    def compute(self):
        return max((w.compute for w in self.workers), default=0.0)

    @property
    def comm(self):
        if not self.workers:
            return 0.0
        return math.fsum(w.comm for w in self.workers) / len(self.workers)

    @property
    def setup_total(self):
        return math.fsum(self.setup.values()) + max(
            (w.setup for w in self.workers), default=0.0)

    def to_frame(self):
        records = [dict(vars(w), setup=w.setup) for w in self.workers]
        return pd.DataFrame(records)

    def to_dict(self):
        return {
            'setup': dict(self.setup),
            'wall_clock': self.wall_clock,
            'compute': self.compute,
            'comm': self.comm,
            'workers': [dict(vars(w), setup=w.setup) for w in self.workers],
        }


@dataclass
class RunResult:
    mode: str
    n: int
    steps: int
    dumps: List[tuple]
    metrics: RunMetrics
    timing: TimingReport


@dataclass
class Distribution:
    partition: object
    subnetworks: list
    metagraph: object
    decoder_maps: dict
    timings: Dict[str, float]

    def owners(self):
        return {lid: sub.index for sub in self.subnetworks for lid in sub.owned_links}

    @property
    def steps(self):
        return self.subnetworks[0].scenario.simulation.steps


def prepare_distribution(scenario, n, seed=0, partition_path=None):
    """Partition, fragments, metagraph and decoder maps, each stage timed."""
    timings = {}
    watch = Stopwatch()
    with watch.measure():
        if partition_path:
            partition = load_partition(partition_path, scenario)
            if partition.n != n:
                raise ConfigurationError('partition file has %d subsets, n=%d'
                                         % (partition.n, n))
        else:
            partition = partition_nodes(scenario, n, seed)
    timings['partition'] = watch.laps[-1]
    with watch.measure():
        subnetworks = build_subnetworks(scenario, partition)
    timings['subnetworks'] = watch.laps[-1]
    with watch.measure():
        metagraph = build_metagraph(subnetworks)
    timings['metagraph'] = watch.laps[-1]
    with watch.measure():
        decoder_maps = all_decoder_maps(subnetworks, metagraph)
    timings['decoders'] = watch.laps[-1]
    return Distribution(partition, subnetworks, metagraph, decoder_maps, timings)


def read_distribution(fragments_dir):
    """Distribution saved by the partition command."""
    watch = Stopwatch()
    with watch.measure():
        partition, subnetworks, metagraph, decoder_maps = load_distribution(fragments_dir)
    return Distribution(partition, subnetworks, metagraph, decoder_maps,
                        {'load': watch.total})


def _load_scenario(config):
    if config.fragments_dir:
        return merge_fragments(read_distribution(config.fragments_dir).subnetworks)
    return load_scenario(config.scenario_path)


class LinkSeries(NamedTuple):
    densities: Dict[int, Dict[int, float]]
    flows: Dict[int, Dict[int, float]]
    queues: Dict[int, Dict[int, float]]


def _log_conservation(metrics):
    residual = metrics.max_conservation_residual()
    if residual > CONSERVATION_TOLERANCE:
        getLogger(__name__).warning('Cumulative vehicle balance drifted', extra={
            'residual': residual, 'tolerance': CONSERVATION_TOLERANCE})


def _should_dump(step, steps, every):
    return step % every == 0 or step == steps


def _simulate(engine, channels, route, steps, config, index, timing):
    """Shared step loop of sequential runs and workers."""
    compute, comm = Stopwatch(), Stopwatch()
    metrics, snapshots = [], []
    densities, flows, queues = {}, {}, {}
    all_links = tuple(engine.models)
    for step in range(steps):
        with compute.measure():
            phase = engine.phase_a()
            outbound = {j: [] for j in channels}
            for packet in phase.outbound:
                outbound[route(engine.group_link[packet.lane_group])].append(packet)
            messages = {j: encode(outbound[j], channels[j], step) for j in channels}
        incoming = {}
        if channels:
            with comm.measure():
                incoming = exchange(channels, messages, step, config.timeout)
        with compute.measure():
            received = {j: decode(message, channels[j]) for j, message in incoming.items()}
            entry = engine.phase_b(received)
        log_step(entry)
        metrics.append(entry)
        if not _should_dump(entry.step, steps, config.dump_every):
            continue
        if config.dump:
            rows = [(entry.step,) + row for row in engine.state_rows(all_links)]
            snapshots.append(StateSnapshot(index, entry.step, engine.owned_links, rows))
        if config.link_metrics:
            densities[entry.step] = {lid: engine.link_density(lid)
                                     for lid in engine.owned_links}
            flows[entry.step] = {lid: engine.link_flow(lid) for lid in engine.owned_links}
        queues[entry.step] = engine.source_queues()

    timing.compute = compute.total
    per_step = comm.laps
    timing.comm = comm.total
    if per_step:
        timing.comm_min = min(per_step)
        timing.comm_max = max(per_step)
        timing.comm_mean = comm.total / len(per_step)
    return metrics, snapshots, LinkSeries(densities, flows, queues)


def run_sequential(config, scenario=None):
    config.validate()
    log = getLogger(__name__)
    wall = Stopwatch()
    with wall.measure():
        timing = WorkerTiming(index=0)
        load = Stopwatch()
        with load.measure():
            scenario = scenario or _load_scenario(config)
            engine = SubnetworkEngine(scenario)
        timing.load = load.total
        steps = config.steps or scenario.simulation.steps
        log.info('Starting sequential run', extra={
            'steps': steps, 'links': len(scenario.links)})
        metrics, snapshots, series = _simulate(
            engine, {}, None, steps, config, 0, timing)
        timing.total = timing.setup + timing.compute + timing.comm

    dumps = []
    for snapshot in snapshots:
        dumps.extend(merge_states([snapshot]))
    report = TimingReport(setup={}, workers=[timing], wall_clock=wall.total)
    run_metrics = RunMetrics(metrics, series.densities, series.flows, series.queues)
    _log_conservation(run_metrics)
    return RunResult(RunMode.SEQUENTIAL, 1, steps, dumps, run_metrics, report)


def run_worker(subnetwork, metagraph, decoder_maps, transport, config):
    """Simulates one subnetwork, exchanging boundary flows every step."""
    index = subnetwork.index
    otmd_logger.config.set_worker(index)
    log = getLogger(__name__)
    timing = WorkerTiming(index=index)
    started = time.perf_counter()

    load = Stopwatch()
    with load.measure():
        engine = SubnetworkEngine(subnetwork.scenario, owned_nodes=subnetwork.nodes,
                                  neighbors=metagraph.neighbors(index))
    timing.load = load.total

    setup = {}
    try:
        channels = establish(metagraph, index, transport, decoder_maps,
                             config.timeout, timings=setup)
        timing.communicator = setup['communicator']
        timing.decoders = setup['decoders']
        steps = config.steps or subnetwork.scenario.simulation.steps
        log.info('Worker starting', extra={
            'steps': steps, 'links': len(subnetwork.scenario.links),
            'neighbors': list(channels)})
        metrics, snapshots, series = _simulate(
            engine, channels, subnetwork.route, steps, config, index, timing)
    finally:
        transport.close()

    timing.total = time.perf_counter() - started
    return WorkerResult(index, timing, metrics, snapshots, series.densities, series.flows,
                        series.queues)


def _log_settings():
    cfg = otmd_logger.config
    return {
        'provider': cfg.get_provider(),
        'url': cfg.get_url(),
        'port': cfg.get_port(),
        'app_name': cfg.get_app_name(),
        'run': cfg.get_run(),
        'level': cfg.get_log_level(),
    }


def _apply_log_settings(settings):
    cfg = otmd_logger.config
    cfg.set_provider(settings['provider'])
    cfg.set_url(settings['url'])
    cfg.set_port(settings['port'])
    cfg.set_app_name(settings['app_name'])
    cfg.set_run(settings['run'])
    cfg.set_log_level(settings['level'])


def _worker_main(subnetwork, metagraph, decoder_maps, transport_name, options,
                 config, log_settings, result_pipe):
    _apply_log_settings(log_settings)
    try:
        transport = get_transport(transport_name, **options)
        result = run_worker(subnetwork, metagraph, decoder_maps, transport, config)
        result_pipe.send(('ok', result))
    except OtmdError as err:
        getLogger(__name__).error('Worker failed', extra={'error': err.message})
        result_pipe.send(('error', type(err).__name__, err.message))
    except Exception as err:
        result_pipe.send(('error', 'InternalError',
                          '%r\n%s' % (err, traceback.format_exc())))
    finally:
        result_pipe.close()


def free_roster(n, host='127.0.0.1'):
    """Loopback roster on ports the OS reports free."""
    roster = {}
    sockets = []
    for index in range(n):
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        sock.bind((host, 0))
        sockets.append(sock)
        roster[index] = (host, sock.getsockname()[1])
    for sock in sockets:
        sock.close()
    return roster


def _launch(distribution, config):
    ctx = multiprocessing.get_context()
    n = len(distribution.subnetworks)
    metagraph = distribution.metagraph

    options = {i: {} for i in range(n)}
    channel_ends = []
    if config.mode == RunMode.LOCAL:
        transport_name = TransportName.LOCAL
        for i in range(n):
            options[i]['pipes'] = {}
        for i, j in metagraph.edges:
            left, right = ctx.Pipe()
            options[i]['pipes'][j] = left
            options[j]['pipes'][i] = right
            channel_ends.extend((left, right))
    else:
        transport_name = TransportName.TCP
        roster = config.roster or free_roster(n)
        for i in range(n):
            options[i]['roster'] = roster

    log_settings = _log_settings()
    processes, results = [], []
    for sub in distribution.subnetworks:
        receiver, sender = ctx.Pipe(duplex=False)
        maps = {pair: m for pair, m in distribution.decoder_maps.items() if sub.index in pair}
        process = ctx.Process(
            target=_worker_main,
            args=(sub, metagraph, maps, transport_name, options[sub.index], config,
                  log_settings, sender),
            name='otmd-worker-%d' % sub.index)
        process.start()
        sender.close()
        processes.append(process)
        results.append(receiver)
    for end in channel_ends:
        end.close()

    outcomes = {}
    for index, receiver in enumerate(results):
        try:
            outcomes[index] = receiver.recv()
        except EOFError:
            outcomes[index] = ('error', 'InternalError',
                               'worker %d exited without a result' % index)
    for process in processes:
        process.join()

    failures = [(i, rebuild_error(o[1], o[2])) for i, o in sorted(outcomes.items())
                if o[0] == 'error']
    if failures:
        root = [f for f in failures if not isinstance(f[1], ProtocolError)] or failures
        index, error = root[0]
        getLogger(__name__).error('Distributed run failed', extra={
            'worker': index, 'error': error.message,
            'failed_workers': [i for i, _ in failures]})
        raise error
    return [outcomes[i][1] for i in range(n)]


def merge_states(snapshots, owners=None):
    """Merges per-worker snapshots of one step into canonical dump rows.

    Every link must be claimed by exactly one snapshot; ``owners`` (link to
    worker) additionally pins who that must be.
    """
    claims = {}
    seen = set()
    for snapshot in sorted(snapshots, key=lambda s: s.worker):
        for lid in snapshot.owned:
            if lid in claims:
                raise InternalError('link %d claimed by workers %d and %d'
                                    % (lid, claims[lid], snapshot.worker))
            claims[lid] = snapshot.worker
        seen.update(row[1] for row in snapshot.rows)
    unclaimed = sorted(seen - set(claims))
    if unclaimed:
        raise InternalError('link %d is claimed by no worker' % unclaimed[0])
    if owners:
        for lid, worker in claims.items():
            if owners.get(lid, worker) != worker:
                raise InternalError('link %d reported by worker %d but owned by %d'
                                    % (lid, worker, owners[lid]))
    rows = [row for snapshot in snapshots for row in snapshot.rows
            if claims[row[1]] == snapshot.worker]
    return sorted(rows)


def _merge_metrics(results):
    per_step = {}
    for result in sorted(results, key=lambda r: r.index):
        for entry in result.metrics:
            merged = per_step.get(entry.step)
            if merged is None:
                per_step[entry.step] = StepMetrics(entry.step, entry.in_network, entry.entered,
                                                   entry.exited, entry.queued)
                continue
            merged.in_network += entry.in_network
            merged.entered += entry.entered
            merged.exited += entry.exited
            merged.queued += entry.queued
    series = LinkSeries({}, {}, {})
    for result in results:
        for merged, part in ((series.densities, result.densities),
                             (series.flows, result.flows),
                             (series.queues, result.queues)):
            for step, links in part.items():
                merged.setdefault(step, {}).update(links)
    return RunMetrics([per_step[s] for s in sorted(per_step)], series.densities,
                      series.flows, series.queues)


def run_distributed(config, scenario=None):
    config.validate()
    if config.mode == RunMode.SEQUENTIAL:
        raise ConfigurationError('distributed runs need mode local or tcp')
    log = getLogger(__name__)
    wall = Stopwatch()
    with wall.measure():
        if scenario is None and config.fragments_dir:
            distribution = read_distribution(config.fragments_dir)
            if distribution.partition.n != config.n:
                raise ConfigurationError('%s holds %d subnetworks, n=%d'
                                         % (config.fragments_dir, distribution.partition.n,
                                            config.n))
        else:
            scenario = scenario or load_scenario(config.scenario_path)
            distribution = prepare_distribution(scenario, config.n, config.seed,
                                                config.partition_path)
        log.info('Starting distributed run', extra={
            'mode': config.mode, 'n': config.n,
            'overlap_links': sum(len(v) for v in distribution.metagraph.edges.values())})
        results = _launch(distribution, config)

        owners = distribution.owners()
        by_step = {}
        for result in results:
            for snapshot in result.snapshots:
                by_step.setdefault(snapshot.step, []).append(snapshot)
        dumps = []
        for step in sorted(by_step):
            dumps.extend(merge_states(by_step[step], owners))

    steps = config.steps or distribution.steps
    report = TimingReport(setup=distribution.timings,
                          workers=[r.timing for r in sorted(results, key=lambda r: r.index)],
                          wall_clock=wall.total)
    run_metrics = _merge_metrics(results)
    _log_conservation(run_metrics)
    log.info('Distributed run finished', extra={
        'n': config.n, 'wall_clock': report.wall_clock,
        'compute': report.compute, 'comm': report.comm})
    return RunResult(config.mode, config.n, steps, dumps, run_metrics, report)


def run(config, scenario=None):
    if config.mode == RunMode.SEQUENTIAL:
        return run_sequential(config, scenario)
    return run_distributed(config, scenario)


def benchmark(config, n_list, scenario=None):
    """Timing table for each worker count, speed-ups relative to one worker."""
    if not n_list or any(n < 1 for n in n_list):
        raise ConfigurationError('worker counts must be positive')
    scenario = scenario or load_scenario(config.scenario_path)
    counts = sorted(set(n_list) | {1})
    reports = {}
    for n in counts:
        result = run_distributed(replace(config, n=n, dump=False), scenario)
        reports[n] = result
        getLogger(__name__).info('Benchmark point', extra={
            'n': n, 'total': result.timing.total})

    baseline = reports[1].timing.total
    steps = reports[1].steps
    serial_rate = steps / baseline if baseline > 0 else 0.0
    records = []
    for n in sorted(set(n_list)):
        timing = reports[n].timing
        records.append({
            'n': n,
            'setup': timing.setup_total,
            'comm': timing.comm,
            'compute': timing.compute,
            'total': timing.total,
            'speedup': baseline / timing.total if timing.total > 0 else 0.0,
            'rate': steps / timing.total if timing.total > 0 else 0.0,
            'ideal_rate': n * serial_rate,
        })
    table = pd.DataFrame(records, columns=['n', 'setup', 'comm', 'compute', 'total',
                                           'speedup', 'rate', 'ideal_rate'])
    for before, after in slower_counts(table):
        getLogger(__name__).warning('Total time grew with more workers', extra={
            'n_before': before, 'n_after': after})
    return table


def slower_counts(table):
    """(n, next n) pairs of a benchmark table whose total time went up."""
    rows = list(zip(table['n'], table['total']))
    return [(int(n), int(next_n)) for (n, total), (next_n, next_total) in zip(rows, rows[1:])
            if next_total > total]


# ----------------------------------------------------------------- dumps

def _format_row(row):
    return [str(v) for v in row[:-1]] + [repr(float(row[-1]) + 0.0)]


def write_dump(rows, path):
    with open(path, 'w', newline='') as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(DUMP_COLUMNS)
        for row in rows:
            writer.writerow(_format_row(row))


def read_dump(paths):
    """Header and rows (as strings) of one or more dump files, in canonical order.

    ``paths`` may be a single path, a glob pattern or a comma separated list.
    """
    if isinstance(paths, str):
        names = []
        for part in paths.split(','):
            matches = sorted(glob.glob(part))
            names.extend(matches or [part])
    else:
        names = list(paths)
    header = None
    rows = []
    for name in names:
        try:
            with open(name, newline='') as fh:
                reader = csv.reader(fh)
                current = next(reader, None)
                if header is None:
                    header = current
                elif current != header:
                    raise ConfigurationError('%s: columns %s differ from %s'
                                             % (name, current, header))
                rows.extend(reader)
        except FileNotFoundError as err:
            raise ConfigurationError('dump file not found: %s' % name) from err
    if len(names) > 1:
        rows.sort(key=lambda r: tuple(int(v) for v in r[:-1]))
    return header, rows


@dataclass
class DumpDiff:
    equal: bool
    message: str = ''


def diff_dumps(a, b, tol=None):
    """Compares two dumps exactly, or within a relative tolerance."""
    header_a, rows_a = read_dump(a)
    header_b, rows_b = read_dump(b)
    if header_a != header_b:
        return DumpDiff(False, 'schema mismatch: %s vs %s' % (header_a, header_b))
    for row_a, row_b in zip(rows_a, rows_b):
        if row_a[:-1] != row_b[:-1]:
            return DumpDiff(False, 'row key mismatch: %s vs %s' % (row_a[:-1], row_b[:-1]))
        if row_a[-1] == row_b[-1]:
            continue
        if tol is not None:
            va, vb = float(row_a[-1]), float(row_b[-1])
            if abs(va - vb) <= tol * max(abs(va), abs(vb)):
                continue
        key = dict(zip(DUMP_COLUMNS, row_a[:-1]))
        return DumpDiff(False, 'first difference at step %(step)s link %(link)s lane group '
                        '%(lane_group)s cell %(cell)s vehicle type %(vehicle_type)s next '
                        'link %(next_link)s' % key + ': %s vs %s' % (row_a[-1], row_b[-1]))
    if len(rows_a) != len(rows_b):
        return DumpDiff(False, 'row count differs: %d vs %d' % (len(rows_a), len(rows_b)))
    return DumpDiff(True)

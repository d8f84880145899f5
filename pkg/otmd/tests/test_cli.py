import io
import json
import os
import tempfile
import unittest

from unittest import mock

import pandas as pd

from ..cli import load_roster, main, parse_args
from ..errors import ConfigurationError
from ..scenario import load_scenario
from .base import MERGE_DIVERGE, MINIMAL, PATH4, clean_otmd_config


class CliTestCase(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.stdout = io.StringIO()
        patchers = [mock.patch('sys.stdout', self.stdout),
                    mock.patch('sys.stderr', io.StringIO())]
        for patcher in patchers:
            patcher.start()
            self.addCleanup(patcher.stop)

    def tearDown(self):
        self.tmp.cleanup()
        clean_otmd_config()

    def path(self, name):
        return os.path.join(self.tmp.name, name)


class TestGenGrid(CliTestCase):

    def test_writes_a_loadable_grid(self):
        out = self.path('grid.json')

        code = main(['gen-grid', '--rows', '1', '--cols', '1', '--steps', '5', '--out', out])

        self.assertEqual(code, 0)
        scenario = load_scenario(out)
        self.assertEqual(len(scenario.nodes), 13)
        self.assertEqual(len(scenario.links), 18)
        self.assertEqual(scenario.simulation.steps, 5)
        self.assertIn('18 links', self.stdout.getvalue())

    def test_missing_flag(self):
        self.assertEqual(main(['gen-grid', '--rows', '1', '--cols', '1']), 2)

    def test_invalid_size(self):
        self.assertEqual(main(['gen-grid', '--rows', '0', '--cols', '1',
                               '--out', self.path('grid.json')]), 2)


class TestRun(CliTestCase):

    def test_zero_steps(self):
        self.assertEqual(main(['run', '--scenario', MINIMAL, '--steps', '0']), 2)

    def test_missing_scenario(self):
        self.assertEqual(main(['run', '--scenario', self.path('missing.json')]), 2)

    def test_no_command(self):
        self.assertEqual(main([]), 2)

    def test_outputs(self):
        dump, metrics, timing = self.path('d.csv'), self.path('m.csv'), self.path('t.json')

        code = main(['run', '--scenario', PATH4, '--dump', dump, '--metrics', metrics,
                     '--timing', timing, '--link-metrics'])

        self.assertEqual(code, 0)
        for name in (dump, metrics, timing, self.path('m-links.csv'),
                     self.path('m-queues.csv')):
            self.assertTrue(os.path.exists(name), name)
        with open(timing) as fh:
            self.assertIn('wall_clock', json.load(fh))

    def test_local_run_matches_sequential(self):
        sequential, local = self.path('seq.csv'), self.path('local.csv')

        self.assertEqual(main(['run', '--scenario', MERGE_DIVERGE, '--dump', sequential]), 0)
        self.assertEqual(main(['run', '--scenario', MERGE_DIVERGE, '--mode', 'local',
                               '--n', '2', '--dump', local]), 0)

        self.assertEqual(main(['diff', '--a', sequential, '--b', local]), 0)

    def test_tcp_needs_a_role(self):
        self.assertEqual(main(['run', '--scenario', PATH4, '--mode', 'tcp', '--n', '2']), 2)


class TestPipeline(CliTestCase):

    def setUp(self):
        super().setUp()
        self.grid = self.path('grid.json')
        self.fragments = self.path('fragments')
        self.sequential = self.path('seq.csv')
        main(['gen-grid', '--rows', '1', '--cols', '1', '--steps', '20', '--out', self.grid])
        main(['partition', '--scenario', self.grid, '--n', '2', '--out-dir', self.fragments])
        main(['run', '--scenario', self.grid, '--dump', self.sequential])

    def test_local_run_from_fragments(self):
        local = self.path('local.csv')

        code = main(['run', '--fragments-dir', self.fragments, '--mode', 'local',
                     '--dump', local])

        self.assertEqual(code, 0)
        self.assertIn('local run, n=2', self.stdout.getvalue())
        self.assertEqual(main(['diff', '--a', self.sequential, '--b', local]), 0)

    def test_sequential_run_from_fragments(self):
        rebuilt = self.path('rebuilt.csv')

        self.assertEqual(main(['run', '--fragments-dir', self.fragments, '--dump', rebuilt]), 0)
        self.assertEqual(main(['diff', '--a', self.sequential, '--b', rebuilt]), 0)

    def test_worker_count_must_match_fragments(self):
        self.assertEqual(main(['run', '--fragments-dir', self.fragments, '--mode', 'local',
                               '--n', '3']), 2)

    def test_scenario_and_fragments_exclude_each_other(self):
        self.assertEqual(main(['run', '--scenario', self.grid, '--fragments-dir',
                               self.fragments, '--mode', 'local']), 2)

    def test_not_a_fragments_directory(self):
        self.assertEqual(main(['run', '--fragments-dir', self.path('nothing'),
                               '--mode', 'local']), 2)


class TestBench(CliTestCase):

    def _table(self, totals):
        return pd.DataFrame({'n': [1, 2, 4][:len(totals)], 'setup': 0.0, 'comm': 0.0,
                             'compute': 0.0, 'total': totals, 'speedup': 1.0,
                             'rate': 1.0, 'ideal_rate': 1.0})

    def test_warns_when_more_workers_are_slower(self):
        with mock.patch('otmd.cli.benchmark', return_value=self._table([2.0, 1.0, 1.5])):
            code = main(['bench', '--scenario', PATH4, '--n-list', '1,2,4'])

        self.assertEqual(code, 0)
        self.assertIn('warning: total time grew from n=2 to n=4', self.stdout.getvalue())
        self.assertNotIn('n=1 to n=2', self.stdout.getvalue())

    def test_no_warning_when_totals_fall(self):
        with mock.patch('otmd.cli.benchmark', return_value=self._table([2.0, 1.0])):
            code = main(['bench', '--scenario', PATH4, '--n-list', '1,2'])

        self.assertEqual(code, 0)
        self.assertNotIn('warning', self.stdout.getvalue())


class TestPartition(CliTestCase):

    def test_writes_fragments(self):
        out = self.path('fragments')

        code = main(['partition', '--scenario', MERGE_DIVERGE, '--n', '2', '--out-dir', out])

        self.assertEqual(code, 0)
        for name in ('partition.txt', 'metagraph.json', 'fragment-0.json', 'fragment-1.json',
                     'subnetwork-0.json', 'decoders-0-1.json', 'decoders-1-0.json'):
            self.assertTrue(os.path.exists(os.path.join(out, name)), name)
        self.assertTrue(load_scenario(os.path.join(out, 'fragment-1.json')).fragment)

    def test_too_many_subnetworks(self):
        self.assertEqual(main(['partition', '--scenario', MINIMAL, '--n', '3',
                               '--out-dir', self.path('fragments')]), 2)


class TestDiff(CliTestCase):

    def setUp(self):
        super().setUp()
        self.dump = self.path('a.csv')
        main(['run', '--scenario', PATH4, '--dump', self.dump])

    def test_same_file(self):
        self.assertEqual(main(['diff', '--a', self.dump, '--b', self.dump]), 0)
        self.assertIn('equal', self.stdout.getvalue())

    def test_perturbed_file(self):
        with open(self.dump) as fh:
            lines = fh.read().splitlines()
        fields = lines[-1].split(',')
        fields[-1] = repr(float(fields[-1]) + 1.0)
        lines[-1] = ','.join(fields)
        perturbed = self.path('b.csv')
        with open(perturbed, 'w') as fh:
            fh.write('\n'.join(lines) + '\n')

        self.assertEqual(main(['diff', '--a', self.dump, '--b', perturbed]), 1)
        self.assertIn('first difference', self.stdout.getvalue())


class TestConfigFile(CliTestCase):

    def _config(self, doc):
        path = self.path('config.json')
        with open(path, 'w') as fh:
            json.dump(doc, fh)
        return path

    def test_flags_from_file(self):
        path = self._config({'scenario': PATH4, 'steps': 5, 'dump-every': 2})

        args = parse_args(['run', '--config', path])

        self.assertEqual(args.scenario, PATH4)
        self.assertEqual(args.steps, 5)
        self.assertEqual(args.dump_every, 2)

    def test_command_line_wins(self):
        path = self._config({'scenario': PATH4, 'steps': 5})

        args = parse_args(['--config', path, 'run', '--steps', '7'])

        self.assertEqual(args.steps, 7)
        self.assertEqual(args.scenario, PATH4)

    def test_unreadable_file(self):
        with self.assertRaises(ConfigurationError):
            parse_args(['run', '--config', self.path('missing.json')])

    def test_not_an_object(self):
        with self.assertRaises(ConfigurationError):
            parse_args(['run', '--config', self._config([1, 2])])


class TestRoster(CliTestCase):

    def test_text_roster(self):
        path = self.path('roster.txt')
        with open(path, 'w') as fh:
            fh.write('# workers\n0 127.0.0.1 7000\n1 10.0.0.2:7001\n')

        self.assertEqual(load_roster(path), {0: ('127.0.0.1', 7000), 1: ('10.0.0.2', 7001)})

    def test_json_roster(self):
        path = self.path('roster.json')
        with open(path, 'w') as fh:
            json.dump({'0': ['127.0.0.1', 7000]}, fh)

        self.assertEqual(load_roster(path), {0: ('127.0.0.1', 7000)})

    def test_broken_roster(self):
        path = self.path('roster.txt')
        with open(path, 'w') as fh:
            fh.write('zero localhost port\n')

        with self.assertRaises(ConfigurationError):
            load_roster(path)

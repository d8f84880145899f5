import os
import logging
import unittest

from ..logger import config
from .base import clean_otmd_config


class TestLoggingConfig(unittest.TestCase):

    def setUp(self):
        """
        Clean config between tests
        """
        clean_otmd_config()

    def test_set_provider_and_get_provider(self):

        self.assertEqual(config.get_provider(), 'default')
        config.set_provider('console')
        self.assertEqual(config.get_provider(), 'console')

    def test_provider_from_environment(self):
        os.environ['OTMD_LOG_PROVIDER'] = 'Logstash'

        self.assertEqual(config.get_provider(), 'logstash')

    def test_set_log_level_and_get_log_level(self):

        self.assertEqual(config.get_log_level(), 'INFO')
        self.assertEqual(config.get_log_level_parsed(), logging.INFO)

        config.set_log_level('debug')

        self.assertEqual(config.get_log_level(), 'DEBUG')
        self.assertEqual(config.get_log_level_parsed(), logging.DEBUG)

    def test_environment_variable_sets_log_level(self):

        self.assertEqual(config.get_log_level(), 'INFO')

        os.environ['OTMD_LOG'] = 'WARNING'

        self.assertEqual(config.get_log_level(), 'WARNING')
        self.assertEqual(config.get_log_level_parsed(), logging.WARNING)

    def test_setter_wins_over_environment(self):
        os.environ['OTMD_LOG'] = 'WARNING'
        config.set_log_level('ERROR')

        self.assertEqual(config.get_log_level(), 'ERROR')

    def test_app_name_defaults_to_package_name(self):
        self.assertEqual(config.get_app_name(), 'otmd')

        os.environ['OTMD_APP_NAME'] = 'grid-bench'
        self.assertEqual(config.get_app_name(), 'grid-bench')

        config.set_app_name('chattanooga')
        self.assertEqual(config.get_app_name(), 'chattanooga')

    def test_logstash_address(self):
        os.environ['OTMD_LOG_URL'] = 'elk.local'
        os.environ['OTMD_LOG_PORT'] = '5959'

        self.assertEqual(config.get_url(), 'elk.local')
        self.assertEqual(config.get_port(), '5959')

        config.set_port('5000')
        self.assertEqual(config.get_port(), '5000')

    def test_run_and_worker(self):
        self.assertEqual(config.get_run(), '')
        self.assertIsNone(config.get_worker())

        os.environ['OTMD_RUN'] = 'run-42'
        config.set_worker(3)

        self.assertEqual(config.get_run(), 'run-42')
        self.assertEqual(config.get_worker(), 3)

    def test_reset_forgets_setters(self):
        config.set_provider('console')
        config.set_worker(1)
        config.set_log_level('DEBUG')
        config.setup_event_handlers([lambda message: message])

        config.reset()

        self.assertEqual(config.get_provider(), 'default')
        self.assertIsNone(config.get_worker())
        self.assertEqual(config.get_log_level(), 'INFO')
        self.assertEqual(config.get_event_handlers(), [])

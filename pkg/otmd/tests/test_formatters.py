import json
import logging
import os
import socket
import unittest

from unittest.mock import patch

import otmd

from ..providers.base import FormatterBase
from ..providers.console import ConsoleFormatter
from ..providers.logstash import LogstashFormatter
from .base import clean_otmd_config


TIMESTAMP = '2020-03-06T21:29:36.246Z'


class TestConsoleFormatter(unittest.TestCase):

    def setUp(self):
        """
        Clean config between tests
        """
        clean_otmd_config()

    def test_format(self):
        formatter = ConsoleFormatter(app_name='otmd-bench')
        log_message = 'Log entry message'

        record = logging.makeLogRecord({'msg': log_message})

        str_message = formatter.format(record)
        self.assertIsInstance(str_message, str)

        message = json.loads(str_message)

        self.assertTrue('payload' in message)
        self.assertEqual(message['message'], log_message)
        self.assertEqual(message['app_name'], 'otmd-bench')
        self.assertIsNone(message['worker'])

    def test_format_with_extra(self):
        formatter = ConsoleFormatter()

        record = logging.makeLogRecord({
            'msg': 'Step finished', 'step': 12, 'in_network': 3.5})

        message = json.loads(formatter.format(record))
        payload = message['payload']

        self.assertEqual(payload['step'], 12)
        self.assertEqual(payload['in_network'], 3.5)

    def test_format_carries_run_and_worker(self):
        otmd.config.set_run('grid-4x4')
        otmd.config.set_worker(2)
        formatter = ConsoleFormatter()

        message = json.loads(formatter.format(logging.makeLogRecord({'msg': 'hello'})))

        self.assertEqual(message['run'], 'grid-4x4')
        self.assertEqual(message['worker'], 2)


class TestLogstashFormatter(unittest.TestCase):

    def setUp(self):
        """
        Clean config between tests
        """
        clean_otmd_config()

    def test_format(self):
        formatter = LogstashFormatter(app_name='otmd')
        log_message = 'Log entry message'

        record = logging.makeLogRecord({'msg': log_message})

        message = json.loads(formatter.format(record))

        self.assertTrue('payload' in message)
        self.assertEqual(message['message'], log_message)
        self.assertEqual(message['app_name'], 'otmd')

    def test_format_with_extra(self):
        formatter = LogstashFormatter()

        record = logging.makeLogRecord({
            'msg': 'Partitioned network', 'cut_links': 4})

        message = json.loads(formatter.format(record))

        self.assertEqual(message['payload']['cut_links'], 4)


class TestEventHandler(unittest.TestCase):

    def setUp(self):
        """
        Clean config between tests
        """
        clean_otmd_config()

    @patch.object(FormatterBase, 'format_timestamp', lambda *_: TIMESTAMP)
    def test_register_one_handler_global(self):

        def add_tracker_id(message):
            message['tracker_id'] = 'tracker_id_hex'
            return message

        otmd.config.set_provider('console')
        otmd.config.set_app_name('test-app-name')
        otmd.config.set_run('run-1')
        otmd.config.setup_event_handlers([add_tracker_id])

        logger = otmd.getLogger('otmd-first-handler')

        formatter = logger.handlers[0].formatter
        with patch.object(FormatterBase, 'format_with_handlers',
                          wraps=formatter.format_with_handlers) as mock_fwh, \
                patch.object(logger.handlers[0], 'stream'):

            logger_message = 'First handler message'
            logger.info(logger_message)

            expected = {
                '@timestamp': TIMESTAMP,
                'message': logger_message,
                'host': socket.gethostname(),
                'path': os.path.abspath(__file__),
                'app_name': 'test-app-name',
                'run': 'run-1',
                'worker': None,
                'level': 'INFO',
                'logger_name': logger.name,
                'tracker_id': 'tracker_id_hex',
            }
            mock_fwh.assert_called_once()
            message = mock_fwh.call_args[0][0]
            self.assertIn('payload', message)
            del message['payload']
            self.assertEqual(message, expected)

    def test_register_handler_twice(self):

        def add_tracker_id(message):
            message['tracker_id'] = 'tracker_id_hex'
            return message

        otmd.config.setup_event_handlers([add_tracker_id])

        self.assertIn(add_tracker_id, otmd.config.get_event_handlers())
        self.assertEqual(1, len(otmd.config.get_event_handlers()))

        otmd.config.setup_event_handlers([lambda x: x])

        self.assertNotIn(add_tracker_id, otmd.config.get_event_handlers())
        self.assertEqual(1, len(otmd.config.get_event_handlers()))

    def test_dotted_string_handler_and_logger_handler(self):
        def add_worker_label(message):
            message['worker_label'] = 'w%s' % message['worker']
            return message

        otmd.config.set_worker(5)
        otmd.config.setup_event_handlers([
            'otmd.tests.base.add_tracker_id_to_message',
        ])
        formatter = ConsoleFormatter(event_handlers=[add_worker_label])

        message = json.loads(formatter.format(logging.makeLogRecord({'msg': 'x'})))

        self.assertEqual(message['tracker_id_global'], 'tracker_id_value_global')
        self.assertEqual(message['worker_label'], 'w5')

    def test_handler_that_clears_message_keys(self):
        def clear_keys(message):
            message.clear()
            return message

        formatter = ConsoleFormatter(event_handlers=[clear_keys])

        message = json.loads(formatter.format(logging.makeLogRecord({'msg': 'x'})))

        self.assertEqual(message, {})

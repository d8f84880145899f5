import logging
import os

from .helpers import import_string_list


DEFAULT_LOG_LEVEL = 'INFO'


class LoggingProvider:
    LOGSTASH = 'logstash'
    CONSOLE = 'console'
    DEFAULT = 'default'


class LoggingConfig:
    _provider = ''
    _url = ''
    _port = ''
    _app_name = ''
    _run = ''
    _worker = None
    _event_handlers = []
    _log_level = ''

    def set_provider(self, value):
        self._provider = value

    def get_provider(self):
        provider = self._provider or os.getenv('OTMD_LOG_PROVIDER', '')
        return (provider or LoggingProvider.DEFAULT).lower()

    def set_url(self, value):
        self._url = value

    def get_url(self):
        return self._url or os.getenv('OTMD_LOG_URL', '')

    def set_port(self, value):
        self._port = value

    def get_port(self):
        return self._port or os.getenv('OTMD_LOG_PORT', '')

    def set_app_name(self, value):
        self._app_name = value

    def get_app_name(self):
        return self._app_name or os.getenv('OTMD_APP_NAME', 'otmd')

    def set_run(self, value):
        self._run = value

    def get_run(self):
        return self._run or os.getenv('OTMD_RUN', '')

    def set_worker(self, value):
        """Worker index stamped on every record; None in the parent process."""
        self._worker = value

    def get_worker(self):
        return self._worker

    def get_event_handlers(self):
        return self._event_handlers

    def setup_event_handlers(self, event_handlers=[]):
        self._event_handlers = import_string_list(event_handlers)

    def set_log_level(self, value):
        """Acceptable parameters: DEBUG, INFO, WARNING, ERROR, FATAL, CRITICAL"""
        self._log_level = value

    def get_log_level(self):
        log_level = self._log_level or os.getenv('OTMD_LOG', '')
        return (log_level or DEFAULT_LOG_LEVEL).upper()

    def get_log_level_parsed(self):
        """Return instance logging.INFO"""
        return logging.getLevelName(self.get_log_level())

    def reset(self):
        self._provider = ''
        self._url = ''
        self._port = ''
        self._app_name = ''
        self._run = ''
        self._worker = None
        self._event_handlers = []
        self._log_level = ''


class LoggerManager:

    def __init__(self):
        self.logger_map = {
            LoggingProvider.LOGSTASH: self.get_logger_logstash,
            LoggingProvider.DEFAULT: self.get_logger_default,
            LoggingProvider.CONSOLE: self.get_logger_console,
        }

    def get_logger(self, name, event_handlers=[]):
        logging_provider = config.get_provider()

        logger = logging.getLogger(name)
        has_log_provider = hasattr(logger, 'logging_provider')
        if has_log_provider and logger.logging_provider == logging_provider:
            logger.setLevel(config.get_log_level_parsed())
            return logger

        logger.handlers.clear()

        func = self.logger_map.get(logging_provider, self.get_logger_default)

        return func(name, event_handlers)

    def _prepare(self, name, provider):
        logger = logging.getLogger(name)
        logger.setLevel(config.get_log_level_parsed())
        logger.propagate = True
        logger.logging_provider = provider
        return logger

    def get_logger_default(self, name, event_handlers=[]):
        return self._prepare(name, LoggingProvider.DEFAULT)

    def get_logger_console(self, name, event_handlers=[]):
        from .providers.console import ConsoleFormatter

        logger = self._prepare(name, LoggingProvider.CONSOLE)
        # records stop here; the root logger would print them a second time
        logger.propagate = False

        handler = logging.StreamHandler()
        handler.setFormatter(ConsoleFormatter(
            app_name=config.get_app_name(),
            event_handlers=event_handlers
        ))
        logger.addHandler(handler)

        return logger

    def get_logger_logstash(self, name, event_handlers=[]):
        from logstash import TCPLogstashHandler
        from .providers.logstash import LogstashFormatter

        logger = self._prepare(name, LoggingProvider.LOGSTASH)

        handler = TCPLogstashHandler(config.get_url(), config.get_port(), version=1)
        handler.setFormatter(LogstashFormatter(
            app_name=config.get_app_name(),
            event_handlers=event_handlers
        ))
        logger.addHandler(handler)

        return logger


config = LoggingConfig()
logger_manager = LoggerManager()


def getLogger(name: str, event_handlers=[]):
    """Creates a logger bound to the configured provider.

    :type name: str
    :param name: the name of the logger to be constructed.

    :type event_handlers: list
    :param event_handlers: callables (or dotted paths) applied to each record

    :rtype: :class:`logging.Logger`
    :returns: Logger created.
    """
    return logger_manager.get_logger(name, event_handlers)


__all__ = [
    'getLogger',
    'config',
]

import itertools

from logstash.formatter import LogstashFormatterBase

from ..helpers import import_string_list


class FormatterBase(LogstashFormatterBase):

    def __init__(self, fqdn=False, app_name='', event_handlers=[],
                 *args, **kwargs):
        super().__init__(message_type='', fqdn=fqdn, *args, **kwargs)
        self.app_name = app_name
        self.event_handlers = import_string_list(event_handlers)

    def format_with_handlers(self, message):
        from ..logger import config

        default_handlers = config.get_event_handlers()
        handlers = itertools.chain(default_handlers, self.event_handlers)

        for handle in handlers:
            message = handle(message)

        return message

    def format(self, record):
        from ..logger import config

        message = {
            '@timestamp': self.format_timestamp(record.created),
            'message': record.getMessage(),
            'host': self.host,
            'path': record.pathname,
            'app_name': self.app_name,
            'run': config.get_run(),
            'worker': config.get_worker(),

            # Extra Fields
            'level': record.levelname,
            'logger_name': record.name,
        }

        message.update(payload=self.get_extra_fields(record))

        if record.exc_info:
            message.update(self.get_debug_fields(record))

        return self.format_with_handlers(message)

"""
Diagnostic events raised by the estimators while training keeps going.

Events are WARNING records on the ``sfkalman.diagnostics`` logger with an
``event`` attribute, so any logging setup can see them. The harness attaches
an :class:`EventCounter` to each run and reports the totals.
"""

import logging
from collections import Counter
from contextlib import contextmanager
from enum import Enum

logger = logging.getLogger(__name__)


class DiagnosticEvent(str, Enum):
    LIKELIHOOD_UNDERFLOW = "likelihood_underflow"
    RESOLVENT_SHRINK = "resolvent_shrink"
    NONFINITE_GRADIENT = "nonfinite_gradient"


def report(event: DiagnosticEvent, message: str, *args):
    logger.warning(message, *args, extra={"event": event.value})


class EventCounter(logging.Handler):
    def __init__(self):
        super().__init__(level=logging.WARNING)
        self.counts = Counter()

    def emit(self, record):
        event = getattr(record, "event", None)
        if event is not None:
            self.counts[event] += 1


@contextmanager
def count_events(quiet=True):
    """
    Count diagnostic events raised inside the block.

    :param quiet: stop the records from reaching the root handlers while counting
    :return: the attached EventCounter
    """
    counter = EventCounter()
    saved_level, saved_propagate = logger.level, logger.propagate
    logger.setLevel(logging.WARNING)
    logger.addHandler(counter)
    if quiet:
        logger.propagate = False
    try:
        yield counter
    finally:
        logger.removeHandler(counter)
        logger.setLevel(saved_level)
        logger.propagate = saved_propagate

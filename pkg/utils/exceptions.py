import logging

logger = logging.getLogger(__name__)


class PipelineError(Exception):
    """Base class for every error raised by the shape pipeline."""


class InvalidInput(PipelineError, ValueError):
    """Input violates an operation's preconditions."""


class DependencyError(PipelineError):
    """A required upstream artifact (usually a checkpoint) is missing."""


class InvariantViolation(PipelineError):
    """An internal contract was broken."""


def raise_invalid_input(exc):
    logger.error(exc)
    raise InvalidInput(exc)


def raise_dependency_error(exc):
    logger.error(exc)
    raise DependencyError(exc)

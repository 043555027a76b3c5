"""Exception types shared across the package.

The CLI maps ConfigurationError (and subclasses) to exit code 2 and every
other failure to exit code 1.
"""


class ConfigurationError(ValueError):
    """A shape, spec, or config value that cannot be run as given."""


class IngestionError(ConfigurationError):
    """A data file that cannot be parsed; message carries the line number."""

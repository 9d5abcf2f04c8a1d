"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericError -> 4. Plain ValueError is used for local argument validation
(bad shapes, out-of-range counts) and is treated as a config error at the CLI
boundary.
"""


class ConfigError(Exception):
    """Invalid or inconsistent configuration, or missing model parameters."""


class DataError(Exception):
    """Unreadable or malformed data files, or inputs too small to process."""


class NumericError(Exception):
    """Non-finite values encountered where finiteness is contractual."""

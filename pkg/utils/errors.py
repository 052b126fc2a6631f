"""
Error hierarchy shared by the kernels, solvers, file formats and CLI.
Each class carries the slug and process exit code the CLI reports.
"""


class CPToolkitError(Exception):
    error = 'cpkit_error'
    exit_code = 1


class InvalidInputError(CPToolkitError, ValueError):
    error = 'invalid_input'
    exit_code = 2


class DimensionMismatchError(InvalidInputError):
    error = 'dimension_mismatch'


class UnsupportedOrderError(InvalidInputError):
    error = 'unsupported_order'


class FormatError(CPToolkitError):
    error = 'format_error'
    exit_code = 4


class SingularSystemError(CPToolkitError):
    error = 'singular_system'
    exit_code = 5


class SingularTriangularError(SingularSystemError):
    """Raised when a triangular factor has a negligible diagonal entry."""
    error = 'singular_triangular'

    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class StalenessError(CPToolkitError):
    """A scheduled contraction tried to read an intermediate built from outdated factors."""
    error = 'stale_intermediate'
    exit_code = 6


class GenerationError(CPToolkitError):
    error = 'generation_error'
    exit_code = 7


# Exit codes for failures that are not CPToolkitError instances
IO_ERROR_SLUG = 'io_error'
IO_ERROR_EXIT = 3
COUNTS_MISMATCH_EXIT = 8

"""Exception hierarchy.

Every error raised by this package derives from :class:`PatchscoutError`.
The ``exit_code`` attribute is what the CLI returns when the error escapes
to the top level: 2 for input/parse problems, 3 for data-validity problems,
4 for file-format version mismatches.
"""


class PatchscoutError(Exception):
    exit_code = 1


# --- input / parse problems (exit 2) ---------------------------------------


class SourceSyntaxError(PatchscoutError):
    """Raised by the C-subset parser on the first grammar violation."""

    exit_code = 2

    def __init__(self, message: str, line: int, col: int, expected: tuple[str, ...] = ()):
        detail = f"line {line}, col {col}: {message}"
        if expected:
            detail += " (expected " + " | ".join(expected) + ")"
        super().__init__(detail)
        self.line = line
        self.col = col
        self.expected = frozenset(expected)


class SchemaError(PatchscoutError):
    """An ingested JSON document violates the AST-JSON schema."""

    exit_code = 2

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


class CycleError(SchemaError):
    """The children relation of an ingested document is not a tree."""


class DatasetParseError(PatchscoutError):
    """A dataset JSONL file has a malformed line."""

    exit_code = 2

    def __init__(self, message: str, line_no: int | None = None):
        super().__init__(f"line {line_no}: {message}" if line_no else message)
        self.line_no = line_no


class BadConfigError(PatchscoutError):
    exit_code = 2


# --- data validity problems (exit 3) ----------------------------------------


class UnknownNodeError(PatchscoutError):
    exit_code = 3


class InvalidMappingError(PatchscoutError):
    exit_code = 3


class EmptyCommitError(PatchscoutError):
    exit_code = 3


class EmptyCorpusError(PatchscoutError):
    exit_code = 3


class DegenerateCorpusError(PatchscoutError):
    exit_code = 3


class DuplicateIdError(PatchscoutError):
    exit_code = 3


class TooFewProjectsError(PatchscoutError):
    exit_code = 3


class SingleClassDatasetError(PatchscoutError):
    exit_code = 3


class SingleClassError(PatchscoutError):
    """Metric needs both a positive and a negative example."""

    exit_code = 3


class EmptySetError(PatchscoutError):
    exit_code = 3


class NoFixingCommitsError(PatchscoutError):
    exit_code = 3


class EmptyGraphError(PatchscoutError):
    exit_code = 3


class EmptyBatchError(PatchscoutError):
    exit_code = 3


class ShapeMismatchError(PatchscoutError):
    exit_code = 3


# --- file-format problems (exit 4) -------------------------------------------


class VersionMismatchError(PatchscoutError):
    exit_code = 4

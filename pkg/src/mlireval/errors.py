"""Exception hierarchy shared across the engine.

Every error carries a short machine-parsable ``code`` so the CLI can emit a
single diagnostic line without inspecting exception types.
"""


class EngineError(Exception):
    """Base class for all engine failures."""

    code = "E_ENGINE"


class ParseError(EngineError):
    """Malformed input data (JSONL lines, manifests, configs)."""

    code = "E_PARSE"

    def __init__(self, message: str, *, path=None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(f"{where}{message}")


class FormatError(EngineError):
    """Binary store, index, or run file violates its declared format."""

    code = "E_FORMAT"


class DataError(EngineError):
    """Referential failure: missing ids, store coverage gaps, bad lookups."""

    code = "E_DATA"


class DepthError(EngineError):
    """Retrieval depth below the corpus maximum group size."""

    code = "E_DEPTH"


class MetricError(EngineError):
    """Metric preconditions violated (missing scores, empty rankings)."""

    code = "E_METRIC"


class DigestError(EngineError):
    """Recorded content digest does not match the presented input."""

    code = "E_DIGEST"

"""Exception types shared across pipeline stages."""


class PipelineError(Exception):
    """Base class for all pipeline failures."""


class ConfigError(PipelineError):
    """Bad or missing configuration (maps to CLI exit code 1)."""


class DecodingError(PipelineError):
    """Input bytes are not valid UTF-8."""

    def __init__(self, source: str, byte_offset: int):
        super().__init__(f"{source}: undecodable byte at offset {byte_offset}")
        self.source = source
        self.byte_offset = byte_offset


class SegmentationError(PipelineError):
    """A document could not be segmented; `stage` names the failing step."""

    stage = "segment"

    def __init__(self, message: str = ""):
        super().__init__(message or self.__class__.__doc__)


class HeaderNotFound(SegmentationError):
    stage = "split_header"

    def __init__(self, message: str = "no header pivot term found in the search window"):
        super().__init__(message)


class ResultNotFound(SegmentationError):
    stage = "split_result"

    def __init__(
        self,
        message: str = "no result pivot occurrence with a decision-bearing lower part",
    ):
        super().__init__(message)


class JudgeSummaryUnextractable(SegmentationError):
    stage = "extract_judge_summary"

    def __init__(self, reason: str):
        super().__init__(f"judge summary unextractable: {reason}")


class WordNumberError(PipelineError):
    """A word-form number could not be parsed."""


class ConvergenceError(PipelineError):
    """Iterative computation did not converge; carries the last residual."""

    def __init__(self, residual: float, iterations: int):
        super().__init__(
            f"no convergence after {iterations} iterations (residual {residual:.3e})"
        )
        self.residual = residual
        self.iterations = iterations

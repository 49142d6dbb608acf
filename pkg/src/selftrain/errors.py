"""Exception hierarchy shared across the package.

The CLI maps these groups onto distinct exit codes, so new exceptions
should subclass the group they belong to.
"""


class SelftrainError(Exception):
    """Base class for all package errors."""


class ConfigError(SelftrainError):
    """Invalid or unresolvable experiment configuration."""


class DataError(SelftrainError):
    """Malformed or inconsistent dataset content."""


class MalformedRecord(DataError):
    def __init__(self, path, line_no, reason):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.path = path
        self.line_no = line_no
        self.reason = reason


class UnknownLabel(DataError):
    def __init__(self, path, line_no, label, class_names):
        super().__init__(
            f"{path}:{line_no}: label {label!r} is not one of {list(class_names)}"
        )
        self.label = label


class DuplicateId(DataError):
    def __init__(self, path, line_no, instance_id):
        super().__init__(f"{path}:{line_no}: duplicate instance id {instance_id!r}")
        self.instance_id = instance_id


class InsufficientClassCount(DataError):
    def __init__(self, class_name, available, needed):
        super().__init__(
            f"class {class_name!r} has only {available} labeled instances, need {needed}"
        )
        self.class_name = class_name
        self.available = available
        self.needed = needed


class TrainingError(SelftrainError):
    """Classifier training failed."""


class TrainingDiverged(TrainingError):
    """Non-finite parameters or loss encountered during optimization."""


class LlmError(SelftrainError):
    """LLM client or pipeline failure."""


class TransportError(LlmError):
    """Request could not be completed (network, HTTP status, bad body)."""


class ParseError(LlmError):
    """Model response could not be resolved to the expected fields."""

    def __init__(self, reason, raw_response=""):
        super().__init__(reason)
        self.raw_response = raw_response


class PromptTooLong(LlmError):
    """Rendered prompt exceeds the configured input limit."""


class FixtureMiss(LlmError):
    """Mock client received a request with no matching fixture entry."""


class LabelingAborted(LlmError):
    """Per-instance failure fraction exceeded the configured limit."""

    def __init__(self, message, records):
        super().__init__(message)
        self.records = records

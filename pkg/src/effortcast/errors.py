"""Exception hierarchy shared by every effortcast module."""

from __future__ import annotations


class EffortcastError(Exception):
    """Base class for domain errors. The CLI maps these to exit code 1."""

    module = "effortcast"

    def __str__(self) -> str:
        return f"[{self.module}] {super().__str__()}"


# dataset
class DatasetError(EffortcastError):
    module = "dataset"


class MalformedCsv(DatasetError):
    pass


class UnparsableNumeric(DatasetError):
    def __init__(self, row: int, column: str, value: str):
        super().__init__(f"row {row}, column {column!r}: cannot parse {value!r} as a finite number")
        self.row = row
        self.column = column
        self.value = value


class InvalidTarget(DatasetError):
    pass


class DuplicateId(DatasetError):
    pass


class UnknownFeature(DatasetError):
    pass


class InvalidSchema(DatasetError):
    pass


class InvalidSplit(DatasetError):
    pass


class EmptyDataset(DatasetError):
    pass


class PinnedTierLargerThanSplit(DatasetError):
    pass


# correlate
class CorrelateError(EffortcastError):
    module = "correlate"


class NoNumericPairs(CorrelateError):
    pass


# promptgen
class PromptgenError(EffortcastError):
    module = "promptgen"


class MissingTarget(PromptgenError):
    pass


class UnparsableCompletion(PromptgenError):
    pass


class MalformedCorpus(PromptgenError):
    pass


# llmclient
class LLMClientError(EffortcastError):
    module = "llmclient"


class AuthFailure(LLMClientError):
    pass


class ProviderRejectedCorpus(LLMClientError):
    pass


class NetworkFailure(LLMClientError):
    pass


class RateLimited(LLMClientError):
    pass


class UnknownJob(LLMClientError):
    pass


class ProviderConfigError(LLMClientError):
    pass


# baselines
class BaselineError(EffortcastError):
    module = "baselines"


class EmptyTrainingSet(BaselineError):
    pass


class KExceedsTrainingSize(BaselineError):
    pass


class SingularSystem(BaselineError):
    pass


class DivergenceDetected(BaselineError):
    pass


class InvalidHyperparams(BaselineError):
    pass


# eval
class EvaluationError(EffortcastError):
    module = "eval"


class EmptyPredictionSet(EvaluationError):
    pass


class TooFewPoints(EvaluationError):
    pass


class ConfigError(EffortcastError):
    module = "cli"

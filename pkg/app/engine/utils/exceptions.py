class EngineError(Exception):
    """
    Base exception for the forecasting engine.

    Every subclass carries a default message and the process exit code the command line reports for it.
    """
    message = "The forecasting engine failed."
    exit_code = 1

    def __init__(self, details: str | None = None) -> None:
        super().__init__(details or self.message)


class ContractError(EngineError):
    """
    Exception raised when an operation is called outside its preconditions.
    """
    message = "Operation called with arguments that violate its contract."


class DimensionError(ContractError):
    """
    Exception raised when tensor or array shapes do not conform.
    """
    message = "Operand shapes do not conform."


class ConfigError(EngineError):
    """
    Exception raised for invalid command-line arguments or run configuration.
    """
    message = "Invalid configuration."
    exit_code = 2


class DataError(EngineError):
    """
    Exception raised when a dataset cannot be ingested, split or aligned.
    """
    message = "The dataset could not be used."
    exit_code = 3


class MissingInputError(DataError):
    """
    Exception raised when the input signal does not cover every forecast step.
    """
    message = "Input signals are missing for some forecast steps."


class MetricError(DataError):
    """
    Exception raised when a metric is undefined for the given observations.
    """
    message = "The metric is undefined for these observations."


# NaN or Inf appeared in a forward pass, a gradient or an optimizer update
class NumericError(EngineError):
    """
    Exception raised when a computation produces non-finite values.
    """
    message = "A computation produced non-finite values."
    exit_code = 4

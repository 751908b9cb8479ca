"""
Error Types
Exception hierarchy shared by the forest, trainer, data and CLI layers
"""

from typing import Optional


class SPDRFError(Exception):
    """Base class for all SPDRF errors"""
    pass


class NonFiniteInputError(SPDRFError):
    """Raised when a feature vector or target contains NaN or infinity"""
    pass


class ShapeMismatchError(SPDRFError):
    """Raised when array shapes disagree with a topology, config or cache"""
    pass


class EmptySelectionError(SPDRFError):
    """Raised when no sample is available to train on"""
    pass


class InvalidConfigError(SPDRFError):
    """Raised when a configuration value is out of range"""
    pass


class UnknownConfigKeyError(InvalidConfigError):
    """Raised when a configuration document contains an unrecognized key"""

    def __init__(self, key: str):
        super().__init__(f"Unknown configuration key: '{key}'")
        self.key = key


class NonFiniteGradientError(SPDRFError):
    """Raised when an optimizer step would apply a NaN or infinite gradient"""
    pass


class BadHeaderError(SPDRFError):
    """Raised when a dataset CSV header is missing or malformed"""
    pass


class ParseError(SPDRFError):
    """Raised when a dataset CSV cell cannot be parsed as a number"""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        super().__init__(message)
        self.row = row
        self.column = column


class EmptyDatasetError(SPDRFError):
    """Raised when a dataset file contains no samples"""
    pass


class CheckpointFormatError(SPDRFError):
    """Raised when a checkpoint file is malformed or has the wrong format version"""
    pass

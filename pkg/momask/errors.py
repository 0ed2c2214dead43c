# -*- coding: utf-8 -*-
"""
Error types shared by the library and the command line
"""
from typing import Optional


class MomaskError(Exception):
    """Base error; carries the process exit code used by the CLI"""
    exit_code: int = 1

    def __init__(self, message: str, details: Optional[dict] = None):
        self.message = message
        self.details = details or {}
        super().__init__(self.message)


class ConfigError(MomaskError):
    """Invalid or unreadable run configuration"""
    exit_code = 2


class DataError(MomaskError):
    """Bad input data: motion files, token files, shapes"""
    exit_code = 3


class MotionFormatError(DataError):
    """Malformed motion file (magic, header, payload)"""


class ModelError(MomaskError):
    """Missing or inconsistent model artifacts"""
    exit_code = 4

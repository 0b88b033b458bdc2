"""
Shared configuration, errors, constants and output helpers.
"""

from .constants import TOOL_VERSION
from .output_utils import print_run_summary, read_json_document, save_table, write_json_document

__all__ = [
    "save_table",
    "print_run_summary",
    "read_json_document",
    "write_json_document",
]

__version__ = TOOL_VERSION

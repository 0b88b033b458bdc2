"""
Shared output utilities for saving tables, documents and console summaries.
"""

import json
import os
from datetime import datetime
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd

from .exceptions import DataError


def write_json_document(path: str, data: Dict[str, Any], atomic: bool = False) -> str:
    """
    Write a JSON document.

    Args:
        path: Destination file
        data: JSON-serializable mapping (NaN and infinity are rejected)
        atomic: Write to ``path + '.tmp'`` first and rename over the target

    Returns:
        The written path
    """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    target = path + ".tmp" if atomic else path
    with open(target, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, allow_nan=False)
        f.write("\n")
    if atomic:
        os.replace(target, path)
    return path


def read_json_document(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise DataError(f"file not found: {path}")
    except json.JSONDecodeError as e:
        raise DataError(f"invalid JSON in {path}: {e}")
    if not isinstance(data, dict):
        raise DataError(f"{path}: top level must be an object")
    return data


def save_table(rows: Sequence[Dict[str, Any]], path: str, columns: Optional[List[str]] = None) -> str:
    """
    Save a list of row dictionaries as CSV.

    Args:
        rows: One mapping per row
        path: Destination file
        columns: Column order; also used for the header when ``rows`` is empty

    Returns:
        The written path
    """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    if rows:
        df = pd.DataFrame(list(rows), columns=pd.Index(columns) if columns else None)
    else:
        df = pd.DataFrame(columns=pd.Index(columns or []))
    df.to_csv(path, index=False)
    return path


def print_run_summary(title: str, items: Dict[str, Any], files: Optional[Dict[str, str]] = None) -> None:
    """
    Print a command summary to the console.

    Args:
        title: Heading, e.g. the command name
        items: Key figures to list
        files: Output files by role
    """
    print(f"\n===== {title} =====")
    print(f"Timestamp: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
    for key, value in items.items():
        if isinstance(value, float):
            value = f"{value:.6g}"
        print(f"  {key}: {value}")
    if files:
        print("\nOutput files:")
        for role, path in files.items():
            print(f"  {role}: {path}")
    print()

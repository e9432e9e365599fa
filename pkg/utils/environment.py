"""
Environment Settings
File: utils/environment.py

Reads process-level settings from environment variables. A `.env` file in the
project root is loaded first (see `.env.example` for the recognised keys).
"""

# Imports from Python Standard Library
import os
import pathlib

# Imports from external packages
from dotenv import load_dotenv

# Imports from local modules
from scripts.errors import InvalidParameterError

PROJECT_ROOT = pathlib.Path(__file__).resolve().parent.parent
ENV_FILE: pathlib.Path = PROJECT_ROOT.joinpath(".env")

load_dotenv(ENV_FILE)


def worker_count() -> int:
    """
    Number of worker threads allowed for concurrent simulations.

    Returns:
        int: value of DELAMID_THREADS, or the CPU count when unset.

    Raises:
        InvalidParameterError: If DELAMID_THREADS is not a positive integer.
    """
    raw = os.environ.get("DELAMID_THREADS")
    if raw is None or raw.strip() == "":
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError:
        raise InvalidParameterError(f"DELAMID_THREADS must be an integer, got '{raw}'.")
    if value < 1:
        raise InvalidParameterError(f"DELAMID_THREADS must be at least 1, got {value}.")
    return value


def output_root() -> pathlib.Path:
    """Default root folder for results (DELAMID_OUTPUT_DIR, else results/)."""
    raw = os.environ.get("DELAMID_OUTPUT_DIR")
    if raw:
        return pathlib.Path(raw)
    return PROJECT_ROOT.joinpath("results")

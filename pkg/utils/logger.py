"""
Logger Setup Script
File: utils/logger.py

This script provides logging functions for the project. Logging is an essential way to
track events and issues during a simulation or an identification run. This logger setup
uses Loguru to log messages and errors both to a file and to the console.

Import the shared logger in any module with:

    from utils.logger import logger
"""

# Imports from Python Standard Library
import os
import pathlib
import sys

# Imports from external packages
from loguru import logger

# Define global constants
CURRENT_SCRIPT = pathlib.Path(__file__).stem  # Gets the current file name without the extension
PROJECT_ROOT = pathlib.Path(__file__).resolve().parent.parent  # Navigate to the project's root directory
LOG_FOLDER: pathlib.Path = PROJECT_ROOT.joinpath("logs")  # Directory where logs will be stored
LOG_FILE: pathlib.Path = LOG_FOLDER.joinpath("project_log.log")  # Path to the log file
DEFAULT_LEVEL: str = os.environ.get("DELAMID_LOG_LEVEL", "INFO").upper()

# Ensure the log folder exists or create it
LOG_FOLDER.mkdir(exist_ok=True)

_console_sink_id = None


def configure_logging(level: str = DEFAULT_LEVEL) -> None:
    """
    (Re)configure the console sink. The file sink always records INFO and above.

    Parameters:
        level (str): Loguru level name for the console, e.g. "DEBUG" or "WARNING".
    """
    global _console_sink_id
    if _console_sink_id is not None:
        logger.remove(_console_sink_id)
    _console_sink_id = logger.add(sys.stderr, level=level.upper())


# Replace Loguru's default stderr handler with our own pair of sinks
logger.remove()
logger.add(LOG_FILE, level="INFO")
configure_logging(DEFAULT_LEVEL)


def main() -> None:
    """Main function to demonstrate the logger setup."""
    logger.info(f"STARTING {CURRENT_SCRIPT}.py")
    logger.info(f"View the log output at {LOG_FILE}")
    logger.info(f"EXITING {CURRENT_SCRIPT}.py.")


# Conditional execution block that calls main() only when this file is executed directly
if __name__ == "__main__":
    main()

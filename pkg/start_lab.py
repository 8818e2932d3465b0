#!/usr/bin/env python3
"""
Startup script for the Pearcey lab command line.
Checks the interpreter and numerical stack, then hands the arguments to cli.main_cli.
"""

import sys
import logging
from pathlib import Path

# Add the project root to Python path
project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

logger = logging.getLogger(__name__)


def check_python_version():
    """Check if Python version is compatible."""
    if sys.version_info < (3, 8):
        logger.error("Python 3.8 or higher is required")
        return False

    logger.debug(f"Python version: {sys.version}")
    return True


def check_dependencies():
    """Check that the numerical stack imports."""
    missing_deps = []

    for module in ("numpy", "scipy"):
        try:
            __import__(module)
        except ImportError as e:
            missing_deps.append(str(e))
            logger.error(f"✗ {module} not available: {e}")

    if missing_deps:
        logger.error(f"Missing required dependencies: {', '.join(missing_deps)}")
        return False

    logger.debug("All lab dependencies available")
    return True


def main():
    """Main startup function."""
    if not check_python_version() or not check_dependencies():
        logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
        logger.error("Environment check failed; run check_dependencies.py")
        return 1

    from cli.main_cli import main as cli_main

    try:
        return cli_main(sys.argv[1:])
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        return 130


if __name__ == "__main__":
    raise SystemExit(main())

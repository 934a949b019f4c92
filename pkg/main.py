"""
Main entry point for the fractional Sobolev–Orlicz experiment CLI.
"""

import sys

from src.app import main


if __name__ == "__main__":
    sys.exit(main())

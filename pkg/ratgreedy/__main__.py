"""`python -m ratgreedy` entry point."""

import sys

from ratgreedy.cli import run

if __name__ == "__main__":
    sys.exit(run())

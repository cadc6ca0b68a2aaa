"""
Command-line runner script.
Use this to run the solver locally, e.g. `python run.py project --mu mu.csv --nu nu.csv`.
"""

import sys

from barycentric_ot.cli import main


if __name__ == "__main__":
    sys.exit(main())

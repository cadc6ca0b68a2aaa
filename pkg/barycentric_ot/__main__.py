import sys

from barycentric_ot.cli import main


if __name__ == "__main__":
    sys.exit(main())

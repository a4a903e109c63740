"""Standalone script: render the efficiency figure."""

import sys

from .render import script_main


def main(argv=None) -> int:
    return script_main("efficiency", argv)


if __name__ == "__main__":
    sys.exit(main())

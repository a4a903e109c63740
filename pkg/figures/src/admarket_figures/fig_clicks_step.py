"""Standalone script: render the clicks-step figure."""

import sys

from .render import script_main


def main(argv=None) -> int:
    return script_main("clicks-step", argv)


if __name__ == "__main__":
    sys.exit(main())

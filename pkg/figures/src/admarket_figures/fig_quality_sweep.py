"""Standalone script: render the quality-sweep figure."""

import sys

from .render import script_main


def main(argv=None) -> int:
    return script_main("quality-sweep", argv)


if __name__ == "__main__":
    sys.exit(main())

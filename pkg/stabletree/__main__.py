import sys

from stabletree.cli import main


def run():
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())

"""``viewsel`` console entry point built on an invoke Program."""

import sys
from collections.abc import Iterator
from contextlib import contextmanager

from invoke.exceptions import Exit, ParseError
from invoke.program import Program

from viewsel import __version__
from viewsel.tasks import ns

USAGE_ERROR = 2


@contextmanager
def _usage_errors() -> Iterator[None]:
    try:
        yield
    except ParseError as e:
        raise Exit(f"usage error: {e}", code=USAGE_ERROR) from e


class ViewselProgram(Program):
    """Program whose parse failures exit with code 2 instead of invoke's 1."""

    def parse_core(self, argv: list[str] | None) -> None:
        with _usage_errors():
            super().parse_core(argv)

    def parse_tasks(self) -> None:
        with _usage_errors():
            super().parse_tasks()

    def parse_cleanup(self) -> None:
        with _usage_errors():
            super().parse_cleanup()

    def execute(self) -> None:
        # tasks raise ParseError for flag values they convert themselves
        with _usage_errors():
            super().execute()


def build_program() -> ViewselProgram:
    return ViewselProgram(namespace=ns, name="viewsel", binary="viewsel", version=__version__)


def main(argv: list[str] | None = None) -> int:
    """Run one command line and return its exit code."""
    args = sys.argv[1:] if argv is None else list(argv)
    try:
        build_program().run(["viewsel", *args])
    except SystemExit as e:
        if e.code is None:
            return 0
        return e.code if isinstance(e.code, int) else 1
    return 0


def run_main() -> None:
    sys.exit(main())

"""Developer tasks for the viewsel repository: tests, linting, type checks and cleanup."""

from invoke.collection import Collection
from invoke.context import Context
from invoke.exceptions import Exit
from invoke.tasks import task


@task(
    help={
        "path": "Path to tests or test folder (default: tests)",
        "slow": "Also run the city-scale acceptance tests (default: False)",
    }
)
def test(c: Context, path: str = "tests", slow: bool = False) -> None:
    """Run pytest; slow acceptance tests are skipped unless --slow is given."""
    marker = " -m 'slow or not slow'" if slow else ""
    c.run(f"pytest -vv {path}{marker}", pty=True)


@task
def acceptance(c: Context) -> None:
    """Run only the city-scale acceptance tests."""
    print("📊 Running acceptance runs on synthetic scenes...")
    c.run("pytest -vv -m slow tests/test_acceptance.py", pty=True)


@task(help={"path": "Path to lint (default: .)"})
def lint(c: Context, path: str = ".") -> None:
    """Check formatting and lint with ruff; fails if anything would change."""
    format_result = c.run(f"ruff format --diff {path}", warn=True, pty=True)
    lint_result = c.run(f"ruff check {path}", warn=True, pty=True)
    if (format_result and format_result.exited != 0) or (
        lint_result and lint_result.exited != 0
    ):
        raise Exit("❌ Code is not properly formatted or linted.", code=1)
    print("✅ Code is properly formatted and linted.")


@task(help={"path": "Path to type check (default: src)"})
def typecheck(c: Context, path: str = "src") -> None:
    c.run(f"mypy {path}", pty=True)


@task
def coverage(c: Context) -> None:
    """Run the fast suite with coverage and write an HTML report."""
    c.run("pytest --cov=viewsel --cov-report=term --cov-report=html", pty=True)


@task
def clean(c: Context) -> None:
    """Remove caches, coverage reports and default run outputs."""
    for target in (
        ".mypy_cache",
        ".pytest_cache",
        ".ruff_cache",
        "htmlcov",
        ".coverage",
        "*.egg-info",
        "viewsel-out",
        "bench.csv",
    ):
        c.run(f"rm -rf {target}")
    c.run('find . -type d -name "__pycache__" -exec rm -rf {} +', pty=True)


ns = Collection()
ns.add_task(test)
ns.add_task(acceptance)
ns.add_task(lint)
ns.add_task(typecheck)
ns.add_task(coverage)
ns.add_task(clean)

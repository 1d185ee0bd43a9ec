import pytest

from prandtl_lab.grid import GridSpec
from prandtl_lab.shear import ShearProfile, solve_heat_kernel


@pytest.fixture(scope="session")
def small_spec():
    return GridSpec(T=0.5, Y=12.0, n_t=12, n_x=16, n_y=64)


@pytest.fixture(scope="session")
def small_shear(small_spec):
    return solve_heat_kernel(ShearProfile(), small_spec)


@pytest.fixture(scope="session")
def nm_spec():
    return GridSpec(T=0.25, Y=12.0, n_t=32, n_x=32, n_y=96)


@pytest.fixture(scope="session")
def nm_shear(nm_spec):
    return solve_heat_kernel(ShearProfile(), nm_spec)


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Call with (number, passed, detail); the line is printed now and repeated in the terminal summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def report(number: int, passed: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        lines.append((number, line))
        print(line)
        return passed
    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)

import numpy as np
import pytest

from zerodensity import BundleSetup
from zerodensity.shapes import box, cubed_ellipsoid, ellipsoid, icosahedron, icosphere, tetrahedron


@pytest.fixture(scope="session")
def ico():
    return icosahedron()


@pytest.fixture(scope="session")
def ico_setup(ico):
    return BundleSetup.from_mesh(ico)


@pytest.fixture(scope="session")
def sphere2_setup():
    return BundleSetup.from_mesh(icosphere(2))


@pytest.fixture(scope="session")
def sphere2_basis(sphere2_setup):
    return sphere2_setup.eigenbasis()


@pytest.fixture(scope="session")
def ell2_setup():
    return BundleSetup.from_mesh(ellipsoid(level=2))


@pytest.fixture(scope="session")
def ell2_basis(ell2_setup):
    return ell2_setup.eigenbasis()


@pytest.fixture(scope="session")
def cube_setup():
    return BundleSetup.from_mesh(cubed_ellipsoid(4))


@pytest.fixture(scope="session")
def small_meshes():
    return {"tetrahedron": tetrahedron(), "icosahedron": icosahedron(), "box": box(2),
            "icosphere1": icosphere(1), "ellipsoid1": ellipsoid(level=1)}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_sections(rng, n, count=None):
    shape = (n,) if count is None else (n, count)
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


# -- acceptance report ---------------------------------------------------------

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


def pytest_runtest_makereport(item, call):
    m = item.get_closest_marker("criterion")
    if m is None or call.when != "call":
        return
    n, title = m.args
    ok = call.excinfo is None
    detail = "; ".join(v for k, v in item.user_properties if k == "detail")
    prev = _CRITERIA.get(n)
    if prev is not None:
        ok = ok and prev[1]
        detail = "; ".join(d for d in (prev[2], detail) if d)
    _CRITERIA[n] = (title, ok, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, ok, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n} ({title}): {'PASS' if ok else 'FAIL'}" + (f" [{detail}]" if detail else ""))

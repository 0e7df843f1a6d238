import pathlib

import pytest

from hv.canonical import parse_path

FIXTURES = pathlib.Path(__file__).parent / "fixtures"


def load_fixture(name: str):
    report = parse_path(str(FIXTURES / name))
    assert report.ok, report.fatal
    return report.model


@pytest.fixture(scope="session")
def order_model():
    return load_fixture("order.hvm.json")


@pytest.fixture(scope="session")
def showcase_model():
    return load_fixture("showcase.hvm.json")


@pytest.fixture
def fixtures_dir():
    return FIXTURES

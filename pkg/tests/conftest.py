import pytest
from loguru import logger

from app.core.config import settings
from app.services.arith import PrimeTables
from app.services.families import default_identity_model, make_identity_family

TEST_PRIME_LIMIT = 1_000_000


@pytest.fixture(scope="session")
def tables() -> PrimeTables:
    return PrimeTables(TEST_PRIME_LIMIT)


@pytest.fixture(scope="session")
def small_tables() -> PrimeTables:
    return PrimeTables(20_000)


@pytest.fixture(scope="session", autouse=True)
def quiet_logs():
    """No log files from tests; warnings and above are dropped."""
    settings.log_file = ""
    logger.remove()
    logger.add(lambda message: None, level="WARNING")
    yield
    logger.remove()


@pytest.fixture(scope="session")
def identity_family():
    return make_identity_family(model=default_identity_model())

import pytest

from webshield.keyrand import Origin, SessionKey, derive_seed

ZERO_KEY = SessionKey(bytes(32))
ORIGIN_A = Origin.parse("https://a.example")
ORIGIN_B = Origin.parse("https://b.example")


@pytest.fixture
def zero_session():
    return ZERO_KEY


@pytest.fixture
def origin_a():
    return ORIGIN_A


@pytest.fixture
def origin_b():
    return ORIGIN_B


@pytest.fixture
def canvas_seed():
    return derive_seed(ZERO_KEY, ORIGIN_A, "canvas")


@pytest.fixture
def audio_seed():
    return derive_seed(ZERO_KEY, ORIGIN_A, "audio")


@pytest.fixture
def time_seed():
    return derive_seed(ZERO_KEY, ORIGIN_A, "time")


@pytest.fixture
def sensor_seed():
    return derive_seed(ZERO_KEY, ORIGIN_A, "sensor")


@pytest.fixture
def geo_seed():
    return derive_seed(ZERO_KEY, ORIGIN_A, "geo")

"""Shared fixtures: the expensive random graphs are built once per session."""

import pytest

from hampow import gnp


@pytest.fixture(scope="session")
def g500():
    return gnp(500, 0.35, seed=31)


@pytest.fixture(scope="session")
def g600():
    return gnp(600, 0.3, seed=11)


@pytest.fixture(scope="session")
def g3000():
    return gnp(3000, 0.25, seed=19)

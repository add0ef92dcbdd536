from __future__ import annotations

import pytest

from coarsebox.bundles import bundled_map_spaces
from coarsebox.groups import build_family, cyclic_quotient


@pytest.fixture(scope="session")
def cyclic_chain():
    return build_family("cyclic:2", 4)  # orders 2, 4, 8, 16


@pytest.fixture(scope="session")
def c4(cyclic_chain):
    return cyclic_chain.quotients[1]


@pytest.fixture(scope="session")
def c8(cyclic_chain):
    return cyclic_chain.quotients[2]


@pytest.fixture(scope="session")
def c16(cyclic_chain):
    return cyclic_chain.quotients[3]


@pytest.fixture(scope="session")
def bundle():
    return bundled_map_spaces()

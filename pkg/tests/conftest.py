from dataclasses import dataclass

import numpy as np
import pytest

from mobicache.model import Catalog, HelperSet, MobilityModel, RequestModel, uniform_request_model


@dataclass(frozen=True)
class Desk1:
    """The canonical two-helper desk instance: symmetric mobility, one
    10-byte file, slot budget 5, deadline 2."""

    model: MobilityModel
    requests: RequestModel
    catalog: Catalog
    d: int = 2

    def helpers(self, capacity: int = 10) -> HelperSet:
        return HelperSet([capacity, capacity], [5, 5])


@pytest.fixture
def desk1() -> Desk1:
    return Desk1(
        model=MobilityModel([0.5, 0.5], [[0.5, 0.5], [0.5, 0.5]]),
        requests=uniform_request_model([1.0], 2),
        catalog=Catalog([10]),
    )


def random_chain(rng, n: int, sparse: bool = False) -> MobilityModel:
    init = rng.random(n)
    trans = rng.random((n, n))
    if sparse and n > 1:
        trans[rng.random((n, n)) < 0.3] = 0.0
        trans += np.eye(n) * 1e-3
        init[rng.random(n) < 0.25] = 0.0
        if init.sum() == 0.0:
            init[0] = 1.0
    init /= init.sum()
    trans /= trans.sum(axis=1, keepdims=True)
    return MobilityModel(init, trans)

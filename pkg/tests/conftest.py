import numpy as np
import pytest

from warmlink.config import preset_config

TWO_PI = 2 * np.pi


@pytest.fixture(scope="session")
def cfg():
    return preset_config()


@pytest.fixture(scope="session")
def link_4k(cfg):
    return cfg.link()


@pytest.fixture(scope="session")
def link_4k_single(cfg):
    return cfg.link(two_qubit=False)


@pytest.fixture(scope="session")
def lossless_link(link_4k):
    return link_4k.lossless()


@pytest.fixture(scope="session")
def transfer_time_4k(link_4k):
    from warmlink.protocols import optimize_transfer_time
    t_star, peak = optimize_transfer_time(link_4k)
    return t_star, peak


@pytest.fixture(scope="session")
def bell_timings_4k(link_4k):
    from warmlink.protocols import optimize_bell_timings
    return optimize_bell_timings(link_4k)

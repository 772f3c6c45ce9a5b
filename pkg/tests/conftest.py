import numpy as np
import pytest

from realsw import JointPMF


def random_pmf(rng, kx=2, ky=2, floor=0.0, x_alphabet=None, y_alphabet=None):
    p = rng.dirichlet(np.ones(kx * ky)).reshape(kx, ky) + floor
    p = p / p.sum()
    xa = x_alphabet if x_alphabet is not None else tuple(range(kx))
    ya = y_alphabet if y_alphabet is not None else tuple(range(ky))
    return JointPMF(xa, ya, p)


@pytest.fixture
def dsbs11():
    return JointPMF.dsbs(0.11)


@pytest.fixture
def uniform2():
    return JointPMF.uniform((0, 1), (0, 1))


# a binary source with unequal marginals, used wherever three distinct pmfs are wanted
ASYMMETRIC = JointPMF((0, 1), (0, 1), [[0.5, 0.1], [0.15, 0.25]])

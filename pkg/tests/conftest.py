import numpy as np
import pytest

from sublap import models


@pytest.fixture(scope="session")
def heis():
    return models.heisenberg3()


@pytest.fixture(scope="session")
def contact_pert():
    return models.contact3_perturbed()


@pytest.fixture(scope="session")
def qc_r4():
    return models.quasicontact_r4("exp")


@pytest.fixture(scope="session")
def carnot_flat():
    # 4D corank-1 group with a one-dimensional kernel (quasi-contact type)
    return models.carnot_corank1([[0, 1, 0], [-1, 0, 0], [0, 0, 0]])


@pytest.fixture(scope="session")
def zoo(heis, contact_pert, qc_r4, carnot_flat):
    return [heis, models.carnot_corank1([[0.0, 1.0], [-1.0, 0.0]]),
            carnot_flat, qc_r4, contact_pert]


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_poly(rng, n, degree=3, terms=6):
    """Sparse random polynomial with total degree <= degree."""
    chosen = []
    for _ in range(terms):
        e = rng.integers(0, degree + 1, size=n)
        while e.sum() > degree:
            j = rng.integers(0, n)
            e[j] = max(e[j] - 1, 0)
        chosen.append((float(rng.uniform(-1, 1)), e.copy()))

    def f(q):
        q = np.asarray(q, dtype=float)
        out = np.zeros(q.shape[:-1])
        for c, e in chosen:
            mono = np.ones(q.shape[:-1])
            for m in range(n):
                if e[m]:
                    mono = mono * q[..., m] ** int(e[m])
            out = out + c * mono
        return out

    return f

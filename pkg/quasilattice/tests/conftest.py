import pytest

from quasilattice.groups import GroupSpec
from quasilattice.scheme import SchemeDescriptor, fibonacci_descriptor, scheme_from_descriptor


def build(m=1, d=1, torus=0, torsion=(), **kwargs):
    return scheme_from_descriptor(
        SchemeDescriptor(m=m, group=GroupSpec(d=d, torus=torus, torsion=tuple(torsion)), **kwargs)
    )


@pytest.fixture(scope="session")
def fibonacci():
    return scheme_from_descriptor(fibonacci_descriptor())


@pytest.fixture(scope="session")
def r_z2():
    return build(torsion=(2,))


@pytest.fixture(scope="session")
def r_torus():
    return build(torus=1)


@pytest.fixture(scope="session")
def r_z4_z3():
    return build(torsion=(4, 3))


@pytest.fixture(scope="session")
def standard_schemes(fibonacci, r_z2, r_torus, r_z4_z3):
    return {
        "fibonacci": fibonacci,
        "R": build(),
        "R2": build(d=2),
        "RxT": r_torus,
        "RxZ2": r_z2,
        "RxZ2^2": build(torsion=(2, 2)),
        "RxZ4+Z3": r_z4_z3,
    }

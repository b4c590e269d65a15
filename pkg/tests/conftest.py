from __future__ import annotations

import math

import pytest

from sublimits.classes import builtin


def chi2_threshold(dof: int, z: float = 3.0902) -> float:
    """Wilson-Hilferty approximation of the chi-square quantile at p = 0.999."""
    h = 2.0 / (9.0 * dof)
    return dof * (1.0 - h + z * math.sqrt(h)) ** 3


def chi2_stat(counts, expected) -> float:
    return sum((c - e) ** 2 / e for c, e in zip(counts, expected))


@pytest.fixture(scope="session")
def trees_labelled():
    return builtin("trees_labelled")


@pytest.fixture(scope="session")
def trees_unlabelled():
    return builtin("trees_unlabelled")


@pytest.fixture(scope="session")
def cacti_labelled():
    return builtin("cacti_labelled")


@pytest.fixture(scope="session")
def cacti_unlabelled():
    return builtin("cacti_unlabelled")


@pytest.fixture(scope="session")
def blockgraphs_labelled():
    return builtin("blockgraphs_labelled")

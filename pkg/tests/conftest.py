import numpy as np
import pytest

from gapcert import cutproject


@pytest.fixture(scope="session")
def ab_spec():
    return cutproject.ammann_beenker()


@pytest.fixture(scope="session")
def fib_spec():
    return cutproject.fibonacci()


@pytest.fixture(scope="session")
def ab_cands_small(ab_spec):
    return {L: cutproject.candidate_set(ab_spec, L) for L in (2, 3, 5)}


def substitution_word(n: int) -> str:
    """Independent Fibonacci-word oracle: L -> LS, S -> L, from 'L'."""
    w = "L"
    while len(w) < n:
        w = "".join("LS" if ch == "L" else "L" for ch in w)
    return w[:n]


def substitution_points(n_letters: int) -> np.ndarray:
    """Integer lattice walk of the substitution word: L steps (1,2), S steps (1,1)."""
    word = substitution_word(n_letters)
    z = np.zeros((n_letters + 1, 2), dtype=np.int64)
    for i, ch in enumerate(word):
        step = (1, 2) if ch == "L" else (1, 1)
        z[i + 1] = z[i] + step
    return z

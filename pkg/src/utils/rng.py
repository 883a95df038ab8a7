from typing import List

import numpy as np


def generator(seed: int) -> np.random.Generator:
    """Create the generator every stochastic operation draws from."""
    return np.random.default_rng(np.random.SeedSequence(seed))


def split_seeds(seed: int, count: int) -> List[int]:
    """Derive independent child seeds from one parent seed.

    Args:
        seed: Parent seed
        count: Number of children

    Returns:
        List of integer seeds, stable for a given (seed, count)
    """
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(child.generate_state(1)[0]) for child in children]


def split_generators(seed: int, count: int) -> List[np.random.Generator]:
    """Derive independent generators, one per consumer (node, tree, ...)."""
    return [np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(count)]

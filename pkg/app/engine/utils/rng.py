import numpy as np


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """
    Create a generator whose stream is fully determined by a master seed and a key path.

    :param seed: The master seed.
    :param keys: Integers identifying the consumer (epoch, split, ...).
    :return: A fresh numpy Generator.
    """
    return np.random.default_rng(np.random.SeedSequence([seed, *keys]))


def spawn_generators(seed: int, count: int) -> list[np.random.Generator]:
    """
    Spawn independent generators, one per Monte-Carlo trajectory.

    Trajectory k always receives the same stream for a given seed, whatever the total count.

    :param seed: The master seed.
    :param count: Number of generators.
    :return: List of numpy Generators.
    """
    return [np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(count)]

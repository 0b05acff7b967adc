"""
Seeding Utilities
Deterministic random streams for datasets, channels and Monte Carlo replicates
"""
import os
from typing import Optional

import numpy as np
from dotenv import load_dotenv

SEED_ENV_VAR = 'NOISYKNN_SEED'
DEFAULT_SEED = 0

# Stream tags keep sampling, corruption and probing draws apart for one replicate
STREAM_SAMPLE = 0
STREAM_CHANNEL = 1
STREAM_PROBE = 2
STREAM_FOLDS = 3
STREAM_HOLDOUT = 4


def resolve_seed(seed: Optional[int] = None) -> int:
    """
    Resolve the seed used by a randomized command

    Args:
        seed: Explicit seed (wins when given)

    Returns:
        Seed from the argument, else NOISYKNN_SEED (.env is honoured), else 0
    """
    if seed is not None:
        return int(seed)

    load_dotenv()
    env_value = os.environ.get(SEED_ENV_VAR)
    if env_value is None or env_value.strip() == '':
        return DEFAULT_SEED

    try:
        return int(env_value)
    except ValueError:
        raise ValueError(f"{SEED_ENV_VAR} must be an integer, got {env_value!r}")


def get_rng(seed: int, *keys: int) -> np.random.Generator:
    """
    Get a numpy generator for (seed, *keys)

    The keys become the SeedSequence spawn key, so every (seed, keys) pair owns
    an independent stream no matter which process or in which order it is built.

    Args:
        seed: Master seed (non-negative)
        keys: Stream coordinates, e.g. (n, replicate_index, STREAM_SAMPLE)

    Returns:
        numpy Generator instance
    """
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    if any(key < 0 for key in keys):
        raise ValueError(f"stream keys must be non-negative, got {keys}")

    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(key) for key in keys))
    return np.random.default_rng(sequence)


def replicate_rng(master_seed: int, n: int, replicate: int, stream: int) -> np.random.Generator:
    """Generator for one stream of one Monte Carlo replicate at sample size n"""
    return get_rng(master_seed, n, replicate, stream)

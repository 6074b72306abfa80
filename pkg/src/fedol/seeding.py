"""Deterministic sub-seed derivation from one global seed."""

import hashlib


def derive_seed(seed, *labels):
    """Mix ``seed`` with string/int labels into an independent 63-bit seed.

    Each pipeline stage uses its own label, so adding a stage or strategy
    never shifts the random streams of the others.
    """
    key = repr((int(seed),) + tuple(labels)).encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little") >> 1

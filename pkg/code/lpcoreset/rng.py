import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    """
    Returns the package-wide random stream for a seed.

    The bit generator is Philox-4x32-10 (counter based;
    multipliers 0xD2511F53 / 0xCD9E8D57, Weyl increments 0x9E3779B9 /
    0xBB67AE85, ten rounds) as shipped by numpy. Normal variates use numpy's
    ziggurat transform, uniforms the 53-bit mantissa construction. Streams are
    therefore reproducible bit for bit for a fixed numpy version.

    Parameters:
    - seed (int): Non-negative 64-bit seed.

    Returns:
    - np.random.Generator: Seeded generator.
    """
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))

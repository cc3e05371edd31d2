"""Deterministic seed derivation.

A master seed expands into per-trial (or per-role) seeds through a fixed
64-bit mixing function, so that experiment results are reproducible for a
given master seed regardless of execution order.  The mixer is the splitmix64
finalizer, chosen because it is a published, well-tested bijection on 64-bit
words with good avalanche behavior.
"""

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One splitmix64 finalization round of a 64-bit integer."""
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return (z ^ (z >> 31)) & MASK64


def derive_seed(master: int, index: int, role: int = 0) -> int:
    """Mix a trial index (and optional role tag) into a master seed.

    The rule is fixed: mix the index, xor into the master, mix again, then
    fold in the role the same way.  Distinct (index, role) pairs give
    independent-looking 64-bit seeds suitable for numpy Generators.
    """
    s = splitmix64((master & MASK64) ^ splitmix64(index & MASK64))
    if role:
        s = splitmix64(s ^ splitmix64(role & MASK64))
    return s

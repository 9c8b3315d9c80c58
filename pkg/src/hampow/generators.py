"""Reproducible test-graph constructions.

The random model uses a pinned counter-based 64-bit PRNG (splitmix64,
the xorshift-multiply family) so edge sets are bit-exact across runs and
implementations.  Contract, for seed ``s`` and pair index ``t`` (pairs
(i, j), i < j, in row-major order):

    u_t   = mix64((s + (t + 1) * 0x9E3779B97F4A7C15) mod 2^64)
    mix64(z): z ^= z >> 30; z *= 0xBF58476D1CE4E5B9; z ^= z >> 27;
              z *= 0x94D049BB133111EB; z ^= z >> 31   (all mod 2^64)

and the pair is an edge iff ``u_t < floor(p * 2^64)``.
"""

from __future__ import annotations

from typing import List, Optional, Sequence

import numpy as np

from .graph import Graph, build_graph, verify_kpower

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def splitmix64(seed: int, index: int) -> int:
    """The t-th 64-bit output of the pinned stream for this seed."""
    z = (seed + (index + 1) * _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def _splitmix64_array(seed: int, count: int) -> np.ndarray:
    idx = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & _MASK64) + idx * np.uint64(_GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))


def gnp(n: int, p: float, seed: int) -> Graph:
    """G(n, p) with each pair decided by the pinned PRNG stream."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    npairs = n * (n - 1) // 2
    if npairs == 0:
        return Graph(n, [0] * n)
    threshold = int(p * (1 << 64))
    if threshold >= 1 << 64:
        hits = np.ones(npairs, dtype=bool)
    elif threshold <= 0:
        hits = np.zeros(npairs, dtype=bool)
    else:
        hits = _splitmix64_array(seed, npairs) < np.uint64(threshold)

    adj = np.zeros((n, n), dtype=bool)
    iu, ju = np.triu_indices(n, k=1)
    adj[iu, ju] = hits
    adj[ju, iu] = hits
    rows = [
        int.from_bytes(np.packbits(adj[i], bitorder="little").tobytes(), "little")
        for i in range(n)
    ]
    return Graph(n, rows)


def _is_prime(q: int) -> bool:
    if q < 2:
        return False
    if q % 2 == 0:
        return q == 2
    f = 3
    while f * f <= q:
        if q % f == 0:
            return False
        f += 2
    return True


def paley(q: int) -> Graph:
    """Paley graph on F_q: x ~ y iff x - y is a nonzero quadratic residue.

    Requires q prime with q = 1 (mod 4); prime powers are not supported.
    """
    if not _is_prime(q):
        raise ValueError(f"q = {q} is not prime (prime powers unsupported)")
    if q % 4 != 1:
        raise ValueError(f"q = {q} is not 1 mod 4, difference set not symmetric")
    residues = {(x * x) % q for x in range(1, q)}
    rows = [0] * q
    for x in range(q):
        for r in residues:
            rows[x] |= 1 << ((x + r) % q)
    return Graph(q, rows)


def cycle_power(n: int, k: int) -> Graph:
    """C_n^k: vertices at cyclic distance <= k joined; 2k-regular."""
    if k < 1:
        raise ValueError("k must be positive")
    if n < 2 * k + 2:
        raise ValueError(f"need n >= {2 * k + 2} so C_n^{k} stays below K_n")
    rows = [0] * n
    for i in range(n):
        for d in range(1, k + 1):
            rows[i] |= 1 << ((i + d) % n)
            rows[i] |= 1 << ((i - d) % n)
    return Graph(n, rows)


def complete_graph(n: int) -> Graph:
    full = (1 << n) - 1
    return Graph(n, [full ^ (1 << v) for v in range(n)])


def subgroup_sum_graph(q: int, subgroup: Sequence[int]) -> Graph:
    """Sum graph on a multiplicative subgroup A of F_q*: x ~ y iff x+y in A.

    Vertex i corresponds to ``subgroup[i]``.  Rejects inputs that are not
    multiplicatively closed, reporting a witness product.
    """
    if not _is_prime(q):
        raise ValueError(f"q = {q} is not prime")
    elems = list(subgroup)
    if len(set(elems)) != len(elems):
        raise ValueError("subgroup elements must be distinct")
    members = set(elems)
    for a in elems:
        if not 1 <= a < q:
            raise ValueError(f"element {a} is not in F_{q}*")
        for b in elems:
            if (a * b) % q not in members:
                raise ValueError(
                    f"not multiplicatively closed: {a}*{b} = {(a * b) % q} not in set"
                )
    d = len(elems)
    rows = [0] * d
    for i in range(d):
        for j in range(i + 1, d):
            if (elems[i] + elems[j]) % q in members:
                rows[i] |= 1 << j
                rows[j] |= 1 << i
    return Graph(d, rows)


def quadratic_residues(q: int) -> List[int]:
    """Sorted nonzero quadratic residues mod prime q."""
    if not _is_prime(q):
        raise ValueError(f"q = {q} is not prime")
    return sorted({(x * x) % q for x in range(1, q)})


def sum_closed_ordering(
    q: int, subgroup: Sequence[int], k: int, seed: int = 0
) -> Optional[List[int]]:
    """Cyclic ordering a_0..a_{d-1} of A with a_i + a_{i+j} in A for j <= k.

    Realised as a Hamilton k-power cycle of the subgroup sum graph: by
    brute-force search for |A| <= 14, via the embedding pipeline above.
    Returns None when no ordering is found (small q may genuinely fail).
    The output is re-verified by direct modular arithmetic.
    """
    from .counting import brute_force_find

    elems = list(subgroup)
    g = subgroup_sum_graph(q, elems)
    d = len(elems)
    if d <= 14:
        ids = brute_force_find(g, k)
    else:
        if k < 2:
            return None
        from .embed import EmbedConfig, StageFailure, embed_hamilton_power

        try:
            ids = embed_hamilton_power(g, EmbedConfig(k=k, seed=seed))
        except StageFailure:
            return None
    if ids is None:
        return None
    if not verify_kpower(g, ids, k, cyclic=True):
        raise AssertionError("ordering failed graph re-verification")
    ordering = [elems[i] for i in ids]
    members = set(elems)
    for i in range(d):
        for j in range(1, k + 1):
            s = (ordering[i] + ordering[(i + j) % d]) % q
            if s not in members:
                raise AssertionError(
                    f"ordering failed arithmetic re-check at ({i}, j={j})"
                )
    return ordering

"""Pseudorandomness checkers, spectral certifier, and connectedness predicates.

Three notions live here:

* discrepancy pseudorandomness: every disjoint X, Y with |X| >= eps*p^k*n
  and |Y| >= eps*p^l*n has e(X,Y) = (1 +- eps) p |X||Y|;
* jumbledness: |e(A,B) - p|A||B|| <= beta * sqrt(|A||B|) for disjoint A, B;
* spectral: for d-regular graphs the mixing bound with the second
  adjacency eigenvalue certifies jumbledness, hence pseudorandomness.

Exact checks are exponential and capped at n <= 18; they avoid enumerating
the second set by maximising the additive discrepancy over top/bottom
degree prefixes.  A seeded hill-climbing falsifier covers larger n.

Floating-point policy: edge counts are exact ints; discrepancy comparisons
carry an absolute tolerance of 1e-9; size thresholds round up.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .bits import bit_list, iter_bits
from .graph import Graph, common_neighborhood, edges_between, is_clique

_TOL = 1e-9

SATISFIED = "satisfied"
VIOLATED = "violated"
UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class PseudoParams:
    """(eps, p, k, l) parameters of the discrepancy condition."""

    epsilon: float
    p: float
    k: int
    l: int

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.p < 1:
            raise ValueError("p must lie in (0, 1)")
        if self.k < 0 or self.l < self.k:
            raise ValueError("need 0 <= k <= l")

    def x_min(self, n: int) -> int:
        return max(1, math.ceil(self.epsilon * self.p**self.k * n - _TOL))

    def y_min(self, n: int) -> int:
        return max(1, math.ceil(self.epsilon * self.p**self.l * n - _TOL))


@dataclass(frozen=True)
class Witness:
    """A violating pair: sets, exact cross-edge count, and the bound beaten."""

    x_mask: int
    y_mask: int
    observed: int
    bound: float


@dataclass(frozen=True)
class Verdict:
    status: str
    witness: Optional[Witness] = None
    certified_epsilon: Optional[float] = None
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        if (self.status == VIOLATED) != (self.witness is not None):
            raise ValueError("witness present iff status is violated")


def implied_density(params: PseudoParams, n: int) -> bool:
    """p^l * n > 1/eps, the density floor any pseudorandom graph must obey."""
    return params.p**params.l * n > 1.0 / params.epsilon


def second_eigenvalue(g: Graph, tol: float = 1e-9) -> float:
    """max(|lambda_2|, |lambda_n|) of the adjacency spectrum of a regular graph."""
    d = g.regular_degree()
    if g.n < 2:
        raise ValueError("need at least two vertices")
    if g.n <= 2000:
        a = _adjacency_matrix(g)
        eigs = np.linalg.eigvalsh(a)
        return float(max(abs(eigs[-2]), abs(eigs[0])))
    return _second_eigenvalue_iterative(g, d, tol)


def _adjacency_matrix(g: Graph) -> np.ndarray:
    a = np.zeros((g.n, g.n))
    for u in range(g.n):
        for v in iter_bits(g.rows[u]):
            a[u, v] = 1.0
    return a


def _second_eigenvalue_iterative(g: Graph, d: int, tol: float) -> float:
    # Deflate the known top eigenpair (all-ones, d) and power-iterate on
    # B = A - (d/n) J, whose extreme eigenvalues are lambda_2 and lambda_n.
    n = g.n
    rows_idx = [np.fromiter(iter_bits(r), dtype=np.int64) for r in g.rows]

    def apply_b(x: np.ndarray) -> np.ndarray:
        ax = np.array([x[idx].sum() for idx in rows_idx])
        return ax - (d / n) * x.sum()

    def extreme(shift: float, rng: np.random.Generator) -> float:
        # power iteration on shift*I + B converges to the eigenvalue of B
        # furthest from -shift
        x = rng.standard_normal(n)
        x -= x.mean()
        x /= np.linalg.norm(x)
        prev = 0.0
        for _ in range(20000):
            y = shift * x + apply_b(x)
            y -= y.mean()
            norm = np.linalg.norm(y)
            if norm < 1e-300:
                return 0.0
            x = y / norm
            ray = float(x @ apply_b(x))
            if abs(ray - prev) <= tol * max(1.0, abs(ray)):
                return ray
            prev = ray
        return prev

    rng = np.random.default_rng(12345)
    hi = extreme(d, rng)
    lo = extreme(-d, rng)
    return max(abs(hi), abs(lo))


def _prefix_extremes(weights: List[float]) -> Tuple[List[float], List[float]]:
    ws = sorted(weights, reverse=True)
    tops, bots = [0.0], [0.0]
    for w in ws:
        tops.append(tops[-1] + w)
    for w in reversed(ws):
        bots.append(bots[-1] + w)
    return tops, bots


def _extreme_set(g: Graph, a_mask: int, want_top: bool, size: int, p: float) -> int:
    """The s complement vertices extremising sum of deg_A(v) - p|A|."""
    asz = a_mask.bit_count()
    others = [v for v in range(g.n) if not a_mask >> v & 1]
    others.sort(key=lambda v: (g.rows[v] & a_mask).bit_count() - p * asz, reverse=want_top)
    out = 0
    for v in others[:size]:
        out |= 1 << v
    return out


def check_jumbled(
    g: Graph,
    p: float,
    beta: float,
    mode: str = "exact",
    budget: int = 10000,
    seed: int = 0,
) -> Verdict:
    """Check |e(A,B) - p|A||B|| <= beta sqrt(|A||B|) over disjoint A, B.

    Exact mode enumerates every A (n <= 18) and maximises the discrepancy
    over B analytically.  Sampled mode hill-climbs for a violation and
    returns undetermined if the budget expires.
    """
    if mode == "exact":
        if g.n > 18:
            raise ValueError("exact jumbledness check capped at n <= 18; use mode='sampled'")
        return _jumbled_exact(g, p, beta)
    if mode == "sampled":
        return _sampled_falsifier(g, seed, budget, _jumbled_score(p, beta))
    raise ValueError(f"unknown mode {mode!r}")


def _jumbled_exact(g: Graph, p: float, beta: float) -> Verdict:
    n = g.n
    for a_mask in range(1, 1 << n):
        asz = a_mask.bit_count()
        weights = [
            (g.rows[v] & a_mask).bit_count() - p * asz
            for v in range(n)
            if not a_mask >> v & 1
        ]
        tops, bots = _prefix_extremes(weights)
        for s in range(1, len(weights) + 1):
            disc = max(tops[s], -bots[s])
            bound = beta * math.sqrt(asz * s)
            if disc > bound + _TOL:
                want_top = tops[s] >= -bots[s]
                b_mask = _extreme_set(g, a_mask, want_top, s, p)
                return Verdict(
                    VIOLATED,
                    Witness(a_mask, b_mask, edges_between(g, a_mask, b_mask), bound),
                )
    return Verdict(SATISFIED)


def max_jumbled_discrepancy(g: Graph, p: float) -> float:
    """Exhaustive max of |e(A,B) - p|A||B|| / sqrt(|A||B|); oracle helper."""
    if g.n > 18:
        raise ValueError("capped at n <= 18")
    best = 0.0
    for a_mask in range(1, 1 << g.n):
        asz = a_mask.bit_count()
        weights = [
            (g.rows[v] & a_mask).bit_count() - p * asz
            for v in range(g.n)
            if not a_mask >> v & 1
        ]
        tops, bots = _prefix_extremes(weights)
        for s in range(1, len(weights) + 1):
            disc = max(tops[s], -bots[s])
            best = max(best, disc / math.sqrt(asz * s))
    return best


def check_pseudorandom_exact(g: Graph, params: PseudoParams) -> Verdict:
    """Exact (eps,p,k,l)-pseudorandomness decision for n <= 18."""
    if g.n > 18:
        raise ValueError("exact pseudorandomness check capped at n <= 18")
    n = g.n
    xmin, ymin = params.x_min(n), params.y_min(n)
    p, eps = params.p, params.epsilon
    for x_mask in range(1, 1 << n):
        xsz = x_mask.bit_count()
        if xsz < xmin:
            continue
        weights = [
            (g.rows[v] & x_mask).bit_count() - p * xsz
            for v in range(n)
            if not x_mask >> v & 1
        ]
        if len(weights) < ymin:
            continue
        tops, bots = _prefix_extremes(weights)
        for s in range(ymin, len(weights) + 1):
            disc = max(tops[s], -bots[s])
            bound = eps * p * xsz * s
            if disc >= bound - _TOL:
                want_top = tops[s] >= -bots[s]
                y_mask = _extreme_set(g, x_mask, want_top, s, p)
                return Verdict(
                    VIOLATED,
                    Witness(x_mask, y_mask, edges_between(g, x_mask, y_mask), bound),
                )
    return Verdict(SATISFIED)


def critical_epsilon(g: Graph, p: float, k: int, l: int) -> float:
    """Sharp violation threshold: the largest eps some disjoint pair attains.

    A pair (X, Y) violates the discrepancy condition at eps iff its
    relative discrepancy reaches eps AND both sizes clear their
    eps-dependent thresholds, so the critical value is the max over pairs
    of min(relative discrepancy, |X|/(p^k n), |Y|/(p^l n)).  Exhaustive;
    n <= 18.
    """
    if g.n > 18:
        raise ValueError("capped at n <= 18")
    n = g.n
    best = 0.0
    for x_mask in range(1, 1 << n):
        xsz = x_mask.bit_count()
        cap_x = xsz / (p**k * n)
        if cap_x <= best:
            continue
        weights = [
            (g.rows[v] & x_mask).bit_count() - p * xsz
            for v in range(n)
            if not x_mask >> v & 1
        ]
        tops, bots = _prefix_extremes(weights)
        for s in range(1, len(weights) + 1):
            disc = max(tops[s], -bots[s])
            val = min(disc / (p * xsz * s), cap_x, s / (p**l * n))
            best = max(best, val)
    return best


def check_pseudorandom_sampled(
    g: Graph, params: PseudoParams, budget: int = 10000, seed: int = 0
) -> Verdict:
    """Randomised falsifier for large n: violated-with-witness or undetermined."""
    return _sampled_falsifier(
        g, seed, budget, _pseudo_score(params, g.n), min_sizes=(params.x_min(g.n), params.y_min(g.n))
    )


def _jumbled_score(p: float, beta: float):
    """Score = discrepancy minus allowed bound; positive means violated."""

    def score(asz: int, bsz: int, e: int) -> Tuple[float, float]:
        if asz == 0 or bsz == 0:
            return -math.inf, 0.0
        bound = beta * math.sqrt(asz * bsz)
        return abs(e - p * asz * bsz) - bound, bound

    return score


def _pseudo_score(params: PseudoParams, n: int):
    xmin, ymin = params.x_min(n), params.y_min(n)

    def score(asz: int, bsz: int, e: int) -> Tuple[float, float]:
        if asz < xmin or bsz < ymin:
            return -math.inf, 0.0
        bound = params.epsilon * params.p * asz * bsz
        return abs(e - params.p * asz * bsz) - bound, bound

    return score


def _sampled_falsifier(
    g: Graph, seed: int, budget: int, score_fn, min_sizes: Tuple[int, int] = (1, 1)
) -> Verdict:
    """Hill-climb vertex states (out/A/B) to maximise the violation score."""
    rng = random.Random(f"falsifier:{seed}")
    n = g.n
    amin, bmin = min_sizes
    if amin + bmin > n:
        return Verdict(UNDETERMINED, detail={"reason": "size thresholds exceed n"})

    def initial() -> Tuple[int, int, int]:
        verts = list(range(n))
        rng.shuffle(verts)
        ra = rng.randint(amin, max(amin, n // 2))
        rb = min(n - ra, rng.randint(bmin, max(bmin, n // 2)))
        a = b = 0
        for v in verts[:ra]:
            a |= 1 << v
        for v in verts[ra : ra + rb]:
            b |= 1 << v
        return a, b, edges_between(g, a, b)

    a_mask, b_mask, e = initial()
    best, bound = score_fn(a_mask.bit_count(), b_mask.bit_count(), e)
    for moves in range(1, budget + 1):
        if best > _TOL:
            return Verdict(VIOLATED, Witness(a_mask, b_mask, e, bound))
        v = rng.randrange(n)
        bit = 1 << v
        deg_a = (g.rows[v] & a_mask).bit_count()
        deg_b = (g.rows[v] & b_mask).bit_count()
        if a_mask & bit:  # in A: leave, or switch to B
            options = [
                (a_mask ^ bit, b_mask, e - deg_b),
                (a_mask ^ bit, b_mask | bit, e - deg_b + deg_a),
            ]
        elif b_mask & bit:
            options = [
                (a_mask, b_mask ^ bit, e - deg_a),
                (a_mask | bit, b_mask ^ bit, e - deg_a + deg_b),
            ]
        else:
            options = [
                (a_mask | bit, b_mask, e + deg_b),
                (a_mask, b_mask | bit, e + deg_a),
            ]
        improved = False
        for na, nb, ne in options:
            sc, bd = score_fn(na.bit_count(), nb.bit_count(), ne)
            if sc > best:
                a_mask, b_mask, e, best, bound = na, nb, ne, sc, bd
                improved = True
                break
        if not improved and rng.random() < 0.02:
            a_mask, b_mask, e = initial()
            best, bound = score_fn(a_mask.bit_count(), b_mask.bit_count(), e)
    if best > _TOL:
        return Verdict(VIOLATED, Witness(a_mask, b_mask, e, bound))
    return Verdict(UNDETERMINED, detail={"moves": budget})


def certify_via_spectrum(
    g: Graph, p: Optional[float] = None, k: int = 1, l: int = 2
) -> Verdict:
    """Sufficient spectral certificate of (eps,p,k,l)-pseudorandomness.

    For a d-regular graph the mixing bound makes it (d/n, lambda)-jumbled,
    and (p, eps^2 p^s n)-jumbledness with s = (k+l+2)/2 implies
    (eps,p,k,l)-pseudorandomness.  Reports the certificate threshold: the
    smallest epsilon the implication covers (every larger epsilon is
    certified too).  Never claims a violation.
    """
    d = g.regular_degree()
    if p is None:
        p = d / g.n
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    lam = second_eigenvalue(g) * (1 + 2e-6)
    s = (k + l + 2) / 2
    denom = p**s * g.n
    eps_min = math.sqrt(lam / denom) * (1 + 1e-6) if denom > 0 else math.inf
    detail = {"lambda": lam, "s": s, "p": p}
    if eps_min <= 1.0:
        return Verdict(SATISFIED, certified_epsilon=eps_min, detail=detail)
    return Verdict(UNDETERMINED, detail=detail)


def low_degree_vertices(
    g: Graph, x_mask: int, threshold: float, side: str = "below"
) -> int:
    """{v not in X : deg_X(v) < threshold} (or > for side='above') as a mask."""
    if not x_mask:
        raise ValueError("X must be nonempty")
    if side not in ("below", "above"):
        raise ValueError(f"unknown side {side!r}")
    out = 0
    for v in range(g.n):
        if x_mask >> v & 1:
            continue
        deg = (g.rows[v] & x_mask).bit_count()
        if (side == "below" and deg < threshold) or (side == "above" and deg > threshold):
            out |= 1 << v
    return out


def connectedness_quota(rho: float, p: float, level: int, xsz: int) -> float:
    """rho * (p/2)^level * |X|, the degree floor at nesting depth ``level``."""
    return rho * (p / 2.0) ** level * xsz


def _first_violated_suffix(
    g: Graph, t: Sequence[int], x_mask: int, rho: float, p: float
) -> Optional[int]:
    ell = len(t)
    xsz = x_mask.bit_count()
    nb = x_mask
    for i in range(ell, 0, -1):  # suffix (t_i, ..., t_ell), innermost last
        nb &= g.rows[t[i - 1]]
        if nb.bit_count() + _TOL < connectedness_quota(rho, p, ell - i + 1, xsz):
            return i
    return None


def is_connected_tuple(
    g: Graph, t: Sequence[int], x_mask: int, rho: float, p: float
) -> bool:
    """(rho,p)-connectedness of tuple t to X: clique plus nested degree floors.

    Requires t disjoint from X; callers checking a tuple against an ambient
    set that contains it should pass ``X minus t`` explicitly.
    """
    if not t:
        raise ValueError("tuple must be nonempty")
    for v in t:
        if x_mask >> v & 1:
            raise ValueError(f"tuple vertex {v} lies inside X; pass X minus the tuple")
    if not is_clique(g, t):
        return False
    return _first_violated_suffix(g, t, x_mask, rho, p) is None


@dataclass(frozen=True)
class ConnectednessWitness:
    """A single Y inside X meeting every nested neighbourhood quota."""

    rho: float
    p: float
    tuple_: Tuple[int, ...]
    y_mask: int
    quotas: Tuple[float, ...]  # quota for suffix i = quotas[i-1]


def connectedness_witness(
    g: Graph, t: Sequence[int], x_mask: int, rho: float, p: float
) -> ConnectednessWitness:
    """Build Y of size ceil(rho*(p/2)*|X|) witnessing (rho,p)-connectedness.

    Greedy from the innermost (most constrained) nested neighbourhood
    outward; possible because the suffix neighbourhoods are nested.
    """
    if not is_clique(g, t):
        raise ValueError("tuple does not span a clique")
    bad = _first_violated_suffix(g, t, x_mask, rho, p)
    if bad is not None:
        raise ValueError(f"tuple is not ({rho},p)-connected: suffix {bad} violates its quota")
    ell = len(t)
    xsz = x_mask.bit_count()
    quotas = tuple(connectedness_quota(rho, p, ell - i + 1, xsz) for i in range(1, ell + 1))
    nested = []
    nb = x_mask
    for i in range(ell, 0, -1):
        nb &= g.rows[t[i - 1]]
        nested.append(nb)
    nested.reverse()  # nested[i-1] = N_X(t_i, ..., t_ell); nested[0] is innermost
    y = 0
    for idx in range(ell):
        need = math.ceil(quotas[idx] - _TOL)
        have = (y & nested[idx]).bit_count()
        for v in iter_bits(nested[idx] & ~y):
            if have >= need:
                break
            y |= 1 << v
            have += 1
    target = math.ceil(quotas[-1] - _TOL)  # ceil(rho*(p/2)*|X|)
    for v in iter_bits(nested[-1] & ~y):
        if y.bit_count() >= target:
            break
        y |= 1 << v
    return ConnectednessWitness(rho, p, tuple(t), y, quotas)


def witness_is_valid(g: Graph, w: ConnectednessWitness, x_mask: int) -> bool:
    """Recount the witness quotas directly (oracle used by tests)."""
    ell = len(w.tuple_)
    for i in range(1, ell + 1):
        nb = common_neighborhood(g, w.tuple_[i - 1 :], x_mask)
        if (w.y_mask & nb).bit_count() + _TOL < w.quotas[i - 1]:
            return False
    return True

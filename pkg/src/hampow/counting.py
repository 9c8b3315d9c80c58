"""Counting pipeline: choice-rich extension and certified cycle-count bounds.

The counting run is the embedding pipeline with a richer extension step:
at every greedy step the *whole* set of valid next vertices is computed,
its size is multiplied into a running product (kept in log space), and
one candidate is taken.  Distinct choice sequences extend a fixed prefix
to distinct labeled cycles, so the product is the certified lower bound.
Choices are accumulated over the whole greedy phase; the certificate is
injective at the prefix level only.

Small graphs (below the reservoir machinery's footprint) run a degenerate
variant: seed a k-clique, extend greedily with counting, and close the
cycle by the wrap check directly.

Exact brute-force enumeration oracles for labeled Hamilton k-power cycles
live here too (n <= 10 to count, n <= 14 to find).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set, Tuple

from .bits import bit_list, iter_bits, mask_of
from .graph import Graph, common_neighborhood, end_tuple, is_clique, verify_kpower
from .embed import (
    EmbedConfig,
    StageFailure,
    build_reservoir_path,
    bypass,
    connect,
    cover_leftover,
    plan_embedding,
    select_reservoir_set,
)
from .pseudo import connectedness_witness

_TOL = 1e-9


@dataclass(frozen=True)
class CountConfig:
    """Counting parameters: nu in (0,1) plus the base embedding config."""

    nu: float
    base: EmbedConfig = field(default_factory=EmbedConfig)
    epsilon_c: float = 1.0

    def __post_init__(self):
        if not 0 < self.nu < 1:
            raise ValueError("nu must lie in (0, 1)")

    @property
    def big_c(self) -> float:
        """The derived constant 2^(k+23) k^4 / nu."""
        k = self.base.k
        return 2 ** (k + 23) * k**4 / self.nu

    def epsilon_fn(self, n: int) -> float:
        """Working epsilon schedule, ~ c / log^2 n capped below 0.2."""
        if n < 3:
            return 0.2
        return min(0.2, self.epsilon_c / math.log(n) ** 2)


@dataclass
class CountAccumulator:
    """Certified lower bound on labeled Hamilton k-power cycles.

    ``exp(log_count)`` is the product of per-step candidate counts along
    the recorded witness cycle's greedy phase.
    """

    log_count: float
    steps: int
    witness: List[int]
    per_step_counts: List[int] = field(default_factory=list)

    def count(self) -> float:
        return math.exp(self.log_count)


class HypothesisError(ValueError):
    """A counting-extension hypothesis failed; names the clause and index."""


def _floor_18(k: int, p: float, i: int, size: int, s: float) -> float:
    return s * 0.125 * (p / 2.0) ** (k - i + 1) * size


def _floor_nu(k: int, p: float, nu: float, i: int, size: int, s: float) -> float:
    return s * ((1 - nu / (2 * k)) * p) ** (k - i + 1) * size


def _connected_to(g, t, mask, rho, p) -> bool:
    if not mask:
        return is_clique(g, t)
    from .embed import _connected

    return _connected(g, t, mask, rho, p)


def extend_step_counting(
    g: Graph,
    t: Tuple[int, ...],
    l_mask: int,
    r_mask: int,
    j: int,
    cc: CountConfig,
    p: Optional[float] = None,
) -> int:
    """All valid extension vertices under the phase-j counting hypotheses.

    Hypotheses checked (slack-scaled): the tuple is (1/8,p)-connected to
    R, its suffixes meet 1/8-level floors in L up to index j and
    ((1-nu/2k)p)-level floors beyond.  The returned candidates satisfy the
    matching conclusions with the candidate removed from L, so the next
    step's hypotheses hold by construction.  Raises HypothesisError naming
    the violated clause.
    """
    k = cc.base.k
    if len(t) != k:
        raise ValueError("tuple arity must equal k")
    if not 0 <= j <= k:
        raise ValueError("phase index j must lie in 0..k")
    p = p if p is not None else (cc.base.p or g.density())
    s = cc.base.slack
    nu = cc.nu
    lsz = l_mask.bit_count()
    if not _connected_to(g, t, r_mask, s / 8.0, p):
        raise HypothesisError("clause (i): tuple not (1/8,p)-connected to R")
    nb = l_mask
    for i in range(k, 0, -1):
        nb &= g.rows[t[i - 1]]
        deg = nb.bit_count()
        if i <= j:
            if deg + _TOL < _floor_18(k, p, i, lsz, s):
                raise HypothesisError(f"clause (ii): suffix degree floor fails at i={i}")
        else:
            if deg + _TOL < _floor_nu(k, p, nu, i, lsz, s):
                raise HypothesisError(f"clause (iii): suffix degree floor fails at i={i}")
    out = 0
    for x in iter_bits(nb):
        newt = t[1:] + (x,)
        rest = l_mask & ~(1 << x)
        rsz = rest.bit_count()
        if not _connected_to(g, newt, r_mask, s / 6.0, p):
            continue
        ok = True
        sub = rest
        for i in range(k, 0, -1):
            sub &= g.rows[newt[i - 1]]
            deg = sub.bit_count()
            if i <= j - 1:
                if deg + _TOL < _floor_18(k, p, i, rsz, s):
                    ok = False
                    break
            else:
                if deg + _TOL < _floor_nu(k, p, nu, i, rsz, s):
                    ok = False
                    break
        if ok:
            out |= 1 << x
    return out


def _counting_extension(
    g: Graph,
    order: List[int],
    l_mask: int,
    r_mask: int,
    cc: CountConfig,
    p: float,
    l_target: int,
    rng: random.Random,
    close_cycle: bool,
) -> Optional[Tuple[List[int], int, List[int]]]:
    """Greedy counted extension with backtracking.

    Counts the unrestricted candidate-set size at each realized step.
    With ``close_cycle`` the run only finishes when the wrap check passes.
    """
    k = cc.base.k
    counts: List[int] = []
    stack: List[int] = []
    forbidden: Dict[int, Set[int]] = {}
    budget = cc.base.backtrack_budget
    nodes = 0

    def backtrack() -> Optional[int]:
        """Undo the last choice; returns the restored vertex or None."""
        if not stack:
            return None
        v = stack.pop()
        order.pop()
        counts.pop()
        forbidden.setdefault(len(stack), set()).add(v)
        return v

    while True:
        if l_mask.bit_count() <= l_target:
            if not close_cycle or verify_kpower(g, order, k, cyclic=True):
                return order, l_mask, counts
            v = backtrack()
            if v is None:
                return None
            l_mask |= 1 << v
            continue
        step = len(stack)
        j = max(0, k - step)
        try:
            cands = extend_step_counting(g, tuple(order[-k:]), l_mask, r_mask, j, cc, p)
        except HypothesisError:
            cands = 0
        block = forbidden.get(step, set())
        avail = [v for v in bit_list(cands) if v not in block]
        if not avail:
            if nodes > budget:
                return None
            v = backtrack()
            if v is None:
                return None
            l_mask |= 1 << v
            continue
        nodes += 1
        v = avail[rng.randrange(len(avail))]
        forbidden.pop(step + 1, None)
        stack.append(v)
        order.append(v)
        counts.append(cands.bit_count())
        l_mask &= ~(1 << v)


def count_lower_bound(g: Graph, cc: CountConfig) -> CountAccumulator:
    """Run the counting pipeline and certify a labeled-cycle lower bound.

    Uses the full reservoir pipeline when it fits (reservoir sized at
    n/log^2 n scale), otherwise the degenerate greedy-cycle variant.
    """
    k = cc.base.k
    n = g.n
    p = cc.base.p if cc.base.p is not None else g.density()
    if n < 2 * k + 2:
        raise ValueError("graph too small to host a k-power cycle")
    degenerate = n < max(40, 20 * k)
    if degenerate:
        return _count_degenerate(g, cc, p)
    return _count_full(g, cc, p)


def _count_degenerate(g: Graph, cc: CountConfig, p: float) -> CountAccumulator:
    k = cc.base.k
    for attempt in range(cc.base.max_retries + 1):
        rng = random.Random(f"{cc.base.seed}|count-degen:{attempt}")
        t0 = _seed_clique(g, k, rng)
        if t0 is None:
            continue
        order = list(t0)
        l_mask = g.full_mask & ~mask_of(order)
        got = _counting_extension(g, order, l_mask, 0, cc, p, 0, rng, close_cycle=True)
        if got is None:
            continue
        order, _, counts = got
        log_count = sum(math.log(c) for c in counts)
        return CountAccumulator(log_count, len(counts), order, counts)
    raise StageFailure("extension", {"empty_set": "degenerate counting run"})


def _seed_clique(g: Graph, k: int, rng: random.Random) -> Optional[Tuple[int, ...]]:
    verts = list(range(g.n))
    rng.shuffle(verts)
    for v in verts[: min(g.n, 40)]:
        clique = [v]
        pool = g.rows[v]
        while len(clique) < k and pool:
            w = max(iter_bits(pool), key=lambda u: (g.rows[u] & pool).bit_count())
            clique.append(w)
            pool &= g.rows[w]
        if len(clique) == k and is_clique(g, clique):
            return tuple(clique)
    return None


def _count_full(g: Graph, cc: CountConfig, p: float) -> CountAccumulator:
    k, n = cc.base.k, g.n
    logn2 = math.log(n) ** 2
    plan = plan_embedding(g, cc.base, p)
    r_target = max(1, min(plan.r_size, math.floor(10 * n / logn2)))
    r_target = max(r_target, math.ceil(n / logn2))
    base = cc.base
    from dataclasses import replace

    last: Optional[StageFailure] = None
    for attempt in range(base.max_retries + 1):
        cfg2 = replace(
            base,
            reservoir_size=max(1, (r_target + 1) // 2),
            segment_style=plan.style,
            seed=f"{base.seed}#count{attempt}" if attempt else base.seed,
        )
        rng = random.Random(f"{cfg2.seed}|count-ext")
        try:
            acc = _count_attempt(g, cc, cfg2, p, plan.l_target, rng)
            return acc
        except StageFailure as exc:
            last = exc
            r_target = max(math.ceil(n / logn2), int(r_target * 0.8))
    assert last is not None
    raise last


def _count_attempt(
    g: Graph, cc: CountConfig, cfg2: EmbedConfig, p: float, l_target: int,
    rng: random.Random,
) -> CountAccumulator:
    k, n, s = cfg2.k, g.n, cfg2.slack
    r_mask = select_reservoir_set(g, cfg2, p)
    s_mask = g.full_mask & ~r_mask
    rp = build_reservoir_path(g, r_mask, s_mask, cfg2, p)
    order = list(rp.path.order)
    l_mask = g.full_mask & ~rp.path.vertex_mask()
    got = _counting_extension(
        g, order, l_mask, r_mask, cc, p, l_target, rng, close_cycle=False
    )
    if got is None:
        raise StageFailure("extension", {"empty_set": "counted extension"})
    order, l_mask, counts = got
    tail = order[len(rp.path.order) :]
    rp_ext = rp.extended((), tail)
    pprime = rp_ext.path
    u_tpl, v_tpl = pprime.start(), pprime.end()
    lsz = l_mask.bit_count()
    if lsz > 0:
        try:
            wit_u = connectedness_witness(g, u_tpl, r_mask, s * cfg2.beta / 16, p).y_mask
            wit_v = connectedness_witness(
                g, v_tpl, r_mask & ~wit_u, s * cfg2.beta / 16, p
            ).y_mask
        except ValueError as exc:
            raise StageFailure("covering", {"empty_set": "witness carving"}) from exc
        s_cov = r_mask & ~(wit_u | wit_v)
        cover = cover_leftover(g, l_mask, s_cov, cfg2, p)
        ppp = cover.path
        u1 = r_mask & ~ppp.vertex_mask()
        c_path = connect(g, ppp.end(), u_tpl, u1, cfg2, p, prefer="short")
        int_c = c_path.order[k:-k]
        cp_path = connect(g, v_tpl, ppp.start(), u1 & ~mask_of(int_c), cfg2, p,
                          prefer="short")
        int_cp = cp_path.order[k:-k]
        w_mask = r_mask & (ppp.vertex_mask() | mask_of(int_c) | mask_of(int_cp))
        pstar = bypass(g, rp_ext, w_mask)
        cycle = list(pstar.order) + list(int_cp) + list(ppp.order) + list(int_c)
    else:
        c_path = connect(g, v_tpl, u_tpl, r_mask, cfg2, p, prefer="short")
        int_c = c_path.order[k:-k]
        w_mask = r_mask & mask_of(int_c)
        pstar = bypass(g, rp_ext, w_mask)
        cycle = list(pstar.order) + list(int_c)
    if len(cycle) != n or not verify_kpower(g, cycle, k, cyclic=True):
        raise StageFailure("assembly", {"empty_set": "cycle verification"})
    log_count = sum(math.log(c) for c in counts)
    return CountAccumulator(log_count, len(counts), cycle, counts)


# ---------------------------------------------------------------------------
# brute-force oracles


def brute_force_count(g: Graph, k: int) -> int:
    """Exact number of labeled Hamilton k-power cycles (vertex orderings).

    Counts orderings v_1..v_n whose cyclic k-power verification passes;
    no symmetry quotient.  Capped at n <= 10.
    """
    if g.n > 10:
        raise ValueError("brute_force_count capped at n <= 10")
    if g.n == 0:
        return 0
    return _ordering_dfs(g, k, count_all=True, fix_first=False)


def brute_force_find(g: Graph, k: int) -> Optional[List[int]]:
    """Some Hamilton k-power cycle order, or None.  Capped at n <= 14."""
    if g.n > 14:
        raise ValueError("brute_force_find capped at n <= 14")
    if g.n == 0:
        return None
    res = _ordering_dfs(g, k, count_all=False, fix_first=True)
    return res if res else None


def _ordering_dfs(g: Graph, k: int, count_all: bool, fix_first: bool):
    n = g.n
    full = g.full_mask
    order: List[int] = []
    total = 0
    found: Optional[List[int]] = None

    def candidates() -> int:
        t = len(order)
        cand = full & ~mask_of(order)
        for v in order[max(0, t - k) :]:
            cand &= g.rows[v]
        wrap_upto = k - (n - t)  # wrap constraints once the tail nears the front
        for j in range(0, min(wrap_upto + 1, t)):
            cand &= g.rows[order[j]]
        return cand

    def dfs() -> bool:
        nonlocal total, found
        if len(order) == n:
            if count_all:
                total += 1
                return False
            found = list(order)
            return True
        for v in iter_bits(candidates()):
            order.append(v)
            if dfs():
                return True
            order.pop()
        return False

    if fix_first:
        order.append(0)
        dfs()
        return found
    dfs()
    return total

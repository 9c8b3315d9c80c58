"""Constructive pipeline for spanning k-th powers of Hamilton cycles.

Stages: pick a reservoir set, thread a reservoir path through it (one
removable segment per reservoir vertex), greedily extend that path over
the rest of the graph, cover the leftover inside the reservoir, close the
cycle with two short connections, then bypass the reservoir vertices that
got used twice.  Every stage re-verifies its output; failures carry a
StageReport naming the first candidate set that emptied.

Proof-scale constants are hopeless at desk scale (their set sizes round
to zero), so: degree/connectedness thresholds are multiplied by
``cfg.slack``, carve sizes are availability-driven with slack-scaled
minima, and reservoir/leftover sizing is planned adaptively.  Two segment
constructions exist for k = 2: the faithful 47-vertex spine (three
internal connections through candidate-set propagation) and the compact
2k+1-vertex form that a denser graph supports; the pipeline plans with
whichever fits the vertex budget.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

from .bits import bit_list, iter_bits, mask_of, sample_bits
from .graph import (
    Graph,
    KPath,
    common_neighborhood,
    end_tuple,
    is_clique,
    start_tuple,
    verify_kpower,
)
from .pseudo import PseudoParams, implied_density, is_connected_tuple, connectedness_witness

_TOL = 1e-9

STAGES = (
    "reservoir_set",
    "reservoir_path",
    "extension",
    "covering",
    "connection_1",
    "connection_2",
    "bypass",
    "assembly",
)


@dataclass(frozen=True)
class EmbedConfig:
    """Knobs for the embedding pipeline.

    ``slack`` scales every lower-bound threshold (degree floors and
    connectedness quotas); 1.0 means the proof constants.  ``reservoir_size``
    and ``leftover_target`` override the adaptive plan when set.
    """

    k: int = 2
    beta: float = 0.5
    delta: float = 0.1
    epsilon: float = 0.05
    slack: float = 1.0
    p: Optional[float] = None
    seed: "int | str" = 0
    max_retries: int = 12
    stage_trace: bool = False
    reservoir_size: Optional[int] = None
    leftover_target: Optional[int] = None
    segment_style: str = "auto"  # auto | compact | spine
    connect_budget: int = 60000
    backtrack_budget: int = 150000

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("k must be at least 2")
        if not 0 < self.beta <= 0.5:
            raise ValueError("beta must lie in (0, 1/2]")
        if not 0 < self.delta < 0.25:
            raise ValueError("delta must lie in (0, 1/4)")
        if self.slack <= 0:
            raise ValueError("slack must be positive")
        if self.segment_style not in ("auto", "compact", "spine"):
            raise ValueError(f"unknown segment_style {self.segment_style!r}")


def delta_covering(cfg: EmbedConfig) -> float:
    return cfg.delta**2 / (1e4 * cfg.k)


def delta_onestep(cfg: EmbedConfig) -> float:
    return delta_covering(cfg) / (200 * cfg.k)


def delta_connect(cfg: EmbedConfig) -> float:
    return (cfg.beta / 16) * cfg.delta**2 / (400 * cfg.k)


@dataclass
class StageReport:
    stage: str
    ok: bool
    detail: dict = field(default_factory=dict)


class StageFailure(RuntimeError):
    """A pipeline stage ran out of candidates; carries the StageReport."""

    def __init__(self, stage: str, detail: Optional[dict] = None):
        self.report = StageReport(stage, False, detail or {})
        super().__init__(f"stage {stage} failed: {self.report.detail}")


@dataclass(frozen=True)
class ReservoirSegment:
    """One removable block: traversals with and without the reservoir vertex."""

    reservoir_vertex: int
    with_r: Tuple[int, ...]
    without_r: Tuple[int, ...]


@dataclass
class ReservoirPath:
    """k-path whose reservoir vertices can each be skipped independently.

    ``pieces`` spells the path as fixed runs and reservoir segments so a
    bypass is a pure re-concatenation.
    """

    path: KPath
    reservoir: int
    segments: Dict[int, ReservoirSegment]
    connectors: List[KPath]
    pieces: List[Tuple[str, object]]

    def rebuild(self, skip: int = 0) -> Tuple[int, ...]:
        out: List[int] = []
        for kind, payload in self.pieces:
            if kind == "res":
                seg = self.segments[payload]
                if skip >> payload & 1:
                    out.extend(seg.without_r)
                else:
                    out.extend(seg.with_r)
            else:
                out.extend(payload)
        return tuple(out)

    def extended(self, head: Sequence[int], tail: Sequence[int]) -> "ReservoirPath":
        """New path with fixed vertices prepended/appended (head outermost first)."""
        pieces = list(self.pieces)
        if head:
            pieces.insert(0, ("fixed", tuple(head)))
        if tail:
            pieces.append(("fixed", tuple(tail)))
        order = []
        for kind, payload in pieces:
            if kind == "res":
                order.extend(self.segments[payload].with_r)
            else:
                order.extend(payload)
        return ReservoirPath(
            KPath(tuple(order), self.path.k),
            self.reservoir,
            self.segments,
            self.connectors,
            pieces,
        )


def _rng(cfg: EmbedConfig, tag: str) -> random.Random:
    return random.Random(f"{cfg.seed}|{tag}")


def _graph_p(g: Graph, cfg: EmbedConfig) -> float:
    p = cfg.p if cfg.p is not None else g.density()
    if not 0 < p <= 1:
        raise ValueError("graph density/p must lie in (0, 1]")
    return p


def _connected(g, t, x_mask, rho, p) -> bool:
    x_mask &= ~mask_of(t)
    if not t or not is_clique(g, t):
        return False
    xsz = x_mask.bit_count()
    nb = x_mask
    ell = len(t)
    for i in range(ell, 0, -1):
        nb &= g.rows[t[i - 1]]
        if nb.bit_count() + _TOL < rho * (p / 2.0) ** (ell - i + 1) * xsz:
            return False
    return True


# ---------------------------------------------------------------------------
# reservoir set selection


def select_reservoir_set(g: Graph, cfg: EmbedConfig, p: Optional[float] = None) -> int:
    """Pick the reservoir set R: seeded start, degree prune, then absorb.

    Start from a random set of twice the target size, drop vertices with
    too few neighbours outside, then absorb outside vertices seeing too
    little of the set.  Rechecked directly: inside vertices keep half
    their degree outside, outside vertices see beta*p*|R|/2 inside.
    """
    p = p if p is not None else _graph_p(g, cfg)
    n, k, s = g.n, cfg.k, cfg.slack
    if g.min_degree() + _TOL < cfg.beta * p * n * s:
        raise StageFailure(
            "reservoir_set",
            {"precondition": "min-degree", "min_degree": g.min_degree(),
             "required": cfg.beta * p * n * s},
        )
    target = cfg.reservoir_size or max(1, math.ceil(cfg.delta**2 * n / (200 * k)))
    target = min(target, n // 3) or 1
    detail: dict = {}
    for attempt in range(cfg.max_retries + 1):
        rng = _rng(cfg, f"resset:{attempt}")
        rprime = mask_of(rng.sample(range(n), min(n, 2 * target)))
        keep = 0
        for v in iter_bits(rprime):
            if (g.rows[v] & ~rprime).bit_count() + _TOL >= 0.75 * cfg.beta * p * n * s:
                keep |= 1 << v
        rsz = keep.bit_count()
        r = keep
        for v in range(n):
            if r >> v & 1:
                continue
            if (g.rows[v] & keep).bit_count() + _TOL < cfg.beta * p * rsz * s:
                r |= 1 << v
        size = r.bit_count()
        detail = {"attempt": attempt, "size": size, "target": target}
        if not target <= size <= max(10 * target, 2 * target + math.ceil(p * n * cfg.epsilon)):
            continue
        ok = all(
            (g.rows[v] & r).bit_count() + _TOL >= 0.5 * cfg.beta * p * size * s
            for v in iter_bits(g.full_mask & ~r)
        ) and all(
            (g.rows[v] & ~r & g.full_mask).bit_count() + _TOL >= 0.5 * cfg.beta * p * n * s
            for v in iter_bits(r)
        )
        if ok:
            return r
    raise StageFailure("reservoir_set", {"empty_set": "R", **detail})


# ---------------------------------------------------------------------------
# greedy extension


def _extension_candidates(
    g: Graph, t: Tuple[int, ...], l_mask: int, r_mask: int, cfg: EmbedConfig, p: float
) -> List[Tuple[int, int]]:
    """Valid next vertices as (-deg_L(new tuple), vertex), best first."""
    s = cfg.slack
    out = []
    for x in iter_bits(common_neighborhood(g, t, l_mask)):
        newt = t[1:] + (x,)
        rest = l_mask & ~(1 << x)
        if not _connected(g, newt, rest, s / 6.0, p):
            continue
        if not _connected(g, newt, r_mask, s / 6.0, p):
            continue
        deg = common_neighborhood(g, newt, rest).bit_count()
        out.append((-deg, x))
    out.sort()
    return out


def extend_step(
    g: Graph, t: Tuple[int, ...], l_mask: int, r_mask: int, cfg: EmbedConfig,
    p: Optional[float] = None,
) -> int:
    """One greedy extension: x in N_L(t) keeping the new tuple well-connected.

    Picks the candidate maximising deg_L of the new end tuple, ties to the
    smallest id.
    """
    p = p if p is not None else _graph_p(g, cfg)
    n, s = g.n, cfg.slack
    floor = max(1, math.ceil(delta_onestep(cfg) * n * s - _TOL))
    if l_mask.bit_count() < floor:
        raise StageFailure("extension", {"precondition": "L below size floor", "floor": floor})
    if r_mask.bit_count() < floor:
        raise StageFailure("extension", {"precondition": "R below size floor", "floor": floor})
    if not _connected(g, t, l_mask, s / 8.0, p) or not _connected(g, t, r_mask, s / 8.0, p):
        raise StageFailure("extension", {"precondition": "tuple not (1/8,p)-connected"})
    cands = _extension_candidates(g, t, l_mask, r_mask, cfg, p)
    if not cands:
        raise StageFailure(
            "extension",
            {"empty_set": "N_L(t) after filters",
             "candidates": common_neighborhood(g, t, l_mask).bit_count()},
        )
    return cands[0][1]


# ---------------------------------------------------------------------------
# crossing cliques and the good-clique layer DP


def _crossing_cliques(g: Graph, parts: Sequence[int]):
    """Yield crossing cliques (one vertex per part, in part order)."""

    def rec(idx: int, prefix: Tuple[int, ...], allowed: int):
        if idx == len(parts):
            yield prefix
            return
        for v in iter_bits(parts[idx] & allowed if idx else parts[idx]):
            yield from rec(idx + 1, prefix + (v,), allowed & g.rows[v] if idx else g.rows[v])

    yield from rec(0, (), 0)


def count_crossing_cliques(g: Graph, parts: Sequence[int]) -> int:
    """|K_r(V_1..V_r)|: crossing cliques with one vertex per part."""
    seen = 0
    for part in parts:
        if part & seen:
            raise ValueError("parts must be pairwise disjoint")
        seen |= part
    total = 0
    for _ in _crossing_cliques(g, parts):
        total += 1
    return total


def expected_crossing_cliques(p: float, parts: Sequence[int]) -> float:
    """p^C(r,2) * prod |V_i|, the expected crossing-clique count."""
    r = len(parts)
    out = p ** (r * (r - 1) / 2)
    for part in parts:
        out *= part.bit_count()
    return out


def good_clique_dp(
    g: Graph, x: Tuple[int, ...], u_sets: Sequence[int], k: int
) -> List[Dict[Tuple[int, ...], Optional[int]]]:
    """Layered good-clique sets over 2k carved parts, with predecessors.

    Layer 1 holds every crossing clique of the first k parts (all reachable
    from x by construction of the parts); layer i holds the cliques in
    parts i..i+k-1 extendable back to x, each with one predecessor vertex
    for path reconstruction.  Returns layers 1..k+1.
    """
    if len(u_sets) != 2 * k:
        raise ValueError(f"expected 2k = {2 * k} parts, got {len(u_sets)}")
    for i in range(k):
        nbhd = common_neighborhood(g, x[i:], g.full_mask)
        if u_sets[i] & ~nbhd:
            raise ValueError(f"part {i + 1} must lie inside the suffix neighbourhood of x")
    layers: List[Dict[Tuple[int, ...], Optional[int]]] = []
    base: Dict[Tuple[int, ...], Optional[int]] = {}
    for clique in _crossing_cliques(g, u_sets[:k]):
        base[clique] = None
    layers.append(base)
    for i in range(2, k + 2):
        cur: Dict[Tuple[int, ...], Optional[int]] = {}
        top = u_sets[i + k - 2]
        for clique in layers[-1]:
            ext = top
            for w in clique:
                ext &= g.rows[w]
                if not ext:
                    break
            else:
                head, rest = clique[0], clique[1:]
                for wk in iter_bits(ext):
                    key = rest + (wk,)
                    if key not in cur:
                        cur[key] = head
        layers.append(cur)
    return layers


# ---------------------------------------------------------------------------
# connection search


def _cross_pairs_ok(g: Graph, x, y, k: int, interior: int) -> bool:
    # with j interior vertices, x_i ~ y_m is forced whenever i + m >= k + j + 1
    for i in range(1, k + 1):
        for m in range(max(1, k + interior + 1 - i), k + 1):
            if not g.has_edge(x[i - 1], y[m - 1]):
                return False
    return True


def _bridge_connect(
    g: Graph, x, y, u_mask: int, k: int, rng: random.Random, budget: int
) -> Optional[List[int]]:
    """Backtracking search for a shortest interior w_1..w_j, j <= 5k."""
    xy = mask_of(x) | mask_of(y)
    pool = u_mask & ~xy
    nodes = [budget]

    def dfs(j: int, chosen: List[int], used: int) -> Optional[List[int]]:
        t = len(chosen) + 1
        if t > j:
            return chosen
        if nodes[0] <= 0:
            return None
        nodes[0] -= 1
        cand = pool & ~used
        if t <= k:
            for i in range(t, k + 1):
                cand &= g.rows[x[i - 1]]
        for ssub in range(max(1, t - k), t):
            cand &= g.rows[chosen[ssub - 1]]
        lo = max(1, j + 1 - t)
        if lo <= k:
            for m in range(lo, k + 1):
                cand &= g.rows[y[m - 1]]
        if not cand:
            return None
        members = bit_list(cand)
        rng.shuffle(members)
        for v in members:
            res = dfs(j, chosen + [v], used | 1 << v)
            if res is not None:
                return res
        return None

    for j in range(0, 5 * k + 1):
        if not _cross_pairs_ok(g, x, y, k, j):
            continue
        if j == 0:
            return []
        got = dfs(j, [], 0)
        if got is not None:
            return got
        if nodes[0] <= 0:
            return None
    return None


def _carve(rng: random.Random, avail: int, size: int) -> int:
    return sample_bits(avail, size, rng)


def _connect_k2_structured(
    g: Graph, x, y, u_mask: int, p: float, s: float, delta: float, rng: random.Random
) -> Optional[List[int]]:
    """Good-edge propagation realisation of the k = 2 connection.

    Carves candidate sets X3..X7 (and primes), pushes squared-path ends
    forward through them, collects good edges level by level, and joins
    the two sides at an edge good in both directions.  Returns the ten
    interior vertices, or None naming no set (caller retries/reports).
    """
    usz = u_mask.bit_count()
    xy = mask_of(x) | mask_of(y)
    free = u_mask & ~xy

    def clampsize(pref: float, minimum: float, avail: int) -> int:
        size = max(max(1, math.ceil(minimum)), math.ceil(pref))
        return min(size, avail)

    avail3 = common_neighborhood(g, x, free)
    avail3p = common_neighborhood(g, y, free)
    t3 = max(1, math.ceil(s * delta * p * p * usz / 16 - _TOL))
    if avail3.bit_count() < t3 or avail3p.bit_count() < t3:
        return None
    x3 = _carve(rng, avail3, clampsize(p * p * usz / 6, t3, avail3.bit_count()))
    x3p = _carve(rng, avail3p & ~x3, clampsize(p * p * usz / 6, 1, (avail3p & ~x3).bit_count()))
    if not x3p:
        return None
    taken = x3 | x3p
    avail4 = (g.rows[x[1]] & free) & ~taken
    avail4p = (g.rows[y[1]] & free) & ~taken
    t4 = max(1, math.ceil(s * delta * p * usz / 16 - _TOL))
    if avail4.bit_count() < t4 or (avail4p & ~avail4).bit_count() < 0:
        return None
    x4 = _carve(rng, avail4, clampsize(p * usz / 6, t4, avail4.bit_count()))
    taken |= x4
    avail4p &= ~taken
    if avail4p.bit_count() < t4:
        return None
    x4p = _carve(rng, avail4p, clampsize(p * usz / 6, t4, avail4p.bit_count()))
    taken |= x4p
    rest = bit_list(free & ~taken)
    if len(rest) < 6:
        return None
    rng.shuffle(rest)
    share = len(rest) // 6
    if share < 1:
        return None
    big = [mask_of(rest[i * share : (i + 1) * share]) for i in range(6)]
    x5, x6, x7, x5p, x6p, x7p = big

    th_45 = max(1, s * delta * p * p * usz / 20)
    th_one = max(1, s * p * usz / 20)
    th_pair = max(1, s * p * p * usz / 40)
    th_g6 = max(1, s * p * p * usz / 1000)
    th_g7 = max(1, s * p * p * usz / 5000)

    def half(xt, c3, c4, c5, c6, c7):
        """One side of the propagation; returns (Y7 senders, good_in6, W4)."""
        y3_mask = 0
        for v in iter_bits(c3):
            if (g.rows[v] & c4).bit_count() + _TOL < th_45:
                continue
            if (g.rows[v] & c5).bit_count() + _TOL < th_one:
                continue
            y3_mask |= 1 << v
        if not y3_mask:
            return None
        w4: Dict[int, List[Tuple[int, int]]] = {}
        y5_mask = 0
        y3s = bit_list(y3_mask)
        rng.shuffle(y3s)
        for y3 in y3s[:60]:
            n5_y3 = g.rows[y3] & c5
            picked4 = 0
            for y4 in iter_bits(g.rows[y3] & c4):
                if (g.rows[y4] & n5_y3).bit_count() + _TOL < th_pair:
                    continue
                if (g.rows[y4] & c6).bit_count() + _TOL < th_one:
                    continue
                picked4 += 1
                if picked4 > 40:
                    break
                n6_y4 = g.rows[y4] & c6
                for y5 in iter_bits(n5_y3 & g.rows[y4]):
                    if (g.rows[y5] & n6_y4).bit_count() + _TOL < th_pair:
                        continue
                    if (g.rows[y5] & c7).bit_count() + _TOL < th_one:
                        continue
                    y5_mask |= 1 << y5
                    slots = w4.setdefault(y5, [])
                    if len(slots) < 4:
                        slots.append((y4, y3))
        if not y5_mask:
            return None
        good_in6: Dict[int, int] = {}
        y5s = bit_list(y5_mask)
        rng.shuffle(y5s)
        for y5 in y5s[:400]:
            reach4 = 0
            for y4, _ in w4[y5]:
                reach4 |= g.rows[y4]
            for y6 in iter_bits(c6 & g.rows[y5] & reach4):
                good_in6[y6] = good_in6.get(y6, 0) | 1 << y5
        senders7: Dict[int, int] = {}
        for y6, senders in good_in6.items():
            if senders.bit_count() + _TOL < th_g6:
                continue
            if (g.rows[y6] & c7).bit_count() + _TOL < th_one:
                continue
            reach5 = 0
            for y5 in iter_bits(senders):
                reach5 |= g.rows[y5]
            for y7 in iter_bits(c7 & g.rows[y6] & reach5):
                senders7[y7] = senders7.get(y7, 0) | 1 << y6
        y7_final = {
            y7: snd for y7, snd in senders7.items() if snd.bit_count() + _TOL >= th_g7
        }
        if not y7_final:
            return None
        return y7_final, good_in6, w4

    side_x = half(x, x3, x4, x5, x6, x7)
    if side_x is None:
        return None
    side_y = half(y, x3p, x4p, x5p, x6p, x7p)
    if side_y is None:
        return None
    y7x, g6x, w4x = side_x
    y7y, g6y, w4y = side_y

    reach_x = {y7: _or_rows(g, snd) for y7, snd in y7x.items()}
    reach_y = {y7p: _or_rows(g, snd) for y7p, snd in y7y.items()}
    mask_y7y = mask_of(y7y.keys())
    order7 = list(y7x.keys())
    rng.shuffle(order7)
    for a7 in order7:
        for b7 in iter_bits(g.rows[a7] & mask_y7y):
            if not (reach_x[a7] >> b7 & 1 and reach_y[b7] >> a7 & 1):
                continue
            left = _trace_half(g, y7x, g6x, w4x, a7, b7)
            right = _trace_half(g, y7y, g6y, w4y, b7, a7)
            if left is None or right is None:
                continue
            return left + [a7, b7] + right[::-1]
    return None


def _or_rows(g: Graph, mask: int) -> int:
    out = 0
    for v in iter_bits(mask):
        out |= g.rows[v]
    return out


def _trace_half(g, y7map, good_in6, w4, y7, other7) -> Optional[List[int]]:
    """Recover (y3, y4, y5, y6) behind a doubly-good junction edge."""
    for y6 in iter_bits(y7map[y7] & g.rows[other7]):
        for y5 in iter_bits(good_in6.get(y6, 0) & g.rows[y7]):
            for y4, y3 in w4[y5]:
                if g.rows[y4] >> y6 & 1:
                    return [y3, y4, y5, y6]
    return None


def _connect_kbig_structured(
    g: Graph, x, y, u_mask: int, k: int, p: float, s: float, delta: float,
    rng: random.Random,
) -> Optional[List[int]]:
    """Layer-DP realisation of the k > 2 connection through 2k carved parts."""
    usz = u_mask.bit_count()
    xy = mask_of(x) | mask_of(y)
    free = u_mask & ~xy
    xsets: List[int] = []
    ysets: List[int] = []
    taken = 0
    for i in range(1, k + 1):
        tgt = max(1, math.ceil(s * delta**2 * (p / 2) ** (k - i + 1) * usz / (3 * k) - _TOL))
        cap = max(tgt, math.ceil(p ** (k - i + 1) * usz / 2))
        availx = common_neighborhood(g, x[i - 1 :], free & ~taken)
        if availx.bit_count() < tgt:
            return None
        xi = _carve(rng, availx, min(cap, availx.bit_count()))
        taken |= xi
        availy = common_neighborhood(g, y[i - 1 :], free & ~taken)
        if availy.bit_count() < tgt:
            return None
        yi = _carve(rng, availy, min(cap, availy.bit_count()))
        taken |= yi
        xsets.append(xi)
        ysets.append(yi)
    rest = bit_list(free & ~taken)
    rng.shuffle(rest)
    share = len(rest) // k
    if share < 1:
        return None
    tops = [mask_of(rest[i * share : (i + 1) * share]) for i in range(k)]
    x_parts = xsets + tops
    y_parts = ysets + tops[::-1]
    lx = good_clique_dp(g, x, x_parts, k)
    if not lx[-1]:
        return None
    ly = good_clique_dp(g, y, y_parts, k)
    if not ly[-1]:
        return None
    shared = [c for c in lx[-1] if c[::-1] in ly[-1]]
    if not shared:
        return None
    clique = sorted(shared)[0]

    def backtrace(layers, final) -> List[int]:
        out: List[int] = []
        cur = final
        for i in range(k + 1, 1, -1):
            pred = layers[i - 1][cur]
            out.append(pred)
            cur = (pred,) + cur[:-1]
        return out[::-1]

    left = backtrace(lx, clique)
    right = backtrace(ly, clique[::-1])
    return left + list(clique) + right[::-1]


def connect(
    g: Graph,
    x: Tuple[int, ...],
    y: Tuple[int, ...],
    u_mask: int,
    cfg: EmbedConfig,
    p: Optional[float] = None,
    delta: Optional[float] = None,
    prefer: str = "structured",
) -> KPath:
    """Short k-path from tuple x to tuple y with interior inside U.

    Output order is ``x + interior + reversed(y)`` with at most 7k vertices.
    The structured search follows the candidate-set propagation (k = 2) or
    the good-clique layer DP (k > 2); a bounded backtracking bridge search
    backs it up when the carve sets would starve.  ``prefer="short"`` runs
    the bridge search first, for call sites on a tight vertex budget.
    """
    k = cfg.k
    p = p if p is not None else _graph_p(g, cfg)
    s = cfg.slack
    delta = delta if delta is not None else 2 * delta_connect(cfg)
    if len(x) != k or len(y) != k:
        raise ValueError("end tuples must have arity k")
    if set(x) & set(y):
        raise StageFailure("connection_1", {"precondition": "tuples not disjoint"})
    u_mask &= ~(mask_of(x) | mask_of(y))
    usz = u_mask.bit_count()
    floor = max(k + 2, math.ceil(s * delta * g.n - _TOL))
    if usz < floor:
        raise StageFailure(
            "connection_1", {"precondition": "U below size floor", "size": usz, "floor": floor}
        )
    for name, t in (("x", x), ("y", y)):
        if not _connected(g, t, u_mask, s * delta, p):
            raise StageFailure(
                "connection_1", {"precondition": f"tuple {name} not (delta,p)-connected to U"}
            )
    budget = cfg.connect_budget
    structured_first = prefer != "short" and usz >= 20 * k
    for attempt in range(cfg.max_retries + 1):
        rng = _rng(cfg, f"connect:{attempt}:{x}:{y}")
        plans = ("structured", "bridge") if structured_first else ("bridge", "structured")
        for plan in plans:
            if plan == "structured" and usz >= 6 * k:
                if k == 2:
                    interior = _connect_k2_structured(g, x, y, u_mask, p, s, delta, rng)
                else:
                    interior = _connect_kbig_structured(g, x, y, u_mask, k, p, s, delta, rng)
            elif plan == "bridge":
                interior = _bridge_connect(g, x, y, u_mask, k, rng, budget)
            else:
                interior = None
            if interior is None:
                continue
            order = list(x) + interior + list(reversed(y))
            if len(order) > 7 * k:
                continue
            if verify_kpower(g, order, k):
                return KPath(tuple(order), k)
    raise StageFailure(
        "connection_1",
        {"empty_set": "no connecting path", "U": usz, "x": x, "y": y},
    )


# ---------------------------------------------------------------------------
# reservoir graphs (segments)


def _typical(g, v, sets, p, eps, s) -> bool:
    for m in sets:
        m2 = m & ~(1 << v)
        if (g.rows[v] & m2).bit_count() + _TOL < s * (1 - eps) * p * m2.bit_count():
            return False
    return True


def _pick_typical(g, cand_mask, sets, p, eps, s, rng) -> Optional[int]:
    members = bit_list(cand_mask)
    rng.shuffle(members)
    for v in members:
        if _typical(g, v, sets, p, eps, s):
            return v
    return None


def _compact_segment(
    g: Graph, r: int, s_mask: int, rstar: int, cfg: EmbedConfig, p: float,
    rng: random.Random, anchor: Optional[Tuple[int, ...]] = None,
) -> Optional[ReservoirSegment]:
    """2k-vertex k-path inside S cap N(r) with r spliced into the middle.

    With ``anchor`` (the end tuple of the path built so far) the spine is
    chosen directly adjacent to it, so no connecting path is needed: x_c
    must see anchor[c-1:], the same seam constraints a zero-interior
    connection would check.
    """
    k, s, eps = cfg.k, cfg.slack, cfg.epsilon
    pool = s_mask & g.rows[r]
    members = bit_list(pool)
    if len(members) < 2 * k:
        return None
    rng.shuffle(members)
    share = len(members) // (2 * k)
    if share >= max(4 * k, math.ceil(3 * p**-k)):
        parts = [mask_of(members[i * share : (i + 1) * share]) for i in range(2 * k)]
    else:
        # pool too small to partition without starving the intersections
        parts = [pool] * (2 * k)
    chosen: List[int] = []
    rchain, schain = rstar, s_mask
    for i in range(2 * k):
        if i == k:  # second half: fresh chains anchored at x_{k+1}
            rchain, schain = rstar, s_mask
        cand = parts[i] & ~mask_of(chosen)
        for w in chosen[max(0, i - k) : i]:
            cand &= g.rows[w]
        if anchor is not None and i < k:
            for w in anchor[i:]:
                cand &= g.rows[w]
        track = [m for m in (rchain, schain) if m]
        v = _pick_typical(g, cand, track, p, eps, s, rng)
        if v is None:
            return None
        chosen.append(v)
        rchain &= g.rows[v]
        schain &= g.rows[v]
    with_r = tuple(chosen[:k]) + (r,) + tuple(chosen[k:])
    return ReservoirSegment(r, with_r, tuple(chosen))


def _spine47_segment(
    g: Graph, r: int, s_mask: int, rstar: int, cfg: EmbedConfig, p: float,
    rng: random.Random,
) -> Optional[Tuple[ReservoirSegment, List[KPath], str]]:
    """The 47-vertex two-reservoir construction for k = 2.

    Builds the 17-vertex spine (five-vertex squared path around r, two
    mirrored candidate chains joined at a doubly-good edge), then three
    internal connections complete the two traversals.  Returns the
    segment, the three connectors, and "" on success; otherwise (None
    path) the name of the first empty candidate set.
    """
    s = cfg.slack
    eps = cfg.epsilon
    ssz = s_mask.bit_count()
    pool = s_mask & g.rows[r]

    def fail(name: str):
        return None, [], name

    # five-vertex squared path (a1, a2, r, b2, b1)
    a1 = _pick_typical(g, pool, [s_mask, rstar, pool], p, eps, s, rng)
    if a1 is None:
        return fail("a1")
    a2 = _pick_typical(
        g, pool & g.rows[a1],
        [s_mask, rstar, pool, g.rows[a1] & s_mask, g.rows[a1] & rstar],
        p, eps, s, rng,
    )
    if a2 is None:
        return fail("a2")
    b2 = _pick_typical(
        g, pool & g.rows[a2] & ~mask_of([a1]), [s_mask, pool], p, eps, s, rng
    )
    if b2 is None:
        return fail("b2")
    b1 = _pick_typical(
        g, pool & g.rows[b2] & ~mask_of([a1, a2]),
        [s_mask, g.rows[b2] & s_mask], p, eps, s, rng,
    )
    if b1 is None:
        return fail("b1")

    s1 = s_mask & ~mask_of([a1, a2, b1, b2])
    th_pair = max(1, s * p * p * ssz / 40)
    th_one = max(1, s * p * ssz / 40)
    th_s = max(1, s * p * ssz / 2)
    th_deep = max(1, s * p * p * ssz / 4)
    rsz = rstar.bit_count()
    th_r = max(1, s * p * rsz / 2)
    th_deep_r = max(1, s * p * p * rsz / 4)

    def carve_sets(base3, base4, taken):
        a3avail = base3 & ~taken
        if not a3avail:
            return None
        c3 = _carve(rng, a3avail, max(1, min(a3avail.bit_count(), math.ceil(p * p * ssz / 8))))
        taken |= c3
        a4avail = base4 & ~taken
        if not a4avail:
            return None
        c4 = _carve(rng, a4avail, max(1, min(a4avail.bit_count(), math.ceil(p * ssz / 8))))
        taken |= c4
        return c3, c4, taken

    got = carve_sets(common_neighborhood(g, (a1, a2), s1), g.rows[a2] & s1, 0)
    if got is None:
        return fail("X3")
    x3, x4, taken = got
    got = carve_sets(common_neighborhood(g, (b1, b2), s1), g.rows[b2] & s1, taken)
    if got is None:
        return fail("X3'")
    x3p, x4p, taken = got
    rest = bit_list(s1 & ~taken)
    if len(rest) < 8:
        return fail("X5")
    rng.shuffle(rest)
    share = len(rest) // 8
    blocks = [mask_of(rest[i * share : (i + 1) * share]) for i in range(8)]
    x5, x6, x7, x8, x5p, x6p, x7p, x8p = blocks

    def chain(c3, c4, c5, c6, c7, c8, name):
        """Candidate chain a3..a8 on one side; returns picks and maps."""
        a3_mask = 0
        for v in iter_bits(c3):
            if (g.rows[v] & c4).bit_count() + _TOL < th_pair:
                continue
            if (g.rows[v] & c5).bit_count() + _TOL < th_one:
                continue
            if (g.rows[v] & c6).bit_count() + _TOL < th_one:
                continue
            if (g.rows[v] & s_mask).bit_count() + _TOL < th_s:
                continue
            a3_mask |= 1 << v
        if not a3_mask:
            return None, f"A3{name}"
        a3 = bit_list(a3_mask)[rng.randrange(a3_mask.bit_count())]
        n5 = g.rows[a3] & c5
        n6 = g.rows[a3] & c6
        a4_mask = 0
        for v in iter_bits(g.rows[a3] & c4):
            if (g.rows[v] & n5).bit_count() + _TOL < th_pair / 2:
                continue
            if (g.rows[v] & s_mask).bit_count() + _TOL < th_s:
                continue
            if (g.rows[v] & g.rows[a3] & s_mask).bit_count() + _TOL < th_deep:
                continue
            a4_mask |= 1 << v
        if not a4_mask:
            return None, f"A4{name}"
        a5_mask = 0
        for v in iter_bits(n5):
            if not g.rows[v] & a4_mask:
                continue
            if (g.rows[v] & n6).bit_count() + _TOL < th_pair / 2:
                continue
            if (g.rows[v] & c7).bit_count() + _TOL < th_one:
                continue
            if (g.rows[v] & c8).bit_count() + _TOL < th_one:
                continue
            if (g.rows[v] & s_mask).bit_count() + _TOL < th_s:
                continue
            a5_mask |= 1 << v
        if not a5_mask:
            return None, f"A5{name}"
        a5s = bit_list(a5_mask)
        rng.shuffle(a5s)
        a6_of: Dict[int, int] = {}
        a7_wit: Dict[int, int] = {}
        for a5 in a5s[:25]:
            a6_mask = 0
            n7 = g.rows[a5] & c7
            for v in iter_bits(g.rows[a3] & g.rows[a5] & c6):
                if (g.rows[v] & n7).bit_count() + _TOL < th_pair / 2:
                    continue
                if (g.rows[v] & s_mask).bit_count() + _TOL < th_s:
                    continue
                if (g.rows[v] & g.rows[a5] & s_mask).bit_count() + _TOL < th_deep:
                    continue
                a6_mask |= 1 << v
            if not a6_mask:
                continue
            a6_of[a5] = a6_mask
            n8 = g.rows[a5] & c8
            for v in iter_bits(n7):
                if v in a7_wit:
                    continue
                if not g.rows[v] & a6_mask:
                    continue
                if (g.rows[v] & n8).bit_count() + _TOL < th_pair / 2:
                    continue
                if (g.rows[v] & s_mask).bit_count() + _TOL < th_s:
                    continue
                if (g.rows[v] & rstar).bit_count() + _TOL < th_r:
                    continue
                a7_wit[v] = a5
        if not a7_wit:
            return None, f"A7{name}"
        return (a3, a4_mask, a6_of, a7_wit, c8), ""

    side_a, err = chain(x3, x4, x5, x6, x7, x8, "")
    if side_a is None:
        return fail(err)
    side_b, err = chain(x3p, x4p, x5p, x6p, x7p, x8p, "'")
    if side_b is None:
        return fail(err)
    a3, a4_mask, a6_of, a7_wit, c8a = side_a
    b3, b4_mask, b6_of, b7_wit, c8b = side_b

    def eight_set(c8, a5, a7):
        out = 0
        for v in iter_bits(common_neighborhood(g, (a5, a7), c8)):
            if (g.rows[v] & s_mask).bit_count() + _TOL < th_s:
                continue
            if (g.rows[v] & rstar).bit_count() + _TOL < th_r:
                continue
            if (g.rows[v] & g.rows[a7] & s_mask).bit_count() + _TOL < th_deep:
                continue
            if (g.rows[v] & g.rows[a7] & rstar).bit_count() + _TOL < th_deep_r:
                continue
            out |= 1 << v
        return out

    a8_cache: Dict[int, int] = {}
    b8_cache: Dict[int, int] = {}
    b7_mask = mask_of(b7_wit.keys())
    a7s = list(a7_wit.keys())
    rng.shuffle(a7s)
    picked = None
    for a7 in a7s:
        if a7 not in a8_cache:
            a8_cache[a7] = eight_set(c8a, a7_wit[a7], a7)
        if not a8_cache[a7]:
            continue
        for b7 in iter_bits(g.rows[a7] & b7_mask):
            if not g.rows[b7] & a8_cache[a7]:
                continue
            if b7 not in b8_cache:
                b8_cache[b7] = eight_set(c8b, b7_wit[b7], b7)
            if not g.rows[a7] & b8_cache[b7]:
                continue
            picked = (a7, b7)
            break
        if picked:
            break
    if not picked:
        return fail("good-edge A7B7")
    a7, b7 = picked
    a5, b5 = a7_wit[a7], b7_wit[b7]
    a8 = next(iter_bits(g.rows[b7] & a8_cache[a7]))
    b8 = next(iter_bits(g.rows[a7] & b8_cache[b7]))
    a6 = next(iter_bits(a6_of[a5] & g.rows[a7]), None)
    b6 = next(iter_bits(b6_of[b5] & g.rows[b7]), None)
    a4 = next(iter_bits(a4_mask & g.rows[a5]), None)
    b4 = next(iter_bits(b4_mask & g.rows[b5]), None)
    if None in (a6, b6, a4, b4):
        return fail("A6/A4 backfill")
    spine = [a1, a2, r, b2, b1, a3, a4, a5, a6, a7, a8, b3, b4, b5, b6, b7, b8]
    if len(set(spine)) != 17:
        return fail("spine distinct")

    sprime = s_mask & ~mask_of(spine)
    conn_cfg = replace(cfg, max_retries=2, segment_style="compact")
    try:
        p1 = connect(g, (b2, b1), (a3, a4), sprime, conn_cfg, p, delta=cfg.delta / 4)
        used = p1.vertex_mask()
        p2 = connect(g, (a5, a6), (b3, b4), sprime & ~used, conn_cfg, p,
                     delta=cfg.delta / 4)
        p3 = connect(g, (b5, b6), (a7, a8), sprime & ~used & ~p2.vertex_mask(),
                     conn_cfg, p, delta=cfg.delta / 4)
    except StageFailure:
        return fail("internal connection")
    i1 = list(p1.order[2:-2])
    i2 = list(p2.order[2:-2])
    i3 = list(p3.order[2:-2])
    with_r = (
        [a1, a2, r, b2, b1] + i1 + [a4, a3, a5, a6] + i2
        + [b4, b3, b5, b6] + i3 + [a8, a7, b7, b8]
    )
    without_r = (
        [a1, a2, a3, a4] + i1[::-1] + [b1, b2, b3, b4] + i2[::-1]
        + [a6, a5, a7, a8] + i3[::-1] + [b6, b5, b7, b8]
    )
    seg = ReservoirSegment(r, tuple(with_r), tuple(without_r))
    return seg, [p1, p2, p3], ""


def build_reservoir_graph(
    g: Graph, r: int, s_mask: int, rstar: int, cfg: EmbedConfig,
    p: Optional[float] = None, anchor: Optional[Tuple[int, ...]] = None,
) -> ReservoirSegment:
    """Removable segment for reservoir vertex r with spine vertices in S.

    Both traversals share their end k-tuples, which come out well
    connected to S and to Rstar.  k = 2 uses the 47-vertex construction
    when S can host its candidate sets (or when forced by
    ``segment_style``), the 2k+1-vertex form otherwise.
    """
    p = p if p is not None else _graph_p(g, cfg)
    k, s = cfg.k, cfg.slack
    if s_mask >> r & 1:
        raise ValueError("reservoir vertex must lie outside S")
    degs = (g.rows[r] & s_mask).bit_count()
    need = max(2 * k, math.ceil(s * cfg.beta * cfg.delta * p * g.n / 8 - _TOL))
    if degs < need:
        raise StageFailure(
            "reservoir_path", {"precondition": "reservoir vertex degree into S", "deg": degs}
        )
    style = cfg.segment_style
    if style == "auto":
        style = "spine" if (k == 2 and s_mask.bit_count() >= 600) else "compact"
    if style == "spine" and k != 2:
        style = "compact"
    last = ""
    for attempt in range(cfg.max_retries + 1):
        rng = _rng(cfg, f"resgraph:{r}:{attempt}")
        if style == "spine":
            seg, _conns, err = _spine47_segment(g, r, s_mask, rstar, cfg, p, rng)
            last = err
        else:
            seg = _compact_segment(g, r, s_mask, rstar, cfg, p, rng, anchor)
            last = "compact candidates"
        if seg is None:
            continue
        if not _segment_valid(g, seg, cfg):
            last = "segment verification"
            continue
        st, et = start_tuple(seg.with_r, k), end_tuple(seg.with_r, k)
        ok = True
        for t in (st, et):
            tm = mask_of(t)
            if not _connected(g, t, s_mask & ~tm, s / 2, p):
                ok = False
                last = "end tuple connectedness to S"
                break
            if not _connected(g, t, rstar & ~tm, s / 2, p):
                ok = False
                last = "end tuple connectedness to Rstar"
                break
        if ok:
            return seg
    raise StageFailure("reservoir_path", {"empty_set": last, "reservoir_vertex": r})


def _segment_valid(g: Graph, seg: ReservoirSegment, cfg: EmbedConfig) -> bool:
    k = cfg.k
    if len(seg.with_r) > max(47, 2 * k + 1):
        return False
    if set(seg.without_r) != set(seg.with_r) - {seg.reservoir_vertex}:
        return False
    if seg.with_r[:k] != seg.without_r[:k] or seg.with_r[-k:] != seg.without_r[-k:]:
        return False
    return verify_kpower(g, seg.with_r, k) and verify_kpower(g, seg.without_r, k)


# ---------------------------------------------------------------------------
# reservoir path / covering path


def build_reservoir_path(
    g: Graph, r_mask: int, s_mask: int, cfg: EmbedConfig, p: Optional[float] = None
) -> ReservoirPath:
    """Thread one removable segment per reservoir vertex into a single k-path.

    Vertices of R are processed by ascending degree to the unused part of
    S; consecutive segments are joined by short connections; the witness
    set of the first segment's start tuple is reserved so the final start
    tuple stays well connected to the leftovers of S.
    """
    p = p if p is not None else _graph_p(g, cfg)
    k, s, n = cfg.k, cfg.slack, g.n
    if r_mask & s_mask:
        raise ValueError("R and S must be disjoint")
    rsize = r_mask.bit_count()
    if rsize == 0:
        raise StageFailure("reservoir_path", {"precondition": "R empty"})
    style = cfg.segment_style
    if style == "auto":
        style = "spine" if (k == 2 and s_mask.bit_count() >= 600) else "compact"
    cfg = replace(cfg, segment_style=style)
    per_seg = 56 if style == "spine" else 2 * k
    if s_mask.bit_count() < per_seg * rsize + 2 * k + 2:
        raise StageFailure(
            "reservoir_path",
            {"precondition": "S too small for one segment per reservoir vertex"},
        )
    degfloor = max(1, math.ceil(s * cfg.beta * cfg.delta * p * n / 2 - _TOL))
    for v in iter_bits(r_mask):
        if (g.rows[v] & s_mask).bit_count() < degfloor:
            raise StageFailure(
                "reservoir_path",
                {"precondition": "reservoir vertex degree into S", "vertex": v,
                 "deg": (g.rows[v] & s_mask).bit_count(), "floor": degfloor},
            )
    rstar = r_mask if rsize >= max(1, math.ceil(s * cfg.delta**2 * n / (200 * k))) else g.full_mask
    # working room: slack-scaled delta*n/2 plus the spine of the segment
    # about to be built (the proof keeps a constant-size headroom here)
    sfloor = max(2 * k + 2, math.ceil(s * cfg.delta * n / 2 - _TOL) + 2 * k + 2)

    unused_r = r_mask
    s_free = s_mask
    order_r = lambda m, free: min(
        bit_list(m), key=lambda v: ((g.rows[v] & free).bit_count(), v)
    )

    r1 = order_r(unused_r, s_free)
    seg1 = build_reservoir_graph(g, r1, s_free, rstar & ~(1 << r1), cfg, p)
    unused_r &= ~(1 << r1)
    segments = {r1: seg1}
    pieces: List[Tuple[str, object]] = [("res", r1)]
    connectors: List[KPath] = []
    seg_mask = mask_of(seg1.with_r)
    s_free &= ~seg_mask
    st1 = start_tuple(seg1.with_r, k)
    try:
        zset = connectedness_witness(g, st1, s_free & ~mask_of(st1), s / 8, p).y_mask
    except ValueError as exc:
        raise StageFailure(
            "reservoir_path", {"empty_set": "start-tuple witness", "reason": str(exc)}
        ) from exc
    s_free &= ~zset
    cur_end = end_tuple(seg1.with_r, k)

    idx = 1
    while unused_r:
        idx += 1
        if s_free.bit_count() < sfloor:
            raise StageFailure(
                "reservoir_path", {"empty_set": "unused S", "index": idx, "size": s_free.bit_count()}
            )
        ri = order_r(unused_r, s_free)
        if (g.rows[ri] & s_free).bit_count() < max(2 * k, math.ceil(s * cfg.beta * cfg.delta * p * n / 8 - _TOL)):
            raise StageFailure(
                "reservoir_path", {"empty_set": f"N_S'(r_{idx})", "vertex": ri}
            )
        seg = None
        if style != "spine":
            # a segment grown off the current end needs no connecting path
            try:
                seg = build_reservoir_graph(
                    g, ri, s_free, rstar & ~(1 << ri), cfg, p, anchor=cur_end
                )
                interior: Tuple[int, ...] = ()
            except StageFailure:
                seg = None
        if seg is None:
            seg = build_reservoir_graph(g, ri, s_free, rstar & ~(1 << ri), cfg, p)
            seg_mask = mask_of(seg.with_r)
            try:
                conn = connect(
                    g, cur_end, start_tuple(seg.with_r, k), s_free & ~seg_mask, cfg, p,
                    delta=cfg.delta / 4, prefer="short",
                )
            except StageFailure as exc:
                raise StageFailure(
                    "reservoir_path", {"empty_set": "segment connection", "index": idx,
                                       **exc.report.detail}
                ) from exc
            interior = conn.order[k:-k]
            connectors.append(conn)
        if interior:
            pieces.append(("fixed", tuple(interior)))
        pieces.append(("res", ri))
        segments[ri] = seg
        unused_r &= ~(1 << ri)
        s_free &= ~(mask_of(seg.with_r) | mask_of(interior))
        cur_end = end_tuple(seg.with_r, k)

    rp = ReservoirPath(KPath((), k), r_mask, segments, connectors, pieces)
    order = rp.rebuild()
    rp.path = KPath(order, k)
    if not verify_kpower(g, order, k):
        raise StageFailure("reservoir_path", {"empty_set": "assembled path invalid"})
    if len(order) > 50 * k * rsize:
        raise StageFailure(
            "reservoir_path", {"empty_set": "length bound", "len": len(order)}
        )
    pv = rp.path.vertex_mask()
    for t in (start_tuple(order, k), end_tuple(order, k)):
        if not _connected(g, t, s_mask & ~pv, s / 8, p):
            raise StageFailure(
                "reservoir_path", {"empty_set": "end connectedness to unused S"}
            )
        if rstar == r_mask and not _connected(g, t, r_mask, s / 2, p):
            raise StageFailure(
                "reservoir_path", {"empty_set": "end connectedness to R"}
            )
    return rp


def cover_leftover(
    g: Graph, l_mask: int, s_mask: int, cfg: EmbedConfig, p: Optional[float] = None
) -> ReservoirPath:
    """k-path covering L inside L cup S: the reservoir construction run with
    the leftover vertices playing the removable role."""
    if l_mask.bit_count() > max(1, s_mask.bit_count() // (2 * cfg.k + 2)):
        raise StageFailure(
            "covering",
            {"precondition": "L too large for S", "L": l_mask.bit_count(),
             "S": s_mask.bit_count()},
        )
    try:
        rp = build_reservoir_path(g, l_mask, s_mask, cfg, p)
    except StageFailure as exc:
        raise StageFailure("covering", exc.report.detail) from exc
    return rp


def bypass(g: Graph, rp: ReservoirPath, w_mask: int) -> KPath:
    """The k-path on V(P) minus W obtained by skipping each chosen segment's
    reservoir vertex; ends unchanged, validity re-verified."""
    if w_mask & ~rp.reservoir:
        raise ValueError("W must be a subset of the reservoir")
    order = rp.rebuild(skip=w_mask)
    k = rp.path.k
    base = rp.path.order
    if not verify_kpower(g, order, k):
        raise StageFailure("bypass", {"empty_set": "bypassed path invalid"})
    if order[:k] != base[:k] or order[-k:] != base[-k:]:
        raise StageFailure("bypass", {"empty_set": "end tuples changed"})
    expect = rp.path.vertex_mask() & ~w_mask
    if KPath(order, k).vertex_mask() != expect:
        raise StageFailure("bypass", {"empty_set": "vertex set mismatch"})
    return KPath(order, k)


# ---------------------------------------------------------------------------
# the full pipeline


@dataclass(frozen=True)
class _Plan:
    r_size: int
    l_target: int
    style: str


def _conn_interior_estimate(k: int, p: float) -> int:
    if p > 0.92:
        return 0
    scale = max(1, k - 1)
    if p > 0.6:
        return 1 * scale
    if p > 0.42:
        return 2 * scale
    if p > 0.3:
        return 3 * scale
    return min(5 * k, 4 * scale)


def plan_embedding(g: Graph, cfg: EmbedConfig, p: Optional[float] = None) -> _Plan:
    """Adaptive reservoir/leftover sizing for the pipeline at this scale.

    The reservoir path consumes roughly (2k + connector) vertices of S per
    reservoir vertex plus the reserved start-tuple witness, and must leave
    the slack-scaled delta*n/2 working room; the reservoir itself must
    host the covering path, the two closure connections, and enough spare
    room for their candidate search.
    """
    p = p if p is not None else _graph_p(g, cfg)
    n, k, s = g.n, cfg.k, cfg.slack
    style = cfg.segment_style
    if style == "auto":
        style = "spine" if (k == 2 and n >= 12000) else "compact"
    ci = _conn_interior_estimate(k, p)
    # anchored compact segments need no connector; keep one vertex of slop
    per_seg_s = (46 + 10) if style == "spine" else (2 * k + 1)
    # keep enough unused S that the last segment still sees candidates
    room = max(math.ceil(s * cfg.delta * n / 2), math.ceil(3 * p ** -(k + 1)))

    def fits(r: int) -> bool:
        z = math.ceil(s * p * max(0, n - r - 2 * k) / 16) + 1
        return r * per_seg_s + z + room <= n - r

    r_max = max(1, n // (per_seg_s + 1) + 2)
    while r_max > 1 and not fits(r_max):
        r_max -= 1
    u_min = max(k + 2, min(n // 10, r_max // 3))
    cov_per = 2 * k + 1
    l_free = r_max - 4 - 2 * (ci + 1) - u_min
    l_target = max(0, min(n // 100, l_free // max(1, cov_per)))
    r_size = r_max
    if cfg.reservoir_size is not None:
        r_size = cfg.reservoir_size
    if cfg.leftover_target is not None:
        l_target = cfg.leftover_target
    return _Plan(max(1, r_size), l_target, style)


def _plan_ladder(g: Graph, cfg: EmbedConfig, p: float) -> List[_Plan]:
    base = plan_embedding(g, cfg, p)
    plans = [base]
    for rf, lt in ((0.8, None), (1.0, 0), (0.65, None), (1.15, None), (0.5, 0)):
        r = max(1, int(base.r_size * rf))
        l = base.l_target if lt is None else lt
        cand = _Plan(r, l, base.style)
        if cand not in plans:
            plans.append(cand)
    return plans


def _cover_capacity(cfg: EmbedConfig, r_size: int, p: float) -> int:
    ci = _conn_interior_estimate(cfg.k, p)
    usable = r_size - 4 - 2 * (ci + 1) - max(cfg.k + 2, r_size // 5)
    return max(0, usable // (2 * cfg.k + 1 if p < 0.92 else 2 * cfg.k))


def _extend_phase(
    g: Graph, rp: ReservoirPath, r_mask: int, cfg: EmbedConfig, p: float,
    l_target: int, rng: random.Random,
) -> Tuple[List[int], List[int], int]:
    """Two-sided greedy extension with depth-first backtracking.

    Greedy forward (richest end first, best candidate first); on dead ends
    a DFS over the last choices looks for an absorbing order.  Returns the
    best state seen: (head, tail, leftover_mask), head outermost first.
    """
    k = cfg.k
    base = rp.path.order
    l_start = g.full_mask & ~rp.path.vertex_mask()
    width = 8  # branching cap per state keeps each DFS from thrashing
    probes = 14
    probe_budget = max(2000, cfg.backtrack_budget // probes)
    best: Optional[Tuple[List[int], List[int], int]] = None

    for probe in range(probes):
        head: List[int] = []
        tail: List[int] = []
        l_mask = l_start

        def tuple_of(side: str) -> Tuple[int, ...]:
            if side == "head":
                return tuple(reversed((head[::-1] + list(base))[:k]))
            return tuple((list(base) + tail)[-k:])

        def state_candidates() -> List[Tuple[str, int]]:
            # absorb endangered leftovers first: vertices with few leftover
            # neighbours strand easily if the ends wander off
            merged: List[Tuple[int, float, str, int]] = []
            for side in ("tail", "head"):
                t = tuple_of(side)
                for negdeg, v in _extension_candidates(g, t, l_mask, r_mask, cfg, p)[:width]:
                    rarity = (g.rows[v] & l_mask).bit_count()
                    # jittered rank so probes sample different absorb orders
                    merged.append((rarity, negdeg + rng.random() * 1.999, side, v))
            merged.sort(key=lambda item: (item[0], item[1], item[3], item[2]))
            return [(side, v) for _, _, side, v in merged[: 2 * width]]

        frames: List[Tuple[List[Tuple[str, int]], int]] = []
        nodes = 0
        while l_mask.bit_count() > l_target and nodes <= probe_budget:
            cands = state_candidates()
            idx = 0
            while True:
                if idx < len(cands):
                    side, v = cands[idx]
                    frames.append((cands, idx))
                    (head if side == "head" else tail).append(v)
                    l_mask &= ~(1 << v)
                    nodes += 1
                    break
                if not frames:
                    nodes = probe_budget + 1
                    break
                cands, idx = frames.pop()
                side, v = cands[idx]
                (head if side == "head" else tail).pop()
                l_mask |= 1 << v
                idx += 1
        if best is None or l_mask.bit_count() < best[2].bit_count():
            best = (list(head), list(tail), l_mask)
        if best[2].bit_count() <= l_target:
            break
    assert best is not None
    return best


def embed_hamilton_power(
    g: Graph, cfg: EmbedConfig, trace: Optional[List[StageReport]] = None
) -> List[int]:
    """Find a spanning k-th power of a Hamilton cycle; returns the cyclic order.

    Deterministic for fixed (graph, config, seed).  Raises StageFailure
    carrying the report of the first stage whose candidates ran out.
    """
    k, n = cfg.k, g.n
    p = _graph_p(g, cfg)
    if n < 4 * k + 2:
        raise StageFailure("assembly", {"precondition": "graph too small", "n": n})
    if g.min_degree() + _TOL < cfg.beta * p * n * cfg.slack:
        raise StageFailure(
            "reservoir_set",
            {"precondition": "min-degree", "min_degree": g.min_degree()},
        )
    ell = 2 if k == 2 else 2 * k - 1
    params = PseudoParams(cfg.epsilon, min(p, 1 - 1e-12), max(0, k - 1), ell)
    if not implied_density(params, n):
        raise StageFailure(
            "reservoir_set",
            {"precondition": "implied density p^l n > 1/eps fails", "p": p, "l": ell},
        )
    last: Optional[StageFailure] = None
    for attempt, plan in enumerate(_plan_ladder(g, cfg, p)):
        try:
            return _run_pipeline(g, cfg, p, plan, attempt, trace)
        except StageFailure as exc:
            last = exc
            if trace is not None:
                trace.append(exc.report)
    assert last is not None
    raise last


def _note(trace, stage, **detail):
    if trace is not None:
        trace.append(StageReport(stage, True, detail))


def _run_pipeline(
    g: Graph, cfg: EmbedConfig, p: float, plan: _Plan, attempt: int,
    trace: Optional[List[StageReport]],
) -> List[int]:
    k, n, s = cfg.k, g.n, cfg.slack
    cfg2 = replace(
        cfg,
        reservoir_size=max(1, (plan.r_size + 1) // 2),
        segment_style=plan.style,
        seed=f"{cfg.seed}#{attempt}" if attempt else cfg.seed,
    )
    r_mask = select_reservoir_set(g, cfg2, p)
    _note(trace, "reservoir_set", size=r_mask.bit_count())
    s_mask = g.full_mask & ~r_mask
    rp = build_reservoir_path(g, r_mask, s_mask, cfg2, p)
    _note(trace, "reservoir_path", length=len(rp.path.order))

    rng = _rng(cfg2, f"extend:{attempt}")
    head, tail, l_mask = _extend_phase(g, rp, r_mask, cfg2, p, plan.l_target, rng)
    lsz = l_mask.bit_count()
    capacity = _cover_capacity(cfg2, r_mask.bit_count(), p)
    if lsz > max(plan.l_target, capacity):
        raise StageFailure(
            "extension",
            {"empty_set": "leftover above covering capacity", "leftover": lsz,
             "capacity": capacity},
        )
    rp_ext = rp.extended(head[::-1], tail)
    pprime = rp_ext.path
    _note(trace, "extension", covered=len(pprime.order), leftover=lsz)
    u_tpl = pprime.start()
    v_tpl = pprime.end()

    if lsz > 0:
        try:
            wit_u = connectedness_witness(g, u_tpl, r_mask, s * cfg.beta / 16, p).y_mask
            wit_v = connectedness_witness(
                g, v_tpl, r_mask & ~wit_u, s * cfg.beta / 16, p
            ).y_mask
        except ValueError as exc:
            raise StageFailure(
                "covering", {"empty_set": "end-tuple witness in R", "reason": str(exc)}
            ) from exc
        s_cov = r_mask & ~(wit_u | wit_v)
        cover = cover_leftover(g, l_mask, s_cov, cfg2, p)
        ppp = cover.path
        _note(trace, "covering", length=len(ppp.order))
        u1 = r_mask & ~ppp.vertex_mask()
        c_path = connect(g, ppp.end(), u_tpl, u1, cfg2, p, prefer="short")
        _note(trace, "connection_1", length=len(c_path.order))
        int_c = c_path.order[k:-k]
        u2 = u1 & ~mask_of(int_c)
        try:
            cp_path = connect(g, v_tpl, ppp.start(), u2, cfg2, p, prefer="short")
        except StageFailure as exc:
            raise StageFailure("connection_2", exc.report.detail) from exc
        _note(trace, "connection_2", length=len(cp_path.order))
        int_cp = cp_path.order[k:-k]
        w_mask = r_mask & (ppp.vertex_mask() | mask_of(int_c) | mask_of(int_cp))
        pstar = bypass(g, rp_ext, w_mask)
        _note(trace, "bypass", removed=w_mask.bit_count())
        cycle = list(pstar.order) + list(int_cp) + list(ppp.order) + list(int_c)
    else:
        c_path = connect(g, v_tpl, u_tpl, r_mask, cfg2, p, prefer="short")
        _note(trace, "connection_1", length=len(c_path.order))
        int_c = c_path.order[k:-k]
        w_mask = r_mask & mask_of(int_c)
        pstar = bypass(g, rp_ext, w_mask)
        _note(trace, "bypass", removed=w_mask.bit_count())
        cycle = list(pstar.order) + list(int_c)

    if len(cycle) != n or len(set(cycle)) != n:
        raise StageFailure(
            "assembly", {"empty_set": "cycle not spanning", "len": len(cycle)}
        )
    if not verify_kpower(g, cycle, k, cyclic=True):
        raise StageFailure("assembly", {"empty_set": "cycle verification"})
    _note(trace, "assembly", n=n)
    return cycle

"""Command-line surface: generation, checking, embedding, counting, sweeps.

File formats:
  edge list (.el)   header "n m", then one "u v" per line, 0-indexed,
                    ascending; gzip auto-detected on read
  cycle order       one vertex id per line
  run record        JSON echo of command, config, outcome, and timing
  sweep output      CSV with n,p,seed,outcome,stage,wall_ms,cycle_verified

Exit codes: 0 verified success, 1 usage/IO error, 2 algorithmic stage
failure.
"""

from __future__ import annotations

import argparse
import csv
import gzip
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

from .counting import CountConfig, count_lower_bound
from .embed import EmbedConfig, StageFailure, StageReport, embed_hamilton_power
from .generators import (
    complete_graph,
    cycle_power,
    gnp,
    paley,
    quadratic_residues,
    subgroup_sum_graph,
    sum_closed_ordering,
)
from .graph import Graph, build_graph, verify_kpower
from .pseudo import (
    PseudoParams,
    Verdict,
    certify_via_spectrum,
    check_jumbled,
    check_pseudorandom_exact,
    check_pseudorandom_sampled,
)


class CliError(Exception):
    """Usage or IO problem; maps to exit code 1."""


@dataclass
class RunRecord:
    command: str
    source: dict
    config: dict
    outcome: str
    seed: object
    wall_ms: float
    cycle: Optional[List[int]] = None
    stage_trace: List[dict] = field(default_factory=list)

    def write(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=1)
            fh.write("\n")


def save_graph(g: Graph, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(f"{g.n} {g.m}\n")
        for u, v in g.edges():
            fh.write(f"{u} {v}\n")


def load_graph(path: str) -> Graph:
    """Read an edge-list file; gzip is detected from the magic bytes."""
    with open(path, "rb") as raw:
        magic = raw.read(2)
    opener = gzip.open if magic == b"\x1f\x8b" else open
    with opener(path, "rt") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise CliError(f"{path}:1: expected header 'n m'")
        try:
            n, m = int(header[0]), int(header[1])
        except ValueError as exc:
            raise CliError(f"{path}:1: malformed header: {exc}") from exc
        edges = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 2:
                raise CliError(f"{path}:{lineno}: expected 'u v'")
            try:
                edges.append((int(parts[0]), int(parts[1])))
            except ValueError as exc:
                raise CliError(f"{path}:{lineno}: malformed edge: {exc}") from exc
    try:
        g = build_graph(n, edges)
    except ValueError as exc:
        raise CliError(f"{path}: {exc}") from exc
    if g.m != m:
        raise CliError(f"{path}: header claims {m} edges, found {g.m}")
    return g


def save_cycle(order: Sequence[int], path: str) -> None:
    with open(path, "w") as fh:
        for v in order:
            fh.write(f"{v}\n")


def load_cycle(path: str) -> List[int]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                out.append(int(line))
            except ValueError as exc:
                raise CliError(f"{path}:{lineno}: malformed vertex id") from exc
    return out


def _build_generated(args) -> Graph:
    kind = args.kind
    if kind == "gnp":
        if args.n is None or args.p is None or args.seed is None:
            raise CliError("gnp requires --n, --p and --seed")
        return gnp(args.n, args.p, args.seed)
    if kind == "paley":
        if args.q is None:
            raise CliError("paley requires --q")
        return paley(args.q)
    if kind == "cycle_power":
        if args.n is None or args.k is None:
            raise CliError("cycle_power requires --n and --k")
        return cycle_power(args.n, args.k)
    if kind == "complete":
        if args.n is None:
            raise CliError("complete requires --n")
        return complete_graph(args.n)
    if kind == "subgroup_sum":
        if args.q is None:
            raise CliError("subgroup_sum requires --q")
        sub = _subgroup_from_args(args)
        return subgroup_sum_graph(args.q, sub)
    raise CliError(f"unknown kind {kind!r}")


def _subgroup_from_args(args) -> List[int]:
    if getattr(args, "quadratic_residues", False):
        return quadratic_residues(args.q)
    if getattr(args, "generator", None) is not None:
        el = args.generator % args.q
        sub: List[int] = []
        x = el
        while x not in sub:
            sub.append(x)
            x = (x * el) % args.q
        return sorted(sub)
    raise CliError("need --quadratic-residues or --generator")


def _verdict_json(v: Verdict) -> dict:
    out = {"status": v.status}
    if v.witness is not None:
        out["witness"] = {
            "X": sorted_bits(v.witness.x_mask),
            "Y": sorted_bits(v.witness.y_mask),
            "observed": v.witness.observed,
            "bound": v.witness.bound,
        }
    if v.certified_epsilon is not None:
        out["certified_epsilon"] = v.certified_epsilon
    if v.detail:
        out["detail"] = {k: str(val) for k, val in v.detail.items()}
    return out


def sorted_bits(mask: int) -> List[int]:
    out = []
    v = 0
    while mask:
        if mask & 1:
            out.append(v)
        mask >>= 1
        v += 1
    return out


def _embed_config(args, seed=None) -> EmbedConfig:
    return EmbedConfig(
        k=args.k,
        beta=args.beta,
        delta=args.delta,
        slack=args.slack,
        seed=args.seed if seed is None else seed,
        stage_trace=getattr(args, "trace", False),
    )


def cmd_gen(args) -> int:
    g = _build_generated(args)
    save_graph(g, args.output)
    print(f"wrote {args.output}: n={g.n} m={g.m}")
    return 0


def cmd_check(args) -> int:
    g = load_graph(args.graph)
    try:
        return _run_check(g, args)
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def _run_check(g: Graph, args) -> int:
    if args.mode == "spectral":
        verdict = certify_via_spectrum(g, args.p, args.k, args.l)
    elif args.beta is not None:
        if args.p is None:
            raise CliError("jumbledness check requires --p")
        verdict = check_jumbled(
            g, args.p, args.beta, mode=args.mode, budget=args.budget, seed=args.seed
        )
    else:
        if None in (args.eps, args.p, args.k, args.l):
            raise CliError("pseudorandomness check requires --eps --p --k --l")
        params = PseudoParams(args.eps, args.p, args.k, args.l)
        if args.mode == "exact":
            verdict = check_pseudorandom_exact(g, params)
        else:
            verdict = check_pseudorandom_sampled(g, params, args.budget, args.seed)
    print(json.dumps(_verdict_json(verdict), indent=1))
    return 0


def cmd_embed(args) -> int:
    g = load_graph(args.graph)
    cfg = _embed_config(args)
    trace: List[StageReport] = []
    t0 = time.perf_counter()
    try:
        cycle = embed_hamilton_power(g, cfg, trace if args.trace else None)
        outcome = "ok"
        code = 0
    except StageFailure as exc:
        cycle = None
        outcome = f"stage:{exc.report.stage}"
        code = 2
    wall = (time.perf_counter() - t0) * 1000
    if cycle is not None and args.output:
        save_cycle(cycle, args.output)
    rec = RunRecord(
        command="embed",
        source={"path": args.graph},
        config={"k": cfg.k, "beta": cfg.beta, "delta": cfg.delta, "slack": cfg.slack},
        outcome=outcome,
        seed=cfg.seed,
        wall_ms=wall,
        cycle=cycle,
        stage_trace=[asdict(r) for r in trace],
    )
    if args.record:
        rec.write(args.record)
    print(f"{outcome} wall_ms={wall:.1f}" + (f" cycle={args.output}" if cycle and args.output else ""))
    return code


def cmd_count(args) -> int:
    g = load_graph(args.graph)
    cc = CountConfig(nu=args.nu, base=_embed_config(args))
    try:
        acc = count_lower_bound(g, cc)
    except StageFailure as exc:
        print(f"stage:{exc.report.stage}")
        return 2
    print(f"log_count={acc.log_count:.6f} steps={acc.steps}")
    if args.output:
        save_cycle(acc.witness, args.output)
        print(f"witness={args.output}")
    return 0


def cmd_verify(args) -> int:
    g = load_graph(args.graph)
    order = load_cycle(args.cycle)
    if args.cyclic and len(order) != g.n:
        print(f"not spanning: cycle has {len(order)} of {g.n} vertices")
        return 2
    if not verify_kpower(g, order, args.k, cyclic=args.cyclic):
        print("verification failed")
        return 2
    print("ok")
    return 0


def cmd_sweep(args) -> int:
    if args.seed is None:
        raise CliError("sweep requires --seed (reproducibility over convenience)")
    ns = [int(x) for x in args.ns.split(",")]
    ps = [float(x) for x in args.ps.split(",")]
    seeds = [int(x) for x in str(args.seeds).split(",")]
    rows = []
    for n in ns:
        for p in ps:
            for seed in seeds:
                g = gnp(n, p, args.seed)
                cfg = EmbedConfig(
                    k=args.k, beta=args.beta, delta=args.delta, slack=args.slack,
                    seed=seed,
                )
                t0 = time.perf_counter()
                try:
                    cycle = embed_hamilton_power(g, cfg)
                    outcome, stage = "ok", ""
                    verified = verify_kpower(g, cycle, args.k, cyclic=True)
                except StageFailure as exc:
                    outcome, stage, verified = "stage:" + exc.report.stage, exc.report.stage, False
                wall = (time.perf_counter() - t0) * 1000
                rows.append(
                    {"n": n, "p": p, "seed": seed, "outcome": outcome, "stage": stage,
                     "wall_ms": f"{wall:.1f}", "cycle_verified": verified}
                )
    with open(args.output, "w", newline="") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["n", "p", "seed", "outcome", "stage", "wall_ms", "cycle_verified"]
        )
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {args.output}: {len(rows)} rows")
    return 0


def cmd_subgroup(args) -> int:
    sub = _subgroup_from_args(args)
    order = sum_closed_ordering(args.q, sub, args.k, seed=args.seed)
    if order is None:
        print("not-found")
        return 2
    print(" ".join(str(a) for a in order))
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage errors, not argparse's 2
        self.print_usage(sys.stderr)
        raise CliError(message)


def make_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="hampow", description=__doc__,
                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    def add_embed_flags(sp):
        sp.add_argument("--k", type=int, default=2)
        sp.add_argument("--beta", type=float, default=0.5)
        sp.add_argument("--delta", type=float, default=0.1)
        sp.add_argument("--slack", type=float, default=1.0)
        sp.add_argument("--seed", type=int, default=0)

    gen = sub.add_parser("gen", help="generate a graph to an edge-list file")
    gen.add_argument("--kind", required=True,
                     choices=["gnp", "paley", "cycle_power", "complete", "subgroup_sum"])
    gen.add_argument("--n", type=int)
    gen.add_argument("--p", type=float)
    gen.add_argument("--seed", type=int)
    gen.add_argument("--q", type=int)
    gen.add_argument("--k", type=int)
    gen.add_argument("--quadratic-residues", action="store_true")
    gen.add_argument("--generator", type=int)
    gen.add_argument("-o", "--output", required=True)
    gen.set_defaults(func=cmd_gen)

    chk = sub.add_parser("check", help="pseudorandomness / jumbledness / spectral checks")
    chk.add_argument("graph")
    chk.add_argument("--mode", choices=["exact", "sampled", "spectral"], default="exact")
    chk.add_argument("--eps", type=float)
    chk.add_argument("--p", type=float)
    chk.add_argument("--k", type=int, default=1)
    chk.add_argument("--l", type=int, default=2)
    chk.add_argument("--beta", type=float, help="check jumbledness at this beta instead")
    chk.add_argument("--budget", type=int, default=10000)
    chk.add_argument("--seed", type=int, default=0)
    chk.set_defaults(func=cmd_check)

    emb = sub.add_parser("embed", help="find a k-th power of a Hamilton cycle")
    emb.add_argument("graph")
    add_embed_flags(emb)
    emb.add_argument("--trace", action="store_true")
    emb.add_argument("-o", "--output")
    emb.add_argument("--record", help="write a RunRecord JSON here")
    emb.set_defaults(func=cmd_embed)

    cnt = sub.add_parser("count", help="certified lower bound on cycle-power count")
    cnt.add_argument("graph")
    add_embed_flags(cnt)
    cnt.add_argument("--nu", type=float, default=0.5)
    cnt.add_argument("-o", "--output")
    cnt.set_defaults(func=cmd_count)

    ver = sub.add_parser("verify", help="check a cycle-order file against a graph")
    ver.add_argument("graph")
    ver.add_argument("cycle")
    ver.add_argument("--k", type=int, default=2)
    ver.add_argument("--cyclic", action="store_true")
    ver.set_defaults(func=cmd_verify)

    swp = sub.add_parser("sweep", help="grid of embeddings over (n, p, seeds)")
    swp.add_argument("--ns", required=True, help="comma-separated n values")
    swp.add_argument("--ps", required=True, help="comma-separated p values")
    swp.add_argument("--seeds", required=True, help="comma-separated embed seeds")
    add_embed_flags(swp)
    swp.add_argument("-o", "--output", required=True)
    swp.set_defaults(func=cmd_sweep)

    sg = sub.add_parser("subgroup", help="sum-closed cyclic ordering of a subgroup")
    sg.add_argument("--q", type=int, required=True)
    sg.add_argument("--quadratic-residues", action="store_true")
    sg.add_argument("--generator", type=int)
    sg.add_argument("--k", type=int, default=1)
    sg.add_argument("--seed", type=int, default=0)
    sg.set_defaults(func=cmd_subgroup)

    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = make_parser()
    try:
        args = ap.parse_args(argv)
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Payment-ability metrics over a network snapshot.

Routing mimics a source-based payer: paths are chosen by total base fee
alone (balances are private and invisible to the router) and only then
checked against the true balances.  The bottleneck of a path is the
largest amount it can forward on the first attempt; a blocked path
bottlenecks at 0.  All pair statistics are over ordered pairs, since
liquidity is directional.
"""

from __future__ import annotations

import heapq
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import NetworkGraph, network_imbalance, node_gini


@dataclass(frozen=True)
class PathQueryResult:
    """Cheapest directed path between two nodes plus its liquidity limit."""

    source: int
    target: int
    path: list[tuple[int, int]]  # (channel id, sender) per hop
    total_base_fee: int
    bottleneck: int


@dataclass
class EvaluationReport:
    """All snapshot metrics behind the before/after comparisons."""

    success_rate: float
    median_payment_sat: int
    payment_size_cdf: list[tuple[int, float]]
    gini_values: list[float]
    network_imbalance: float
    amount_sat: int = 1
    sampled_pairs: int | None = None
    extras: dict[str, float] = field(default_factory=dict)


# cost tuples are (fee, hops, node sequence, channel sequence); comparing the
# node sequence breaks fee/hop ties lexicographically and keeps Dijkstra greedy
def _single_source(g: NetworkGraph, source: int) -> dict[int, tuple]:
    start = (0, 0, (source,), ())
    best: dict[int, tuple] = {source: start}
    heap = [start]
    while heap:
        entry = heapq.heappop(heap)
        fee, hops, nodes, cids = entry
        u = nodes[-1]
        if best.get(u) != entry:
            continue
        for cid, nb in g.incident(u):
            ch = g.channels[cid]
            cand = (fee + ch.base_fee_msat, hops + 1, nodes + (nb,), cids + (cid,))
            cur = best.get(nb)
            if cur is None or cand < cur:
                best[nb] = cand
                heapq.heappush(heap, cand)
    return best


def _bottleneck_of(g: NetworkGraph, nodes: tuple[int, ...], cids: tuple[int, ...]) -> int:
    return min(g.channels[cid].balance(sender) for sender, cid in zip(nodes, cids))


def cheapest_path(g: NetworkGraph, source: int, target: int) -> PathQueryResult:
    """Minimum base-fee path, ties to fewer hops then smaller node ids.

    Balances do not influence the choice; the bottleneck is read off the
    chosen path afterward.  No path yields an empty result with
    bottleneck 0.
    """
    if source == target:
        raise ValueError("source and target must differ")
    if source not in g.adjacency or target not in g.adjacency:
        raise KeyError("unknown node")
    entry = _single_source(g, source).get(target)
    if entry is None:
        return PathQueryResult(source, target, [], 0, 0)
    fee, _, nodes, cids = entry
    path = [(cid, sender) for sender, cid in zip(nodes, cids)]
    return PathQueryResult(source, target, path, fee, _bottleneck_of(g, nodes, cids))


def _bottlenecks_by_source(g: NetworkGraph, sources: Sequence[int], threads: int) -> dict[int, dict[int, int]]:
    nodes = g.nodes()

    def one(source: int) -> tuple[int, dict[int, int]]:
        best = _single_source(g, source)
        row = {}
        for t in nodes:
            if t == source:
                continue
            entry = best.get(t)
            row[t] = 0 if entry is None else _bottleneck_of(g, entry[2], entry[3])
        return source, row

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = dict(pool.map(one, sources))
    else:
        results = dict(one(s) for s in sources)
    return results


def all_pairs_bottlenecks(g: NetworkGraph, threads: int = 1) -> list[int]:
    """Bottlenecks of all ordered pairs, in (source, target) sorted order."""
    nodes = g.nodes()
    rows = _bottlenecks_by_source(g, nodes, threads)
    return [rows[s][t] for s in nodes for t in nodes if t != s]


def success_rate(g: NetworkGraph, amount: int = 1, threads: int = 1) -> float:
    """Fraction of ordered pairs whose cheapest path can forward `amount`."""
    if amount < 1:
        raise ValueError("amount must be at least 1 satoshi")
    values = all_pairs_bottlenecks(g, threads)
    if not values:
        raise ValueError("success rate needs at least two nodes")
    return sum(1 for v in values if v >= amount) / len(values)


def _lower_median(values: Sequence[int]) -> int:
    ordered = sorted(values)
    return ordered[(len(ordered) - 1) // 2]


def median_payment_size(g: NetworkGraph, threads: int = 1) -> int:
    """Median feasible first-attempt payment over ordered pairs.

    Blocked pairs count as 0; an even count takes the lower middle value.
    """
    values = all_pairs_bottlenecks(g, threads)
    if not values:
        raise ValueError("median payment size needs at least two nodes")
    return _lower_median(values)


def ks_distance(sample_a: Sequence[float], sample_b: Sequence[float]) -> float:
    """Two-sample Kolmogorov-Smirnov statistic: sup |ECDF_a - ECDF_b|."""
    if len(sample_a) == 0 or len(sample_b) == 0:
        raise ValueError("ks_distance needs nonempty samples")
    a = np.sort(np.asarray(sample_a, dtype=np.float64))
    b = np.sort(np.asarray(sample_b, dtype=np.float64))
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(cdf_a - cdf_b)))


def gini_distribution(g: NetworkGraph) -> list[float]:
    """Per-node Gini values in node-id order."""
    nodes = g.nodes()
    if not nodes:
        raise ValueError("gini distribution of an empty graph")
    return [node_gini(g, u) for u in nodes]


def cdf_points(values: Sequence[int]) -> list[tuple[int, float]]:
    """(value, cumulative fraction) at each distinct value, ascending."""
    n = len(values)
    if n == 0:
        return []
    points = []
    ordered = sorted(values)
    for i, v in enumerate(ordered, start=1):
        if i == n or ordered[i] != v:
            points.append((v, i / n))
    return points


def _sample_ordered_pairs(nodes: Sequence[int], k: int, seed: int | None) -> list[tuple[int, int]]:
    n = len(nodes)
    total = n * (n - 1)
    rng = random.Random(seed)
    picks = rng.sample(range(total), min(k, total))
    pairs = []
    for idx in picks:
        s, r = divmod(idx, n - 1)
        t = r if r < s else r + 1
        pairs.append((nodes[s], nodes[t]))
    return sorted(pairs)


def evaluate_network(
    g: NetworkGraph,
    amount: int = 1,
    threads: int = 1,
    sample_pairs: int | None = None,
    seed: int | None = None,
) -> EvaluationReport:
    """Compute the full metric set of one snapshot.

    With `sample_pairs` the pair statistics use a seeded uniform sample of
    ordered pairs instead of all of them (approximate, for large graphs);
    the report notes the sample size.
    """
    if amount < 1:
        raise ValueError("amount must be at least 1 satoshi")
    nodes = g.nodes()
    if len(nodes) < 2:
        raise ValueError("evaluation needs at least two nodes")
    if sample_pairs is None:
        bottlenecks = all_pairs_bottlenecks(g, threads)
        sampled = None
    else:
        if sample_pairs < 1:
            raise ValueError("sample_pairs must be at least 1")
        pairs = _sample_ordered_pairs(nodes, sample_pairs, seed)
        rows = _bottlenecks_by_source(g, sorted({s for s, _ in pairs}), threads)
        bottlenecks = [rows[s][t] for s, t in pairs]
        sampled = len(pairs)
    return EvaluationReport(
        success_rate=sum(1 for v in bottlenecks if v >= amount) / len(bottlenecks),
        median_payment_sat=_lower_median(bottlenecks),
        payment_size_cdf=cdf_points(bottlenecks),
        gini_values=gini_distribution(g),
        network_imbalance=network_imbalance(g),
        amount_sat=amount,
        sampled_pairs=sampled,
    )

import json
from collections import deque

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lnbalance.ingestion import (
    SnapshotError,
    SnapshotRecord,
    allocate_funds_coinflip,
    generate_synthetic,
    largest_scc,
    liquidity_arcs,
    load_snapshot,
    load_state,
    write_snapshot,
    write_state,
)
from lnbalance.model import network_imbalance, node_gini


def rec(a, b, cap, base=1000, rate=1):
    return SnapshotRecord(a, b, cap, base, rate)


class TestLoadSnapshot:
    def test_csv_field_mapping(self, tmp_path):
        p = tmp_path / "net.csv"
        p.write_text("node_a,node_b,capacity_sat,base_fee_msat,fee_rate_ppm\na,b,100000,1000,1\n")
        records = load_snapshot(p)
        assert records == [SnapshotRecord("a", "b", 100000, 1000, 1)]

    def test_zero_capacity_is_parse_error(self, tmp_path):
        p = tmp_path / "net.csv"
        p.write_text("node_a,node_b,capacity_sat,base_fee_msat,fee_rate_ppm\na,b,0,1000,1\n")
        with pytest.raises(SnapshotError, match=":2:"):
            load_snapshot(p)

    def test_empty_file(self, tmp_path):
        p = tmp_path / "net.csv"
        p.write_text("")
        assert load_snapshot(p) == []

    def test_header_only(self, tmp_path):
        p = tmp_path / "net.csv"
        p.write_text("node_a,node_b,capacity_sat,base_fee_msat,fee_rate_ppm\n")
        assert load_snapshot(p) == []

    def test_bad_header(self, tmp_path):
        p = tmp_path / "net.csv"
        p.write_text("x,y,z,w,v\na,b,10,1,1\n")
        with pytest.raises(SnapshotError, match=":1:"):
            load_snapshot(p)

    def test_malformed_row_names_line(self, tmp_path):
        p = tmp_path / "net.csv"
        p.write_text(
            "node_a,node_b,capacity_sat,base_fee_msat,fee_rate_ppm\n"
            "a,b,100,1000,1\n"
            "c,d,notanumber,1000,1\n"
        )
        with pytest.raises(SnapshotError, match=":3:"):
            load_snapshot(p)

    def test_duplicates_kept_as_parallel(self, tmp_path):
        p = tmp_path / "net.csv"
        p.write_text(
            "node_a,node_b,capacity_sat,base_fee_msat,fee_rate_ppm\n"
            "a,b,100,1000,1\n"
            "a,b,100,1000,1\n"
        )
        assert len(load_snapshot(p)) == 2

    def test_jsonl_with_fee_defaults(self, tmp_path):
        p = tmp_path / "net.jsonl"
        lines = [
            {"node_a": "a", "node_b": "b", "capacity_sat": 5000},
            {"node_a": "b", "node_b": "c", "capacity_sat": 7000, "base_fee_msat": 0, "fee_rate_ppm": 9},
        ]
        p.write_text("\n".join(json.dumps(o) for o in lines) + "\n")
        records = load_snapshot(p)
        assert records[0].base_fee_msat == 1000 and records[0].fee_rate_ppm == 1
        assert records[1].base_fee_msat == 0 and records[1].fee_rate_ppm == 9

    def test_jsonl_error_names_line(self, tmp_path):
        p = tmp_path / "net.jsonl"
        p.write_text('{"node_a": "a", "node_b": "b", "capacity_sat": 5000}\nnot json\n')
        with pytest.raises(SnapshotError, match=":2:"):
            load_snapshot(p)

    def test_roundtrip(self, tmp_path):
        records = [rec("a", "b", 100), rec("b", "c", 250, 500, 10)]
        p = tmp_path / "net.csv"
        write_snapshot(records, p)
        assert load_snapshot(p) == records


class TestStateRoundtrip:
    def test_roundtrip_preserves_balances(self, tmp_path):
        g = allocate_funds_coinflip([rec("a", "b", 100), rec("b", "c", 50)], seed=3)
        p = tmp_path / "state.csv"
        write_state(g, p)
        h = load_state(p)
        assert [(c.balance_a, c.balance_b, c.capacity) for c in h.channels.values()] == [
            (c.balance_a, c.balance_b, c.capacity) for c in g.channels.values()
        ]
        assert h.labels == g.labels

    def test_plain_snapshot_rejected(self, tmp_path):
        p = tmp_path / "net.csv"
        write_snapshot([rec("a", "b", 100)], p)
        with pytest.raises(SnapshotError, match="balances"):
            load_state(p)


class TestCoinflip:
    def test_all_or_nothing(self):
        g = allocate_funds_coinflip([rec("a", "b", 100), rec("b", "c", 70)], seed=1)
        for ch in g.channels.values():
            assert (ch.balance_a, ch.balance_b) in ((ch.capacity, 0), (0, ch.capacity))

    def test_replay_determinism(self):
        records = [rec(f"n{i}", f"n{i+1}", 100 + i) for i in range(50)]
        a = allocate_funds_coinflip(records, seed=42)
        b = allocate_funds_coinflip(records, seed=42)
        assert [(c.balance_a, c.balance_b) for c in a.channels.values()] == [
            (c.balance_a, c.balance_b) for c in b.channels.values()
        ]

    def test_fraction_near_half_over_many_channels(self):
        records = [rec(f"a{i}", f"b{i}", 1000) for i in range(10_000)]
        g = allocate_funds_coinflip(records, seed=9)
        heads = sum(1 for ch in g.channels.values() if ch.balance_a == ch.capacity)
        assert abs(heads / 10_000 - 0.5) <= 0.02

    def test_labels_by_first_appearance(self):
        g = allocate_funds_coinflip([rec("x", "y", 10), rec("z", "x", 10)], seed=0)
        assert g.labels == {0: "x", 1: "y", 2: "z"}


def reachable(arcs, start):
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for v in arcs[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return seen


class TestLargestScc:
    def one_sided(self, pairs):
        # channel fully funded by the first endpoint of each pair
        records = [rec(a, b, 100) for a, b in pairs]
        g = allocate_funds_coinflip(records, seed=0)
        for ch in g.channels.values():
            ch.balance_a, ch.balance_b = ch.capacity, 0
        return g

    def test_path_graph_collapses(self):
        g = self.one_sided([("a", "b"), ("b", "c")])
        assert largest_scc(g).nodes() == []

    def test_oriented_triangle_kept(self):
        g = self.one_sided([("a", "b"), ("b", "c"), ("c", "a")])
        scc = largest_scc(g)
        assert scc.num_nodes() == 3 and scc.num_channels() == 3

    def test_idempotent_on_strongly_connected(self):
        g = self.one_sided([("a", "b"), ("b", "c"), ("c", "a")])
        once = largest_scc(g)
        twice = largest_scc(once)
        assert twice.nodes() == once.nodes()
        assert sorted(twice.channels) == sorted(once.channels)

    def test_keeps_interior_channels(self):
        # triangle plus a dangling one-way spur; spur is dropped, triangle kept
        g = self.one_sided([("a", "b"), ("b", "c"), ("c", "a"), ("a", "d")])
        scc = largest_scc(g)
        assert sorted(scc.labels.values()) == ["a", "b", "c"]
        assert scc.num_channels() == 3

    def test_tie_broken_by_smallest_node_id(self):
        # two disjoint 2-cycles via parallel opposite channels; first-seen pair wins
        records = [rec("p", "q", 10), rec("q", "p", 10), rec("r", "s", 10), rec("s", "r", 10)]
        g = allocate_funds_coinflip(records, seed=0)
        for ch in g.channels.values():
            ch.balance_a, ch.balance_b = ch.capacity, 0
        scc = largest_scc(g)
        assert sorted(scc.labels.values()) == ["p", "q"]

    def test_every_pair_connected_by_liquidity_path(self):
        records = generate_synthetic(60, 2, (1000, 100_000), seed=5)
        scc = largest_scc(allocate_funds_coinflip(records, seed=5))
        arcs = liquidity_arcs(scc)
        nodes = scc.nodes()
        for u in nodes:
            assert reachable(arcs, u) >= set(nodes)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(min_value=0, max_value=10_000))
    def test_zeta_zero_or_one_after_coinflip(self, seed):
        records = generate_synthetic(30, 2, (1000, 10_000), seed=seed)
        g = allocate_funds_coinflip(records, seed=seed)
        for ch in g.channels.values():
            assert ch.balance_a in (0, ch.capacity)


class TestGenerateSynthetic:
    def test_minimal_tree(self):
        records = generate_synthetic(4, 1, (100, 200), seed=0)
        assert len(records) == 3

    def test_edge_count_formula(self):
        records = generate_synthetic(200, 4, (10_000, 10_000_000), seed=1)
        assert len(records) == (200 - 4 - 1) * 4 + 4  # 784

    def test_deterministic(self):
        a = generate_synthetic(50, 3, (1000, 100_000), seed=11)
        b = generate_synthetic(50, 3, (1000, 100_000), seed=11)
        assert a == b

    def test_capacities_in_range(self):
        records = generate_synthetic(80, 2, (5_000, 50_000), seed=2)
        assert all(5_000 <= r.capacity_sat <= 50_000 for r in records)

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            generate_synthetic(4, 0, (100, 200), seed=0)
        with pytest.raises(ValueError):
            generate_synthetic(3, 3, (100, 200), seed=0)
        with pytest.raises(ValueError):
            generate_synthetic(10, 2, (200, 100), seed=0)

    def test_no_self_channels_or_duplicate_attachments(self):
        records = generate_synthetic(100, 3, (1000, 10_000), seed=8)
        assert all(r.node_a != r.node_b for r in records)
        # a new node never attaches twice to the same target
        seen = set()
        for r in records:
            key = (r.node_a, r.node_b)
            assert key not in seen
            seen.add(key)


class TestPipeline:
    def test_deterministic_end_to_end(self):
        records = generate_synthetic(60, 3, (1000, 1_000_000), seed=21)
        a = largest_scc(allocate_funds_coinflip(records, seed=21))
        b = largest_scc(allocate_funds_coinflip(records, seed=21))
        assert a.nodes() == b.nodes()
        assert [(c.balance_a, c.balance_b) for c in a.channels.values()] == [
            (c.balance_a, c.balance_b) for c in b.channels.values()
        ]
        assert network_imbalance(a) == network_imbalance(b)

    def test_scc_nodes_have_channels(self):
        records = generate_synthetic(60, 3, (1000, 1_000_000), seed=4)
        scc = largest_scc(allocate_funds_coinflip(records, seed=4))
        for u in scc.nodes():
            assert node_gini(scc, u) >= 0.0  # raises if the node lost its channels

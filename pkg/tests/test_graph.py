import io

import numpy as np
import pytest

from labor import graph as G
from labor.graph import (
    Graph,
    GraphCorruptionError,
    GraphFormatError,
    erdos_renyi,
    from_edges,
    khop_neighborhood,
    load_binary_csr,
    load_edge_list,
    load_graph,
    parse_graph_spec,
    power_law,
    save_binary_csr,
    save_graph,
    shared_star,
)
from oracles import khop_bfs


def test_from_edges_builds_sorted_in_csr():
    g = from_edges([2, 0, 1, 0], [1, 1, 2, 2], 3)
    g.validate()
    assert g.in_indptr.tolist() == [0, 0, 2, 4]
    assert g.in_neighbors(1).tolist() == [0, 2]
    assert g.in_neighbors(2).tolist() == [0, 1]
    assert g.degree(0) == 0


def test_duplicates_collapse_and_weights_sum():
    g = from_edges([0, 0, 1], [2, 2, 2], 3, weights=[1.5, 2.0, 1.0])
    assert g.num_edges == 2
    assert g.in_weights(2).tolist() == [3.5, 1.0]


def test_self_loops_are_ordinary_edges():
    g = from_edges([1, 0], [1, 1], 2)
    assert g.in_neighbors(1).tolist() == [0, 1]


def test_degrees_match_indptr(er50):
    deg = er50.in_degrees()
    for s in range(er50.num_vertices):
        assert deg[s] == er50.in_indptr[s + 1] - er50.in_indptr[s] == er50.degree(s)


def test_graph_is_read_only(er50):
    with pytest.raises(ValueError):
        er50.in_indices[0] = 3


def test_validate_rejects_bad_csr():
    with pytest.raises(ValueError):
        Graph(2, [0, 2, 1], [0, 1]).validate()
    with pytest.raises(ValueError):
        Graph(2, [0, 2, 2], [1, 0]).validate()
    with pytest.raises(ValueError):
        Graph(2, [0, 1, 1], [5]).validate()
    with pytest.raises(ValueError):
        Graph(2, [0, 1, 1], [0], edge_weights=[0.0]).validate()


def test_edge_list_parse_with_header_and_comments():
    text = "# a comment\n# vertices: 5\n0 1\n\n2 1 \n3 4\n"
    g = load_edge_list(io.StringIO(text))
    assert g.num_vertices == 5
    assert g.in_neighbors(1).tolist() == [0, 2]
    assert not g.is_weighted


def test_edge_list_weighted():
    g = load_edge_list(io.StringIO("0 1 2.5\n2 1 0.5\n"), weighted=True)
    assert g.in_weights(1).tolist() == [2.5, 0.5]


@pytest.mark.parametrize(
    "text, line",
    [("0 1\n1 x\n", 2), ("0 1 2 3\n", 1), ("-1 0\n", 1), ("0 1\n0 1 abc\n", 2)],
)
def test_edge_list_errors_report_line(text, line):
    with pytest.raises(GraphFormatError, match=f"line {line}"):
        load_edge_list(io.StringIO(text))


def test_edge_list_rejects_nonpositive_weight():
    with pytest.raises(ValueError, match="positive"):
        load_edge_list(io.StringIO("0 1 0\n"), weighted=True)


@pytest.mark.parametrize("weighted", [False, True])
def test_binary_round_trip(tmp_path, weighted):
    g = erdos_renyi(40, 0.2, seed=3)
    if weighted:
        g = Graph(g.num_vertices, g.in_indptr, g.in_indices, np.linspace(0.1, 3.0, g.num_edges))
    path = tmp_path / "g.lbrg"
    save_binary_csr(g, path)
    assert load_binary_csr(path) == g
    assert load_graph(path) == g


def test_binary_layout_is_little_endian(tmp_path):
    g = from_edges([0], [1], 2, weights=[2.0])
    path = tmp_path / "g.bin"
    save_graph(g, path)
    data = path.read_bytes()
    assert data[:4] == b"LBRG"
    assert int.from_bytes(data[4:8], "little") == 1
    assert int.from_bytes(data[8:16], "little") == 2
    assert int.from_bytes(data[16:24], "little") == 1
    assert data[24] == 1
    assert len(data) == 25 + 3 * 8 + 4 + 8


def test_binary_corruption_detected(tmp_path):
    g = erdos_renyi(20, 0.3, seed=0)
    path = tmp_path / "g.lbrg"
    save_binary_csr(g, path)
    data = path.read_bytes()
    (tmp_path / "short.lbrg").write_bytes(data[:-3])
    with pytest.raises(GraphCorruptionError):
        load_binary_csr(tmp_path / "short.lbrg")
    bad = bytearray(data)
    bad[4] = 9
    (tmp_path / "ver.lbrg").write_bytes(bytes(bad))
    with pytest.raises(GraphFormatError, match="version"):
        load_binary_csr(tmp_path / "ver.lbrg")
    (tmp_path / "magic.lbrg").write_bytes(b"XXXX" + data[4:])
    with pytest.raises(GraphFormatError, match="magic"):
        load_binary_csr(tmp_path / "magic.lbrg")
    bad = bytearray(data)
    off = 25 + 8 * 21
    bad[off : off + 4] = (10**6).to_bytes(4, "little")
    (tmp_path / "ids.lbrg").write_bytes(bytes(bad))
    with pytest.raises(GraphCorruptionError):
        load_binary_csr(tmp_path / "ids.lbrg")


def test_text_round_trip(tmp_path):
    g = power_law(200, seed=2)
    path = tmp_path / "g.txt"
    save_graph(g, path)
    assert load_graph(path) == g


def test_khop_path_graph(path_graph):
    assert khop_neighborhood(path_graph, [2], 1).tolist() == [1]
    assert khop_neighborhood(path_graph, [2], 2).tolist() == [0]


def test_khop_bad_args(path_graph):
    with pytest.raises(ValueError):
        khop_neighborhood(path_graph, [2], 0)
    with pytest.raises(ValueError):
        khop_neighborhood(path_graph, [7], 1)


def _reachable_exactly(g, seeds, hops):
    # vertices at the end of an in-walk of exactly `hops` steps
    cur = set(seeds)
    for _ in range(hops):
        cur = {int(t) for s in cur for t in g.in_neighbors(s)}
    return sorted(cur)


@pytest.mark.parametrize("seed", range(5))
def test_khop_matches_walk_oracle(seed):
    g = erdos_renyi(60, 0.04, seed=seed)
    seeds = [0, 5, 9]
    for hops in (1, 2, 3):
        assert khop_neighborhood(g, seeds, hops).tolist() == _reachable_exactly(g, seeds, hops)


def test_khop_union_matches_bfs_oracle():
    g = erdos_renyi(80, 0.03, seed=11)
    adj = {s: g.in_neighbors(s).tolist() for s in range(g.num_vertices)}
    seeds = [1, 2, 3]
    union = set(seeds)
    for h in (1, 2, 3):
        union |= set(khop_neighborhood(g, seeds, h).tolist())
    assert sorted(union) == khop_bfs(adj, seeds, 3)


def test_shared_star_structure():
    g = shared_star(2, 20)
    assert g.num_vertices == 22
    assert g.in_neighbors(0).tolist() == g.in_neighbors(1).tolist() == list(range(2, 22))


def test_er_deterministic():
    assert erdos_renyi(50, 0.2, seed=7) == erdos_renyi(50, 0.2, seed=7)
    assert erdos_renyi(50, 0.2, seed=7) != erdos_renyi(50, 0.2, seed=8)


def test_power_law_heavier_tail_than_er():
    pl = power_law(1000, 2.1, seed=1)
    mean = pl.num_edges / 1000
    er = erdos_renyi(1000, mean / 999, seed=1)
    assert pl.in_degrees().max() > 3 * er.in_degrees().max()


def test_gen_synthetic_and_params():
    assert G.gen_synthetic("shared_star", m=2, d=3) == shared_star(2, 3)
    assert G.gen_synthetic("erdos_renyi", seed=4, n=10, p=0.5) == erdos_renyi(10, 0.5, seed=4)
    with pytest.raises(ValueError):
        G.gen_synthetic("lattice")
    with pytest.raises(ValueError):
        erdos_renyi(10, 1.5)
    with pytest.raises(ValueError):
        shared_star(0, 3)


def test_parse_graph_spec(tmp_path):
    assert parse_graph_spec("er:30:0.1:2") == erdos_renyi(30, 0.1, seed=2)
    assert parse_graph_spec("star:3:4") == shared_star(3, 4)
    assert parse_graph_spec("pl:100:2.5:4:9") == power_law(100, 2.5, 4.0, seed=9)
    path = tmp_path / "x.txt"
    save_graph(shared_star(1, 2), path)
    assert parse_graph_spec(str(path)) == shared_star(1, 2)
    with pytest.raises(ValueError):
        parse_graph_spec("er:abc:0.1")


def test_check_seeds_rejects_duplicates(er50):
    with pytest.raises(ValueError, match="duplicates"):
        G.check_seeds(er50, [1, 1])

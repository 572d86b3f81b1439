import itertools

import numpy as np
import pytest

from annealrbm.config import ChimeraConfig, SamplerConfig
from annealrbm.errors import EmbeddingError
from annealrbm.rbm import RbmParams, energy
from annealrbm.chimera.embedding import Embedding, embed_bipartite, is_valid_embedding, verify_embedding
from annealrbm.chimera.graph import build_chimera
from annealrbm.chimera.problem import IsingProblem, auto_scale, embed_problem, ising_energies, rbm_to_ising
from annealrbm.chimera.sampler import ChimeraSampler, chain_strength_sweep, chimera_sample, decode_chains


def _physical_spins(embedding, nodes, v, h):
    logical = np.concatenate([v, h])
    index = {node: k for k, node in enumerate(nodes)}
    spins = np.zeros((1, len(nodes)))
    for label in embedding.labels:
        for q in embedding.chain(label):
            spins[0, index[q]] = 2.0 * logical[label] - 1.0
    return spins


@pytest.mark.parametrize("m, nodes, edges", [(1, 8, 16), (2, 32, 80), (16, 2048, 6016)])
def test_chimera_counts(m, nodes, edges):
    graph = build_chimera(m)
    assert len(graph.nodes) == nodes
    assert len(graph.edges) == edges


def test_chimera_labels_and_couplers():
    graph = build_chimera(2)
    assert graph.coordinates(graph.linear_index(1, 0, 1, 3)) == (1, 0, 1, 3)
    # shore 0 couples down, shore 1 couples right
    assert graph.has_edge(graph.linear_index(0, 0, 0, 2), graph.linear_index(1, 0, 0, 2))
    assert graph.has_edge(graph.linear_index(0, 0, 1, 2), graph.linear_index(0, 1, 1, 2))
    assert not graph.has_edge(graph.linear_index(0, 0, 0, 2), graph.linear_index(0, 1, 0, 2))
    assert len(graph.intra_cell_edges()) == 64
    assert len(graph.inter_cell_edges()) == 16


def test_dead_qubits_are_removed():
    graph = build_chimera(1, dead_qubits=[0, 5])
    assert len(graph.nodes) == 6
    assert len(graph.edges) == 9
    assert not graph.has_qubit(0)
    with pytest.raises(ValueError):
        build_chimera(1, dead_qubits=[99])


def test_edge_list_text(tmp_path):
    graph = build_chimera(1)
    path = tmp_path / "edges.txt"
    graph.write_edge_list(path)
    lines = path.read_text().splitlines()
    assert len(lines) == 16
    assert lines[0] == "0 4"


def test_single_cell_embedding_has_unit_chains():
    graph = build_chimera(1)
    embedding = embed_bipartite(4, 4, graph)
    assert set(embedding.chain_lengths().values()) == {1}
    assert is_valid_embedding(embedding, graph)


def test_two_cell_embedding():
    graph = build_chimera(2)
    embedding = embed_bipartite(8, 8, graph)
    assert set(embedding.chain_lengths().values()) == {2}
    assert len(embedding.qubits()) == 32
    verify_embedding(embedding, graph)


def test_embedding_capacity_and_dead_qubits():
    with pytest.raises(EmbeddingError):
        embed_bipartite(5, 4, build_chimera(1))
    with pytest.raises(EmbeddingError):
        embed_bipartite(4, 4, build_chimera(1, dead_qubits=[0]))


def test_embedding_text_round_trip(tmp_path):
    embedding = embed_bipartite(6, 3, build_chimera(2), chain_strength=0.75)
    path = tmp_path / "embedding.txt"
    embedding.save(path)
    loaded = Embedding.load(path)
    assert loaded.chains == embedding.chains
    assert (loaded.n_visible, loaded.n_hidden, loaded.chain_strength) == (6, 3, 0.75)


def test_verifier_reports_overlap_and_disconnection():
    graph = build_chimera(1)
    overlapping = Embedding({0: (4,), 1: (4,)}, 1, 1)
    assert not is_valid_embedding(overlapping, graph)
    disconnected = Embedding({0: (4, 5), 1: (0,)}, 1, 1)
    with pytest.raises(EmbeddingError, match="not connected"):
        verify_embedding(disconnected, graph)
    uncoupled = Embedding({0: (4,), 1: (5,)}, 1, 1)
    with pytest.raises(EmbeddingError, match="no physical coupler"):
        verify_embedding(uncoupled, graph)


def test_ising_form_matches_rbm_energy():
    params = RbmParams.random(3, 3, np.random.default_rng(21), scale=1.0)
    logical = rbm_to_ising(params)
    for bits in itertools.product((0.0, 1.0), repeat=6):
        v, h = np.array(bits[:3]), np.array(bits[3:])
        spins = {label: 2 * int(bit) - 1 for label, bit in enumerate(bits)}
        assert logical.energy(spins) == pytest.approx(energy(params, v, h), abs=1e-12)


def test_unit_chain_problem_is_the_logical_problem():
    params = RbmParams.random(4, 4, np.random.default_rng(22), scale=1.0)
    graph = build_chimera(1)
    embedding = embed_bipartite(4, 4, graph)
    physical = embed_problem(params, embedding, graph)
    logical = rbm_to_ising(params)
    relabel = {label: embedding.chain(label)[0] for label in embedding.labels}
    for label, bias in logical.hfield.items():
        assert physical.hfield[relabel[label]] == pytest.approx(bias)
    for (a, b), coupling in logical.J.items():
        p, q = sorted((relabel[a], relabel[b]))
        assert physical.J[(p, q)] == pytest.approx(coupling)
    assert physical.offset == pytest.approx(logical.offset)


def test_fields_split_equally_along_a_chain():
    params = RbmParams(np.zeros((1, 5)), [2.0], np.zeros(5))
    graph = build_chimera(2)
    embedding = embed_bipartite(1, 5, graph)
    physical = embed_problem(params, embedding, graph)
    chain = embedding.chain(0)
    assert len(chain) == 2
    for q in chain:
        assert physical.hfield[q] == pytest.approx(-0.5)


def test_unbroken_physical_energy_is_logical_energy():
    rng = np.random.default_rng(23)
    params = RbmParams.random(8, 8, rng, scale=1.0)
    graph = build_chimera(2)
    embedding = embed_bipartite(8, 8, graph)
    physical = embed_problem(params, embedding, graph, chain_strength=3.0)
    physical.check_graph(graph)
    for _ in range(20):
        v = rng.integers(0, 2, 8).astype(float)
        h = rng.integers(0, 2, 8).astype(float)
        spins = _physical_spins(embedding, physical.nodes, v, h)
        assert ising_energies(physical, physical.nodes, spins)[0] == pytest.approx(energy(params, v, h), abs=1e-9)


def test_embed_problem_rejects_size_mismatch():
    graph = build_chimera(1)
    with pytest.raises(EmbeddingError):
        embed_problem(RbmParams.zeros(3, 4), embed_bipartite(4, 4, graph), graph)


def test_auto_scale_shrinks_then_leaves_alone():
    problem = IsingProblem({(0, 4): 4.0}, {0: 0.5, 4: -0.25})
    scaled, scale = auto_scale(problem)
    assert scale == pytest.approx(2.0)
    assert scaled.J[(0, 4)] == pytest.approx(2.0)
    assert scaled.hfield[0] == pytest.approx(0.25)

    in_range = IsingProblem({(0, 4): -1.0}, {0: 0.5})
    unchanged, scale = auto_scale(in_range)
    assert scale == 1.0
    assert unchanged.J == in_range.J


def test_decode_chains_majority_vote():
    embedding = Embedding({0: (10, 11, 12), 1: (20,)}, 1, 1)
    spins = np.array([[1.0, 1.0, -1.0, -1.0], [-1.0, -1.0, -1.0, 1.0]])
    bits, broken = decode_chains(spins, [10, 11, 12, 20], embedding, np.random.default_rng(0))
    assert np.array_equal(bits, [[1.0, 0.0], [0.0, 1.0]])
    assert broken == pytest.approx(0.25)


def test_decode_chains_breaks_ties_at_random(rng):
    embedding = Embedding({0: (1, 2), 1: (3,)}, 1, 1)
    spins = np.tile([1.0, -1.0, 1.0], (2000, 1))
    bits, broken = decode_chains(spins, [1, 2, 3], embedding, rng)
    assert abs(bits[:, 0].mean() - 0.5) < 0.05
    assert broken == pytest.approx(0.5)


def test_annealer_finds_logical_ground_state(rng):
    params = RbmParams(0.5 * np.ones((8, 8)), np.ones(8), np.ones(8))
    sampler = ChimeraSampler(
        SamplerConfig(kind="chimera", n_samples=100, beta_start=0.1, beta_end=10.0, n_sweeps=200, gibbs_postprocess_sweeps=0)
    )
    drawn = sampler.sample(params, rng)
    at_ground = np.all(drawn.visible == 1.0, axis=1) & np.all(drawn.hidden == 1.0, axis=1)
    assert at_ground.mean() >= 0.9
    assert drawn.verify_energies(params)
    assert drawn.source == "chimera"


def test_chain_strength_controls_breakage(rng):
    params = RbmParams.random(8, 8, np.random.default_rng(24), scale=0.1)
    graph = build_chimera(2)
    embedding = embed_bipartite(8, 8, graph)
    config = SamplerConfig(kind="chimera", n_samples=200, beta_start=0.1, beta_end=5.0, n_sweeps=100)
    (weak, weak_broken), (strong, strong_broken) = chain_strength_sweep(
        params, embedding, graph, [1e-3, 2.0], config, rng
    )
    assert (weak, strong) == (1e-3, 2.0)
    assert weak_broken > 0.0
    assert strong_broken <= 0.01


def test_chimera_sample_metadata(small_params, rng):
    graph = build_chimera(1)
    embedding = embed_bipartite(3, 3, graph)
    config = SamplerConfig(kind="chimera", n_samples=30, n_sweeps=20)
    drawn = chimera_sample(small_params, embedding, graph, config, rng, ChimeraConfig(auto_scale=False))
    assert len(drawn) == 30
    assert drawn.metadata["scale"] == 1.0
    assert 0.0 <= drawn.metadata["broken_chain_fraction"] <= 1.0
    assert drawn.verify_energies(small_params)


def test_sampler_caches_one_layout_per_size():
    sampler = ChimeraSampler(chimera_config=ChimeraConfig())
    graph, embedding = sampler.layout_for(6, 5)
    assert graph.m == 2
    assert sampler.layout_for(6, 5)[1] is embedding
    assert sampler.layout_for(3, 3)[0].m == 1


def test_chimera_reads_do_not_depend_on_how_many_run(small_params):
    sampler = ChimeraSampler(SamplerConfig(kind="chimera", n_sweeps=20))
    few = sampler.sample(small_params, np.random.default_rng(6), n_samples=3)
    many = sampler.sample(small_params, np.random.default_rng(6), n_samples=30)
    assert np.array_equal(many.visible[:3], few.visible)
    assert np.array_equal(many.hidden[:3], few.hidden)

import numpy as np
import pytest
import torch

from conftest import make_interactions
from fusionrec.graphs import SparseGraph, build_norm_bipartite
from fusionrec.model.network import RecommenderNetwork, combine_residual, score
from fusionrec.model.propagation import (
    graph_to_sparse,
    propagate_bipartite,
    propagate_homogeneous,
)
from fusionrec.errors import InternalError


def random_bipartite(n_users, n_items, seed, density=0.3):
    rng = np.random.default_rng(seed)
    pairs = sorted({
        (int(rng.integers(0, n_users)), int(rng.integers(0, n_items)))
        for _ in range(int(density * n_users * n_items))
    })
    pairs += [(u, int(rng.integers(0, n_items))) for u in range(n_users)]
    pairs += [(int(rng.integers(0, n_users)), i) for i in range(n_items)]
    s = make_interactions([(f"u{u:03d}", f"i{i:03d}") for u, i in sorted(set(pairs))])
    return build_norm_bipartite(s)


def dense_bipartite_oracle(graph: SparseGraph, u0, i0, layers):
    """Stacked dense adjacency applied repeatedly, layer outputs summed."""
    n_u, n_i = graph.n_src, graph.n_dst
    r_hat = graph.to_dense()
    a_hat = np.zeros((n_u + n_i, n_u + n_i))
    a_hat[:n_u, n_u:] = r_hat
    a_hat[n_u:, :n_u] = r_hat.T
    x = np.vstack([u0, i0])
    total = x.copy()
    for _ in range(layers):
        x = a_hat @ x
        total += x
    return total[:n_u], total[n_u:]


def random_homogeneous(n, seed, k=4):
    rng = np.random.default_rng(seed)
    src, dst, w = [], [], []
    for i in range(n):
        neighbors = rng.choice([j for j in range(n) if j != i], size=k, replace=False)
        for j in neighbors:
            src.append(i)
            dst.append(int(j))
            w.append(float(rng.normal()))
    return SparseGraph("item_knn", n, n, np.array(src), np.array(dst), np.array(w))


class TestBipartitePropagation:
    def test_l0_is_identity(self):
        g = random_bipartite(6, 8, seed=1)
        u0 = torch.randn(6, 4, dtype=torch.float64)
        i0 = torch.randn(8, 4, dtype=torch.float64)
        r = graph_to_sparse(g, torch.float64)
        rt = graph_to_sparse(g, torch.float64, transpose=True)
        u, i = propagate_bipartite(r, rt, u0, i0, 0)
        assert torch.equal(u, u0)
        assert torch.equal(i, i0)

    def test_single_edge_hand_unroll(self):
        s = make_interactions([("u", "i")])
        g = build_norm_bipartite(s)
        u0 = torch.tensor([[1.0, 2.0]], dtype=torch.float64)
        i0 = torch.tensor([[10.0, 20.0]], dtype=torch.float64)
        r = graph_to_sparse(g, torch.float64)
        rt = graph_to_sparse(g, torch.float64, transpose=True)
        u, i = propagate_bipartite(r, rt, u0, i0, 1)
        assert torch.allclose(u, u0 + i0)
        assert torch.allclose(i, i0 + u0)

    @pytest.mark.parametrize("layers", [0, 1, 2, 3])
    def test_matches_dense_oracle(self, layers):
        g = random_bipartite(10, 12, seed=layers + 5)
        u0 = np.random.default_rng(1).normal(size=(10, 5))
        i0 = np.random.default_rng(2).normal(size=(12, 5))
        r = graph_to_sparse(g, torch.float64)
        rt = graph_to_sparse(g, torch.float64, transpose=True)
        u, i = propagate_bipartite(r, rt, torch.from_numpy(u0), torch.from_numpy(i0), layers)
        eu, ei = dense_bipartite_oracle(g, u0, i0, layers)
        assert np.allclose(u.numpy(), eu, rtol=1e-6, atol=1e-12)
        assert np.allclose(i.numpy(), ei, rtol=1e-6, atol=1e-12)

    def test_linearity(self):
        g = random_bipartite(7, 9, seed=3)
        u0 = torch.randn(7, 3, dtype=torch.float64)
        i0 = torch.randn(9, 3, dtype=torch.float64)
        r = graph_to_sparse(g, torch.float64)
        rt = graph_to_sparse(g, torch.float64, transpose=True)
        u1, i1 = propagate_bipartite(r, rt, 2.5 * u0, 2.5 * i0, 2)
        u2, i2 = propagate_bipartite(r, rt, u0, i0, 2)
        assert torch.allclose(u1, 2.5 * u2)
        assert torch.allclose(i1, 2.5 * i2)


class TestHomogeneousPropagation:
    def test_empty_graph_zeroes_after_one_layer(self):
        g = SparseGraph("item_knn", 4, 4, np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0))
        x0 = torch.randn(4, 3, dtype=torch.float64)
        adj = graph_to_sparse(g, torch.float64)
        out = propagate_homogeneous(adj, x0, 1)
        assert torch.equal(out, torch.zeros_like(x0))

    def test_single_edge(self):
        g = SparseGraph("item_knn", 3, 3, np.array([0]), np.array([2]), np.array([1.0]))
        x0 = torch.tensor([[1.0, 1.0], [2.0, 2.0], [3.0, 4.0]], dtype=torch.float64)
        out = propagate_homogeneous(graph_to_sparse(g, torch.float64), x0, 1)
        assert torch.allclose(out[0], x0[2])
        assert torch.equal(out[1], torch.zeros(2, dtype=torch.float64))
        assert torch.equal(out[2], torch.zeros(2, dtype=torch.float64))

    @pytest.mark.parametrize("layers", [0, 1, 2, 3])
    def test_matches_dense_oracle(self, layers):
        g = random_homogeneous(50, seed=layers)
        x0 = np.random.default_rng(7).normal(size=(50, 6))
        out = propagate_homogeneous(
            graph_to_sparse(g, torch.float64), torch.from_numpy(x0), layers
        )
        expected = x0.copy()
        dense = g.to_dense()
        for _ in range(layers):
            expected = dense @ expected
        assert np.allclose(out.numpy(), expected, rtol=1e-6, atol=1e-12)

    def test_last_layer_only_not_sum(self):
        g = SparseGraph("item_knn", 2, 2, np.array([0, 1]), np.array([1, 0]), np.array([2.0, 2.0]))
        x0 = torch.tensor([[1.0], [3.0]], dtype=torch.float64)
        out = propagate_homogeneous(graph_to_sparse(g, torch.float64), x0, 2)
        # two hops: x -> 2*swap(x) -> 4*x; a layer sum would give x + 2 swap + 4 x
        assert torch.allclose(out, 4.0 * x0)


class TestProjection:
    def test_output_width(self):
        net = RecommenderNetwork(3, 4, d_visual=384, d_textual=384, embedding_dim=64,
                                 dtype=torch.float64, seed=0)
        out = net.proj_v(torch.randn(4, 384, dtype=torch.float64))
        assert out.shape == (4, 64)

    def test_zero_row_gives_bias(self):
        net = RecommenderNetwork(3, 4, d_visual=10, d_textual=10, embedding_dim=8,
                                 dtype=torch.float64, seed=0)
        out = net.proj_t(torch.zeros(1, 10, dtype=torch.float64))
        assert torch.allclose(out[0], net.proj_t.bias)

    def test_projection_gradient_matches_finite_differences(self):
        torch.manual_seed(0)
        proj = torch.nn.Linear(5, 3, dtype=torch.float64)
        x = torch.randn(4, 5, dtype=torch.float64)
        target = torch.randn(4, 3, dtype=torch.float64)

        def loss_value():
            return ((proj(x) - target) ** 2).sum()

        loss = loss_value()
        loss.backward()
        eps = 1e-6
        for param in (proj.weight, proj.bias):
            analytic = param.grad.clone()
            fd = torch.zeros_like(param)
            flat = param.data.view(-1)
            for idx in range(flat.numel()):
                orig = flat[idx].item()
                flat[idx] = orig + eps
                up = loss_value().item()
                flat[idx] = orig - eps
                down = loss_value().item()
                flat[idx] = orig
                fd.view(-1)[idx] = (up - down) / (2 * eps)
            rel = (analytic - fd).norm() / max(analytic.norm().item(), 1e-12)
            assert rel < 1e-4


class TestResidualAndScore:
    def test_residual_identities(self):
        a = torch.tensor([[1.0, 2.0]])
        b = torch.tensor([[3.0, 4.0]])
        assert torch.equal(combine_residual(torch.zeros_like(a), a), a)
        assert torch.equal(combine_residual(a, torch.zeros_like(a)), a)
        assert torch.equal(combine_residual(a, b), torch.tensor([[4.0, 6.0]]))

    def test_residual_shape_mismatch(self):
        with pytest.raises(InternalError):
            combine_residual(torch.zeros(2, 3), torch.zeros(2, 4))

    def test_score_cases(self):
        assert score(torch.tensor([1.0, 0.0]), torch.tensor([0.0, 1.0])).item() == 0.0
        u = torch.tensor([1.0, 0.0])
        assert score(u, u).item() == 1.0
        got = score(torch.tensor([1.0, 2.0, 3.0]), torch.tensor([4.0, 5.0, 6.0]))
        assert got.item() == 32.0

    def test_score_row_equals_matvec(self):
        z_u = torch.randn(6, dtype=torch.float64)
        z_i = torch.randn(9, 6, dtype=torch.float64)
        per_entry = torch.stack([score(z_u, z_i[j]) for j in range(9)])
        assert torch.allclose(per_entry, z_i @ z_u)


class TestNoDeadParameters:
    def test_all_parameters_receive_gradient_under_total_loss(self):
        """Smoke batch: every trainable tensor gets a gradient, except the
        cross-attention query/key maps whose single-token softmax is constant."""
        from synth import planted_training_data
        from fusionrec.model.network import GraphInputs
        from fusionrec.model.losses import bpr_loss, redundancy_loss, synergy_loss

        data = planted_training_data(n_users=12, n_items=18, n_blocks=6, per_user=3,
                                     d_feat=7, seed=0).with_graphs(3)
        inputs = GraphInputs.build(
            data.bipartite, data.item_graph, data.user_graph,
            data.visual.matrix, data.textual.matrix, dtype=torch.float64,
        )
        net = RecommenderNetwork(12, 18, 7, 7, embedding_dim=8, attention_heads=2,
                                 dtype=torch.float64, seed=1)
        out = net(inputs)
        users = torch.arange(12)
        pos = torch.arange(12) % 18
        neg = (torch.arange(12) + 9) % 18
        l_rec = bpr_loss(score(out.z_u[users], out.z_i[pos]),
                         score(out.z_u[users], out.z_i[neg]))
        fi = out.item_fusion
        loss = l_rec + 0.1 * (
            synergy_loss(fi.h_vt, fi.h_tv, 0.2)
            + redundancy_loss(fi.h, fi.h_v, fi.h_t, 0.2)
        )
        loss.backward()
        dead_ok = {"fusion.cross_vt.q_proj", "fusion.cross_vt.k_proj",
                   "fusion.cross_tv.q_proj", "fusion.cross_tv.k_proj"}
        for name, param in net.named_parameters():
            assert param.grad is not None, name
            prefix = name.rsplit(".", 1)[0]
            if prefix in dead_ok:
                assert torch.allclose(param.grad, torch.zeros_like(param.grad)), name
            else:
                assert param.grad.abs().max() > 0, f"no gradient reached {name}"

"""Sparse graph propagation primitives.

Bipartite propagation alternates user/item neighborhood averaging and sums
all layer outputs (layer 0 included). Homogeneous propagation applies the
weighted adjacency repeatedly and returns the final layer only.
"""

import warnings

import torch

from ..errors import InternalError
from ..graphs import SparseGraph


def graph_to_sparse(graph: SparseGraph, dtype=torch.float32, transpose=False) -> torch.Tensor:
    """Convert an edge list to a coalesced torch sparse COO matrix."""
    src = torch.from_numpy(graph.src)
    dst = torch.from_numpy(graph.dst)
    weight = torch.from_numpy(graph.weight).to(dtype)
    if transpose:
        indices = torch.stack([dst, src])
        shape = (graph.n_dst, graph.n_src)
    else:
        indices = torch.stack([src, dst])
        shape = (graph.n_src, graph.n_dst)
    with warnings.catch_warnings():
        # torch notes once that sparse invariant checks default to off
        warnings.filterwarnings("ignore", message="Sparse invariant checks")
        return torch.sparse_coo_tensor(indices, weight, shape).coalesce()


def propagate_bipartite(r_hat: torch.Tensor, r_hat_t: torch.Tensor,
                        u0: torch.Tensor, i0: torch.Tensor, layers: int):
    """Run ``layers`` rounds of alternating propagation; return layer sums.

    r_hat is the normalized user-by-item matrix, r_hat_t its transpose.
    No nonlinearities and no per-layer weights; layers=0 returns the inputs.
    """
    if layers < 0:
        raise InternalError(f"layer count must be >= 0, got {layers}")
    u_sum, i_sum = u0, i0
    u_prev, i_prev = u0, i0
    for _ in range(layers):
        u_next = torch.sparse.mm(r_hat, i_prev)
        i_next = torch.sparse.mm(r_hat_t, u_prev)
        u_sum = u_sum + u_next
        i_sum = i_sum + i_next
        u_prev, i_prev = u_next, i_next
    return u_sum, i_sum


def propagate_homogeneous(adj: torch.Tensor, x0: torch.Tensor, layers: int) -> torch.Tensor:
    """Apply the weighted adjacency ``layers`` times; return the last layer."""
    if layers < 0:
        raise InternalError(f"layer count must be >= 0, got {layers}")
    x = x0
    for _ in range(layers):
        x = torch.sparse.mm(adj, x)
    return x

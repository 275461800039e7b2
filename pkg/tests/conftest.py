import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fusionrec.corpus import InteractionSet


def make_interactions(pairs):
    """Build an InteractionSet from (user_key, item_key) tuples."""
    users = sorted({u for u, _ in pairs})
    items = sorted({i for _, i in pairs})
    uidx = {u: n for n, u in enumerate(users)}
    iidx = {i: n for n, i in enumerate(items)}
    arr = np.asarray(sorted({(uidx[u], iidx[i]) for u, i in pairs}), dtype=np.int64)
    return InteractionSet(tuple(users), tuple(items), arr.reshape(-1, 2))


@pytest.fixture
def tiny_interactions():
    return make_interactions([("a", "X"), ("a", "Y"), ("b", "X")])

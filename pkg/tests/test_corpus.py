import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_interactions
from fusionrec.corpus import (
    InteractionSet,
    apply_kcore,
    load_interactions,
    load_metadata,
    read_split,
    split,
    write_split,
)
from fusionrec.errors import ConfigError, DataError


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


class TestLoadInteractions:
    def test_three_lines(self, tmp_path):
        path = write_lines(tmp_path / "x.csv", ["a,X", "a,Y", "b,X"])
        s = load_interactions(path)
        assert s.n_users == 2
        assert s.n_items == 2
        assert s.n_pairs == 3

    def test_duplicates_collapse(self, tmp_path):
        path = write_lines(tmp_path / "x.csv", ["a,X", "a,X"])
        s = load_interactions(path)
        assert s.n_pairs == 1

    def test_malformed_line_names_line_number(self, tmp_path):
        lines = [f"u{i},i{i}" for i in range(10)]
        lines[6] = "brokenline"
        path = write_lines(tmp_path / "x.csv", lines)
        with pytest.raises(DataError, match="line 7"):
            load_interactions(path)

    def test_empty_file_errors(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("", encoding="utf-8")
        with pytest.raises(DataError, match="empty"):
            load_interactions(path)

    def test_tab_delimiter_and_extra_columns(self, tmp_path):
        path = write_lines(tmp_path / "x.tsv", ["a\tX\t5\t123", "b\tY\t4\t456"])
        s = load_interactions(path)
        assert s.n_pairs == 2

    def test_header_row_skipped(self, tmp_path):
        path = write_lines(tmp_path / "x.csv", ["user,item", "a,X"])
        s = load_interactions(path)
        assert s.n_pairs == 1

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            load_interactions(tmp_path / "nope.csv")

    def test_vocabulary_is_dense_and_sorted(self, tmp_path):
        path = write_lines(tmp_path / "x.csv", ["z,Q", "a,P", "m,R"])
        s = load_interactions(path)
        assert s.user_ids == ("a", "m", "z")
        assert s.pairs[:, 0].max() == s.n_users - 1
        assert s.pairs[:, 1].max() == s.n_items - 1


class TestKCore:
    def test_star_graph_k2_empties(self):
        s = make_interactions([("u", f"i{k}") for k in range(5)])
        with pytest.raises(DataError, match="peeling"):
            apply_kcore(s, 2)

    def test_complete_bipartite_unchanged(self):
        s = make_interactions(
            [(f"u{a}", f"i{b}") for a in range(5) for b in range(5)]
        )
        out = apply_kcore(s, 5)
        assert out.n_pairs == 25
        assert out.user_ids == s.user_ids

    def test_k1_is_identity_without_isolated_nodes(self):
        s = make_interactions([("a", "X"), ("b", "Y"), ("c", "X")])
        out = apply_kcore(s, 1)
        assert np.array_equal(out.pairs, s.pairs)

    def test_cascade_peeling(self):
        # u0 holds 2 items; peeling i2 (degree 1) drops u0 below 2, then i1 loses u0.
        pairs = [("u0", "i1"), ("u0", "i2")]
        pairs += [(f"u{k}", "i1") for k in range(1, 3)]
        pairs += [(f"v{k}", "i3") for k in range(1, 3)]
        pairs += [(f"v{k}", "i4") for k in range(1, 3)]
        s = make_interactions(pairs)
        out = apply_kcore(s, 2)
        assert "u0" not in out.user_ids
        assert "i2" not in out.item_ids
        assert set(out.item_ids) == {"i3", "i4"}

    def test_reindex_is_dense(self):
        pairs = [(f"u{a}", f"i{b}") for a in range(4) for b in range(4)]
        pairs.append(("lonely", "solo"))
        s = make_interactions(pairs)
        out = apply_kcore(s, 2)
        assert out.pairs[:, 0].max() == out.n_users - 1
        assert out.pairs[:, 1].max() == out.n_items - 1
        assert "lonely" not in out.user_ids

    def test_bad_k(self):
        s = make_interactions([("a", "X")])
        with pytest.raises(ConfigError):
            apply_kcore(s, 0)

    @given(st.integers(0, 2**31 - 1), st.integers(1, 3))
    @settings(max_examples=30, deadline=None)
    def test_kcore_is_fixpoint(self, seed, k):
        rng = np.random.default_rng(seed)
        pairs = {
            (f"u{int(rng.integers(0, 8))}", f"i{int(rng.integers(0, 8))}")
            for _ in range(rng.integers(1, 40))
        }
        s = make_interactions(sorted(pairs))
        try:
            once = apply_kcore(s, k)
        except DataError:
            return
        twice = apply_kcore(once, k)
        assert once.user_ids == twice.user_ids
        assert once.item_ids == twice.item_ids
        assert np.array_equal(once.pairs, twice.pairs)
        assert once.user_degrees().min() >= k
        assert once.item_degrees().min() >= k


class TestSplit:
    def test_user_with_ten(self):
        s = make_interactions([("u", f"i{k}") for k in range(10)])
        b = split(s, (0.8, 0.1, 0.1), seed=7)
        assert b.train.n_pairs == 8
        assert b.validation.n_pairs == 1
        assert b.test.n_pairs == 1

    def test_user_with_five_donates_one_test_item(self):
        s = make_interactions([("u", f"i{k}") for k in range(5)])
        b = split(s, (0.8, 0.1, 0.1), seed=7)
        assert b.train.n_pairs == 4
        assert b.validation.n_pairs == 0
        assert b.test.n_pairs == 1

    def test_same_seed_identical(self):
        s = make_interactions([(f"u{a}", f"i{b}") for a in range(6) for b in range(7)])
        b1 = split(s, (0.8, 0.1, 0.1), seed=3)
        b2 = split(s, (0.8, 0.1, 0.1), seed=3)
        for part in ("train", "validation", "test"):
            assert np.array_equal(getattr(b1, part).pairs, getattr(b2, part).pairs)

    def test_different_seed_differs(self):
        s = make_interactions([(f"u{a}", f"i{b}") for a in range(6) for b in range(9)])
        b1 = split(s, seed=1)
        b2 = split(s, seed=2)
        assert not np.array_equal(b1.test.pairs, b2.test.pairs)

    def test_bad_ratios(self):
        s = make_interactions([("u", "i")])
        with pytest.raises(ConfigError, match="sum to 1"):
            split(s, (0.8, 0.1, 0.2), seed=0)

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_views_partition_each_user(self, seed):
        rng = np.random.default_rng(seed)
        pairs = set()
        for u in range(rng.integers(1, 6)):
            n = int(rng.integers(1, 12))
            items = rng.choice(20, size=min(n, 20), replace=False)
            pairs.update((f"u{u}", f"i{int(i)}") for i in items)
        s = make_interactions(sorted(pairs))
        b = split(s, seed=seed % 100)
        train, val, test = b.train.pair_set(), b.validation.pair_set(), b.test.pair_set()
        assert train | val | test == s.pair_set()
        assert not (train & val) and not (train & test) and not (val & test)
        # every user with >= 5 interactions must keep one test item
        for u in range(s.n_users):
            if len(s.items_of(u)) >= 5:
                assert any(pu == u for pu, _ in test)


class TestMetadata:
    def test_full_coverage(self, tmp_path, tiny_interactions):
        lines = [
            '{"item": "X", "title": "x thing", "image": "x.jpg"}',
            '{"item": "Y", "title": "y thing", "image": "y.jpg"}',
        ]
        path = write_lines(tmp_path / "meta.jsonl", lines)
        table = load_metadata(path, tiny_interactions)
        assert table.title_coverage == 1.0
        assert table.image_coverage == 1.0

    def test_missing_image_flagged_for_exact_index(self, tmp_path, tiny_interactions):
        lines = [
            '{"item": "X", "title": "x thing"}',
            '{"item": "Y", "title": "y thing", "image": "y.jpg"}',
        ]
        path = write_lines(tmp_path / "meta.jsonl", lines)
        table = load_metadata(path, tiny_interactions)
        x_idx = tiny_interactions.item_ids.index("X")
        y_idx = tiny_interactions.item_ids.index("Y")
        assert not table.has_image(x_idx)
        assert table.has_image(y_idx)

    def test_orphan_rows_counted(self, tmp_path, tiny_interactions):
        lines = [
            '{"item": "X", "title": "x"}',
            '{"item": "UNKNOWN", "title": "?"}',
        ]
        path = write_lines(tmp_path / "meta.jsonl", lines)
        table = load_metadata(path, tiny_interactions)
        assert table.orphan_rows == 1

    def test_absent_items_get_empty_fields(self, tmp_path, tiny_interactions):
        path = write_lines(tmp_path / "meta.jsonl", ['{"item": "X", "title": "x"}'])
        table = load_metadata(path, tiny_interactions)
        y_idx = tiny_interactions.item_ids.index("Y")
        assert table.titles[y_idx] == ""
        assert not table.has_image(y_idx)


class TestSplitManifest:
    def test_round_trip(self, tmp_path):
        s = make_interactions([(f"u{a}", f"i{b}") for a in range(4) for b in range(8)])
        bundle = split(s, seed=11)
        write_split(bundle, tmp_path / "split")
        loaded = read_split(tmp_path / "split")
        assert loaded.fingerprint() == bundle.fingerprint()
        assert np.array_equal(loaded.train.pairs, bundle.train.pairs)

    def test_corrupt_manifest_detected(self, tmp_path):
        s = make_interactions([(f"u{a}", f"i{b}") for a in range(4) for b in range(8)])
        write_split(split(s, seed=1), tmp_path / "split")
        train_path = tmp_path / "split" / "train.tsv"
        lines = train_path.read_text().splitlines()
        train_path.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(DataError, match="fingerprint"):
            read_split(tmp_path / "split")

    def test_split_independent_of_file_order(self, tmp_path):
        lines = [f"u{a},i{b}" for a in range(5) for b in range(7)]
        write_lines(tmp_path / "fwd.csv", lines)
        write_lines(tmp_path / "rev.csv", lines[::-1])
        b1 = split(load_interactions(tmp_path / "fwd.csv"), seed=5)
        b2 = split(load_interactions(tmp_path / "rev.csv"), seed=5)
        assert b1.fingerprint() == b2.fingerprint()

    def test_byte_identical_rewrites(self, tmp_path):
        s = make_interactions([(f"u{a}", f"i{b}") for a in range(4) for b in range(8)])
        bundle = split(s, seed=11)
        write_split(bundle, tmp_path / "a")
        write_split(bundle, tmp_path / "b")
        for name in ("train.tsv", "validation.tsv", "test.tsv", "split.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

"""Interaction corpus handling: ingest, k-core filtering, train/val/test splits.

Interactions are implicit feedback: any recorded (user, item) event counts as
a positive, ratings are binarized away. Vocabularies are sorted
lexicographically so indices do not depend on record order in the source file.
"""

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .fingerprint import sha256_hex

_DELIMITERS = (",", "\t")


@dataclass(frozen=True)
class InteractionSet:
    """Deduplicated user-item pairs over dense index vocabularies."""

    user_ids: tuple
    item_ids: tuple
    pairs: np.ndarray  # (n, 2) int64, unique, sorted by (user, item)

    def __post_init__(self):
        pairs = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        order = np.lexsort((pairs[:, 1], pairs[:, 0]))
        object.__setattr__(self, "pairs", pairs[order])

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    @property
    def n_pairs(self) -> int:
        return self.pairs.shape[0]

    def user_degrees(self) -> np.ndarray:
        return np.bincount(self.pairs[:, 0], minlength=self.n_users)

    def item_degrees(self) -> np.ndarray:
        return np.bincount(self.pairs[:, 1], minlength=self.n_items)

    def items_of(self, u: int) -> np.ndarray:
        """Sorted item indices this user interacted with."""
        rows = self.pairs[self.pairs[:, 0] == u]
        return rows[:, 1]

    def users_of(self, i: int) -> np.ndarray:
        rows = self.pairs[self.pairs[:, 1] == i]
        return rows[:, 0]

    def neighbor_lists(self):
        """(user -> item array, item -> user array) adjacency lists."""
        user_items = [[] for _ in range(self.n_users)]
        item_users = [[] for _ in range(self.n_items)]
        for u, i in self.pairs:
            user_items[u].append(i)
            item_users[i].append(u)
        return (
            [np.asarray(l, dtype=np.int64) for l in user_items],
            [np.asarray(l, dtype=np.int64) for l in item_users],
        )

    def pair_set(self) -> set:
        return {(int(u), int(i)) for u, i in self.pairs}

    def fingerprint(self) -> str:
        return sha256_hex(list(self.user_ids), list(self.item_ids), self.pairs)


@dataclass(frozen=True)
class SplitBundle:
    """Disjoint train/validation/test views over one shared vocabulary."""

    train: InteractionSet
    validation: InteractionSet
    test: InteractionSet
    seed: int

    def __post_init__(self):
        vocab = (self.train.user_ids, self.train.item_ids)
        for part in (self.validation, self.test):
            if (part.user_ids, part.item_ids) != vocab:
                raise DataError("split views must share one vocabulary")

    @property
    def n_users(self) -> int:
        return self.train.n_users

    @property
    def n_items(self) -> int:
        return self.train.n_items

    def fingerprint(self) -> str:
        return sha256_hex(
            self.train.fingerprint(),
            self.validation.fingerprint(),
            self.test.fingerprint(),
            {"seed": self.seed},
        )


@dataclass
class MetadataTable:
    """Per-item text fields and image references, aligned to the item vocabulary."""

    item_ids: tuple
    titles: list
    brands: list
    descriptions: list
    categories: list
    image_refs: list  # str path/URL or None when absent
    orphan_rows: int = 0

    def __len__(self):
        return len(self.item_ids)

    @property
    def title_coverage(self) -> float:
        if not self.titles:
            return 0.0
        return sum(1 for t in self.titles if t) / len(self.titles)

    @property
    def image_coverage(self) -> float:
        if not self.image_refs:
            return 0.0
        return sum(1 for r in self.image_refs if r) / len(self.image_refs)

    def has_image(self, idx: int) -> bool:
        return self.image_refs[idx] is not None


def _detect_delimiter(line: str) -> str:
    counts = {d: line.count(d) for d in _DELIMITERS}
    best = max(counts, key=counts.get)
    if counts[best] == 0:
        raise DataError("could not detect delimiter (expected comma or tab)")
    return best


def load_interactions(path) -> InteractionSet:
    """Parse a delimited interactions file into a dense-index InteractionSet.

    Columns: user,item[,rating,timestamp]. Ratings/timestamps are ignored;
    every record is a positive. Duplicate (user, item) records collapse.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"interactions file not found: {path}")
    raw_pairs = []
    delimiter = None
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            if delimiter is None:
                delimiter = _detect_delimiter(line)
                first = [c.strip() for c in line.split(delimiter)]
                if first[:2] == ["user", "item"]:
                    continue  # header row
            fields = line.split(delimiter)
            if len(fields) < 2 or not fields[0].strip() or not fields[1].strip():
                raise DataError(f"{path}: malformed record at line {lineno}: {line!r}")
            raw_pairs.append((fields[0].strip(), fields[1].strip()))
    if not raw_pairs:
        raise DataError(f"{path}: empty corpus (no interaction records)")

    users = sorted({u for u, _ in raw_pairs})
    items = sorted({i for _, i in raw_pairs})
    uidx = {u: n for n, u in enumerate(users)}
    iidx = {i: n for n, i in enumerate(items)}
    pairs = np.asarray(
        sorted({(uidx[u], iidx[i]) for u, i in raw_pairs}), dtype=np.int64
    ).reshape(-1, 2)
    return InteractionSet(tuple(users), tuple(items), pairs)


def apply_kcore(s: InteractionSet, k: int) -> InteractionSet:
    """Iteratively drop users/items with degree < k until a fixpoint, then reindex.

    Raises DataError when the peeling empties the corpus; the message carries
    the number of peeling rounds for diagnostics.
    """
    if k < 1:
        raise ConfigError(f"k-core requires k >= 1, got {k}")
    pairs = s.pairs
    rounds = 0
    while True:
        if pairs.shape[0] == 0:
            raise DataError(
                f"{k}-core filtering removed every interaction after {rounds} "
                f"peeling rounds (started from {s.n_users} users x {s.n_items} "
                f"items, {s.n_pairs} pairs)"
            )
        udeg = np.bincount(pairs[:, 0], minlength=s.n_users)
        ideg = np.bincount(pairs[:, 1], minlength=s.n_items)
        keep = (udeg[pairs[:, 0]] >= k) & (ideg[pairs[:, 1]] >= k)
        if keep.all():
            break
        pairs = pairs[keep]
        rounds += 1

    kept_users = np.unique(pairs[:, 0])
    kept_items = np.unique(pairs[:, 1])
    umap = -np.ones(s.n_users, dtype=np.int64)
    imap = -np.ones(s.n_items, dtype=np.int64)
    umap[kept_users] = np.arange(len(kept_users))
    imap[kept_items] = np.arange(len(kept_items))
    new_pairs = np.stack([umap[pairs[:, 0]], imap[pairs[:, 1]]], axis=1)
    return InteractionSet(
        tuple(s.user_ids[u] for u in kept_users),
        tuple(s.item_ids[i] for i in kept_items),
        new_pairs,
    )


def split(s: InteractionSet, ratios=(0.8, 0.1, 0.1), seed: int = 0) -> SplitBundle:
    """Per-user random split with floor-count val/test and remainder to train.

    Users whose test floor is 0 but who hold >= 5 interactions still donate
    one item to test so every such user has evaluation ground truth. Each
    user's shuffle is seeded by (seed, user index), independent of file order.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ConfigError(f"need three nonnegative ratios, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must sum to 1, got {ratios} (sum {sum(ratios)})")

    train_rows, val_rows, test_rows = [], [], []
    order = np.argsort(s.pairs[:, 0], kind="stable")
    sorted_pairs = s.pairs[order]
    boundaries = np.searchsorted(sorted_pairs[:, 0], np.arange(s.n_users + 1))
    for u in range(s.n_users):
        items = np.sort(sorted_pairs[boundaries[u] : boundaries[u + 1], 1])
        n = len(items)
        if n == 0:
            continue
        rng = np.random.default_rng([seed, u])
        perm = items[rng.permutation(n)]
        # epsilon guards floor against 10 * 0.3 == 2.999... style float error
        n_test = int(np.floor(n * ratios[2] + 1e-9))
        n_val = int(np.floor(n * ratios[1] + 1e-9))
        if n_test == 0 and n >= 5 and ratios[2] > 0:
            n_test = 1
        test_items = perm[:n_test]
        val_items = perm[n_test : n_test + n_val]
        train_items = perm[n_test + n_val :]
        train_rows.extend((u, int(i)) for i in train_items)
        val_rows.extend((u, int(i)) for i in val_items)
        test_rows.extend((u, int(i)) for i in test_items)

    def view(rows):
        arr = np.asarray(rows, dtype=np.int64).reshape(-1, 2)
        return InteractionSet(s.user_ids, s.item_ids, arr)

    return SplitBundle(view(train_rows), view(val_rows), view(test_rows), seed=seed)


_META_FIELDS = ("title", "brand", "description", "category")


def load_metadata(path, s: InteractionSet) -> MetadataTable:
    """Read JSON-lines metadata and align it to the item vocabulary.

    Items absent from the file get empty text fields and no image; rows for
    unknown item keys are counted as orphans and dropped.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"metadata file not found: {path}")
    iidx = {key: n for n, key in enumerate(s.item_ids)}
    fields = {name: [""] * s.n_items for name in _META_FIELDS}
    image_refs = [None] * s.n_items
    orphans = 0
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}: malformed JSON at line {lineno}: {e}") from e
            key = row.get("item")
            if key is None:
                raise DataError(f"{path}: metadata row without 'item' key at line {lineno}")
            idx = iidx.get(str(key))
            if idx is None:
                orphans += 1
                continue
            for name in _META_FIELDS:
                value = row.get(name)
                if value is not None:
                    fields[name][idx] = str(value)
            image = row.get("image")
            if image:
                image_refs[idx] = str(image)
    return MetadataTable(
        item_ids=s.item_ids,
        titles=fields["title"],
        brands=fields["brand"],
        descriptions=fields["description"],
        categories=fields["category"],
        image_refs=image_refs,
        orphan_rows=orphans,
    )


def write_split(bundle: SplitBundle, out_dir) -> dict:
    """Write the three views as TSV plus vocab files and a JSON header."""
    out_dir = Path(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    names = {"train": bundle.train, "validation": bundle.validation, "test": bundle.test}
    for name, part in names.items():
        with open(out_dir / f"{name}.tsv", "w", encoding="utf-8") as f:
            for u, i in part.pairs:
                f.write(f"{part.user_ids[u]}\t{part.item_ids[i]}\n")
    with open(out_dir / "users.txt", "w", encoding="utf-8") as f:
        f.writelines(u + "\n" for u in bundle.train.user_ids)
    with open(out_dir / "items.txt", "w", encoding="utf-8") as f:
        f.writelines(i + "\n" for i in bundle.train.item_ids)
    header = {
        "seed": bundle.seed,
        "n_users": bundle.n_users,
        "n_items": bundle.n_items,
        "counts": {name: int(part.n_pairs) for name, part in names.items()},
        "fingerprint": bundle.fingerprint(),
    }
    with open(out_dir / "split.json", "w", encoding="utf-8") as f:
        json.dump(header, f, indent=2, sort_keys=True)
        f.write("\n")
    return header


def read_split(split_dir) -> SplitBundle:
    split_dir = Path(split_dir)
    header_path = split_dir / "split.json"
    if not header_path.exists():
        raise DataError(f"no split manifest at {split_dir} (run the prepare command)")
    with open(header_path, "r", encoding="utf-8") as f:
        header = json.load(f)
    users = tuple((split_dir / "users.txt").read_text(encoding="utf-8").splitlines())
    items = tuple((split_dir / "items.txt").read_text(encoding="utf-8").splitlines())
    uidx = {u: n for n, u in enumerate(users)}
    iidx = {i: n for n, i in enumerate(items)}

    def read_part(name):
        rows = []
        with open(split_dir / f"{name}.tsv", "r", encoding="utf-8") as f:
            for line in f:
                if not line.strip():
                    continue
                u, i = line.rstrip("\n").split("\t")
                rows.append((uidx[u], iidx[i]))
        arr = np.asarray(rows, dtype=np.int64).reshape(-1, 2)
        return InteractionSet(users, items, arr)

    bundle = SplitBundle(
        read_part("train"), read_part("validation"), read_part("test"), seed=header["seed"]
    )
    if bundle.fingerprint() != header["fingerprint"]:
        raise DataError(f"split manifest at {split_dir} is corrupt (fingerprint mismatch)")
    return bundle

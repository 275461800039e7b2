"""Input validation helpers shared by the estimator layer."""

import numpy as np

from .errors import DataError


def check_training_data(data) -> None:
    """Alignment and finiteness checks before a fit touches anything."""
    bundle = data.bundle
    if bundle.train.n_pairs == 0:
        raise DataError("train split is empty")
    for table in (data.visual, data.textual):
        if table.n_rows != bundle.n_items:
            raise DataError(
                f"{table.modality} table has {table.n_rows} rows for "
                f"{bundle.n_items} items"
            )
        if not np.isfinite(table.matrix).all():
            raise DataError(f"non-finite values in {table.modality} features")


def check_user_indices(users, n_users: int) -> np.ndarray:
    users = np.atleast_1d(np.asarray(users, dtype=np.int64))
    if users.size and (users.min() < 0 or users.max() >= n_users):
        raise DataError(f"user indices out of range [0, {n_users})")
    return users


def check_fitted(estimator, attributes) -> None:
    missing = [a for a in attributes if not hasattr(estimator, a)]
    if missing:
        raise DataError(
            f"{type(estimator).__name__} is not fitted (missing {', '.join(missing)}); "
            "call fit() first"
        )

import numpy as np
import pytest

from somalloc.dataset import CategoricalTable, ContinuousTable, Dataset, Schema


@pytest.fixture
def housing_schema():
    return Schema(
        continuous_names=("food", "housing", "leisure"),
        categorical_vars=(
            ("tenure", ("Owner", "Tenant")),
            ("town", ("Small", "Medium", "Large")),
        ),
        compositional=True,
    )


def make_dataset(values, observed, codes, schema=None, compositional=True):
    values = np.asarray(values, dtype=float)
    if observed is None:
        observed = np.ones_like(values, dtype=bool)
    codes = np.asarray(codes, dtype=np.int64)
    if schema is None:
        p, l = values.shape[1], codes.shape[1]
        schema = Schema(
            continuous_names=tuple(f"c{j}" for j in range(p)),
            categorical_vars=tuple(
                (f"v{j}", tuple(f"m{i}" for i in range(int(codes[:, j].max()) + 2)))
                for j in range(l)
            ),
            compositional=compositional,
        )
    return Dataset(schema, ContinuousTable(values, observed), CategoricalTable(codes))

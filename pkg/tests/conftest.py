import numpy as np
import pytest

from treeimpute.datamodel import CONTINUOUS, Column, DataMatrix, NOMINAL, ORDINAL


@pytest.fixture
def mixed_matrix():
    schema = (
        Column("age", CONTINUOUS),
        Column("color", NOMINAL, ("red", "green", "blue")),
        Column("grade", ORDINAL, ("low", "mid", "high")),
    )
    values = np.array([
        [1.5, 0, 2],
        [2.5, 1, 0],
        [np.nan, 2, 1],
        [4.0, np.nan, np.nan],
    ])
    return DataMatrix(schema, values)


def make_continuous(values):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    schema = tuple(Column(f"c{j}", CONTINUOUS) for j in range(values.shape[1]))
    return DataMatrix(schema, values)

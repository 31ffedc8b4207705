import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from humask.errors import DivisibilityError, ShapeError
from humask.partition import (
    GridPlan,
    blocks_to_array,
    extract,
    extract_all,
    pad_to_divisible,
    plan_grid,
    reassemble,
)
from humask.volume import Volume3D


def test_flat_index_layout():
    g = plan_grid((8, 12, 20), (4, 4, 4))
    assert g.counts == (2, 3, 5) and g.P == 30
    assert g.flat_index(1, 2, 3) == (1 * 3 + 2) * 5 + 3
    assert g.grid_index(28) == (1, 2, 3)
    assert g.origin(28) == (4, 8, 12)


def test_default_crop_grid():
    g = plan_grid((96, 96, 96), (16, 16, 16))
    assert g.counts == (6, 6, 6) and g.P == 216


def test_divisibility_error_names_nearest_sizes():
    with pytest.raises(DivisibilityError) as err:
        plan_grid((100, 96, 96), (16, 16, 16))
    assert err.value.axis == 1
    assert tuple(err.value.nearest) == (96, 112)
    assert "96" in str(err.value) and "112" in str(err.value)


def test_divisibility_smaller_than_block():
    with pytest.raises(DivisibilityError) as err:
        plan_grid((32, 32, 5), (16, 16, 16))
    assert err.value.axis == 3


@pytest.mark.parametrize("sub", [(0, 4, 4), (4, -1, 4), (4, 4)])
def test_bad_sub(sub):
    with pytest.raises(ValueError):
        plan_grid((8, 8, 8), sub)


def test_extract_contents():
    data = np.arange(4 * 6 * 8, dtype=np.float32).reshape(4, 6, 8)
    v = Volume3D(data)
    g = plan_grid(v.shape, (2, 3, 4))
    for p in range(g.P):
        i, j, k = g.grid_index(p)
        np.testing.assert_array_equal(extract(v, g, p).data, data[2 * i:2 * i + 2, 3 * j:3 * j + 3, 4 * k:4 * k + 4])
    with pytest.raises(IndexError):
        extract(v, g, g.P)
    with pytest.raises(IndexError):
        extract(v, g, -1)


@st.composite
def shape_and_sub(draw):
    sub = tuple(draw(st.integers(1, 8)) for _ in range(3))
    counts = tuple(draw(st.integers(1, max(1, 24 // s))) for s in sub)
    return tuple(s * c for s, c in zip(sub, counts)), sub


@settings(max_examples=80, deadline=None)
@given(shape_and_sub(), st.integers(0, 2**32 - 1))
def test_reassemble_inverts_extract(pair, seed):
    shape, sub = pair
    data = np.random.default_rng(seed).normal(size=shape).astype(np.float32)
    v = Volume3D(data, spacing=(0.5, 1, 2))
    g = plan_grid(shape, sub)
    back = reassemble(g, extract_all(v, g), like=v)
    assert back.data.tobytes() == v.data.tobytes()
    assert back.spacing == v.spacing
    blocks = [extract(v, g, p) for p in range(g.P)]
    assert reassemble(g, blocks).data.tobytes() == v.data.tobytes()
    np.testing.assert_array_equal(blocks_to_array(g, extract_all(v, g)), v.data)


@settings(max_examples=40, deadline=None)
@given(shape_and_sub())
def test_blocks_tile_every_voxel_once(pair):
    shape, sub = pair
    g = plan_grid(shape, sub)
    cover = np.zeros(shape, dtype=int)
    for p in range(g.P):
        cover[g.slices(p)] += 1
    assert np.all(cover == 1)


def test_reassemble_rejects_wrong_inputs():
    v = Volume3D(np.zeros((4, 4, 4)))
    g = plan_grid(v.shape, (2, 2, 2))
    blocks = [extract(v, g, p) for p in range(g.P)]
    with pytest.raises(ShapeError):
        reassemble(g, blocks[:-1])
    with pytest.raises(ShapeError):
        reassemble(g, blocks[1:] + blocks[:1])
    with pytest.raises(ShapeError):
        reassemble(g, np.zeros((8, 2, 2, 3)))


def test_pad_to_divisible():
    v = Volume3D(np.ones((5, 8, 9)))
    padded = pad_to_divisible(v, (4, 4, 4), fill=-1)
    assert padded.shape == (8, 8, 12)
    np.testing.assert_array_equal(padded.data[:5, :, :9], 1)
    assert padded.data[5:].min() == -1 and padded.data[:, :, 9:].max() == -1


def test_grid_plan_dict_round_trip():
    g = plan_grid((16, 8, 24), (8, 8, 8))
    assert GridPlan.from_dict(g.to_dict()) == g

"""Tests for FOGF field files."""

import math

import numpy as np
import pytest

from src.modules.field_handler import HEADER, MAGIC, FieldHandler
from src.modules.spectral_ops import Grid, GridField, VectorGridField, band_limited_field


@pytest.fixture
def handler():
    return FieldHandler()


def test_header_layout(handler, grid1, tmp_path):
    path, error = handler.save_field(band_limited_field(grid1, seed=0), tmp_path / 'u.fogf')
    assert error is None
    raw = (tmp_path / 'u.fogf').read_bytes()
    assert HEADER.itemsize == 24
    assert len(raw) == 24 + 8 * 64
    assert raw[:4] == MAGIC
    assert int.from_bytes(raw[4:8], 'little') == 1
    assert int.from_bytes(raw[8:12], 'little') == 1
    assert int.from_bytes(raw[12:16], 'little') == 64
    assert np.frombuffer(raw[16:24], dtype='<f8')[0] == pytest.approx(2.0 * math.pi)


def test_scalar_and_vector_fields_load_back(handler, grid2, tmp_path):
    u = band_limited_field(grid2, seed=1, max_mode=3)
    v = VectorGridField.from_components([u, u * 2.0])
    handler.save_field(u, tmp_path / 'u.fogf')
    handler.save_field(v, tmp_path / 'v.fogf')

    loaded_u, error = handler.load_field(tmp_path / 'u.fogf')
    assert error is None and isinstance(loaded_u, GridField)
    np.testing.assert_array_equal(loaded_u.samples, u.samples)

    loaded_v, error = handler.load_field(tmp_path / 'v.fogf')
    assert error is None and isinstance(loaded_v, VectorGridField)
    assert loaded_v.grid == grid2
    np.testing.assert_array_equal(loaded_v.samples, v.samples)


def test_one_dimensional_vector_fields_need_the_flag(handler, grid1, tmp_path):
    v = VectorGridField.zeros(grid1)
    handler.save_field(v, tmp_path / 'v.fogf')
    scalar, _ = handler.load_field(tmp_path / 'v.fogf')
    vector, _ = handler.load_field(tmp_path / 'v.fogf', vector=True)
    assert isinstance(scalar, GridField)
    assert isinstance(vector, VectorGridField)


def test_malformed_files_are_reported(handler, grid1, tmp_path):
    (tmp_path / 'short.fogf').write_bytes(b'FOGF')
    _, error = handler.load_field(tmp_path / 'short.fogf')
    assert 'too short' in error

    handler.save_field(GridField.zeros(grid1), tmp_path / 'u.fogf')
    raw = (tmp_path / 'u.fogf').read_bytes()
    (tmp_path / 'magic.fogf').write_bytes(b'XXXX' + raw[4:])
    _, error = handler.load_field(tmp_path / 'magic.fogf')
    assert 'not a FOGF file' in error

    (tmp_path / 'cut.fogf').write_bytes(raw[:-8])
    field, error = handler.load_field(tmp_path / 'cut.fogf')
    assert field is None and 'payload' in error

    _, error = handler.load_field(tmp_path / 'missing.fogf')
    assert error.startswith('Error loading field file')


def test_invalid_grid_in_header(handler, tmp_path):
    header = np.array([(MAGIC, 1, 1, 12, 1.0)], dtype=HEADER)
    (tmp_path / 'grid.fogf').write_bytes(header.tobytes() + np.zeros(12).tobytes())
    field, error = handler.load_field(tmp_path / 'grid.fogf')
    assert field is None and 'power of two' in error


def test_parameters_must_match_the_run_grid(handler, grid1, tmp_path):
    handler.save_field(GridField(grid1, np.full(grid1.shape, 2.0)), tmp_path / 'p.fogf')
    samples, error = handler.load_parameter(tmp_path / 'p.fogf', grid1)
    assert error is None and np.all(samples == 2.0)
    _, error = handler.load_parameter(tmp_path / 'p.fogf', Grid(1, 32, 2.0 * math.pi))
    assert 'differs from run grid' in error


def test_validate_and_describe(handler, grid1, ball1):
    u = GridField.from_function(grid1, np.cos)
    assert handler.validate_field(u, grid1) == (True, None)
    is_valid, error = handler.validate_field(u, grid1, ball1.indicator)
    assert not is_valid and 'outside the mask' in error
    is_valid, _ = handler.validate_field(u, Grid(1, 32, 1.0))
    assert not is_valid

    stats = handler.get_field_statistics(ball1.project(u))
    assert stats['rank'] == 'scalar'
    assert stats['support_cells'] == ball1.cell_count
    assert stats['magnitude']['count'] == 64
    assert stats['magnitude']['max'] == pytest.approx(1.0)

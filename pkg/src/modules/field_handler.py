"""
Field Handler Module

Handles grid-field file loading, saving, validation and statistics.
Supports the FOGF binary layout: a 24-byte little-endian header
(magic "FOGF", version u32, d u32, N u32, L f64) followed by N^d f64
samples in row-major order; vector fields store d consecutive blocks.
"""

from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union
import logging

import numpy as np
import pandas as pd

from src.modules.spectral_ops import Field, Grid, GridField, VectorGridField
from src.utils.errors import FractionalOrliczError

logger = logging.getLogger(__name__)

HEADER = np.dtype([
    ('magic', 'S4'),
    ('version', '<u4'),
    ('d', '<u4'),
    ('n', '<u4'),
    ('length', '<f8'),
])
MAGIC = b'FOGF'
VERSION = 1


class FieldHandler:
    """
    Handles grid-field files.

    Reads and writes FOGF files, checks fields against a grid or a domain
    mask, and summarises their samples.
    """

    SUPPORTED_FORMATS = ['.fogf']

    def __init__(self):
        """Initialize the field handler."""
        pass

    def load_field(self, file_path: Union[str, Path], vector: Optional[bool] = None) -> Tuple[Optional[Field], Optional[str]]:
        """
        Load a FOGF file.

        Args:
            file_path: Path to the file to load
            vector: Force a scalar (False) or vector (True) reading; by
                default a file holding d blocks is read as a vector field

        Returns:
            Tuple of (field, error_message)
        """
        try:
            raw = Path(file_path).read_bytes()
        except OSError as e:
            return None, f"Error loading field file: {e}"
        if len(raw) < HEADER.itemsize:
            return None, f"{file_path}: file too short for a FOGF header"

        header = np.frombuffer(raw[:HEADER.itemsize], dtype=HEADER)[0]
        if header['magic'] != MAGIC:
            return None, f"{file_path}: not a FOGF file"
        if header['version'] != VERSION:
            return None, f"{file_path}: unsupported FOGF version {header['version']}"

        try:
            grid = Grid(int(header['d']), int(header['n']), float(header['length']))
            samples = np.frombuffer(raw[HEADER.itemsize:], dtype='<f8')
            size = grid.n ** grid.d
            blocks, remainder = divmod(samples.size, size)
            if remainder or blocks not in (1, grid.d):
                return None, f"{file_path}: payload holds {samples.size} samples, expected {size} or {grid.d * size}"
            if vector is None:
                vector = blocks == grid.d and grid.d > 1
            if vector:
                if blocks != grid.d:
                    return None, f"{file_path}: expected {grid.d} blocks for a vector field"
                return VectorGridField(grid, samples.reshape((grid.d,) + grid.shape)), None
            if blocks != 1:
                return None, f"{file_path}: expected a single block for a scalar field"
            return GridField(grid, samples.reshape(grid.shape)), None
        except FractionalOrliczError as e:
            return None, f"{file_path}: {e}"

    def save_field(self, field: Field, file_path: Union[str, Path]) -> Tuple[Optional[str], Optional[str]]:
        """
        Write a field as FOGF.

        Args:
            field: Scalar or vector grid field
            file_path: Destination path

        Returns:
            Tuple of (absolute_file_path, error_message)
        """
        try:
            path = Path(file_path)
            path.parent.mkdir(parents=True, exist_ok=True)
            grid = field.grid
            header = np.array([(MAGIC, VERSION, grid.d, grid.n, grid.length)], dtype=HEADER)
            with open(path, 'wb') as f:
                f.write(header.tobytes())
                f.write(np.ascontiguousarray(field.samples, dtype='<f8').tobytes())
            logger.debug("wrote %s", path)
            return str(path.resolve()), None
        except OSError as e:
            return None, f"Error saving field: {e}"

    def load_parameter(self, file_path: Union[str, Path], grid: Grid) -> Tuple[Optional[np.ndarray], Optional[str]]:
        """
        Load a scalar parameter field (an exponent or a weight) for `grid`.

        Returns:
            Tuple of (samples, error_message)
        """
        field, error = self.load_field(file_path, vector=False)
        if error:
            return None, error
        if field.grid != grid:
            return None, f"{file_path}: parameter grid {field.grid} differs from run grid {grid}"
        return np.array(field.samples), None

    def validate_field(self, field: Field, grid: Grid, support: Optional[np.ndarray] = None) -> Tuple[bool, Optional[str]]:
        """
        Validate a field against the run grid and, optionally, a support mask.

        Returns:
            Tuple of (is_valid, error_message)
        """
        if field.grid != grid:
            return False, f"field grid {field.grid} differs from run grid {grid}"
        if support is not None and isinstance(field, GridField):
            outside = np.max(np.abs(np.where(support, 0.0, field.samples)))
            if outside > 0.0:
                return False, f"field does not vanish outside the mask (max {outside:.3e})"
        return True, None

    def get_field_statistics(self, field: Field) -> Dict[str, Any]:
        """
        Calculate basic statistics of a field.

        Returns:
            Dictionary with the grid, sample summary, L² norm and support size
        """
        magnitude = pd.Series(field.magnitude().ravel())
        return {
            'grid': {'d': field.grid.d, 'n': field.grid.n, 'length': field.grid.length},
            'rank': 'vector' if isinstance(field, VectorGridField) else 'scalar',
            'magnitude': magnitude.describe().to_dict(),
            'l2_norm': field.l2_norm(),
            'support_cells': int((magnitude > 0).sum()),
        }

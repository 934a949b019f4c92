"""
Artifact Manager Module

Handles run artifacts: record tables, JSON summaries, baseline files and
grid-field outputs. Artifacts carry no timestamps, so identical runs
produce byte-identical files.
"""

from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union
import json
import logging

import numpy as np
import pandas as pd

from src.modules.field_handler import FieldHandler
from src.modules.spectral_ops import Field
from src.utils.constants import BASELINE_KEYS, BASELINES_VERSION, RECORDS_FILE, SUMMARY_FILE

logger = logging.getLogger(__name__)


def _plain(value: Any) -> Any:
    """JSON-safe copy: numpy scalars to Python numbers, non-finite floats to strings."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return str(value)
    if isinstance(value, Path):
        return str(value)
    return value


class ArtifactManager:
    """
    Manages artifact export.

    Writes records as CSV through pandas, summaries and baselines as sorted
    JSON, and fields in the FOGF layout.
    """

    FLOAT_FORMAT = '%.17g'

    def __init__(self, field_handler: Optional[FieldHandler] = None):
        """Initialize the artifact manager."""
        self.field_handler = field_handler or FieldHandler()

    def save_table(
        self,
        rows: List[Dict[str, Any]],
        output_dir: Union[str, Path],
        filename: str = RECORDS_FILE,
        columns: Optional[List[str]] = None,
    ) -> Tuple[Optional[str], Optional[str]]:
        """
        Save rows as a CSV table.

        Args:
            rows: One dictionary per record
            output_dir: Directory to save the table
            filename: Name of the CSV file
            columns: Column order (defaults to first-seen key order)

        Returns:
            Tuple of (absolute_file_path, error_message)
        """
        try:
            path = Path(output_dir) / filename
            path.parent.mkdir(parents=True, exist_ok=True)
            frame = pd.DataFrame(rows, columns=columns)
            frame.to_csv(path, index=False, float_format=self.FLOAT_FORMAT, lineterminator='\n')
            return str(path.resolve()), None
        except (OSError, ValueError) as e:
            return None, f"Error saving {filename}: {e}"

    def generate_summary(
        self,
        kind: str,
        config_summary: Dict[str, Any],
        outcome_summary: Dict[str, Any],
        passed: bool,
        failures: List[str],
    ) -> Dict[str, Any]:
        """
        Generate the run summary dictionary.

        Args:
            kind: Experiment kind
            config_summary: Output of ConfigManager.get_run_summary
            outcome_summary: Kind-specific results
            passed: Whether every asserted check passed
            failures: Failing-record descriptions

        Returns:
            Dictionary containing the summary
        """
        return {
            'kind': kind,
            'configuration': config_summary,
            'results': outcome_summary,
            'passed': passed,
            'failures': failures,
        }

    def save_summary(self, summary: Dict[str, Any], output_dir: Union[str, Path]) -> Tuple[Optional[str], Optional[str]]:
        """
        Save the summary as JSON.

        Returns:
            Tuple of (file_path, error_message)
        """
        return self._save_json(_plain(summary), Path(output_dir) / SUMMARY_FILE)

    def save_field(self, field: Field, output_dir: Union[str, Path], filename: str) -> Tuple[Optional[str], Optional[str]]:
        return self.field_handler.save_field(field, Path(output_dir) / filename)

    def load_baselines(self, path: Union[str, Path]) -> Tuple[Dict[str, float], Optional[str]]:
        """
        Load captured constants.

        A missing file yields an empty dictionary and no error, so checks
        fall back to finiteness.

        Returns:
            Tuple of (baselines, error_message)
        """
        path = Path(path)
        if not path.exists():
            logger.warning("baseline file %s not found; ratio checks reduce to finiteness", path)
            return {}, None
        try:
            with open(path) as f:
                content = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            return {}, f"Error reading baselines: {e}"
        if content.get('version') != BASELINES_VERSION:
            return {}, f"Unsupported baseline file version: {content.get('version')}"
        return {k: float(v) for k, v in content.get('constants', {}).items()}, None

    def save_baselines(self, observed: Dict[str, float], path: Union[str, Path]) -> Tuple[Optional[str], Optional[str]]:
        """
        Merge observed constants into the versioned baseline file.

        Returns:
            Tuple of (file_path, error_message)
        """
        existing, error = self.load_baselines(path) if Path(path).exists() else ({}, None)
        if error:
            return None, error
        unknown = set(observed) - set(BASELINE_KEYS)
        if unknown:
            return None, f"Unknown baseline keys: {', '.join(sorted(unknown))}"
        existing.update({k: float(v) for k, v in observed.items()})
        return self._save_json({'version': BASELINES_VERSION, 'constants': existing}, Path(path))

    def _save_json(self, content: Dict[str, Any], path: Path) -> Tuple[Optional[str], Optional[str]]:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, 'w') as f:
                json.dump(content, f, indent=2, sort_keys=True)
                f.write('\n')
            return str(path.resolve()), None
        except (OSError, TypeError, ValueError) as e:
            return None, f"Error saving {path.name}: {e}"

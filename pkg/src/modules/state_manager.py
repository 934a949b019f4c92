"""
State Management Module

Manages run state across the stages of one CLI invocation: the experiment
outcome, failures found while writing artifacts and the artifacts written.
"""

from typing import Any, Dict, List, Optional


class RunStateManager:
    """
    Manages state for one experiment run.

    This class stores everything the CLI needs between stages:
    - Experiment outcome and failures
    - Paths of written artifacts
    """

    def __init__(self):
        """Initialize the state manager with empty state."""
        self.reset()

    def reset(self) -> None:
        """Reset all state to initial values."""
        self.outcome: Optional[Any] = None
        self.failures: List[str] = []
        self.artifacts: Dict[str, str] = {}

    def set_outcome(self, outcome: Any) -> None:
        """Store the experiment outcome and its failures."""
        self.outcome = outcome
        self.failures = list(outcome.failures)

    def add_failure(self, message: str) -> None:
        """Record a failure found outside the experiment (e.g. an artifact write)."""
        self.failures.append(message)

    def add_artifact(self, name: str, path: str) -> None:
        """Record the path of a written artifact."""
        self.artifacts[name] = path

    def get_artifacts(self) -> Dict[str, str]:
        """Retrieve written artifact paths."""
        return dict(self.artifacts)

    @property
    def passed(self) -> bool:
        """True when the outcome is complete and nothing failed."""
        return self.outcome is not None and self.outcome.complete and not self.failures

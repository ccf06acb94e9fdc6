"""In-process bindings to the fairbench audit pipeline.

The bindings wrap the core package directly — no logic is reimplemented,
so every number a binding returns is the number the CLI would emit. Core
errors surface as BridgeError with the original error code and message
preserved, and BoundReport.to_json() is byte-identical to the CLI's
report.json for the same config.
"""

from __future__ import annotations

import functools
from collections.abc import Mapping

from fairbench.audit import run_audit as _run_audit
from fairbench.corpus import load_corpus as _load_corpus
from fairbench.errors import FairbenchError
from fairbench.pairs import harden_pairs as _harden_pairs
from fairbench.report import canonical_json

__version__ = "0.1.0"

__all__ = ["BoundReport", "BridgeError", "audit", "harden_pairs", "load_corpus"]


class BridgeError(Exception):
    """Host-side wrapper around the core error taxonomy.

    ``code`` is the core error's stable code (e.g. "DanglingId",
    "InvalidConfig"), ``message`` the original message.
    """

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message


def _wrapping(fn):
    @functools.wraps(fn)
    def wrapped(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except FairbenchError as exc:
            raise BridgeError(exc.code, exc.message or str(exc)) from exc

    return wrapped


class BoundReport(Mapping):
    """Read-only view of an audit report with canonical serialization."""

    def __init__(self, data: dict):
        self._data = data

    def __getitem__(self, key):
        return self._data[key]

    def __iter__(self):
        return iter(self._data)

    def __len__(self):
        return len(self._data)

    def __repr__(self):
        return f"BoundReport(sections={sorted(self._data)})"

    def to_dict(self) -> dict:
        return self._data

    def to_json(self) -> str:
        """The exact bytes the CLI writes to report.json (trailing newline included)."""
        return canonical_json(self._data) + "\n"


@_wrapping
def audit(config: Mapping) -> BoundReport:
    """Run the audit pipeline in-process on an AuditConfig-shaped mapping."""
    return BoundReport(_run_audit(dict(config)))


@_wrapping
def load_corpus(embedding_path, metadata_path):
    """Load and validate a corpus; returns the core Corpus object."""
    return _load_corpus(embedding_path, metadata_path)


@_wrapping
def harden_pairs(corpus, base):
    """Extreme-pair hardening of a base pair set; returns the core PairSet."""
    return _harden_pairs(corpus, base)

"""Run configuration and reproducibility fingerprints."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from typing import Any, Mapping

from .probe import WBE_VARIANT, WindowPolicy
from .solver import SolverConfig

FINGERPRINT_LEN = 16


def _plain(obj: Any) -> Any:
    if dataclasses.is_dataclass(obj):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if hasattr(obj, "value") and hasattr(obj, "name"):  # enum
        return obj.value
    if isinstance(obj, Mapping):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def canonical_json(obj: Any) -> str:
    return json.dumps(_plain(obj), sort_keys=True, separators=(",", ":"))


def fingerprint(obj: Any) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:FINGERPRINT_LEN]


def probe_settings(solver: SolverConfig, policy: WindowPolicy,
                   query_points: tuple[int, ...] = ()) -> dict:
    """Everything that changes what a probed run records."""
    return {"solver": _plain(solver), "window": policy.fingerprint_fields(),
            "query_points": list(query_points), "wbe": WBE_VARIANT}


def probe_fingerprint(solver: SolverConfig, policy: WindowPolicy,
                      query_points: tuple[int, ...] = ()) -> str:
    return fingerprint(probe_settings(solver, policy, query_points))

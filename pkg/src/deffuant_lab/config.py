"""JSON run configuration.

A config is one JSON document with top-level keys ``lattice``, ``dynamics``,
``metric``, ``distribution`` and optionally ``sweep``. Reals may be JSON
numbers or decimal strings; strings also accept ``pi``, ``inf`` and simple
ratios such as ``"1/pi"`` or ``"1/3"``, resolved at parse time.
"""
from __future__ import annotations

import json
from pathlib import Path

from ._reals import ConfigError, format_real, parse_real
from .distributions import DistributionSpec
from .metrics import MetricSpec

__all__ = ["ConfigError", "parse_real", "format_real", "load_config", "parse_config",
           "dump_config"]


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
        doc = json.loads(text)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(doc)


def parse_config(doc: dict) -> dict:
    """Validate a config document and build the typed objects.

    Returns a dict with ``lattice`` (:class:`Lattice`), ``metric``,
    ``distribution``, ``dynamics`` (theta, mu, t_max, seed, record_events)
    and ``sweep`` (raw dict or ``None``).
    """
    from .dynamics import Lattice

    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    try:
        lat = doc.get("lattice", {})
        lattice = Lattice(int(lat.get("n", 100)), lat.get("boundary", "cycle"))
        metric = MetricSpec.from_dict(doc.get("metric", {"kind": "euclidean"}))
        if "distribution" not in doc:
            raise ConfigError("config needs a distribution")
        distribution = DistributionSpec.from_dict(doc["distribution"])
        dyn = doc.get("dynamics", {})
        dynamics = {
            "theta": parse_real(dyn["theta"]) if "theta" in dyn else None,
            "mu": parse_real(dyn.get("mu", 0.5)),
            "t_max": parse_real(dyn.get("t_max", 100)),
            "seed": int(dyn.get("seed", 0)),
            "record_events": bool(dyn.get("record_events", False)),
        }
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{type(exc).__name__}: {exc}") from exc
    sweep = doc.get("sweep")
    if sweep is not None and not isinstance(sweep, dict):
        raise ConfigError("sweep must be an object")
    return {"lattice": lattice, "metric": metric, "distribution": distribution,
            "dynamics": dynamics, "sweep": sweep}


def dump_config(lattice, metric, distribution, dynamics: dict, sweep: dict | None = None) -> dict:
    dyn = {k: (format_real(v) if isinstance(v, float) else v) for k, v in dynamics.items()
           if v is not None}
    doc = {"lattice": {"n": lattice.n, "boundary": lattice.boundary},
           "dynamics": dyn, "metric": metric.to_dict(), "distribution": distribution.to_dict()}
    if sweep is not None:
        doc["sweep"] = sweep
    return doc

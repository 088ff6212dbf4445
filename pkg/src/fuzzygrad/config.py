"""JSON definition files for inference systems.

Layout::

    {
      "name": "...",
      "methods": {"and": "prod", "or": "max", "imp": "min", "agg": "max", "defuzz": "centroid"},
      "variables": [
        {"io": "input", "name": "...", "range": [lo, hi],
         "mfs": [{"label": "Low", "kind": "trapmf", "params": [...], "trainable": false}]}
      ],
      "rules": [[1, 1, 1, 1.0, 1], ...]
    }

``trainable`` is either one boolean for the whole MF or a list with one
flag per parameter.  Trainable parameters load as gradient-tracking leaves.
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import FisError
from .fis import Fis, addmf, addrule, addvar, newfis

__all__ = ["fis_to_dict", "fis_from_dict", "save_fis", "load_fis"]


def _flags(mf) -> bool | list[bool]:
    flags = list(mf.trainable)
    if flags and all(f == flags[0] for f in flags):
        return flags[0]
    return flags


def fis_to_dict(fis: Fis) -> dict:
    variables = []
    for var in (*fis.inputs, *fis.outputs):
        variables.append({
            "io": var.io,
            "name": var.name,
            "range": list(var.range),
            "mfs": [{"label": mf.label, "kind": mf.kind, "params": mf.param_values(),
                     "trainable": _flags(mf)} for mf in var.mfs],
        })
    rules = []
    for rule in fis.rules:
        row = rule.as_row()
        rules.append([int(v) for v in row[:-2]] + [float(row[-2]), int(row[-1])])
    return {
        "name": fis.name,
        "methods": {"and": fis.and_method, "or": fis.or_method, "imp": fis.imp_method,
                    "agg": fis.agg_method, "defuzz": fis.defuzz_method},
        "variables": variables,
        "rules": rules,
    }


def fis_from_dict(doc: dict) -> Fis:
    try:
        methods = doc.get("methods", {})
        fis = newfis(
            doc["name"],
            and_method=methods.get("and", "min"),
            or_method=methods.get("or", "max"),
            imp_method=methods.get("imp", "min"),
            agg_method=methods.get("agg", "max"),
            defuzz_method=methods.get("defuzz", "centroid"),
        )
        counters = {"input": 0, "output": 0}
        for var in doc["variables"]:
            io = var["io"]
            fis = addvar(fis, io, var["name"], var["range"])
            counters[io] += 1
            for mf in var.get("mfs", []):
                fis = addmf(fis, io, counters[io], mf["label"], mf["kind"], mf["params"],
                            trainable=mf.get("trainable", False))
        if doc.get("rules"):
            fis = addrule(fis, doc["rules"])
    except (KeyError, TypeError) as exc:
        raise FisError(f"malformed FIS definition: {exc!r}") from exc
    return fis


def save_fis(fis: Fis, path) -> None:
    Path(path).write_text(json.dumps(fis_to_dict(fis), indent=2) + "\n")


def load_fis(path) -> Fis:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FisError(f"cannot read FIS definition {path}: {exc}") from exc
    return fis_from_dict(doc)

"""Versioned JSON model files.

Floats go through ``json`` unchanged, which writes the shortest repr and so
round-trips exactly. An unbounded quadratic radius is stored as ``"inf"``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (
    LinearModel,
    LossSpec,
    MinimaxError,
    StandardizationRecord,
    TargetEncoding,
    UncertaintyBudget,
)

FORMAT_NAME = "minimaxent-model"
FORMAT_VERSION = 1


class SchemaError(MinimaxError):
    """Model file that is malformed or written by an unknown format version."""


def options_digest(options: dict) -> str:
    blob = json.dumps(options, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class ModelFile:
    model: LinearModel
    feature_names: tuple[str, ...] = ()
    fit_options: dict = field(default_factory=dict)
    seed: int | None = None

    def to_dict(self):
        m = self.model
        rho = m.loss.rho
        loss = {"kind": m.loss.kind}
        if rho is not None:
            loss["rho"] = "inf" if math.isinf(rho) else rho
        std = None
        if m.standardization is not None:
            std = {
                "mean": m.standardization.mean.tolist(),
                "scale": m.standardization.scale.tolist(),
            }
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "loss": loss,
            "encoding": {"kind": m.encoding.kind, "n_classes": m.encoding.n_classes, "t": m.encoding.t},
            "label_names": list(m.label_names),
            "feature_names": list(self.feature_names),
            "intercept": m.intercept,
            "standardization": std,
            "A": {"rows": m.A.shape[0], "cols": m.A.shape[1], "values": m.A.ravel().tolist()},
            "budget": m.budget.to_dict(),
            "fit_options": self.fit_options,
            "fit_options_sha256": options_digest(self.fit_options),
            "seed": self.seed,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n"

    def save(self, path):
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict) or d.get("format") != FORMAT_NAME:
            raise SchemaError("not a minimaxent model file")
        if d.get("version") != FORMAT_VERSION:
            raise SchemaError(f"unsupported model file version {d.get('version')!r} (expected {FORMAT_VERSION})")
        try:
            loss_d = d["loss"]
            rho = loss_d.get("rho")
            if rho == "inf":
                rho = math.inf
            loss = LossSpec(loss_d["kind"], rho)
            enc_d = d["encoding"]
            enc = TargetEncoding(enc_d["kind"], enc_d["n_classes"])
            if enc.t != enc_d["t"]:
                raise SchemaError("encoding dimension t is inconsistent")
            a = d["A"]
            values = np.asarray(a["values"], dtype=float)
            if values.size != a["rows"] * a["cols"]:
                raise SchemaError("A dimensions do not match its values")
            std = d.get("standardization")
            record = None if std is None else StandardizationRecord(std["mean"], std["scale"])
            model = LinearModel(
                A=values.reshape(a["rows"], a["cols"]),
                encoding=enc,
                loss=loss,
                intercept=bool(d["intercept"]),
                standardization=record,
                label_names=tuple(d.get("label_names", ())),
                budget=UncertaintyBudget.from_dict(d.get("budget", {})),
            )
        except SchemaError:
            raise
        except (KeyError, TypeError, ValueError, MinimaxError) as exc:
            raise SchemaError(f"malformed model file: {exc}") from None
        names = tuple(d.get("feature_names", ()))
        if names and len(names) != model.n_features:
            raise SchemaError("feature_names length does not match A")
        opts = d.get("fit_options", {})
        if "fit_options_sha256" in d and d["fit_options_sha256"] != options_digest(opts):
            raise SchemaError("fit options digest mismatch")
        return cls(model, names, opts, d.get("seed"))

    @classmethod
    def load(cls, path):
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: not valid JSON ({exc})") from None
        return cls.from_dict(d)

"""Factor model container, its factor-form inverse and JSON serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import DimensionMismatch, SingularFactorCovariance, ZeroSpecificRisk

SCHEMA = "hetrisk.factor_model/1"


@dataclass(frozen=True)
class FactorModel:
    """Gamma = diag(spec_risk**2) + fac_load @ fac_cov @ fac_load.T.

    ``inv_cov`` is None only for models that are singular by construction
    (a principal-component model with K = M).
    """

    tickers: tuple[str, ...]
    spec_risk: np.ndarray
    fac_load: np.ndarray
    fac_cov: np.ndarray
    cov_mat: np.ndarray
    inv_cov: np.ndarray | None
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def n_tickers(self) -> int:
        return len(self.tickers)

    @property
    def n_factors(self) -> int:
        return self.fac_load.shape[1]

    def recompose(self) -> np.ndarray:
        """Gamma rebuilt from its factor form."""
        load = self.fac_load
        return np.diag(self.spec_risk ** 2) + load @ self.fac_cov @ load.T

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema": SCHEMA,
            "tickers": list(self.tickers),
            "spec_risk": _vector(self.spec_risk),
            "fac_load": _matrix(self.fac_load),
            "fac_cov": _matrix(self.fac_cov),
            "cov_mat": _matrix(self.cov_mat),
            "inv_cov": None if self.inv_cov is None else _matrix(self.inv_cov),
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "FactorModel":
        if doc.get("schema") != SCHEMA:
            raise ValueError(f"unsupported model schema {doc.get('schema')!r}")
        inv = doc.get("inv_cov")
        return cls(
            tickers=tuple(doc["tickers"]),
            spec_risk=np.asarray(doc["spec_risk"], dtype=float),
            fac_load=_unmatrix(doc["fac_load"]),
            fac_cov=_unmatrix(doc["fac_cov"]),
            cov_mat=_unmatrix(doc["cov_mat"]),
            inv_cov=None if inv is None else _unmatrix(inv),
            meta=doc.get("meta", {}),
        )

    @classmethod
    def from_json(cls, text: str) -> "FactorModel":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "FactorModel":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def _vector(x: np.ndarray) -> list[float]:
    return [float(v) for v in np.asarray(x).ravel()]


def _matrix(x: np.ndarray) -> dict[str, Any]:
    x = np.asarray(x, dtype=float)
    return {"rows": int(x.shape[0]), "cols": int(x.shape[1]), "data": _vector(x)}


def _unmatrix(doc: dict[str, Any]) -> np.ndarray:
    data = np.asarray(doc["data"], dtype=float)
    rows, cols = int(doc["rows"]), int(doc["cols"])
    if data.size != rows * cols:
        raise DimensionMismatch(f"matrix payload has {data.size} entries, expected {rows}x{cols}")
    return data.reshape(rows, cols)


def factor_model_inverse(spec_risk, fac_load, fac_cov) -> np.ndarray:
    """Inverse of diag(spec_risk**2) + fac_load @ fac_cov @ fac_load.T.

    Woodbury form Xi^-1 - Xi^-1 Omega Delta^-1 Omega^T Xi^-1 with
    Delta = fac_cov^-1 + Omega^T Xi^-1 Omega.  Delta^-1 is evaluated as
    (I + fac_cov W)^-1 fac_cov, W = Omega^T Xi^-1 Omega, so fac_cov itself
    is never inverted; only K x K systems are solved.
    """
    spec_risk = np.asarray(spec_risk, dtype=float)
    load = np.atleast_2d(np.asarray(fac_load, dtype=float))
    phi = np.atleast_2d(np.asarray(fac_cov, dtype=float))
    n, k = load.shape
    if spec_risk.shape != (n,) or phi.shape != (k, k):
        raise DimensionMismatch(
            f"spec_risk {spec_risk.shape}, fac_load {load.shape}, fac_cov {phi.shape}"
        )
    spec_var = spec_risk ** 2
    if np.any(spec_var <= 0):
        i = int(np.flatnonzero(spec_var <= 0)[0])
        raise ZeroSpecificRisk(f"specific risk of row {i} is zero; apply the singleton fix first")

    scaled = load / spec_var[:, None]  # Xi^-1 Omega
    w = load.T @ scaled
    system = np.eye(k) + phi @ w
    try:
        delta_inv = np.linalg.solve(system, phi)
    except np.linalg.LinAlgError as exc:
        raise SingularFactorCovariance("I + Phi Omega^T Xi^-1 Omega is singular") from exc
    if not np.all(np.isfinite(delta_inv)) or np.linalg.cond(system) > 1e14:
        raise SingularFactorCovariance("factor model is numerically singular")
    inv = np.diag(1.0 / spec_var) - scaled @ delta_inv @ scaled.T
    return 0.5 * (inv + inv.T)

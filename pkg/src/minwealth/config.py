"""JSON problem description: one market, one consumption rule, optional penalty and simulation settings."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

from .model import ConsumptionSpec, MarketParams, validate
from .value import PenaltyFunction
from .verify import SimConfig

_MARKET_KEYS = {"r", "mu", "sigma", "lambda", "rho"}
_CONSUMPTION_KEYS = {"c_bar", "kappa", "rho"}
_TOP_KEYS = {"market", "consumption", "penalty", "sim", "grids", "ruin_level", "fd"}


@dataclass(frozen=True)
class GridSpec:
    lo: float
    hi: float
    n: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
            raise ValueError("grid needs finite lo < hi")
        if self.n < 2:
            raise ValueError("grid needs at least 2 points")

    @classmethod
    def parse(cls, text: str) -> GridSpec:
        try:
            lo, hi, n = text.split(":")
            return cls(float(lo), float(hi), int(n))
        except ValueError as exc:
            raise ValueError(f"grid must look like LO:HI:N, got {text!r}") from exc

    def to_dict(self) -> dict[str, Any]:
        return {"lo": self.lo, "hi": self.hi, "n": self.n}


@dataclass(frozen=True)
class FdSettings:
    w_lo: float = -1.0
    w_hi: float | None = None
    n: int = 16001
    report_lo: float = -1.0
    report_hi: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return {"w_lo": self.w_lo, "w_hi": self.w_hi, "n": self.n, "report_lo": self.report_lo,
                "report_hi": self.report_hi}


@dataclass(frozen=True)
class ProblemConfig:
    market: MarketParams
    consumption: ConsumptionSpec
    penalty: PenaltyFunction | None = None
    sim: SimConfig = field(default_factory=SimConfig)
    grids: dict[str, GridSpec] = field(default_factory=dict)
    ruin_level: float = 0.0
    fd: FdSettings = field(default_factory=FdSettings)

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> ProblemConfig:
        if not isinstance(doc, dict):
            raise ValueError("config must be a JSON object")
        unknown = set(doc) - _TOP_KEYS
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        for key in ("market", "consumption"):
            if key not in doc:
                raise ValueError(f"config is missing the {key!r} section")
        m, c = doc["market"], doc["consumption"]
        missing = _MARKET_KEYS - set(m)
        if missing:
            raise ValueError(f"market section is missing {sorted(missing)}")
        if set(m) - _MARKET_KEYS:
            raise ValueError(f"unknown market keys: {sorted(set(m) - _MARKET_KEYS)}")
        if {"c_bar", "kappa"} - set(c):
            raise ValueError(f"consumption section is missing {sorted({'c_bar', 'kappa'} - set(c))}")
        if set(c) - _CONSUMPTION_KEYS:
            raise ValueError(f"unknown consumption keys: {sorted(set(c) - _CONSUMPTION_KEYS)}")
        market = MarketParams(r=float(m["r"]), mu=float(m["mu"]), sigma=float(m["sigma"]),
                              lam=float(m["lambda"]), rho=float(m["rho"]))
        spec = ConsumptionSpec(c_bar=float(c["c_bar"]), kappa=float(c["kappa"]),
                               rho=float(c.get("rho", m["rho"])))
        validate(market, spec)
        penalty = PenaltyFunction.from_dict(doc["penalty"]) if doc.get("penalty") is not None else None
        sim = SimConfig.from_dict(doc.get("sim") or {})
        grids = {name: GridSpec(float(g["lo"]), float(g["hi"]), int(g["n"]))
                 for name, g in (doc.get("grids") or {}).items()}
        fd = FdSettings(**(doc.get("fd") or {}))
        return cls(market, spec, penalty, sim, grids, float(doc.get("ruin_level", 0.0)), fd)

    @classmethod
    def load(cls, path: str) -> ProblemConfig:
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValueError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)

    def to_dict(self) -> dict[str, Any]:
        m, c = self.market, self.consumption
        return {
            "market": {"r": m.r, "mu": m.mu, "sigma": m.sigma, "lambda": m.lam, "rho": m.rho},
            "consumption": {"c_bar": c.c_bar, "kappa": c.kappa, "rho": c.rho},
            "penalty": None if self.penalty is None else self.penalty.to_dict(),
            "sim": self.sim.to_dict(),
            "grids": {k: g.to_dict() for k, g in sorted(self.grids.items())},
            "ruin_level": self.ruin_level,
            "fd": self.fd.to_dict(),
        }

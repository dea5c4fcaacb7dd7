"""JSON run configuration shared by every CLI subcommand."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .costs import CostModel, cost_from_dict, evaluate_on_grid
from .entropic import SinkhornConfig
from .measures import ProductSpace, marginal_from_dict

DEFAULT_SLACK = 0.3
DEFAULT_WINDOW = (0.02, 0.4)  # relative to the cost scale


@dataclass
class RunConfig:
    marginals: list
    cost: dict
    eps_list: list = field(default_factory=list)
    sinkhorn: dict = field(default_factory=dict)
    slack: float = DEFAULT_SLACK
    eps_window: tuple | None = None
    seed: int = 0
    samples: int = 16
    weight_samples: int = 32
    lp_pivot: str = "bland"

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "marginals" not in known or "cost" not in known:
            raise ValueError("config needs 'marginals' and 'cost'")
        cfg = cls(**known)
        if cfg.eps_window is not None:
            cfg.eps_window = tuple(float(x) for x in cfg.eps_window)
        return cfg

    def sinkhorn_config(self, epsilon: float) -> SinkhornConfig:
        return SinkhornConfig(epsilon=epsilon, **self.sinkhorn)


def load_config(path) -> RunConfig:
    with open(Path(path)) as fh:
        return RunConfig.from_dict(json.load(fh))


@dataclass(frozen=True)
class Problem:
    space: ProductSpace
    cost_model: CostModel
    cost: np.ndarray

    @property
    def cost_scale(self) -> float:
        return float(np.abs(self.cost).max())


def build_problem(cfg: RunConfig) -> Problem:
    space = ProductSpace(tuple(marginal_from_dict(m) for m in cfg.marginals))
    model = cost_from_dict(cfg.cost, space)
    return Problem(space, model, evaluate_on_grid(model, space))

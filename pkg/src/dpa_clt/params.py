"""Model parameters, derived rate constants and analysis windows."""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

from .errors import AlphaGammaSumNotOne, DegenerateCase, NonPositiveParameter, ParameterError

SUM_TOL = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the directed preferential attachment model.

    ``alpha`` is the probability that the new node points *to* an existing
    node chosen by in-degree, ``gamma = 1 - alpha`` the probability that an
    existing node chosen by out-degree points to the new node.  ``lam`` and
    ``mu`` are the in- and out-degree offsets.

    Instances are validated on construction; ``gamma`` is stored as
    ``1 - alpha`` once the sum check has passed.
    """

    alpha: float
    gamma: float
    lam: float
    mu: float
    c1: float = field(init=False, repr=False)
    c2: float = field(init=False, repr=False)

    def __post_init__(self) -> None:
        vals = {"alpha": self.alpha, "gamma": self.gamma, "lambda": self.lam, "mu": self.mu}
        for name, v in vals.items():
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise ParameterError(f"{name} must be a finite number, got {v!r}")
        a, g = float(self.alpha), float(self.gamma)
        if a in (0.0, 1.0) or g in (0.0, 1.0):
            raise DegenerateCase(f"alpha and gamma must lie strictly inside (0, 1): alpha={a}, gamma={g}")
        for name, v in vals.items():
            if v <= 0:
                raise NonPositiveParameter(f"{name} must be > 0, got {v}")
        if a >= 1 or g >= 1:
            raise DegenerateCase(f"alpha and gamma must be < 1: alpha={a}, gamma={g}")
        if abs(a + g - 1.0) > SUM_TOL:
            raise AlphaGammaSumNotOne(f"alpha + gamma = {a + g!r}, expected 1")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "gamma", 1.0 - a)
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "c1", a / (1.0 + self.lam))
        object.__setattr__(self, "c2", (1.0 - a) / (1.0 + self.mu))

    def delta(self, i: int, j: int) -> float:
        """Depletion rate ``c1 (i + lam) + c2 (j + mu)`` of the (i, j) cell."""
        return self.c1 * (i + self.lam) + self.c2 * (j + self.mu)

    def as_dict(self) -> dict[str, float]:
        return {"alpha": self.alpha, "gamma": self.gamma, "lambda": self.lam, "mu": self.mu}


def validate(alpha: float, gamma: float | None, lam: float, mu: float) -> ModelParams:
    """Build validated :class:`ModelParams`; ``gamma=None`` means ``1 - alpha``."""
    if gamma is None:
        gamma = 1.0 - alpha
    return ModelParams(alpha, gamma, lam, mu)


def delta(params: ModelParams, i: int, j: int) -> float:
    return params.delta(i, j)


P_STAR = ModelParams(0.5, 0.5, 1.0, 1.0)


@dataclass(frozen=True)
class IndexWindow:
    """Degree pairs ``0 <= i <= imax, 0 <= j <= jmax`` minus (0, 0), lexicographic."""

    imax: int
    jmax: int

    def __post_init__(self) -> None:
        if self.imax < 0 or self.jmax < 0:
            raise ValueError("window bounds must be nonnegative")
        if self.imax == 0 and self.jmax == 0:
            raise ValueError("window (0, 0) has no coordinates")

    @cached_property
    def coords(self) -> tuple[tuple[int, int], ...]:
        return tuple(
            (i, j) for i in range(self.imax + 1) for j in range(self.jmax + 1) if (i, j) != (0, 0)
        )

    def __len__(self) -> int:
        return (self.imax + 1) * (self.jmax + 1) - 1

    def index(self, i: int, j: int) -> int:
        if not (0 <= i <= self.imax and 0 <= j <= self.jmax) or (i, j) == (0, 0):
            raise KeyError((i, j))
        return i * (self.jmax + 1) + j - 1

    def flat(self, grid) -> "list[float]":
        """Pick window coordinates out of a dense ``grid[i, j]``."""
        return [grid[i, j] for i, j in self.coords]


def parse_pair(text: str) -> tuple[int, int]:
    """Parse ``"I,O"`` into a pair of ints."""
    parts = [p.strip() for p in str(text).split(",")]
    if len(parts) != 2:
        raise ValueError(f"expected 'I,O', got {text!r}")
    return int(parts[0]), int(parts[1])


def read_config(path: str | Path) -> dict[str, str]:
    """Read a ``key = value`` file (``#`` comments allowed) into a dict of strings."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    text = Path(path).read_text(encoding="utf-8")
    cp.read_string("[config]\n" + text)
    return {k.replace("-", "_"): v for k, v in cp["config"].items()}


def params_from_config(path: str | Path) -> ModelParams:
    cfg = read_config(path)
    missing = [k for k in ("alpha", "lambda", "mu") if k not in cfg]
    if missing:
        raise ParameterError(f"config file lacks keys: {', '.join(missing)}")
    gamma = float(cfg["gamma"]) if "gamma" in cfg else None
    return validate(float(cfg["alpha"]), gamma, float(cfg["lambda"]), float(cfg["mu"]))

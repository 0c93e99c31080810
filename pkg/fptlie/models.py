"""Data models for fptlie."""
import math
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_validator
from scipy.integrate import trapezoid
from scipy.interpolate import PchipInterpolator

from .errors import ConfigError, NegativeDensityError, NumericalFailure

# Negative density values above -DENSITY_ROUNDING * max|rho| are rounding noise
DENSITY_ROUNDING = 1e-12
# Trapezoid mass allowed above 1
MASS_TOLERANCE = 1e-6


class Family(str, Enum):
    """Ricatti drift families."""
    F1 = "F1"
    F2 = "F2"
    F3 = "F3"
    F4 = "F4"


class Direction(str, Enum):
    """Crossing direction: down means X <= b, up means X >= b."""
    DOWN = "down"
    UP = "up"

    @property
    def sign(self) -> int:
        return 1 if self is Direction.UP else -1


class BoundaryKind(str, Enum):
    CONSTANT = "constant"
    AFFINE = "affine"
    QUADRATIC = "quadratic"
    SQRT_SHIFT = "sqrt_shift"
    EXP_COMBO = "exp_combo"
    CUSTOM = "custom"


# Short CLI aliases for boundary kinds
BOUNDARY_ALIASES = {
    "const": BoundaryKind.CONSTANT,
    "constant": BoundaryKind.CONSTANT,
    "affine": BoundaryKind.AFFINE,
    "line": BoundaryKind.AFFINE,
    "quadratic": BoundaryKind.QUADRATIC,
    "sqrt": BoundaryKind.SQRT_SHIFT,
    "sqrt_shift": BoundaryKind.SQRT_SHIFT,
    "exp": BoundaryKind.EXP_COMBO,
    "exp_combo": BoundaryKind.EXP_COMBO,
}

# Number of params each closed-form kind expects
BOUNDARY_ARITY = {
    BoundaryKind.CONSTANT: 1,
    BoundaryKind.AFFINE: 2,
    BoundaryKind.QUADRATIC: 3,
    BoundaryKind.SQRT_SHIFT: 2,
    BoundaryKind.EXP_COMBO: 4,
}


class SpecialFunctionResult(BaseModel):
    """Sign and log-magnitude of a special-function value."""
    model_config = ConfigDict(frozen=True)

    sign: int = 1                    # -1, 0 or 1
    log_abs: float = -math.inf
    precision_loss: bool = False     # cancellation beyond six digits

    @classmethod
    def encode(cls, value: float, precision_loss: bool = False) -> "SpecialFunctionResult":
        if value == 0.0:
            return cls(sign=0, log_abs=-math.inf, precision_loss=precision_loss)
        return cls(sign=1 if value > 0 else -1, log_abs=math.log(abs(value)),
                   precision_loss=precision_loss)

    def decode(self) -> float:
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.log_abs)

    @property
    def value(self) -> float:
        """Plain value; overflows to +/-inf only when the magnitude is not representable."""
        try:
            return self.decode()
        except OverflowError:
            return self.sign * math.inf

    @property
    def log_scale(self) -> float:
        return self.log_abs


class DriftSpec(BaseModel):
    """
    Drift from one of the four Ricatti families.

    theta = c1 * (first solution) + c2 * (second solution) of the linear ODE
    theta'' = RHS(x) * theta; the drift is mu = theta'/theta. The domain is
    resolved at construction to the maximal zero-free interval of theta
    around the anchor, and theta is checked positive on a dense grid.
    """
    model_config = ConfigDict(frozen=True)

    family: Family
    A: float = 0.0
    B: float = 0.0
    C: float = 0.0
    D: float = 0.0
    c1: float = 1.0
    c2: float = 0.0
    domain: Optional[Tuple[float, float]] = None
    anchor: Optional[float] = None      # point used to pick the zero-free interval
    label: Optional[str] = None         # builtin name, informational

    def check_family_parameters(self) -> None:
        forbidden = {
            Family.F1: ("A", "D"),
            Family.F2: ("D",),
            Family.F3: ("A", "B"),
            Family.F4: ("B",),
        }[self.family]
        for name in forbidden:
            if getattr(self, name) != 0.0:
                raise ValueError(f"{self.family.value} requires {name} = 0")
        if self.family in (Family.F2, Family.F4) and not self.A > 0:
            raise ValueError(f"{self.family.value} requires A > 0")
        if self.family in (Family.F3, Family.F4) and self.D < -0.25:
            raise ValueError("D < -1/4 gives a complex Bessel index")
        if self.c1 == 0.0 and self.c2 == 0.0:
            raise ValueError("theta coefficients c1, c2 are both zero")
        if self.domain is not None:
            lo, hi = self.domain
            if not lo < hi:
                raise ValueError("domain must be an open interval lo < hi")
            if self.family in (Family.F3, Family.F4) and lo < 0:
                raise ValueError("F3/F4 domains must lie in (0, inf)")

    @model_validator(mode="after")
    def resolve_domain(self) -> "DriftSpec":
        self.check_family_parameters()
        from .services.families import check_positive, resolve_domain
        resolved = resolve_domain(self)
        if resolved != self.domain:
            # frozen model: the resolved domain is written once, during validation
            object.__setattr__(self, "domain", resolved)
        check_positive(self)
        return self

    @property
    def is_experimental(self) -> bool:
        """Airy branch with negative B uses the real cube root."""
        return self.family == Family.F1 and self.B < 0

    def to_config(self) -> Dict[str, Any]:
        lo, hi = self.domain
        return {
            "family": self.family.value,
            "A": self.A, "B": self.B, "C": self.C, "D": self.D,
            "c1": self.c1, "c2": self.c2,
            "domain": [lo, hi],
        }

    @classmethod
    def from_config(cls, config: Dict[str, Any]) -> "DriftSpec":
        data = dict(config)
        if data.get("domain") is not None:
            lo, hi = data["domain"]
            data["domain"] = (
                -math.inf if lo is None else float(lo),
                math.inf if hi is None else float(hi),
            )
        return cls(**data)


class Boundary(BaseModel):
    """
    Smooth time boundary b(t).

    Closed-form kinds are serializable as {kind, params}; custom boundaries are
    either sampled tables (monotone cubic interpolation) or in-memory callables
    produced by symmetry maps.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True)

    kind: BoundaryKind
    params: List[float] = Field(default_factory=list)
    table_t: Optional[List[float]] = None
    table_b: Optional[List[float]] = None
    label: Optional[str] = None

    _fn: Optional[Callable] = PrivateAttr(default=None)
    _dfn: Optional[Callable] = PrivateAttr(default=None)
    _interp: Optional[PchipInterpolator] = PrivateAttr(default=None)

    @model_validator(mode="after")
    def check_params(self) -> "Boundary":
        if self.kind == BoundaryKind.CUSTOM:
            if self.table_t is not None:
                if self.table_b is None or len(self.table_t) != len(self.table_b):
                    raise ValueError("custom table needs matching t and b columns")
                if len(self.table_t) < 2 or np.any(np.diff(self.table_t) <= 0):
                    raise ValueError("custom table times must be strictly increasing")
            return self
        arity = BOUNDARY_ARITY[self.kind]
        if len(self.params) != arity:
            raise ValueError(f"{self.kind.value} boundary needs {arity} params")
        return self

    # Constructors

    @classmethod
    def constant(cls, a: float) -> "Boundary":
        return cls(kind=BoundaryKind.CONSTANT, params=[a])

    @classmethod
    def affine(cls, a: float, b: float) -> "Boundary":
        return cls(kind=BoundaryKind.AFFINE, params=[a, b])

    @classmethod
    def from_callable(cls, fn: Callable, dfn: Optional[Callable] = None,
                      label: str = "mapped") -> "Boundary":
        boundary = cls(kind=BoundaryKind.CUSTOM, label=label)
        boundary._fn = fn
        boundary._dfn = dfn
        return boundary

    @classmethod
    def parse(cls, text: str) -> "Boundary":
        """Parse the CLI form '<kind>:<p1>,<p2>,...', e.g. 'affine:1,0.5'."""
        kind_text, _, rest = text.partition(":")
        kind = BOUNDARY_ALIASES.get(kind_text.strip().lower())
        if kind is None:
            raise ConfigError(f"unknown boundary kind '{kind_text}'")
        try:
            params = [float(v) for v in rest.split(",") if v.strip()]
        except ValueError:
            raise ConfigError(f"boundary params must be numbers: '{rest}'")
        try:
            return cls(kind=kind, params=params)
        except ValueError as exc:
            raise ConfigError(str(exc))

    @classmethod
    def from_config(cls, config: Union[str, Dict[str, Any]]) -> "Boundary":
        if isinstance(config, str):
            return cls.parse(config)
        try:
            return cls(**config)
        except ValueError as exc:
            raise ConfigError(str(exc))

    def to_config(self) -> Dict[str, Any]:
        if self.kind == BoundaryKind.CUSTOM:
            if self.table_t is None:
                return {"kind": "custom", "label": self.label}
            return {"kind": "custom", "table_t": self.table_t, "table_b": self.table_b}
        return {"kind": self.kind.value, "params": list(self.params)}

    # Evaluation

    def _table(self) -> PchipInterpolator:
        if self._interp is None:
            self._interp = PchipInterpolator(self.table_t, self.table_b, extrapolate=True)
        return self._interp

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        p = self.params
        if self.kind == BoundaryKind.CONSTANT:
            out = np.full_like(t, p[0])
        elif self.kind == BoundaryKind.AFFINE:
            out = p[0] + p[1] * t
        elif self.kind == BoundaryKind.QUADRATIC:
            out = p[0] + p[1] * t + p[2] * t ** 2
        elif self.kind == BoundaryKind.SQRT_SHIFT:
            out = p[0] * np.sqrt(t + p[1])
        elif self.kind == BoundaryKind.EXP_COMBO:
            a, alpha, beta, lam = p
            out = a + alpha * np.exp(-lam * t) + beta * np.exp(lam * t)
        elif self.table_t is not None:
            out = self._table()(t)
        else:
            out = np.asarray(self._fn(t), dtype=float)
        return out[()]

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        p = self.params
        if self.kind == BoundaryKind.CONSTANT:
            out = np.zeros_like(t)
        elif self.kind == BoundaryKind.AFFINE:
            out = np.full_like(t, p[1])
        elif self.kind == BoundaryKind.QUADRATIC:
            out = p[1] + 2.0 * p[2] * t
        elif self.kind == BoundaryKind.SQRT_SHIFT:
            out = 0.5 * p[0] / np.sqrt(t + p[1])
        elif self.kind == BoundaryKind.EXP_COMBO:
            a, alpha, beta, lam = p
            out = lam * (beta * np.exp(lam * t) - alpha * np.exp(-lam * t))
        elif self.table_t is not None:
            out = self._table().derivative()(t)
        elif self._dfn is not None:
            out = np.asarray(self._dfn(t), dtype=float)
        else:
            h = 1e-6 * np.maximum(1.0, np.abs(t))
            out = (np.asarray(self._fn(t + h)) - np.asarray(self._fn(t - h))) / (2.0 * h)
        return out[()]


class TimeGrid(BaseModel):
    """Uniform time grid t_min..t_max with n points."""
    t_min: float
    t_max: float
    n: int = 100

    @model_validator(mode="after")
    def check_range(self) -> "TimeGrid":
        if not (0.0 < self.t_min <= self.t_max) or self.n < 1:
            raise ValueError("time grid needs 0 < t_min <= t_max and n >= 1")
        return self

    @classmethod
    def parse(cls, text: str) -> "TimeGrid":
        """Parse 't_min:t_max:n'."""
        try:
            t_min, t_max, n = text.split(":")
            return cls(t_min=float(t_min), t_max=float(t_max), n=int(n))
        except ValueError as exc:
            raise ConfigError(f"time grid must be t_min:t_max:n, got '{text}' ({exc})")

    def points(self) -> np.ndarray:
        return np.linspace(self.t_min, self.t_max, self.n)


class SdeConfig(BaseModel):
    """Unit-diffusion SDE dX = mu(X)dt + dW and its simulation controls."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    drift: Union[DriftSpec, Callable]
    x0: float
    horizon: float
    dt: float = 1e-3
    n_paths: int = 100_000
    seed: int = 20240101
    bridge_correction: bool = True
    workers: int = 1
    block_size: int = 4096

    @model_validator(mode="after")
    def check_steps(self) -> "SdeConfig":
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.horizon < self.dt:
            raise ValueError("horizon must be at least dt")
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        return self

    def digest_payload(self) -> Dict[str, Any]:
        """Reproducibility-relevant fields (workers excluded: results do not depend on it)."""
        if isinstance(self.drift, DriftSpec):
            drift = self.drift.to_config()
        else:
            drift = getattr(self.drift, "__qualname__", repr(self.drift))
        return {
            "drift": drift, "x0": self.x0, "horizon": self.horizon, "dt": self.dt,
            "n_paths": self.n_paths, "seed": self.seed,
            "bridge_correction": self.bridge_correction, "block_size": self.block_size,
        }


class FptSampleSet(BaseModel):
    """Monte Carlo crossing times with censoring and domain-exit accounting."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    crossing_times: np.ndarray
    n_paths: int
    n_censored: int
    n_domain_exit: int = 0
    direction: Direction
    boundary: Boundary
    horizon: float
    x0: float
    config_digest: str

    @model_validator(mode="after")
    def check_counts(self) -> "FptSampleSet":
        if len(self.crossing_times) + self.n_censored + self.n_domain_exit != self.n_paths:
            raise ValueError("crossing, censored and domain-exit counts must add to n_paths")
        return self

    @property
    def n_crossed(self) -> int:
        return len(self.crossing_times)

    @property
    def censored_fraction(self) -> float:
        return (self.n_censored + self.n_domain_exit) / self.n_paths


class FunctionalEstimate(BaseModel):
    """MC estimate of E[h(T)] for a positive decreasing h; censored paths bracket the value."""
    lower: float                     # censored paths contribute 0
    upper: float                     # censored paths contribute h(horizon)
    stderr: float
    n_paths: int

    def z_score(self, value: float) -> float:
        """0 inside [lower, upper], otherwise the signed distance to the nearest bound in standard errors."""
        if self.lower <= value <= self.upper:
            return 0.0
        nearest = self.lower if value < self.lower else self.upper
        scale = self.stderr if self.stderr > 0 else 1.0 / self.n_paths
        return float((value - nearest) / scale)


class DensityCurve(BaseModel):
    """FPT density samples on a time grid."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    t_grid: np.ndarray
    rho: np.ndarray
    x0: float
    boundary: Boundary
    direction: Direction = Direction.DOWN
    meta: Dict[str, Any] = Field(default_factory=dict)   # series diagnostics etc.

    @field_validator("t_grid", "rho", mode="before")
    @classmethod
    def as_array(cls, v):
        return np.atleast_1d(np.asarray(v, dtype=float))

    @model_validator(mode="after")
    def check_shape(self) -> "DensityCurve":
        if self.t_grid.shape != self.rho.shape:
            raise ValueError("t_grid and rho must have the same length")
        if self.t_grid.size > 1 and np.any(np.diff(self.t_grid) <= 0):
            raise ValueError("t_grid must be increasing")
        return self

    @model_validator(mode="after")
    def check_density(self) -> "DensityCurve":
        if not np.all(np.isfinite(self.rho)):
            raise NumericalFailure("density has non-finite values")
        scale = float(np.max(np.abs(self.rho))) if self.rho.size else 0.0
        if np.any(self.rho < -DENSITY_ROUNDING * scale):
            worst = int(np.argmin(self.rho))
            raise NegativeDensityError(f"density negative ({self.rho[worst]:.3g}) at t={self.t_grid[worst]:.6g}")
        if self.total_mass > 1.0 + MASS_TOLERANCE:
            raise NumericalFailure(f"density integrates to {self.total_mass:.8g} > 1 on the grid")
        return self

    @property
    def total_mass(self) -> float:
        """Trapezoid integral of rho over the grid (informational)."""
        if self.t_grid.size < 2:
            return 0.0
        return float(trapezoid(self.rho, self.t_grid))


class Grid(BaseModel):
    """Rectangular (x, t) grid for residual checks."""
    x_lo: float
    x_hi: float
    t_lo: float
    t_hi: float
    nx: int = 41
    nt: int = 21

    @model_validator(mode="after")
    def check_ranges(self) -> "Grid":
        if not (self.x_lo < self.x_hi and self.t_lo < self.t_hi):
            raise ValueError("grid ranges must be increasing")
        if self.nx < 2 or self.nt < 2:
            raise ValueError("grid needs at least 2 points per axis")
        return self

    def axes(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.linspace(self.x_lo, self.x_hi, self.nx), np.linspace(self.t_lo, self.t_hi, self.nt)


class ResidualReport(BaseModel):
    """Normalized FPKE residual of a candidate solution on a grid."""
    max_abs_residual: float
    grid: Grid
    location_of_max: Tuple[float, float]
    scale: float = 1.0                # max |u| on the grid
    label: Optional[str] = None

    def passed(self, tol: float = 1e-4) -> bool:
        return bool(np.isfinite(self.max_abs_residual) and self.max_abs_residual <= tol)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "max_abs_residual": self.max_abs_residual,
            "location_of_max": list(self.location_of_max),
            "scale": self.scale,
            "grid": self.grid.model_dump(),
        }


class Command(str, Enum):
    DENSITY = "density"
    TRANSFER = "transfer"
    SIMULATE = "simulate"
    LAPLACE_CHECK = "laplace-check"
    VERIFY_SYMMETRY = "verify-symmetry"
    REPRODUCE = "reproduce"


class RunConfig(BaseModel):
    """Effective configuration of one CLI run."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    command: Command
    process: Optional[Union[str, DriftSpec]] = None
    boundary: Optional[Boundary] = None
    x0: Optional[float] = None
    t_grid: Optional[TimeGrid] = None
    direction: Optional[Direction] = None
    mc: Dict[str, Any] = Field(default_factory=dict)     # SdeConfig overrides
    output: Optional[str] = None
    horizon: Optional[float] = None                      # MC horizon for laplace-check and reproduce

    # transfer / verify-symmetry
    family: Optional[Family] = None
    index: Optional[int] = None
    variant: Optional[int] = None
    alpha: float = 1.0
    beta: float = 0.0
    eps: float = 0.0
    reduction: bool = False                              # verify the reduction instead of a symmetry
    perturb: float = 0.0                                 # e^{delta x} control on the multiplier

    # laplace-check
    lams: List[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0])

    # reproduce
    target: Optional[str] = None
    target_params: Dict[str, float] = Field(default_factory=dict)

    def to_config(self) -> Dict[str, Any]:
        data = self.model_dump(mode="json", exclude={"process", "boundary"})
        if isinstance(self.process, DriftSpec):
            data["process"] = self.process.to_config()
        else:
            data["process"] = self.process
        data["boundary"] = self.boundary.to_config() if self.boundary is not None else None
        return data

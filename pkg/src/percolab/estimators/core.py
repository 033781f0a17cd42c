"""Estimates, reports, model/event descriptors and regression fits."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache

import numpy as np

from ..gaussian import InvalidParameter, Kernel, make_bargmann_fock_kernel, truncate_kernel


class InvalidData(ValueError):
    pass


# ------------------------------------------------------------------ results
@dataclass
class Estimate:
    mean: float
    stderr: float
    n: int
    seed: int
    params: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "n": self.n, "seed": self.seed,
                "params": self.params}


def _check_n(n: int):
    if int(n) < 1:
        raise InvalidParameter("need at least one replica")


def indicator_estimate(x, seed: int, params: dict | None = None) -> Estimate:
    x = np.asarray(x, dtype=bool)
    _check_n(x.size)
    m = float(np.count_nonzero(x)) / x.size
    return Estimate(m, math.sqrt(m * (1 - m) / x.size), int(x.size), int(seed), params or {})


def mean_estimate(x, seed: int, params: dict | None = None) -> Estimate:
    x = np.asarray(x, dtype=float)
    _check_n(x.size)
    m = float(x.mean())
    se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    return Estimate(m, se, int(x.size), int(seed), params or {})


@dataclass
class Term:
    value: float
    stderr: float = 0.0


def term(e) -> Term:
    if isinstance(e, Term):
        return e
    if isinstance(e, Estimate):
        return Term(e.mean, e.stderr)
    return Term(float(e), 0.0)


@dataclass
class Report:
    check: str
    terms: dict
    verdict: bool
    margin_sigma: float | None
    info: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "check": self.check,
            "terms": {k: {"value": float(t.value), "stderr": float(t.stderr)} for k, t in self.terms.items()},
            "verdict": bool(self.verdict),
            "margin_sigma": None if self.margin_sigma is None else float(self.margin_sigma),
            "info": self.info,
        }


def upper_bound_verdict(lhs: Term, rhs: Term, k: float = 3.0) -> tuple[bool, float | None]:
    """lhs <= rhs unless the gap exceeds k combined standard errors."""
    sig = math.hypot(lhs.stderr, rhs.stderr)
    gap = rhs.value - lhs.value
    if sig == 0:
        return gap >= -1e-12, None
    return gap >= -k * sig, gap / sig


def ratio_term(num: Term, den: Term) -> Term:
    """num / den with first-order error propagation (independent terms)."""
    if den.value == 0:
        return Term(math.inf if num.value > 0 else 0.0, 0.0)
    v = num.value / den.value
    rel = math.hypot(num.stderr / num.value if num.value else 0.0, den.stderr / den.value)
    return Term(v, abs(v) * rel if num.value else num.stderr / abs(den.value))


# -------------------------------------------------------------- descriptors
@dataclass(frozen=True)
class EventSpec:
    """Event descriptor.

    kinds: one_arm (R; Gaussian also r), two_arm (R; r), crossing (R, k),
    rect (a columns x b rows, d = 2 Bernoulli), two_point (v; box).
    """

    kind: str
    R: float | None = None
    k: float = 1.0
    a: int | None = None
    b: int | None = None
    v: tuple | None = None
    r: float = 1.0
    box: int | None = None

    KINDS = ("one_arm", "two_arm", "crossing", "rect", "two_point")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise InvalidParameter(f"unknown event {self.kind!r}")
        if self.kind in ("one_arm", "two_arm", "crossing") and (self.R is None or self.R < 0):
            raise InvalidParameter(f"{self.kind} needs R >= 0")
        if self.kind == "rect" and (not self.a or not self.b or self.a < 1 or self.b < 1):
            raise InvalidParameter("rect needs a, b >= 1")
        if self.kind == "two_point" and self.v is None:
            raise InvalidParameter("two_point needs v")

    @classmethod
    def from_dict(cls, d: dict) -> "EventSpec":
        d = dict(d)
        kind = d.pop("event", d.pop("kind", None))
        allowed = {f.name for f in fields(cls)} - {"kind"}
        bad = set(d) - allowed
        if bad:
            raise InvalidParameter(f"unknown event keys {sorted(bad)}")
        if "v" in d and d["v"] is not None:
            d["v"] = tuple(int(x) for x in d["v"])
        return cls(kind, **d)

    def label(self) -> str:
        if self.kind == "rect":
            return f"rect({self.a}x{self.b})"
        if self.kind == "two_point":
            return f"two_point{tuple(self.v)}"
        if self.kind == "crossing":
            return f"crossing(k={self.k:g})"
        return self.kind


@dataclass(frozen=True)
class BernoulliModel:
    p: float
    d: int = 2

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise InvalidParameter("p must lie in [0, 1]")
        if self.d < 2:
            raise InvalidParameter("d >= 2")

    @property
    def name(self) -> str:
        return "bernoulli"

    @property
    def param(self) -> float:
        return self.p

    def at(self, p: float) -> "BernoulliModel":
        return BernoulliModel(p, self.d)


@dataclass(frozen=True)
class GaussianModel:
    """Excursion set {f + ell >= 0} of f = q * W on the mesh-eps grid.

    ``r`` is the truncation radius of the Bargmann-Fock kernel (None keeps
    the reference kernel supported on |x| <= 4).
    """

    ell: float = 0.0
    mesh: float = 0.25
    r: float | None = 3.0
    kernel_name: str = "bargmann-fock"
    d: int = 2

    def __post_init__(self):
        if self.kernel_name != "bargmann-fock":
            raise InvalidParameter(f"unknown kernel {self.kernel_name!r}")
        if self.d != 2:
            raise InvalidParameter("Gaussian estimators are planar")
        self.kernel  # validates mesh and r

    @property
    def name(self) -> str:
        return "gaussian"

    @property
    def param(self) -> float:
        return self.ell

    @property
    def kernel(self) -> Kernel:
        return _kernel(self.mesh, self.r)

    def at(self, ell: float) -> "GaussianModel":
        return GaussianModel(ell, self.mesh, self.r, self.kernel_name, self.d)


@lru_cache(maxsize=32)
def _kernel(mesh: float, r: float | None) -> Kernel:
    q = make_bargmann_fock_kernel(2, mesh, 4.0)
    return q if r is None else truncate_kernel(q, r)


def model_from_dict(d: dict):
    d = dict(d)
    kind = d.pop("model", "bernoulli")
    if kind == "bernoulli":
        bad = set(d) - {"p", "d"}
        if bad:
            raise InvalidParameter(f"unknown model keys {sorted(bad)}")
        return BernoulliModel(float(d["p"]), int(d.get("d", 2)))
    if kind == "gaussian":
        bad = set(d) - {"ell", "mesh", "r", "kernel", "d"}
        if bad:
            raise InvalidParameter(f"unknown model keys {sorted(bad)}")
        r = d.get("r", 3.0)
        return GaussianModel(float(d.get("ell", 0.0)), float(d.get("mesh", 0.25)),
                             None if r is None else float(r), d.get("kernel", "bargmann-fock"),
                             int(d.get("d", 2)))
    raise InvalidParameter(f"unknown model {kind!r}")


def model_dict(model) -> dict:
    out = {"model": model.name}
    out.update(asdict(model))
    return out


CSV_FIELDS = ("model", "event", "param", "R", "k", "n", "estimate", "stderr", "seed")


def csv_row(model, event: EventSpec, est: Estimate, R=None) -> dict:
    R = event.R if R is None else R
    return {"model": model.name, "event": event.label(), "param": model.param,
            "R": "" if R is None else R, "k": event.k, "n": est.n,
            "estimate": est.mean, "stderr": est.stderr, "seed": est.seed}


# --------------------------------------------------------------------- fits
@dataclass
class FitResult:
    slope: float
    intercept: float
    slope_stderr: float
    r2: float
    n_points: int
    kind: str = "power"
    label: str = ""

    @property
    def rate(self) -> float:
        """-slope: the exponent (power law) or the decay rate (exponential)."""
        return -self.slope

    def as_dict(self) -> dict:
        return {"kind": self.kind, "label": self.label, "slope": self.slope, "intercept": self.intercept,
                "slope_stderr": self.slope_stderr, "r2": self.r2, "n_points": self.n_points,
                "rate": self.rate}


def _points(points, min_points: int):
    rows = [tuple(float(v) for v in p) for p in points]
    if len(rows) < min_points:
        raise InvalidData(f"need at least {min_points} points")
    x = np.array([r[0] for r in rows])
    y = np.array([r[1] for r in rows])
    s = np.array([r[2] if len(r) > 2 else 0.0 for r in rows])
    if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
        raise InvalidData("non-finite point")
    if np.any(y <= 0):
        raise InvalidData("probabilities must be positive")
    return x, y, s


def _wls(x, y, sy):
    """Straight-line fit; weights 1/sy^2 when every sy > 0, else ordinary LS.

    The slope error is inflated by sqrt(chi2/dof) when that exceeds 1 (weighted)
    and taken from the residuals (unweighted).
    """
    weighted = bool(np.all(sy > 0))
    w = 1.0 / sy ** 2 if weighted else np.ones_like(x)
    X = np.stack([np.ones_like(x), x], 1)
    A = X.T @ (w[:, None] * X)
    beta = np.linalg.solve(A, X.T @ (w * y))
    res = y - X @ beta
    n = x.size
    chi2 = float(np.sum(w * res ** 2))
    cov = np.linalg.inv(A)
    if n > 2:
        scale = max(1.0, chi2 / (n - 2)) if weighted else chi2 / (n - 2)
    else:
        scale = 1.0 if weighted else 0.0
    ybar = float(np.sum(w * y) / np.sum(w))
    sst = float(np.sum(w * (y - ybar) ** 2))
    r2 = 1.0 - chi2 / sst if sst > 0 else 1.0
    return float(beta[1]), float(beta[0]), float(math.sqrt(cov[1, 1] * scale)), r2


def fit_power_law(points, label: str = "") -> FitResult:
    """Weighted LS of log P on log R; points are (R, P) or (R, P, stderr)."""
    x, y, s = _points(points, 2)
    if np.any(x <= 0):
        raise InvalidData("R must be positive")
    slope, icpt, se, r2 = _wls(np.log(x), np.log(y), s / y)
    return FitResult(slope, icpt, se, r2, int(x.size), "power", label)


def fit_exponential_decay(points, label: str = "") -> FitResult:
    """LS of log P on R; ``rate`` (= -slope) is the decay rate per unit length."""
    x, y, s = _points(points, 3)
    slope, icpt, se, r2 = _wls(x, np.log(y), s / y)
    return FitResult(slope, icpt, se, r2, int(x.size), "exp", label)

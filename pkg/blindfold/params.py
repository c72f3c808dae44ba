"""Algorithm parameters: derivation, validation and k calibration.

Every strict inequality the reconstruction relies on is realised with a
relative slack of ``1e-6`` and re-checked on construction, so an
:class:`AlgoParams` value is always a valid regime.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Mapping

from blindfold.ancestral import MajorityConfig, choose_level_parameter
from blindfold.errors import InvalidRegimeError, NoAmplificationError
from blindfold.evolve import G_STAR
from blindfold.treekit import as_length

logger = logging.getLogger(__name__)

_SLACK = 1e-6
DEFAULT_K_CONSTANT = 0.25
DEFAULT_FAILURE = 0.1


@dataclass(frozen=True)
class InequalityCheck:
    """One ``lhs < rhs`` (or ``<=``) row of a parameter certificate."""

    name: str
    lhs: float
    rhs: float
    strict: bool = True

    @property
    def holds(self) -> bool:
        return self.lhs < self.rhs if self.strict else self.lhs <= self.rhs

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "lhs": self.lhs,
            "relation": "<" if self.strict else "<=",
            "rhs": self.rhs,
            "margin": self.margin,
            "holds": self.holds,
        }


@dataclass(frozen=True)
class Certificate:
    checks: tuple[InequalityCheck, ...]

    @property
    def ok(self) -> bool:
        return all(c.holds for c in self.checks)

    def failures(self) -> list[InequalityCheck]:
        return [c for c in self.checks if not c.holds]

    def to_dict(self) -> dict:
        return {"ok": self.ok, "checks": [c.to_dict() for c in self.checks]}

    def to_text(self) -> str:
        rows = []
        for c in self.checks:
            rel = "<" if c.strict else "<="
            mark = "ok" if c.holds else "FAIL"
            rows.append(
                f"{c.name:<20} {c.lhs:.9g} {rel} {c.rhs:.9g}  margin={c.margin:.3g}  {mark}"
            )
        return "\n".join(rows) + "\n"


@dataclass(frozen=True)
class AlgoParams:
    """Constants of one reconstruction run.

    Parameters
    ----------
    n:
        Number of leaves.
    f, g:
        Lower and upper bounds on true edge lengths.
    g_prime:
        Bound on the length of reconstructed forest edges, ``g < g' < g*``.
    delta:
        Length discretisation (exact decimal).
    eps:
        Estimation tolerance.
    r_col, m_bound, r_acc:
        Collision radius, distance bound and accuracy cutoff radius.
    gamma:
        Failure exponent; the run fails with probability ``O(n^-γ)`` per test.
    k:
        Sequence length the run is configured for.
    majority:
        Certified recursive-majority configuration at ``θ(g')``.
    failure:
        Target overall failure probability δ.
    """

    n: int
    f: float
    g: float
    g_prime: float
    delta: Decimal
    eps: float
    r_col: float
    m_bound: float
    r_acc: float
    gamma: float
    k: int
    majority: MajorityConfig
    failure: float = DEFAULT_FAILURE

    def __post_init__(self) -> None:
        bad = self.certificate().failures()
        if bad:
            names = ", ".join(c.name for c in bad)
            raise InvalidRegimeError(f"Parameter inequalities violated: {names}.")

    @property
    def b_bound(self) -> float:
        """Bias bound ``-½ ln β``."""
        return -0.5 * math.log(self.majority.beta)

    @property
    def beta_bound(self) -> float:
        return math.exp(-2.0 * self.b_bound)

    def certificate(self) -> Certificate:
        return Certificate(checks=(
            InequalityCheck("0 < f", 0.0, self.f),
            InequalityCheck("f <= g", self.f, self.g, strict=False),
            InequalityCheck("g < g'", self.g, self.g_prime),
            InequalityCheck("g' < g*", self.g_prime, G_STAR),
            InequalityCheck("1 < 2theta(g')^2", 1.0, 2 * math.exp(-4 * self.g_prime)),
            InequalityCheck("3 < gamma", 3.0, self.gamma),
            InequalityCheck("eps", self.eps, min(self.f, self.g_prime - self.g) / 8),
            InequalityCheck("R_col", 6 * self.g, self.r_col),
            InequalityCheck("M", self.r_col + 4 * self.g_prime, self.m_bound),
            InequalityCheck(
                "R_acc", self.m_bound + 2 * self.b_bound + 4 * self.g_prime, self.r_acc
            ),
        ))

    def with_k(self, k: int) -> AlgoParams:
        return _replace(self, k=k)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "f": self.f,
            "g": self.g,
            "g_prime": self.g_prime,
            "delta": str(self.delta),
            "eps": self.eps,
            "r_col": self.r_col,
            "m_bound": self.m_bound,
            "r_acc": self.r_acc,
            "gamma": self.gamma,
            "k": self.k,
            "b_bound": self.b_bound,
            "beta_bound": self.beta_bound,
            "failure": self.failure,
            "majority": self.majority.to_dict(),
        }


def _replace(params: AlgoParams, **changes: object) -> AlgoParams:
    values = {name: getattr(params, name) for name in params.__dataclass_fields__}
    values.update(changes)
    return AlgoParams(**values)  # type: ignore[arg-type]


# -- k -------------------------------------------------------------------------

def theoretical_k(
    f: float,
    delta: Decimal | float,
    n: int,
    failure: float,
    *,
    constant: float = DEFAULT_K_CONSTANT,
) -> int:
    """``C (ln n + ln 1/δ) / min(Δ², f²)``: the scaling shape, not a proven bound."""
    step = float(delta)
    scale = min(step * step, f * f)
    return max(1, math.ceil(constant * (math.log(n) + math.log(1.0 / failure)) / scale))


@dataclass(frozen=True)
class CalibrationTable:
    """Calibrated sequence lengths per leaf count plus the fitted constant C."""

    entries: Mapping[int, int] = field(default_factory=dict)
    constant: float = DEFAULT_K_CONSTANT

    def k_for(self, n: int) -> int | None:
        """Entry at the smallest calibrated n >= *n*, else the largest entry scaled by ln n."""
        if not self.entries:
            return None
        above = [m for m in self.entries if m >= n]
        if above:
            return self.entries[min(above)]
        top = max(self.entries)
        return math.ceil(self.entries[top] * math.log(n) / math.log(top))

    def to_dict(self) -> dict:
        return {
            "constant": self.constant,
            "entries": {str(n): k for n, k in sorted(self.entries.items())},
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> CalibrationTable:
        entries = {int(n): int(k) for n, k in data.get("entries", {}).items()}
        return cls(entries=entries, constant=float(data.get("constant", DEFAULT_K_CONSTANT)))

    def save(self, path: str | Path) -> None:
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        tmp = target.with_suffix(".tmp")
        tmp.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
        tmp.replace(target)

    @classmethod
    def load(cls, path: str | Path) -> CalibrationTable:
        return cls.from_dict(json.loads(Path(path).read_text()))


# -- derivation ----------------------------------------------------------------------

def derive_params(
    f: Decimal | str | float,
    g: Decimal | str | float,
    delta: Decimal | str | float,
    n: int,
    failure: float = DEFAULT_FAILURE,
    *,
    g_prime: float | None = None,
    k: int | None = None,
    gamma: float | None = None,
    calibration: CalibrationTable | None = None,
) -> AlgoParams:
    """Build and certify the parameters for an ``n``-leaf run.

    Raises :class:`InvalidRegimeError` for ``g >= g*``, a Δ that does not
    divide f and g, an invalid override, or when no majority block depth
    amplifies at ``θ(g')``.
    """
    f_dec, g_dec, step = as_length(f), as_length(g), as_length(delta)
    if step <= 0:
        raise InvalidRegimeError(f"Δ must be positive, got {step}.")
    if not 0 < f_dec <= g_dec:
        raise InvalidRegimeError(f"Need 0 < f <= g, got f={f_dec}, g={g_dec}.")
    if float(g_dec) >= G_STAR:
        raise InvalidRegimeError(f"g={g_dec} is not below g*={G_STAR:.7f}.")
    for name, value in (("f", f_dec), ("g", g_dec)):
        if value % step != 0:
            raise InvalidRegimeError(f"Δ={step} does not divide {name}={value}.")
    if n < 2:
        raise InvalidRegimeError(f"Need at least 2 leaves, got n={n}.")
    if not 0 < failure < 1:
        raise InvalidRegimeError(f"Failure budget must lie in (0, 1), got {failure}.")

    f_val, g_val = float(f_dec), float(g_dec)
    gp = g_val + (G_STAR - g_val) / 2 if g_prime is None else g_prime
    if not g_val < gp < G_STAR:
        raise InvalidRegimeError(f"g'={gp} must lie strictly between g={g_val} and g*.")
    try:
        majority = choose_level_parameter(math.exp(-2.0 * gp))
    except NoAmplificationError as exc:
        raise InvalidRegimeError(exc.message) from exc

    eps = min(f_val, gp - g_val) / 8 * (1 - _SLACK)
    r_col = 6 * g_val * (1 + _SLACK)
    m_bound = (r_col + 4 * gp) * (1 + _SLACK)
    b_bound = -0.5 * math.log(majority.beta)
    r_acc = (m_bound + 2 * b_bound + 4 * gp) * (1 + _SLACK)
    if gamma is None:
        gamma = max(3 + _SLACK, 3 + math.log(1 / failure) / math.log(max(n, 2)))

    if k is None and calibration is not None:
        k = calibration.k_for(n)
    if k is None:
        constant = calibration.constant if calibration is not None else DEFAULT_K_CONSTANT
        k = theoretical_k(f_val, step, n, failure, constant=constant)
    if k < 1:
        raise InvalidRegimeError(f"Sequence length must be positive, got k={k}.")

    params = AlgoParams(
        n=n,
        f=f_val,
        g=g_val,
        g_prime=gp,
        delta=step,
        eps=eps,
        r_col=r_col,
        m_bound=m_bound,
        r_acc=r_acc,
        gamma=gamma,
        k=k,
        majority=majority,
        failure=failure,
    )
    logger.debug("derived params %s", params.to_dict())
    return params

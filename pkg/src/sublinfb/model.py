"""Problem parameters and the derived critical exponents.

The PDE instance is

    -Delta u = lambda_plus * (u+)^(p-1) - lambda_minus * (u-)^(q-1)

with 1 <= p < 2 and, when the negative-phase coefficient is active,
p < q < 2.  All critical quantities downstream (homogeneity degree,
cone opening, admissible wave numbers) derive from these exponents.
"""

import json
import math
from dataclasses import dataclass


class InvalidParameters(ValueError):
    """Raised when a parameter set violates the model constraints."""


#: absolute tolerance used to decide whether gamma_p is an integer, which
#: routes the two branches of the beta_p definition and the strict-endpoint
#: exclusion of the admissible wave-number window
INTEGER_TOL = 1e-12


@dataclass(frozen=True)
class Parameters:
    """One instance of the equation.

    ``q`` may be omitted when ``lambda_minus`` is zero (the single-phase
    equation); it is ignored everywhere in that case.  ``lambda_plus`` may
    be zero only for test configurations that switch the nonlinearity off.
    """

    p: float
    lambda_plus: float = 1.0
    lambda_minus: float = 0.0
    q: float | None = None
    n: int = 2

    def __post_init__(self):
        if not (1.0 <= self.p < 2.0):
            raise InvalidParameters(f"p must lie in [1, 2), got {self.p}")
        if self.lambda_plus < 0.0:
            raise InvalidParameters("lambda_plus must be >= 0")
        if self.lambda_minus < 0.0:
            raise InvalidParameters("lambda_minus must be >= 0")
        if self.lambda_minus > 0.0 and self.q is None:
            raise InvalidParameters("q is required when lambda_minus > 0")
        if self.q is not None and not (self.p < self.q < 2.0):
            raise InvalidParameters(
                f"q must lie in (p, 2) = ({self.p}, 2), got {self.q}"
            )
        if not (isinstance(self.n, int) and self.n >= 2):
            raise InvalidParameters(f"n must be an integer >= 2, got {self.n}")

    def to_dict(self):
        d = {
            "p": self.p,
            "lambda_plus": self.lambda_plus,
            "lambda_minus": self.lambda_minus,
            "n": self.n,
        }
        if self.q is not None:
            d["q"] = self.q
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        return cls(
            p=float(d["p"]),
            lambda_plus=float(d.get("lambda_plus", 1.0)),
            lambda_minus=float(d.get("lambda_minus", 0.0)),
            q=float(d["q"]) if "q" in d and d["q"] is not None else None,
            n=int(d.get("n", 2)),
        )

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class CriticalExponents:
    gamma_p: float
    beta_p: int
    theta_p: float
    gamma_q: float | None = None


def _near_integer(x, tol=INTEGER_TOL):
    return abs(x - round(x)) < tol


def exponents(params: Parameters) -> CriticalExponents:
    """Critical exponents of one parameter set.

    gamma_p = 2/(2-p) is the homogeneity degree attached to the sublinear
    power p; beta_p is the largest integer strictly below gamma_p (so for
    integral gamma_p it is gamma_p - 1); theta_p = pi/gamma_p is the exact
    opening of every negative cone of a planar gamma_p-homogeneous solution.
    """
    gamma_p = 2.0 / (2.0 - params.p)
    if _near_integer(gamma_p):
        beta_p = int(round(gamma_p)) - 1
    else:
        beta_p = math.floor(gamma_p)
    theta_p = math.pi / gamma_p
    gamma_q = None
    if params.q is not None:
        gamma_q = 2.0 / (2.0 - params.q)
    return CriticalExponents(
        gamma_p=gamma_p, beta_p=beta_p, theta_p=theta_p, gamma_q=gamma_q
    )


def admissible_wave_numbers(params: Parameters) -> list[int]:
    """Integers strictly inside (gamma_p, 2*gamma_p), ascending.

    Each such k supports exactly one homogeneous profile with 2k zeros on
    the circle; the endpoints are excluded with the same integer tolerance
    used by ``exponents`` so that rational p values hit the open interval
    reliably (e.g. p = 1.6 gives gamma_p = 5 up to rounding and the window
    must be (5, 10) exactly).
    """
    gamma_p = 2.0 / (2.0 - params.p)
    if _near_integer(gamma_p):
        k_lo = int(round(gamma_p)) + 1
    else:
        k_lo = math.ceil(gamma_p)
    two_gp = 2.0 * gamma_p
    if _near_integer(two_gp):
        k_hi = int(round(two_gp)) - 1
    else:
        k_hi = math.floor(two_gp)
    return list(range(k_lo, k_hi + 1))

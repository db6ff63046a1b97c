"""Parameter tables, the R1-R21 constraint system, and tail bounds.

All feasibility arithmetic runs in arbitrary precision (mpmath, 60
significant digits) so quantities like Delta**(19/20) stay exact-enough
at astronomically large Delta; the report exposes each side of each
constraint in log10 space.

Constraint evaluation clamps the activation scale at theta < 1/2 (the
standing assumption behind the weight-entropy argument) and the
iteration count at T >= 1.  Outside that regime the raw formulas stop
describing a runnable algorithm, and the clamped evaluation is what
makes desk-scale assignments report as infeasible instead of vacuously
passing.  Raw values are kept alongside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from mpmath import mp, mpf

_DPS = 60

M_CODEGREE_CONTROL = 21
C0 = 1.0 / 86000.0

# surrogate threshold for the asymptotic o(.) constraints R2, R4, R7
O_CHECK_RATIO = mpf("0.01")


class ParameterError(ValueError):
    """Nonpositive, NaN, or otherwise unusable parameter input."""


def _pos(name: str, value, allow_zero: bool = False) -> mpf:
    x = mpf(value)
    if mp.isnan(x) or mp.isinf(x):
        raise ParameterError(f"{name} must be finite, got {value}")
    if x < 0 or (x == 0 and not allow_zero):
        raise ParameterError(f"{name} must be positive, got {value}")
    return x


@dataclass(frozen=True)
class Parameters:
    """One full assignment of the algorithm's parameter tables.

    Fields are mpmath reals; `delta` may be given as 10**log10_delta for
    sizes far beyond floats.  `colors_int()` / `iterations_int()` round
    up (the paper leaves rounding unstated; ceiling preserves the "at
    most C colors" direction).  Sanity invariants (theta < 1/2, p_hat
    in (0,1], omega > 1) are reported by `check_constraints`, not
    enforced here, so infeasible assignments can still be examined.
    """

    delta: mpf
    delta2: mpf
    codegree: mpf
    epsilon: mpf
    omega: mpf
    p_hat: mpf
    omega0: mpf
    colors: mpf
    iterations: mpf
    theta: mpf
    omega1: mpf
    omega2: mpf
    omega3: mpf
    omega4: mpf
    omega5: mpf
    omega6: mpf
    m: int = M_CODEGREE_CONTROL
    c0: float = C0
    overridden: tuple = ()

    def colors_int(self) -> int:
        return max(1, int(mp.ceil(self.colors)))

    def iterations_int(self) -> int:
        return max(1, int(mp.ceil(self.iterations)))

    def to_dict(self) -> dict:
        out = {}
        for name in ("delta", "delta2", "codegree", "epsilon", "omega", "p_hat",
                     "omega0", "colors", "iterations", "theta", "omega1",
                     "omega2", "omega3", "omega4", "omega5", "omega6"):
            out[name] = mp.nstr(getattr(self, name), 12)
        out["m"] = self.m
        out["c0"] = self.c0
        out["overridden"] = list(self.overridden)
        return out


def derive(delta, delta2, codegree, epsilon, omega, p_hat, omega0,
           *, colors=None, iterations=None, theta=None) -> Parameters:
    """Fill the derived-parameter table from the independent inputs.

    The keyword overrides switch the assignment into practical mode
    (recorded in `overridden` and in constraint reports).  Raises
    `ParameterError` for nonpositive or NaN inputs; values outside the
    asymptotic regime (e.g. omega <= 1) pass through and are flagged by
    `check_constraints` instead.
    """
    with mp.workdps(_DPS):
        d = _pos("delta", delta)
        d2 = _pos("delta2", delta2, allow_zero=True)
        cd = _pos("codegree", codegree, allow_zero=True)
        eps = _pos("epsilon", epsilon)
        om = _pos("omega", omega)
        ph = _pos("p_hat", p_hat)
        om0 = _pos("omega0", omega0)
        overridden = []
        C = mp.sqrt(d / om)
        if colors is not None:
            C = _pos("colors", colors)
            overridden.append("colors")
        T = (5 * om / eps) * mp.log(om)
        if iterations is not None:
            T = _pos("iterations", iterations)
            overridden.append("iterations")
        th = eps / om
        if theta is not None:
            th = _pos("theta", theta)
            overridden.append("theta")
        return Parameters(
            delta=d, delta2=d2, codegree=cd, epsilon=eps, omega=om,
            p_hat=ph, omega0=om0,
            colors=C, iterations=T, theta=th,
            omega1=T * mp.log(C),
            omega2=om0 / (16 * om),
            omega3=om ** 2,
            omega4=om ** 2,
            omega5=d ** mpf("0.95"),
            omega6=d ** mpf("0.25"),
            overridden=tuple(overridden),
        )


def paper_assignment(delta, delta2=None) -> Parameters:
    """The triangle-free assignment: eps=1/40, omega=(1/25)(eps/86)log(delta),
    p_hat=delta**(-11/24), omega0=1/(19*theta*p_hat).

    `delta2` defaults to its permitted maximum sqrt(delta*omega); the
    codegree bound is the reduction target delta**(6/10).
    """
    with mp.workdps(_DPS):
        d = _pos("delta", delta)
        if d < 3:
            raise ParameterError(f"delta must be at least 3, got {delta}")
        eps = mpf(1) / 40
        om = (mpf(1) / 25) * (eps / 86) * mp.log(d)
        ph = d ** (mpf(-11) / 24)
        th = eps / om
        om0 = 1 / (19 * th * ph)
        cd = d ** (mpf(6) / 10)
        # same expression the R20 check uses, so the boundary default
        # compares equal bit-for-bit
        d2 = mp.sqrt(d) * mp.sqrt(om) if delta2 is None else _pos("delta2", delta2, allow_zero=True)
        return derive(d, d2, cd, eps, om, ph, om0)


def from_log10_delta(log10_delta, delta2=None) -> Parameters:
    """paper_assignment at delta = 10**log10_delta."""
    with mp.workdps(_DPS):
        return paper_assignment(mp.power(10, mpf(log10_delta)), delta2=delta2)


# -- constraint system -------------------------------------------------------


@dataclass(frozen=True)
class ConstraintCheck:
    """One evaluated constraint; sides are reported in log10 space.

    `slack` is log10(margin): positive iff satisfied, measured as the
    log10 distance between the sides (linear difference, flagged in
    `note`, when a side is nonpositive so its log is undefined).
    """

    name: str
    satisfied: bool
    left_log10: float | None
    right_log10: float | None
    slack: float
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "satisfied": self.satisfied,
            "left_log10": self.left_log10,
            "right_log10": self.right_log10,
            "slack": self.slack,
            "note": self.note,
        }


@dataclass(frozen=True)
class ConstraintReport:
    checks: tuple
    sanity: dict
    regime: str

    @property
    def all_satisfied(self) -> bool:
        return all(c.satisfied for c in self.checks)

    def __getitem__(self, name: str) -> ConstraintCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def violated(self) -> list:
        return [c for c in self.checks if not c.satisfied]

    def to_dict(self) -> dict:
        return {
            "regime": self.regime,
            "sanity": self.sanity,
            "all_satisfied": self.all_satisfied,
            "constraints": [c.to_dict() for c in self.checks],
        }


def _log10(x: mpf) -> float | None:
    if x <= 0:
        return None
    return float(mp.log10(x))


def _compare(name: str, left: mpf, right: mpf, kind: str, note: str = "") -> ConstraintCheck:
    if kind in ("ge", "gt"):
        sat = left >= right if kind == "ge" else left > right
        a, b = left, right
    else:  # "le", "lt"
        sat = left <= right if kind == "le" else left < right
        a, b = right, left
    if a > 0 and b > 0:
        slack = float(mp.log10(a) - mp.log10(b))
    else:
        slack = float(a - b)
        note = (note + "; " if note else "") + "linear slack (nonpositive side)"
    return ConstraintCheck(
        name=name, satisfied=bool(sat),
        left_log10=_log10(left), right_log10=_log10(right),
        slack=slack, note=note,
    )


def _o_check(name: str, ratio: mpf) -> ConstraintCheck:
    return _compare(name, ratio, O_CHECK_RATIO, "le",
                    note=f"o(.) surrogate: ratio <= {float(O_CHECK_RATIO)}")


def check_constraints(p: Parameters) -> ConstraintReport:
    """Evaluate R1-R21 numerically and report satisfaction with slack.

    Always returns a full report; nothing raises on infeasibility.
    """
    with mp.workdps(_DPS):
        tiny = mpf("1e-300000")
        th_raw, T_raw = p.theta, p.iterations
        th = min(th_raw, mpf(1) / 2)
        T = max(T_raw, mpf(1))
        ph = min(p.p_hat, mpf(1))
        C = max(p.colors, mpf(1) + tiny)
        logC = max(mp.log(C), tiny)
        om, om0, eps = p.omega, p.omega0, p.epsilon
        om1 = max(T * logC, tiny)
        om2, om3, om4, om5, om6 = p.omega2, p.omega3, p.omega4, p.omega5, p.omega6
        d, d2 = p.delta, p.delta2
        cd = max(p.codegree, mpf(1))
        m = p.m
        logd = mp.log(d)
        ln_ph = mp.log(ph) if ph < 1 else -tiny
        decay4 = (1 - th / 4) ** T
        decay3 = (1 - th / 3) ** T

        checks = (
            _compare("R1", th * mp.log(ph * C), mpf(85), "ge"),
            _o_check("R2", (1 / om0) / th),
            _compare("R3", 2 / (om1 ** 2 * C * ph ** 2), 6 * logd, "gt"),
            _o_check("R4", T / om1),
            _compare("R5", (T * logC) / om1, eps / th, "lt"),
            _compare("R6", 2 / (4 * d ** 2 * om2 ** 2 * C * ph ** 6), 6 * logd, "gt"),
            _o_check("R7", th * T / om2),
            _compare("R8", om * om2 + T, om0 / 2, "lt"),
            _compare("R9", 1 / om2, decay4 * om, "le"),
            _compare(
                "R10",
                1 / (4 * om3 ** 2 * (
                    6 * om6 * T * th * ph ** 5 * d ** 2
                    + 4 * m * ph ** 5 * d ** (2 + mpf(1) / (2 * m))
                    + C * m ** 2 * ph ** 6 * d ** (2 + mpf(1) / m))),
                7 * logd, "ge"),
            _compare(
                "R11",
                2 / (4 * om3 ** 2 * C * (
                    m * d ** (1 + mpf(1) / (2 * m)) * ph ** 3
                    + cd * d ** (mpf(1) / 2 + mpf(1) / (2 * m)) * ph ** 3) ** 2),
                7 * logd, "ge"),
            _compare("R12", 2 / (om4 ** 2 * C * (-ph * ln_ph) ** 2), 6 * logd, "gt"),
            _compare("R13", 1 / om4, eps * decay4, "le"),
            _compare(
                "R14",
                2 * om5 ** 2 / (C * (
                    m * d ** (1 + mpf(1) / (2 * m)) * ph
                    + d ** (mpf(1) / 2 + mpf(1) / (2 * m)) * ph * cd) ** 2),
                7 * logd, "ge"),
            _compare("R15", om5, (th / 6) * decay3 * d, "lt"),
            _compare("R16", om6 * d * th * ph / (5 * cd), 6 * logd, "ge"),
            _compare("R17", th * om * decay4, th * T / om2 + 1 / om3, "ge"),
            _compare("R18", 1 - 10 * eps, mpf(3) / 4, "ge"),
            _compare("R19", d2, om6 * th * d * ph, "le"),
            _compare("R20", d2, mp.sqrt(d) * mp.sqrt(om), "le"),
            _compare("R21", p.p_hat, d ** (mpf(-1) / 2), "ge"),
        )
        sanity = {
            "theta_lt_half": bool(th_raw < mpf(1) / 2),
            "omega_gt_1": bool(om > 1),
            "iterations_ge_1": bool(T_raw >= 1),
            "p_hat_le_1": bool(p.p_hat <= 1),
            "theta_p_hat_le_1": bool(th_raw * p.p_hat <= 1),
        }
        regime = "paper" if (all(sanity.values()) and not p.overridden) else "practical"
        return ConstraintReport(checks=checks, sanity=sanity, regime=regime)


def claim31_report(p: Parameters) -> dict:
    """The claimed-consistent inequality set, each line evaluated.

    Encodes both branches of the omega coupling (the strict 1/26 cap and
    the 1/25 assignment actually set for triangle-free inputs) plus the
    consistency chain delta**(1/26-1/2)*sqrt(omega) <= delta**(-11/24);
    which branch an assignment satisfies is visible in the output.
    """
    with mp.workdps(_DPS):
        d, eps, om, ph, om0, cd, d2 = (
            p.delta, p.epsilon, p.omega, p.p_hat, p.omega0, p.codegree, p.delta2)
        logd = mp.log(d)
        th = p.theta
        cap26 = (mpf(1) / 26) * (eps / 86) * logd
        val25 = (mpf(1) / 25) * (eps / 86) * logd
        lower_ph = mp.exp(86 * om / eps) * mp.sqrt(om) / mp.sqrt(d)
        chain_left = d ** (mpf(1) / 26 - mpf(1) / 2) * mp.sqrt(om)
        chain_right = d ** (mpf(-11) / 24)
        out = {
            "epsilon_le_1_40": _compare("epsilon_le_1_40", eps, mpf(1) / 40, "le"),
            "delta2_le_sqrt": _compare("delta2_le_sqrt", d2, mp.sqrt(d) * mp.sqrt(om), "le"),
            "omega_lt_cap_1_26": _compare("omega_lt_cap_1_26", om, cap26, "lt"),
            "omega_eq_assign_1_25": ConstraintCheck(
                name="omega_eq_assign_1_25",
                satisfied=bool(abs(om - val25) <= mpf("1e-30") * max(om, val25)),
                left_log10=_log10(om), right_log10=_log10(val25),
                slack=0.0, note="matches the triangle-free assignment branch"),
            "codegree_le_pow": _compare("codegree_le_pow", cd, d ** (mpf(6) / 10), "le"),
            "omega0_gt_10w3logw": _compare(
                "omega0_gt_10w3logw", om0, 10 * om ** 3 * mp.log(max(om, mpf("1e-30"))), "gt",
                note="" if om > 1 else "log(omega) <= 0: bound degenerate"),
            "omega0_eq_assign_19": ConstraintCheck(
                name="omega0_eq_assign_19",
                satisfied=bool(abs(om0 - 1 / (19 * th * ph)) <= mpf("1e-30") * om0),
                left_log10=_log10(om0), right_log10=_log10(1 / (19 * th * ph)),
                slack=0.0, note="matches the triangle-free assignment branch"),
            "p_hat_gt_lower": _compare("p_hat_gt_lower", ph, lower_ph, "gt"),
            "p_hat_le_upper": _compare("p_hat_le_upper", ph, chain_right, "le"),
            "consistency_chain": _compare("consistency_chain", chain_left, chain_right, "le"),
        }
        return out


# -- tail bounds --------------------------------------------------------------


def tail_bounds(kind: str, **kwargs) -> float:
    """Natural log of the stated exponential tail bound.

    kinds:
      hoeffding(t, a)                exp(-2 t^2 / sum a_i^2)
      hoeffding_variance(t, variance, b)   exp(-t^2 / (2 Var + b t))
      mcdiarmid(t, d)                exp(-2 t^2 / sum d_i^2)
      mcdiarmid_conditional(t, d, pr_bad)  mcdiarmid + Pr[bad]

    The printed exponent of the bounded-differences inequality drops the
    division by sum d_i^2; the corollary built on it restores it, and
    that corrected form is what is computed here.
    """
    t = kwargs.get("t")
    if t is None or not t > 0:
        raise ParameterError(f"deviation t must be positive, got {t}")
    if kind == "hoeffding":
        s = math.fsum(float(x) ** 2 for x in kwargs["a"])
        if s <= 0:
            raise ParameterError("need at least one nonzero bound a_i")
        return -2.0 * t * t / s
    if kind == "hoeffding_variance":
        var = float(kwargs["variance"])
        b = float(kwargs["b"])
        if var < 0 or b < 0 or (var == 0 and b == 0):
            raise ParameterError("variance and b must be nonnegative, not both zero")
        return -t * t / (2.0 * var + b * t)
    if kind == "mcdiarmid":
        s = math.fsum(float(x) ** 2 for x in kwargs["d"])
        if s <= 0:
            raise ParameterError("need at least one nonzero difference d_i")
        return -2.0 * t * t / s
    if kind == "mcdiarmid_conditional":
        s = math.fsum(float(x) ** 2 for x in kwargs["d"])
        if s <= 0:
            raise ParameterError("need at least one nonzero difference d_i")
        pr_bad = float(kwargs["pr_bad"])
        if pr_bad < 0 or pr_bad > 1:
            raise ParameterError(f"pr_bad must be a probability, got {pr_bad}")
        base = -2.0 * t * t / s
        if pr_bad == 0:
            return base
        return float(mp.log(mp.exp(base) + pr_bad))
    raise ParameterError(f"unknown tail bound kind {kind!r}")

"""Spectral conclusions per k: critical lines, normalizability, verdict.

The asymptotics module delivers exponent branches over the quotient ring
Q(w)[g]/(g^k+1); here they are pushed to the complex embedding g -> e^(i pi/k)
and turned into exact yes/no statements.  Angle arithmetic runs in the larger
cyclotomic ring Q[zeta]/(zeta^(2k)+1) with zeta = e^(i pi/(2k)), reduced by
the 4k-th cyclotomic polynomial, so "Re(...) = 0" is decided symbolically.
Square-root signs are certified by comparing squares, never by floating point.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cache, lru_cache

from .asymptotics import (
    ExponentBranch,
    LevelEquation,
    OutOfScope,
    solve_levels,
    substitute_ansatz,
)
from .weyl import ParamPoly, build_reduced_operator


class Verdict(enum.Enum):
    SelfAdjoint = "SelfAdjoint"
    NotSelfAdjoint = "NotSelfAdjoint"
    OutOfScope = "OutOfScope"


@dataclass(frozen=True)
class CriticalLine:
    """Ray z(t) = t*e^(-i theta/2) for one Gaussian exponent root.

    Angles are exact rational multiples of pi, normalized into (-1, 1].
    """

    branch_index: int
    theta_over_pi: Fraction

    @property
    def direction_over_pi(self) -> Fraction:
        return -self.theta_over_pi / 2


def critical_lines(k: int) -> list[CriticalLine]:
    """One line per root of g^k = -1: theta_m = (2m+1) pi / k."""
    if not isinstance(k, int) or k < 3:
        raise ValueError(f"critical lines are defined for k >= 3, got {k!r}")
    out = []
    for m in range(k):
        t = Fraction(2 * m + 1, k)
        if t > 1:
            t -= 2
        out.append(CriticalLine(m, t))
    return out


# ---------------------------------------------------------------------------
# exact angle arithmetic

@cache
def _cyclotomic(n: int) -> tuple[int, ...]:
    """Coefficients (low to high) of the n-th cyclotomic polynomial."""
    poly = [-1] + [0] * (n - 1) + [1]
    for d in range(1, n):
        if n % d:
            continue
        div = _cyclotomic(d)
        # exact division by a monic integer polynomial
        out = [0] * (len(poly) - len(div) + 1)
        rem = list(poly)
        for i in range(len(out) - 1, -1, -1):
            c = rem[i + len(div) - 1]
            out[i] = c
            if c:
                for j, dj in enumerate(div):
                    rem[i + j] -= c * dj
        if any(rem):
            raise AssertionError("cyclotomic division left a remainder")
        poly = out
    return tuple(poly)


def _zeta_poly_is_zero(coeffs: dict[int, ParamPoly], k: int) -> bool:
    """Whether sum coeffs[e] * zeta^e vanishes at zeta = e^(i pi/(2k)).

    Exponents are folded with zeta^(2k) = -1, then the representative is
    reduced modulo the 4k-th cyclotomic polynomial (the minimal polynomial
    of zeta, irreducible also over the transcendental parameters).
    """
    n = 2 * k
    folded = [ParamPoly() for _ in range(n)]
    for e, p in coeffs.items():
        e %= 4 * k
        sign = 1
        if e >= n:
            e -= n
            sign = -1
        folded[e] = folded[e] + (p if sign > 0 else -p)
    phi = _cyclotomic(4 * k)
    deg = len(phi) - 1
    for i in range(n - 1, deg - 1, -1):
        c = folded[i]
        if not c:
            continue
        folded[i] = ParamPoly()
        for j, pj in enumerate(phi[:-1]):
            if pj:
                folded[i - deg + j] = folded[i - deg + j] - c.scale(pj)
    return all(p.is_zero() for p in folded)


def beta_unit_modulus(branch: ExponentBranch, line: CriticalLine) -> bool:
    """True iff Re(beta * e^(-i theta/2)) = 0 exactly (symbolic in w)."""
    k = branch.k
    shift = -int(line.theta_over_pi * k)      # e^(-i theta/2) = zeta^shift
    if Fraction(shift) != -line.theta_over_pi * k:
        raise ValueError("line angle is not a multiple of pi/k")
    coeffs: dict[int, ParamPoly] = {}
    for (p, b, r, c), q in branch.beta.terms.items():
        if b or r or c:
            raise ValueError("beta is not resolved to a scalar ring element")
        e = 2 * p + shift                      # g = zeta^2
        coeffs[e] = coeffs.get(e, ParamPoly()) + q
        coeffs[-e] = coeffs.get(-e, ParamPoly()) + q   # plus conjugate
    return _zeta_poly_is_zero(coeffs, k)


# ---------------------------------------------------------------------------
# certified surd signs

def _sign_x_plus_y_sqrt_d(x: Fraction, y: Fraction, d: Fraction) -> int:
    """Exact sign of x + y*sqrt(d) for rational x, y and d >= 0."""
    if d < 0:
        raise ValueError("discriminant must be nonnegative here")
    if y == 0 or d == 0:
        return (x > 0) - (x < 0)
    if x == 0:
        return 1 if y > 0 else -1
    if x > 0 and y > 0:
        return 1
    if x < 0 and y < 0:
        return -1
    lhs, rhs = x * x, y * y * d
    if lhs == rhs:
        return 0
    return (1 if x > 0 else -1) if lhs > rhs else (1 if y > 0 else -1)


def _sqrt_approx(d: Fraction) -> float:
    # display only; all decisions are exact
    return math.sqrt(d.numerator / d.denominator) if d >= 0 else float("nan")


def _eval_param(p: ParamPoly, omega: Fraction, what: str) -> Fraction:
    for name in ("d", "E"):
        if p.uses(name):
            raise ValueError(f"{what} unexpectedly depends on {name}")
    return p.evaluate(omega, 0, 0)


@dataclass(frozen=True)
class NormalizabilityReport:
    """Branch-level outcome of the Re(rho) < -1/2 test at rational omega."""

    branch: ExponentBranch
    re_rho: Fraction | None        # exact value when rational or a complex pair
    re_rho_approx: float
    sign_vs_threshold: int         # certified sign of Re(rho) + 1/2
    normalizable: bool
    beta_modulus_flag: bool


def normalizability(branch: ExponentBranch, omega) -> NormalizabilityReport:
    """Certify Re(rho) against -1/2 for one branch at rational omega > 0."""
    omega = Fraction(omega)
    if omega <= 0:
        raise ValueError("omega must be positive")
    rho = branch.rho
    r_val = _eval_param(rho.rational, omega, "rho rational part")
    if rho.is_rational():
        re, approx = r_val, float(r_val)
        sign = ((re + Fraction(1, 2)) > 0) - ((re + Fraction(1, 2)) < 0)
    else:
        s_val = _eval_param(rho.surd, omega, "rho surd part")
        d_val = _eval_param(rho.disc, omega, "rho discriminant")
        if d_val <= 0:
            # complex pair (or collapsed double root): real part is r_val
            re, approx = r_val, float(r_val)
            sign = ((re + Fraction(1, 2)) > 0) - ((re + Fraction(1, 2)) < 0)
        else:
            re = None
            approx = float(r_val) + float(s_val) * _sqrt_approx(d_val)
            sign = _sign_x_plus_y_sqrt_d(r_val + Fraction(1, 2), s_val, d_val)
    line = critical_lines(branch.k)[branch.gamma_index]
    return NormalizabilityReport(
        branch=branch, re_rho=re, re_rho_approx=approx,
        sign_vs_threshold=sign, normalizable=sign < 0,
        beta_modulus_flag=beta_unit_modulus(branch, line))


def symmetry_divergence(k: int, branch: ExponentBranch) -> bool:
    """Whether the z^k expectation integral diverges: k + 2 rho >= -1.

    Only defined for real rational rho; a branch with a surd part is refused
    because its realness depends on the parameters.
    """
    if not branch.rho.is_rational():
        raise ValueError("symmetry divergence is only assessed for real "
                         f"rational rho; got {branch.rho.text()}")
    v = branch.rho.rational_value().constant_value()
    return k + 2 * v >= -1


# ---------------------------------------------------------------------------
# the per-k verdict

@lru_cache(maxsize=None)
def _exponent_pipeline(k: int) -> tuple[tuple[LevelEquation, ...], tuple[ExponentBranch, ...]]:
    levels = substitute_ansatz(build_reduced_operator(k), k, 5)
    return tuple(levels), tuple(solve_levels(levels, k))


@dataclass(frozen=True)
class VerdictReport:
    k: int
    omega: Fraction
    delta: Fraction
    verdict: Verdict
    reports: tuple[NormalizabilityReport, ...]
    lines: tuple[CriticalLine, ...]
    symmetry_divergence: bool
    trace: dict

    def trace_json(self) -> str:
        return json.dumps(self.trace, indent=1, sort_keys=True)

    def trace_ref(self) -> str:
        return "sha256:" + hashlib.sha256(self.trace_json().encode()).hexdigest()

    def to_json_obj(self) -> dict:
        branches = []
        for rep in self.reports:
            br = rep.branch
            entry = {
                "gamma_power": 2 * br.gamma_index + 1,
                "beta": br.beta.text(),
                "rho": _rho_json(br, self.omega),
                "normalizable": rep.normalizable,
            }
            try:
                entry["symmetry_divergent"] = symmetry_divergence(br.k, br)
            except ValueError:
                entry["symmetry_divergent"] = None
            branches.append(entry)
        return {
            "k": self.k,
            "omega": str(self.omega),
            "delta": str(self.delta),
            "verdict": self.verdict.value,
            "branches": branches,
            "critical_lines": [str(ln.theta_over_pi) for ln in self.lines],
            "trace_ref": self.trace_ref(),
        }


def _rho_json(branch: ExponentBranch, omega: Fraction) -> dict:
    rho = branch.rho
    if rho.is_rational():
        return {"re": str(_eval_param(rho.rational, omega, "rho"))}
    r_val = _eval_param(rho.rational, omega, "rho rational part")
    s_val = _eval_param(rho.surd, omega, "rho surd part")
    d_val = _eval_param(rho.disc, omega, "rho discriminant")
    if d_val == 0:
        return {"re": str(r_val)}
    if d_val > 0:
        return {"re": str(r_val), "surd": {"coeff": str(s_val), "disc": str(d_val)}}
    return {"re": str(r_val), "im": {"coeff": str(s_val), "disc": str(-d_val)}}


def _build_trace(k, levels, branches, reports) -> dict:
    return {
        "k": k,
        "levels": [{"level": lv.level, "coeff": lv.text()} for lv in levels],
        "branches": [
            {
                "gamma_power": 2 * b.gamma_index + 1,
                "gamma": b.gamma.text(),
                "gamma_multiplicity": b.gamma_multiplicity,
                "beta": b.beta.text(),
                "rho": b.rho.text(),
                "c": [ci.text() for ci in b.c],
                "resonant": list(b.resonant),
                "beta_unit_modulus": rep.beta_modulus_flag,
            }
            for b, rep in zip(branches, reports)
        ],
        "E_absent_from_exponents": True,
    }


def verdict(k: int, omega, delta) -> VerdictReport:
    """Self-adjointness verdict with full derivation trace.

    k=1: self-adjoint (relatively bounded linear coupling; no computation).
    k=2: out of scope here, handled by the truncation numerics.
    k>=3: exponent pipeline + per-branch normalizability; not self-adjoint
    exactly when normalizable eigenfunctions exist for every complex E.
    """
    if not isinstance(k, int) or k < 1:
        raise ValueError(f"k must be a positive integer, got {k!r}")
    omega, delta = Fraction(omega), Fraction(delta)
    if omega <= 0:
        raise ValueError("omega must be positive")
    if k == 1:
        return VerdictReport(
            k, omega, delta, Verdict.SelfAdjoint, (), (), False,
            {"k": 1, "note": "linear coupling is relatively bounded with "
                             "relative bound 0; self-adjointness is inherited "
                             "from the free field operator"})
    if k == 2:
        return VerdictReport(
            k, omega, delta, Verdict.OutOfScope, (), (), False,
            {"k": 2, "note": "quadratic coupling: the Gaussian exponent is "
                             "not a root of unity; see the truncation "
                             "numerics for the collapse at g = omega/2"})
    levels, branches = _exponent_pipeline(k)

    # the whole argument needs E symbolic: no exponent may depend on it
    for b in branches:
        for poly in (b.rho.rational, b.rho.surd, b.rho.disc,
                     b.rho.monic_b, b.rho.monic_c):
            if poly.uses("E") or poly.uses("d"):
                raise AssertionError("exponent depends on E or Delta")
        if b.beta.uses_param("E") or b.beta.uses_param("d"):
            raise AssertionError("beta depends on E or Delta")

    reports = tuple(normalizability(b, omega) for b in branches)
    lines = tuple(critical_lines(k))
    divergent = False
    for b in branches:
        try:
            divergent = divergent or symmetry_divergence(k, b)
        except ValueError:
            pass
    if not all(r.normalizable for r in reports):
        raise AssertionError(
            "unexpected non-normalizable branch; the k >= 3 theory "
            "guarantees Re(rho) < -1/2")
    trace = _build_trace(k, levels, branches, reports)
    return VerdictReport(k, omega, delta, Verdict.NotSelfAdjoint,
                         reports, lines, divergent, trace)

"""Regularized contour-integral solutions of abstract multi-term fractional problems.

The problem is ``sum_i A_i (D^zeta)^{q_i} u = 0`` on ``C^m`` with pencil
``P_lam = lam^{q_n zeta} B + sum_{i<n} lam^{q_i zeta} A_i``.  Writing
``mu = lam e^{i phi}``, the operator ``P_{mu^{1/zeta}}`` is the matrix
polynomial ``Q(mu) = sum_i mu^{q_i} A_i``, which is what every routine here
evaluates.  Solutions are built as

    u_eps(z) = sum_w sum_{j in S_w} (2 pi i)^{-1} int_Gamma
               e^{-eps (a - lam)^{b/zeta}} E_zeta(z^zeta mu) mu^{q_j - 1 - w}
               Q(mu)^{-1} C A_j x_w dlam

over the upward oriented boundary ``Gamma`` of ``{|arg lam| < Theta, |lam| >= r}``
with ``Theta = zeta pi / 2 + theta``; ``S_w = {j : q_j - 1 >= w}``.
"""

from __future__ import annotations

import cmath
import functools
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .degenerate_solver import CheckReport, analyticity_check
from .errors import (
    BadExponents,
    BadParams,
    EmptyInterval,
    NotResolvent,
    PencilSingular,
    QuadratureUnderResolved,
    RootEscape,
)
from .special_functions import ml_eval_many

# |e^{-eps (a - lam)^{b/zeta}}| at the outermost node
DAMPING_FLOOR = 1e-16
# damping exponents beyond this are treated as negligible when grading panels
_NEGLIGIBLE_EXPONENT = 40.0
# largest phase change of the damping factor across one ray panel
_PANEL_PHASE = 8.0
_RAY_RATIO = 1.5
DOUBLING_TOL = 1e-8
_PENCIL_COND_LIMIT = 1e13


def admissible_nu_bound(q: Sequence[int]) -> float:
    """Upper bound for ``nu'``: the minimum over ``w`` of
    ``-(q_n - 1 - w + max{q_j : q_j - 1 < w})``."""
    q = _check_exponents(q)
    qn = q[-1]
    best = math.inf
    for w in range(qn):
        outside = [qj for qj in q if qj - 1 < w]
        best = min(best, -(qn - 1 - w + max(outside)))
    return float(best)


def _check_exponents(q) -> tuple[int, ...]:
    try:
        ok = all(float(v) == int(v) for v in q)
        q = tuple(int(v) for v in q)
    except (TypeError, ValueError):
        raise BadExponents(f"exponents must be integers, got {q!r}") from None
    if not ok or len(q) < 2:
        raise BadExponents(f"need integer exponents q_0 = 0 < q_1 <= ... <= q_n, got {q!r}")
    if q[0] != 0 or q[1] <= 0 or any(b < a for a, b in zip(q[1:], q[2:])):
        raise BadExponents(f"need q_0 = 0 < q_1 <= ... <= q_n, got {q!r}")
    return q


def b_interval(zeta: float, theta: float) -> tuple[float, float]:
    """Admissible open interval ``(1, (pi zeta / 2) / (pi - zeta pi / 2 - theta))`` for ``b``."""
    gap = math.pi - zeta * math.pi / 2 - theta
    if gap <= 0:
        raise EmptyInterval(f"theta={theta} leaves no room: pi - zeta pi/2 - theta <= 0")
    hi = (math.pi * zeta / 2) / gap
    if not hi > 1:
        raise EmptyInterval(f"b-interval (1, {hi:.6g}) is empty for zeta={zeta}, theta={theta}")
    return 1.0, hi


def support_sets(q: Sequence[int]) -> list[list[int]]:
    """``S_w = {j : q_j - 1 >= w}`` for ``w = 0, ..., q_n - 1``."""
    return [[j for j, qj in enumerate(q) if qj - 1 >= w] for w in range(q[-1])]


def _as_matrix(a, m: int | None = None) -> np.ndarray:
    arr = np.asarray(a, dtype=complex)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or (m is not None and arr.shape[0] != m):
        raise BadParams(f"expected a square matrix of size {m}, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class PencilProblem:
    """Exponents, order, operators ``A_0..A_{n-1}, B = A_n`` and regularizer ``C``.

    ``b`` defaults to the midpoint of its admissible interval.
    """

    q: tuple[int, ...]
    zeta: float
    ops: tuple[np.ndarray, ...]
    C: np.ndarray
    phi: float = 0.0
    theta: float = math.pi / 4
    r: float = 1.0
    a: float = 2.0
    nu_prime: float = -0.5
    b: float | None = None

    def __post_init__(self):
        q = _check_exponents(self.q)
        object.__setattr__(self, "q", q)
        if len(self.ops) != len(q):
            raise BadParams(f"{len(q)} exponents need {len(q)} operators, got {len(self.ops)}")
        ops = [_as_matrix(A) for A in self.ops]
        m = ops[0].shape[0]
        ops = tuple(_as_matrix(A, m) for A in ops)
        C = _as_matrix(self.C, m)
        object.__setattr__(self, "ops", ops)
        object.__setattr__(self, "C", C)
        if not 0 < self.zeta <= 2:
            raise BadParams("zeta must lie in (0, 2]")
        if not -math.pi < self.phi <= math.pi:
            raise BadParams("phi must lie in (-pi, pi]")
        lo = math.pi - math.pi * self.zeta
        hi = math.pi - math.pi * self.zeta / 2
        if not lo < self.theta < hi:
            raise EmptyInterval(f"theta={self.theta} is outside ({lo:.6g}, {hi:.6g})")
        blo, bhi = b_interval(self.zeta, self.theta)
        if self.b is None:
            object.__setattr__(self, "b", 0.5 * (blo + bhi))
        elif not blo < self.b < bhi:
            raise BadParams(f"b={self.b} is outside ({blo}, {bhi:.6g})")
        if not self.a > self.r > 0:
            raise BadParams("need a > r > 0")
        if np.linalg.matrix_rank(C) < m:
            raise BadParams("C must be injective")
        for i, A in enumerate(ops):
            gap = np.linalg.norm(C @ A - A @ C)
            if gap > 1e-12 * (1 + np.linalg.norm(C) * np.linalg.norm(A)):
                raise BadParams(f"C does not commute with A_{i} (gap {gap:.2e})")
        bound = admissible_nu_bound(q)
        if not self.nu_prime < bound:
            raise BadParams(f"nu_prime={self.nu_prime} must be below {bound}")

    @property
    def n_terms(self) -> int:
        return len(self.q) - 1

    @property
    def m(self) -> int:
        return self.C.shape[0]

    @property
    def B(self) -> np.ndarray:
        return self.ops[-1]

    @property
    def sector_angle(self) -> float:
        return self.zeta * math.pi / 2 + self.theta

    def pencil(self, mu) -> np.ndarray:
        """``Q(mu) = sum_i mu^{q_i} A_i`` for scalar or array ``mu`` (batched on the left)."""
        mu = np.asarray(mu, dtype=complex)
        out = np.zeros(mu.shape + (self.m, self.m), dtype=complex)
        for qi, A in zip(self.q, self.ops):
            out += (mu**qi)[..., None, None] * A
        return out

    def to_json(self) -> dict:
        return {
            "q": list(self.q),
            "zeta": self.zeta,
            "phi": self.phi,
            "theta": self.theta,
            "r": self.r,
            "a": self.a,
            "nu_prime": self.nu_prime,
            "b": self.b,
            "matrices": [_matrix_json(A) for A in self.ops],
            "C": _matrix_json(self.C),
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "PencilProblem":
        try:
            return cls(
                q=tuple(doc["q"]),
                zeta=float(doc["zeta"]),
                ops=tuple(_matrix_from_json(A) for A in doc["matrices"]),
                C=_matrix_from_json(doc["C"]),
                phi=float(doc.get("phi", 0.0)),
                theta=float(doc["theta"]),
                r=float(doc["r"]),
                a=float(doc["a"]),
                nu_prime=float(doc["nu_prime"]),
                b=None if doc.get("b") is None else float(doc["b"]),
            )
        except KeyError as exc:
            raise BadParams(f"problem document lacks field {exc.args[0]!r}") from None

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def _matrix_json(A: np.ndarray):
    if np.all(A.imag == 0):
        return A.real.tolist()
    return {"re": A.real.tolist(), "im": A.imag.tolist()}


def _matrix_from_json(doc) -> np.ndarray:
    if isinstance(doc, Mapping):
        return np.asarray(doc["re"], dtype=float) + 1j * np.asarray(doc.get("im", 0.0), dtype=float)
    return np.asarray(doc, dtype=complex)


@dataclass(frozen=True)
class ContourQuadrature:
    """Nodes on ``Gamma`` (lower ray inward, arc, upper ray outward) and weights.

    The weights carry ``dlam`` with its orientation and the factor ``1/(2 pi i)``,
    so ``sum(weights * f(nodes))`` approximates ``(2 pi i)^{-1} int_Gamma f``.
    Truncation and ray panels are chosen for ``epsilon_floor <= eps <= epsilon_ceiling``
    and ``|z| <= t_max``.
    """

    nodes: np.ndarray
    weights: np.ndarray
    truncation_radius: float
    epsilon_floor: float
    epsilon_ceiling: float
    points_per_segment: int
    b: float
    t_max: float = 2.0
    segments: tuple[int, int, int] = field(default=(0, 0, 0))

    def refined(self, problem: PencilProblem) -> "ContourQuadrature":
        """Same panels with twice the Gauss-Legendre points per panel."""
        return build_contour(problem, 2 * self.points_per_segment, self.epsilon_floor,
                             self.epsilon_ceiling, self.t_max)


def _log_damping(lam, eps: float, a: float, power: float):
    return -eps * (a - np.asarray(lam, dtype=complex)) ** power


class _RayModel:
    """Log-magnitude and phase-rate bounds of the integrand along both rays."""

    def __init__(self, zeta, theta_s, phi, a, power, degree):
        self.zeta, self.a, self.power, self.degree = zeta, a, power, degree
        self.dirs = [cmath.exp(1j * sg * theta_s) for sg in (-1, 1)]
        self.rot = cmath.exp(1j * phi)

    def terms(self, rho):
        """Per ray: damping size ``A``, growth rate ``G`` of ``E``, and phase rates."""
        out = []
        for d in self.dirs:
            lam = rho * d
            w = (self.a - lam) ** self.power
            ang = cmath.phase(lam * self.rot) / self.zeta
            A = w.real
            G = rho ** (1 / self.zeta) * math.cos(ang) if abs(ang) < math.pi else 0.0
            Pa = abs(self.power * w / (self.a - lam))
            Pg = rho ** (1 / self.zeta - 1) / self.zeta
            out.append((A, G, Pa, Pg))
        return out

    def log_size(self, rho, eps, t):
        poly = self.degree * math.log1p(rho)
        return max(-eps * A + t * max(G, 0.0) + poly for A, G, _, _ in self.terms(rho))


def _truncation_radius(model: _RayModel, r: float, a: float, eps: float, t_max: float) -> float:
    target = math.log(DAMPING_FLOOR)

    def small(rho):
        return model.log_size(rho, eps, t_max) <= target

    lo = max(a, r)
    hi = 2 * lo
    while not small(hi):
        lo, hi = hi, hi * 1.5
        if hi > 1e12:
            raise QuadratureUnderResolved("damping never dominates: raise epsilon_floor or lower t_max")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if small(mid):
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-12 * hi:
            break
    return hi


def _ray_breaks(model: _RayModel, r: float, R: float, eps_floor: float, eps_max: float,
                t_max: float) -> list[float]:
    """Panel ends on ``[r, R]`` bounding the integrand's phase change per panel."""
    breaks = [r]
    budget = -math.log(DAMPING_FLOOR)
    while breaks[-1] < R:
        rho = breaks[-1]
        rate = 0.0
        for A, G, Pa, Pg in model.terms(rho):
            t_rel = t_max if G >= 0 else min(t_max, budget / -G)
            eps_rel = min(eps_max, max(eps_floor, (budget + t_max * max(G, 0.0)) / max(A, 1e-300)))
            rate = max(rate, eps_rel * Pa + t_rel * Pg)
        step = _PANEL_PHASE / rate if rate > 0 else math.inf
        nxt = min(rho + step, rho * _RAY_RATIO, R)
        if R - nxt < 1e-9 * R:
            nxt = R
        breaks.append(nxt)
    return breaks


@functools.lru_cache(maxsize=64)
def _contour_cached(zeta: float, theta: float, phi: float, r: float, a: float, b: float, degree: int,
                    points: int, eps_floor: float, eps_ceiling: float, t_max: float):
    theta_s = zeta * math.pi / 2 + theta
    model = _RayModel(zeta, theta_s, phi, a, b / zeta, degree)
    R = _truncation_radius(model, r, a, eps_floor, t_max)
    gx, gw = np.polynomial.legendre.leggauss(points)
    breaks = np.array(_ray_breaks(model, r, R, eps_floor, eps_ceiling, t_max))
    lo, hi = breaks[:-1, None], breaks[1:, None]
    rho = (0.5 * (hi - lo) * gx + 0.5 * (hi + lo)).ravel()
    w_rho = (0.5 * (hi - lo) * gw).ravel()
    up = cmath.exp(1j * theta_s)
    down = cmath.exp(-1j * theta_s)
    lower_nodes = (rho * down)[::-1]
    lower_w = (-down * w_rho)[::-1]
    arc_panels = max(2, math.ceil(2 * theta_s / (math.pi / 8)))
    edges = np.linspace(-theta_s, theta_s, arc_panels + 1)
    a0, a1 = edges[:-1, None], edges[1:, None]
    psi = (0.5 * (a1 - a0) * gx + 0.5 * (a1 + a0)).ravel()
    w_psi = (0.5 * (a1 - a0) * gw).ravel()
    arc_nodes = r * np.exp(1j * psi)
    arc_w = 1j * arc_nodes * w_psi
    upper_nodes = rho * up
    upper_w = up * w_rho
    nodes = np.concatenate([lower_nodes, arc_nodes, upper_nodes])
    weights = np.concatenate([lower_w, arc_w, upper_w]) / (2j * math.pi)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights, R, (lower_nodes.size, arc_nodes.size, upper_nodes.size)


def build_contour(p: PencilProblem, points_per_segment: int = 16, epsilon_floor: float = 0.01,
                  epsilon_ceiling: float = 1.0, t_max: float = 2.0) -> ContourQuadrature:
    """Composite Gauss-Legendre quadrature on ``Gamma``.

    The rays are cut where the integrand, for every ``eps >= epsilon_floor`` and
    ``|z| <= t_max``, is below ``1e-16`` times polynomial factors; panels keep
    its phase change below a fixed budget for ``eps <= epsilon_ceiling``.
    """
    if points_per_segment < 16:
        raise ValueError("points_per_segment must be >= 16")
    if not 0 < epsilon_floor <= epsilon_ceiling:
        raise ValueError("need 0 < epsilon_floor <= epsilon_ceiling")
    if not t_max > 0:
        raise ValueError("t_max must be positive")
    b_interval(p.zeta, p.theta)
    nodes, weights, R, segs = _contour_cached(
        float(p.zeta), float(p.theta), float(p.phi), float(p.r), float(p.a), float(p.b),
        2 * p.q[-1] + 2, int(points_per_segment), float(epsilon_floor), float(epsilon_ceiling), float(t_max))
    return ContourQuadrature(nodes, weights, R, epsilon_floor, epsilon_ceiling, points_per_segment,
                             float(p.b), float(t_max), segs)


def _kernel(zeta: float, gamma: float, args: np.ndarray, log_scale: np.ndarray) -> np.ndarray:
    """``E_{zeta,gamma}(args) * exp(log_scale)`` with closed forms for ``zeta`` in {1, 2}."""
    args = np.asarray(args, dtype=complex)
    if zeta == 1 and gamma == 1:
        return np.exp(args + log_scale)
    if zeta == 2 and gamma == 1:
        s = np.sqrt(args)
        return 0.5 * (np.exp(s + log_scale) + np.exp(-s + log_scale))
    if zeta in (1, 2) and gamma == 2 and not np.any(np.abs(args) < 1e-3):
        if zeta == 1:
            return (np.exp(args + log_scale) - np.exp(log_scale)) / args
        s = np.sqrt(args)
        return 0.5 * (np.exp(s + log_scale) - np.exp(-s + log_scale)) / s
    return ml_eval_many(args, zeta, gamma, log_scale)


def _z_power(z: complex, zeta: float) -> complex:
    z = complex(z)
    if float(zeta).is_integer():
        return z ** int(zeta)
    if z.imag == 0 and z.real < 0:
        raise ValueError(f"z={z} lies on the cut (-inf, 0) for zeta={zeta}")
    return 0j if z == 0 else z**zeta


def _solve_nodes(p: PencilProblem, mu: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """``Q(mu_k)^{-1} rhs`` for every node; ``rhs`` has shape ``(m, r)``."""
    Q = p.pencil(mu)
    cond = np.linalg.cond(Q)
    if not np.all(np.isfinite(cond)) or np.any(cond > _PENCIL_COND_LIMIT):
        k = int(np.argmax(np.where(np.isfinite(cond), cond, np.inf)))
        raise PencilSingular(f"pencil is singular at mu={mu[k]:.6g} (cond {cond[k]:.3e})")
    return np.linalg.solve(Q, np.broadcast_to(rhs, (mu.size,) + rhs.shape))


def _grouped(p: PencilProblem, data, omega: int | None = None) -> dict[int, np.ndarray]:
    """``sum C A_j x_w`` grouped by the power ``q_j - 1 - w`` (optionally one ``w`` only)."""
    groups: dict[int, np.ndarray] = {}
    for w, S in enumerate(support_sets(p.q)):
        if omega is not None and w != omega:
            continue
        xw = np.asarray(data[w], dtype=complex)
        for j in S:
            k = p.q[j] - 1 - w
            groups[k] = groups.get(k, 0) + p.C @ (p.ops[j] @ xw)
    return groups


def _check_data(p: PencilProblem, data_x, data_y):
    qn = p.q[-1]
    X = np.asarray(data_x, dtype=complex).reshape(-1, p.m) if data_x is not None else None
    if X is None or X.shape[0] != qn:
        raise ValueError(f"need {qn} data vectors x_w of length {p.m}")
    needs_y = p.zeta > 1
    if needs_y and data_y is None:
        raise ValueError("zeta > 1 requires the second data family y_w")
    if not needs_y and data_y is not None:
        raise ValueError("the data family y_w only exists for zeta > 1")
    Y = None
    if data_y is not None:
        Y = np.asarray(data_y, dtype=complex).reshape(-1, p.m)
        if Y.shape[0] != qn:
            raise ValueError(f"need {qn} data vectors y_w of length {p.m}")
    return X, Y


def _data_scale(p: PencilProblem, X, Y) -> float:
    s = sum(np.linalg.norm(p.C @ x) for x in X)
    if Y is not None:
        s += sum(np.linalg.norm(p.C @ y) for y in Y)
    return float(s)


def _evaluate(p: PencilProblem, quad: ContourQuadrature, X, Y, eps: float, zs, ps,
              omega: int | None = None) -> np.ndarray:
    """Values for every ``z`` in ``zs`` and ``p`` in ``ps``; shape ``(len(zs), len(ps), m)``."""
    if eps < quad.epsilon_floor * (1 - 1e-12):
        raise ValueError(f"epsilon={eps} is below the quadrature floor {quad.epsilon_floor}")
    lam = quad.nodes
    mu = lam * cmath.exp(1j * p.phi)
    log_damp = _log_damping(lam, eps, p.a, p.b / p.zeta)
    families = [(X, 1.0)] + ([(Y, 2.0)] if Y is not None else [])
    out = np.zeros((len(zs), len(ps), p.m), dtype=complex)
    for data, gamma in families:
        groups = _grouped(p, data, omega)
        if not groups:
            continue
        keys = sorted(groups)
        sol = _solve_nodes(p, mu, np.stack([groups[k] for k in keys], axis=1))  # (K, m, g)
        for iz, z in enumerate(zs):
            if abs(z) > quad.t_max * (1 + 1e-12):
                raise ValueError(f"|z|={abs(z):.6g} exceeds the quadrature's t_max={quad.t_max}")
            kern = quad.weights * _kernel(p.zeta, gamma, _z_power(z, p.zeta) * mu, log_damp)
            if gamma == 2.0:
                kern = complex(z) * kern  # F_lam(z) = z E_{zeta,2}(z^zeta mu)
            for ip, deriv in enumerate(ps):
                coef = np.stack([mu ** (k + deriv) for k in keys], axis=1)  # (K, g)
                integrand = np.einsum("kig,kg->ki", sol, coef)
                out[iz, ip] += kern @ integrand
    return out


def u_epsilon(p: PencilProblem, quad: ContourQuadrature, data_x, data_y=None, epsilon: float = 0.1,
              z: complex = 1.0, deriv_p: int = 0, check: bool = True) -> np.ndarray:
    """Quadrature value of ``(D^zeta)^p u_eps(z)``.

    With ``check`` the value is recomputed with doubled nodes and
    :class:`QuadratureUnderResolved` is raised when the shift exceeds
    ``1e-8`` relative to ``max(|u|, sum |C x_w| + sum |C y_w|)``.
    """
    if deriv_p < 0:
        raise ValueError("deriv_p must be >= 0")
    X, Y = _check_data(p, data_x, data_y)
    val = _evaluate(p, quad, X, Y, epsilon, [z], [deriv_p])[0, 0]
    if check:
        fine = _evaluate(p, quad.refined(p), X, Y, epsilon, [z], [deriv_p])[0, 0]
        shift = _relative_shift(val, fine, _data_scale(p, X, Y))
        if shift > DOUBLING_TOL:
            raise QuadratureUnderResolved(f"node doubling moved the value by {shift:.2e}")
        val = fine
    return val


def _relative_shift(coarse, fine, scale: float) -> float:
    diff = float(np.max(np.abs(np.asarray(coarse) - np.asarray(fine))))
    ref = max(float(np.max(np.abs(fine))), scale, 1e-300)
    return diff / ref


def verify_pde(p: PencilProblem, quad: ContourQuadrature, data_x, data_y=None, epsilon: float = 0.1,
               time_grid: Sequence[float] = (0.0, 0.5, 1.0, 2.0),
               tolerance: float = 1e-10) -> CheckReport:
    """``max_t |sum_i A_i (D^zeta)^{q_i} u_eps(t)|`` relative to the data norm.

    The report also carries the node-doubling shift of the traces.
    """
    X, Y = _check_data(p, data_x, data_y)
    scale = max(_data_scale(p, X, Y), 1e-300)
    ts = [float(t) for t in time_grid]
    orders = sorted(set(p.q))
    traces = _evaluate(p, quad, X, Y, epsilon, ts, orders)
    fine = _evaluate(p, quad.refined(p), X, Y, epsilon, ts, orders)
    shift = _relative_shift(traces, fine, scale)
    worst = 0.0
    for it in range(len(ts)):
        res = sum(A @ fine[it, orders.index(qi)] for qi, A in zip(p.q, p.ops))
        worst = max(worst, float(np.linalg.norm(res)) / scale)
    passed = worst <= tolerance and shift <= DOUBLING_TOL
    return CheckReport("contour_pde_residual", worst, tolerance, passed,
                       {"doubling_shift": shift, "epsilon": epsilon, "times": ts,
                        "nodes": int(quad.nodes.size)})


def neville(xs: Sequence[float], ys: Sequence, x0: float = 0.0):
    """Value at ``x0`` of the polynomial through ``(xs, ys)`` (vector ``ys`` allowed)."""
    xs = [float(x) for x in xs]
    P = [np.asarray(y, dtype=complex) for y in ys]
    n = len(xs)
    for k in range(1, n):
        for i in range(n - k):
            P[i] = ((x0 - xs[i + k]) * P[i] + (xs[i] - x0) * P[i + 1]) / (xs[i] - xs[i + k])
    return P[0]


@dataclass(frozen=True)
class InitialLimitReport:
    l: int
    omega: int
    epsilons: tuple[float, ...]
    deviations: tuple[float, ...]
    monotone: bool
    extrapolated: np.ndarray
    target: np.ndarray
    limit_error: float
    tolerance: float
    passed: bool


def initial_limit_check(p: PencilProblem, quad: ContourQuadrature, data_x, epsilons: Sequence[float],
                        l: int, omega: int, data_y=None, rel_tol: float = 1e-4) -> InitialLimitReport:
    """The ``w = omega`` summand of the ``t = 0`` trace at index ``l`` as ``eps -> 0``.

    Deviations from ``e^{-i phi} delta_{omega l} C x_omega`` must decrease
    along ``epsilons``; the Neville extrapolation to ``eps = 0`` must land
    within ``rel_tol * max(|C x_omega|, 1)`` of the target.
    """
    eps = [float(e) for e in epsilons]
    if any(b >= a for a, b in zip(eps, eps[1:])) or min(eps) <= 0:
        raise ValueError("epsilons must be positive and strictly decreasing")
    qn = p.q[-1]
    if not (0 <= l < qn and 0 <= omega < qn):
        raise ValueError(f"l and omega must lie in 0..{qn - 1}")
    X, Y = _check_data(p, data_x, data_y)
    Cx = p.C @ X[omega]
    target = cmath.exp(-1j * p.phi) * Cx if l == omega else np.zeros(p.m, dtype=complex)
    vals = [_evaluate(p, quad, X, Y, e, [0.0], [l], omega=omega)[0, 0] for e in eps]
    devs = tuple(float(np.linalg.norm(v - target)) for v in vals)
    monotone = all(b < a for a, b in zip(devs, devs[1:])) or max(devs) <= 1e-14
    extrap = neville(eps, vals, 0.0)
    scale = max(float(np.linalg.norm(Cx)), 1.0)
    err = float(np.linalg.norm(extrap - target))
    tol = rel_tol * scale
    return InitialLimitReport(l, omega, tuple(eps), devs, monotone, extrap, target, err, tol,
                              monotone and err <= tol)


@dataclass(frozen=True)
class SectorReport:
    """Sampled constants of the sector hypotheses on ``mu in e^{i phi} Sigma, |mu| >= r``."""

    constant: float
    growth_exponent: float
    bounded: bool
    term_exponents: tuple[float, ...]
    term_orders: tuple[int, ...]
    samples: int


def sector_samples(p: PencilProblem, samples: int = 200, rmax: float = 1e6) -> np.ndarray:
    """Deterministic sample of ``mu``: 20 radii (geometric) times ``samples/20`` angles."""
    nr = 20
    na = max(1, samples // nr)
    radii = np.geomspace(p.r, rmax, nr)
    th = p.sector_angle
    angles = np.linspace(-th, th, na + 2)[1:-1] if na > 1 else np.array([0.0])
    mu = (radii[:, None] * np.exp(1j * (angles[None, :] + p.phi))).ravel()
    return mu


def sector_check(p: PencilProblem, samples: int = 200, rmax: float = 1e6) -> SectorReport:
    """Sample ``(1+|mu|)^{-nu'} |Q(mu)^{-1} C|`` and the growth of ``|A_i Q(mu)^{-1} C|``.

    ``bounded`` means the fitted growth exponent of the first quantity over the
    outer half of the radii is not positive (within 1e-6).  The hypothesis is
    recorded, not enforced: problems failing it can still be solved.
    """
    mu = sector_samples(p, samples, rmax)
    inv = _solve_nodes(p, mu, p.C)
    rad = np.abs(mu)
    norms = np.linalg.norm(inv, ord=2, axis=(1, 2))
    g = (1 + rad) ** (-p.nu_prime) * norms
    outer = rad >= np.sqrt(p.r * rmax)
    slope = float(np.polyfit(np.log1p(rad[outer]), np.log(g[outer]), 1)[0])
    exps, orders = [], []
    for A in p.ops:
        tn = np.linalg.norm(A @ inv, ord=2, axis=(1, 2))
        good = outer & (tn > 0)
        s = float(np.polyfit(np.log1p(rad[good]), np.log(tn[good]), 1)[0]) if good.sum() > 1 else 0.0
        exps.append(s)
        orders.append(max(0, math.ceil(s - 1e-6)))
    return SectorReport(float(np.max(g)), slope, slope <= 1e-6, tuple(exps), tuple(orders), int(mu.size))


def resolvent_map(p: PencilProblem, x):
    """``lam -> Q(lam e^{i phi})^{-1} C x``."""
    x = np.asarray(x, dtype=complex)

    def evaluate(lam):
        mu = complex(lam) * cmath.exp(1j * p.phi)
        return np.linalg.solve(p.pencil(mu), p.C @ x)

    return evaluate


def sector_disks(p: PencilProblem, count: int = 3) -> list[tuple[complex, float]]:
    """Disks ``(centre, radius)`` inside ``{|arg lam| < Theta, |lam| > r}``."""
    th = p.sector_angle
    out = []
    for k in range(count):
        ang = -th / 2 + th * k / max(count - 1, 1)
        centre = 3 * p.r * cmath.exp(1j * ang)
        edge = min(th - abs(ang), math.pi / 2)
        radius = min(p.r, 3 * p.r * math.sin(edge)) * 0.5
        out.append((centre, radius))
    return out


def resolvent_analyticity(p: PencilProblem, x, count: int = 3, nodes: int = 32,
                          tolerance: float = 1e-8) -> list[CheckReport]:
    ev = resolvent_map(p, x)
    return [analyticity_check(ev, c, rad, nodes=nodes, tolerance=tolerance) for c, rad in sector_disks(p, count)]


def damping_constant(p: PencilProblem, quad: ContourQuadrature, epsilon: float, z: complex) -> float:
    """Smallest ``c`` with ``|e^{-eps (a-lam)^{b/zeta}} E_zeta(z^zeta mu)| <= c e^{-eps |a-lam|^{b/zeta}
    cos(b (pi - Theta) / zeta) + |z| |lam|^{1/zeta}}`` over the nodes."""
    lam = quad.nodes
    mu = lam * cmath.exp(1j * p.phi)
    power = p.b / p.zeta
    ml = np.abs(_kernel(p.zeta, 1.0, _z_power(z, p.zeta) * mu, np.zeros(mu.shape)))
    log_lhs = _log_damping(lam, epsilon, p.a, power).real + np.log(np.maximum(ml, 1e-300))
    c = power * (math.pi - p.sector_angle)
    log_rhs = -epsilon * np.abs(p.a - lam) ** power * math.cos(c) + abs(z) * np.abs(lam) ** (1 / p.zeta)
    return float(math.exp(np.max(log_lhs - log_rhs)))


def _poly_of_matrix(coeffs: Sequence[complex], A: np.ndarray) -> np.ndarray:
    """``sum_k c_k A^k`` (ascending coefficients) by Horner's rule."""
    out = np.zeros_like(A)
    eye = np.eye(A.shape[0], dtype=complex)
    for c in reversed(list(coeffs)):
        out = out @ A + complex(c) * eye
    return out


def resolvent_scenario(A, polys: Sequence[Sequence[complex]], lambda0: complex, zeta: float,
                       phi: float, theta: float, r: float, q: Sequence[int] | None = None,
                       a: float | None = None, nu_prime: float | None = None,
                       qprime: int | None = None, margin: float = 0.05,
                       epsilon_floor: float = 0.01) -> PencilProblem:
    """Pencil ``A_i = P_i(A)`` with regularizer ``C = (lambda0 - A)^{-Q'}``.

    ``polys[i]`` lists the coefficients of ``P_i`` in ascending order and
    ``q`` defaults to ``(0, 1, ..., n)``.  For every contour node the roots
    of ``z -> sum_i mu^{q_i} P_i(z)`` must stay at distance at least
    ``margin * (1 + |A|)`` from the spectrum of ``A`` (else
    :class:`RootEscape`).  ``N`` is the smallest integer at least 1 above
    the fitted growth exponent of ``|(z - A)^{-1}|`` over those roots and
    ``Q' = N + 2`` unless ``qprime`` overrides it.
    """
    A = _as_matrix(A)
    m = A.shape[0]
    eye = np.eye(m, dtype=complex)
    shifted = complex(lambda0) * eye - A
    sv = np.linalg.svd(shifted, compute_uv=False)
    if sv[-1] <= 1e-12 * (abs(lambda0) + np.linalg.norm(A, 2) + 1):
        raise NotResolvent(f"lambda0={lambda0} is an eigenvalue of A")
    n = len(polys) - 1
    q = tuple(range(n + 1)) if q is None else _check_exponents(q)
    if len(q) != len(polys):
        raise BadParams("need one exponent per polynomial")
    ops = tuple(_poly_of_matrix(c, A) for c in polys)
    a = 2 * r if a is None else a
    nu_prime = admissible_nu_bound(q) - 0.5 if nu_prime is None else nu_prime
    # provisional problem with C = I locates the contour nodes
    probe = PencilProblem(q, zeta, ops, eye, phi, theta, r, a, nu_prime)
    quad = build_contour(probe, 16, epsilon_floor)
    mu = quad.nodes * cmath.exp(1j * phi)
    spec = np.linalg.eigvals(A)
    gap = margin * (1 + np.linalg.norm(A, 2))
    width = max(len(c) for c in polys)
    coeffs = np.zeros((mu.size, width), dtype=complex)
    for qi, c in zip(q, polys):
        coeffs[:, : len(c)] += (mu**qi)[:, None] * np.asarray(c, dtype=complex)
    roots = []
    for row in coeffs:
        rts = np.roots(row[::-1])
        if rts.size and np.min(np.abs(rts[:, None] - spec[None, :])) < gap:
            raise RootEscape(f"a root of the scalar pencil comes within {gap:.3g} of the spectrum of A")
        roots.extend(rts)
    if roots:
        zs = np.asarray(roots)
        rn = np.array([np.linalg.norm(np.linalg.inv(z * eye - A), 2) for z in zs])
        slope = float(np.polyfit(np.log1p(np.abs(zs)), np.log(rn), 1)[0]) if zs.size > 1 else 0.0
    else:
        slope = 0.0
    N = max(1, math.ceil(slope - 1e-9))
    Qp = N + 2 if qprime is None else int(qprime)
    C = np.linalg.matrix_power(np.linalg.inv(shifted), Qp)
    return PencilProblem(q, zeta, ops, C, phi, theta, r, a, nu_prime)


def scalar_problem(alpha0: float = 1.0, zeta: float = 1.0, theta: float | None = None,
                   r: float = 0.5, a: float = 1.0, phi: float = 0.0) -> PencilProblem:
    """``D^zeta u + alpha0 u = 0``: ``B = 1``, ``A_0 = alpha0``, ``C = 1``."""
    theta = _default_theta(zeta) if theta is None else theta
    return PencilProblem((0, 1), zeta, (np.array([[alpha0]]), np.array([[1.0]])), np.eye(1),
                         phi, theta, r, a, -0.5)


def degenerate_problem(alpha0: float = 1.0, zeta: float = 1.0, r: float = 0.5, a: float = 1.0) -> PencilProblem:
    """``B = diag(1, 0)``, ``A_0 = diag(alpha0, 1)``: the second component is algebraic."""
    return PencilProblem((0, 1), zeta, (np.diag([alpha0, 1.0]), np.diag([1.0, 0.0])), np.eye(2),
                         0.0, _default_theta(zeta), r, a, -0.5)


def diagonal_problem(seed: int = 0, zeta: float = 0.8, r: float = 0.5, a: float = 1.0) -> PencilProblem:
    """Random commuting diagonal family on ``C^3`` with a diagonal regularizer."""
    rng = np.random.default_rng(seed)
    A0 = np.diag(rng.uniform(0.5, 2.0, 3))
    B = np.diag(rng.uniform(0.5, 2.0, 3))
    C = np.diag(rng.uniform(0.5, 1.5, 3))
    return PencilProblem((0, 1), zeta, (A0, B), C, 0.0, _default_theta(zeta), r, a, -0.5)


def second_order_problem(alpha0: float = 0.25, zeta: float = 1.0, r: float = 1.0, a: float = 1.5) -> PencilProblem:
    """``(D^zeta)^2 u + alpha0 u = 0`` (``q = (0, 2)``); the pencil roots lie inside ``|mu| < r``."""
    return PencilProblem((0, 2), zeta, (np.array([[alpha0]]), np.array([[1.0]])), np.eye(1),
                         0.0, _default_theta(zeta), r, a, -1.5)


def _default_theta(zeta: float) -> float:
    """Opening ``Theta = max(0.9 pi, pi - zeta pi / 4)``, inside the admissible interval.

    Wide rays keep ``E_zeta(t^zeta mu)`` small along them and let the
    admissible ``b`` (hence the damping) grow, which shortens the contour.
    """
    return max(0.9 * math.pi, math.pi - zeta * math.pi / 4) - zeta * math.pi / 2


SCENARIOS = {
    "scalar": scalar_problem,
    "degenerate2x2": degenerate_problem,
    "diagonal3x3": diagonal_problem,
    "second_order": second_order_problem,
}


def scenario_data(p: PencilProblem, seed: int = 0):
    """Default data: ``x_0 = (1, 0, ...)`` for the degenerate case, unit-norm random otherwise."""
    qn = p.q[-1]
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((qn, p.m)) + 1j * rng.standard_normal((qn, p.m))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    Y = None
    if p.zeta > 1:
        Y = rng.standard_normal((qn, p.m)) + 1j * rng.standard_normal((qn, p.m))
        Y /= np.linalg.norm(Y, axis=1, keepdims=True)
    return X, Y

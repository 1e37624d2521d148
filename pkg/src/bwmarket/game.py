"""Stackelberg bandwidth market: utilities, best responses, and the exact equilibrium.

Sellers (RSUs) lead by posting per-buyer bandwidth prices inside a regulated
box [c, p_bar]; buyers (UAVs) follow with a budget-constrained concave demand
problem solved in closed form through KKT water-filling.  The leader subgame
is solved per buyer by iterating the sellers' best-response map, which is a
standard function (positive, monotone, scalable), so its fixed point is unique.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

FIXED_POINT_TOL = 1e-9
FIXED_POINT_MAX_ITER = 10_000
KKT_TOL = 1e-8

CASE_BUDGET_INACTIVE = "budget_inactive"
CASE_BUDGET_ACTIVE = "budget_active"


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass
class ChannelLink:
    """Downlink from one seller, parameterized in the dB domain.

    Spectrum efficiency (bits/s/Hz) is derived once at construction:
    q = log2(1 + 10^((power + gain - noise)/10)).
    """

    transmit_power_dbm: float
    channel_gain_db: float
    noise_dbm: float
    spectrum_efficiency: float = field(init=False)

    def __post_init__(self):
        snr_db = self.transmit_power_dbm + self.channel_gain_db - self.noise_dbm
        self.spectrum_efficiency = math.log2(1.0 + 10.0 ** (snr_db / 10.0))
        if not (self.spectrum_efficiency > 0 and math.isfinite(self.spectrum_efficiency)):
            raise ValueError(f"non-positive spectrum efficiency from SNR {snr_db} dB")


@dataclass
class SsimTriple:
    """Luminance/contrast/structure similarity components with exponent weights."""

    luminance: float
    contrast: float
    structure: float
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        for name, v in (("luminance", self.luminance), ("contrast", self.contrast),
                        ("structure", self.structure)):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} component {v} outside [0, 1]")
        if any(w <= 0 for w in self.weights):
            raise ValueError("similarity weights must be positive")


@dataclass
class UavProfile:
    """One buyer: immersion-scaled satisfaction factor, budget, and link quality."""

    delta: float
    budget: float
    ssim_threshold: float
    per_rsu_ssim: list[SsimTriple]

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.budget <= 0:
            raise ValueError("budget must be positive")
        if not 0.0 < self.ssim_threshold < 1.0:
            raise ValueError("ssim_threshold must lie in (0, 1)")


@dataclass
class RsuProfile:
    """One seller: unit bandwidth cost, price cap, and its radio link."""

    bandwidth_cost: float
    price_cap: float
    link: ChannelLink

    def __post_init__(self):
        if self.bandwidth_cost <= 0:
            raise ValueError("bandwidth_cost must be positive")
        if self.bandwidth_cost > self.price_cap:
            raise ValueError("empty price box: cost exceeds cap")


@dataclass
class GameInstance:
    """Full market description: I buyers, J sellers."""

    uavs: list[UavProfile]
    rsus: list[RsuProfile]

    def __post_init__(self):
        if not self.uavs or not self.rsus:
            raise ValueError("need at least one UAV and one RSU")
        J = len(self.rsus)
        for k, uav in enumerate(self.uavs):
            if len(uav.per_rsu_ssim) != J:
                raise ValueError(f"uav {k}: per_rsu_ssim length != {J}")

    @property
    def num_uavs(self) -> int:
        return len(self.uavs)

    @property
    def num_rsus(self) -> int:
        return len(self.rsus)

    def costs(self) -> np.ndarray:
        return np.array([r.bandwidth_cost for r in self.rsus])

    def price_caps(self) -> np.ndarray:
        return np.array([r.price_cap for r in self.rsus])

    def efficiencies(self) -> np.ndarray:
        return np.array([r.link.spectrum_efficiency for r in self.rsus])


@dataclass
class PriceMatrix:
    """J x I seller prices, entrywise inside each seller's [cost, cap] box."""

    prices: np.ndarray

    def __init__(self, prices, instance: GameInstance):
        prices = np.asarray(prices, dtype=float)
        J, I = instance.num_rsus, instance.num_uavs
        if prices.shape != (J, I):
            raise ValueError(f"expected shape {(J, I)}, got {prices.shape}")
        cs = instance.costs()[:, None]
        caps = instance.price_caps()[:, None]
        if np.any(prices < cs - 1e-12) or np.any(prices > caps + 1e-12):
            raise ValueError("price entry outside its [cost, cap] box")
        self.prices = np.clip(prices, cs, caps)


@dataclass
class DemandMatrix:
    """I x J nonnegative buyer demands, per-buyer spend within budget."""

    demands: np.ndarray

    def __init__(self, demands, instance: GameInstance, prices: np.ndarray | None = None):
        demands = np.asarray(demands, dtype=float)
        I, J = instance.num_uavs, instance.num_rsus
        if demands.shape != (I, J):
            raise ValueError(f"expected shape {(I, J)}, got {demands.shape}")
        if np.any(demands < 0):
            raise ValueError("negative demand entry")
        if prices is not None:
            spend = np.sum(demands * prices.T, axis=1)
            budgets = np.array([u.budget for u in instance.uavs])
            if np.any(spend > budgets + 1e-9):
                raise ValueError("per-UAV spend exceeds budget")
        self.demands = demands


@dataclass
class FollowerSolution:
    """One buyer's exact best response to a posted price row."""

    demands: np.ndarray
    case_label: str
    lam: float
    support: frozenset[int]
    degenerate: bool = False


@dataclass
class EquilibriumSolution:
    prices: PriceMatrix
    demands: DemandMatrix
    rsu_utilities: np.ndarray
    uav_utilities: np.ndarray
    per_uav_case: list[str]
    iterations: int
    residual: float
    consistent: bool
    diagnostics: list[str] = field(default_factory=list)


@dataclass
class VerificationReport:
    num_probes: int
    rsu_violations: list[tuple[int, float]]
    uav_violations: list[tuple[int, float]]
    max_violation: float

    @property
    def passed(self) -> bool:
        return not self.rsu_violations and not self.uav_violations


# ---------------------------------------------------------------------------
# Utility operations
# ---------------------------------------------------------------------------

def spectrum_efficiency(link: ChannelLink) -> float:
    """Bits/s/Hz of the link, log2(1 + SNR) with SNR from dB-domain parameters."""
    return link.spectrum_efficiency


def ssim(triple: SsimTriple) -> float:
    """Composite similarity l^alpha * c^beta * s^nu in [0, 1]."""
    a, b, v = triple.weights
    return triple.luminance ** a * triple.contrast ** b * triple.structure ** v


def log_quality(uav: UavProfile, rsu_index: int) -> float:
    """Log-scaled quality margin ln(SSIM / threshold); positive iff above threshold."""
    s = ssim(uav.per_rsu_ssim[rsu_index])
    if s <= 0.0:
        raise ValueError(f"unusable link: SSIM is 0 for rsu {rsu_index}")
    return math.log(s / uav.ssim_threshold)


def log_quality_row(instance: GameInstance, uav_index: int) -> np.ndarray:
    """Per-seller log-quality for one buyer; -inf marks an unusable (SSIM=0) link."""
    uav = instance.uavs[uav_index]
    out = np.empty(instance.num_rsus)
    for j, triple in enumerate(uav.per_rsu_ssim):
        s = ssim(triple)
        out[j] = -np.inf if s <= 0.0 else math.log(s / uav.ssim_threshold)
    return out


def uav_utility(instance: GameInstance, uav_index: int,
                demand_row, price_row) -> float:
    """Buyer surplus: sum_j delta*ln(1 + b_j q_j)*S_j - p_j b_j."""
    b = np.asarray(demand_row, dtype=float)
    p = np.asarray(price_row, dtype=float)
    q = instance.efficiencies()
    S = log_quality_row(instance, uav_index)
    delta = instance.uavs[uav_index].delta
    gain = np.where(b > 0, delta * np.log1p(b * q) * np.where(np.isfinite(S), S, 0.0), 0.0)
    return float(np.sum(gain - p * b))


def rsu_utility(instance: GameInstance, rsu_index: int,
                price_row, demand_column) -> float:
    """Seller margin: sum_i (p_i - c) * b_i."""
    p = np.asarray(price_row, dtype=float)
    b = np.asarray(demand_column, dtype=float)
    c = instance.rsus[rsu_index].bandwidth_cost
    return float(np.sum((p - c) * b))


def immersion_metric(instance: GameInstance, uav_index: int,
                     rsu_index: int, demand: float) -> float:
    """Delta-scaled immersion term delta * ln(1 + b*q) * S for a single link."""
    if demand < 0:
        raise ValueError("demand must be nonnegative")
    if demand == 0.0:
        return 0.0
    q = instance.rsus[rsu_index].link.spectrum_efficiency
    S = log_quality(instance.uavs[uav_index], rsu_index)
    return instance.uavs[uav_index].delta * math.log1p(demand * q) * S


# ---------------------------------------------------------------------------
# Follower (buyer) best response
# ---------------------------------------------------------------------------

def follower_best_response(instance: GameInstance, uav_index: int,
                           price_row) -> FollowerSolution:
    """Exact budget-constrained demand maximizer for one buyer.

    Unconstrained candidates b_j = delta*S_j/p_j - 1/q_j are accepted when the
    total spend fits the budget; otherwise a support-set water-filling computes
    the binding-budget multiplier, dropping sellers whose demand goes
    nonpositive and recomputing until the support is self-consistent.
    """
    p = np.asarray(price_row, dtype=float)
    q = instance.efficiencies()
    S = log_quality_row(instance, uav_index)
    uav = instance.uavs[uav_index]
    delta, R = uav.delta, uav.budget
    J = instance.num_rsus

    zeros = np.zeros(J)
    positive = np.isfinite(S) & (S > 0.0)

    # unconstrained candidates: positive only where marginal value beats price
    cand = np.where(positive & (p < delta * q * np.where(positive, S, 0.0)),
                    delta * np.where(positive, S, 0.0) / p - 1.0 / q, 0.0)
    cand = np.maximum(cand, 0.0)

    if not np.any(cand > 0):
        return FollowerSolution(zeros, CASE_BUDGET_INACTIVE, 0.0, frozenset(),
                                degenerate=not np.any(positive))

    if float(p @ cand) <= R:
        support = frozenset(np.flatnonzero(cand > 0).tolist())
        return FollowerSolution(cand, CASE_BUDGET_INACTIVE, 0.0, support)

    # budget binds: water-filling over the shrinking support set
    support = np.flatnonzero(positive)
    while support.size > 0:
        lam = delta * float(np.sum(S[support])) / (R + float(np.sum(p[support] / q[support]))) - 1.0
        if lam <= 0.0:
            # reduced support fits the budget after all: fall back to candidates
            b = zeros.copy()
            b[support] = np.maximum(delta * S[support] / p[support] - 1.0 / q[support], 0.0)
            if float(p @ b) <= R:
                sup = frozenset(np.flatnonzero(b > 0).tolist())
                return FollowerSolution(b, CASE_BUDGET_INACTIVE, 0.0, sup)
            lam = max(lam, 1e-15)
        b_sup = delta * S[support] / (p[support] * (1.0 + lam)) - 1.0 / q[support]
        if np.all(b_sup > 0):
            b = zeros.copy()
            b[support] = b_sup
            return FollowerSolution(b, CASE_BUDGET_ACTIVE, lam,
                                    frozenset(support.tolist()))
        support = support[b_sup > 0]

    return FollowerSolution(zeros, CASE_BUDGET_INACTIVE, 0.0, frozenset(),
                            degenerate=True)


def all_followers_respond(instance: GameInstance, prices) -> DemandMatrix:
    """Stack every buyer's best response to its price column (J x I prices in)."""
    P = prices.prices if isinstance(prices, PriceMatrix) else np.asarray(prices, dtype=float)
    demands = np.stack([
        follower_best_response(instance, i, P[:, i]).demands
        for i in range(instance.num_uavs)
    ])
    return DemandMatrix(demands, instance, prices=P)


# ---------------------------------------------------------------------------
# Leader (seller) best responses
# ---------------------------------------------------------------------------

def leader_unconstrained_price(instance: GameInstance, rsu_index: int,
                               uav_index: int) -> float:
    """Profit-maximizing price sqrt(delta*S*q*c) when the buyer's budget is slack."""
    S = log_quality_row(instance, uav_index)[rsu_index]
    if not (np.isfinite(S) and S > 0):
        raise ValueError("no profitable price: buyer never demands from this seller")
    rsu = instance.rsus[rsu_index]
    return math.sqrt(instance.uavs[uav_index].delta * S
                     * rsu.link.spectrum_efficiency * rsu.bandwidth_cost)


def leader_best_response_map(instance: GameInstance, uav_index: int,
                             price_vector, clamp: bool = True) -> np.ndarray:
    """Sellers' joint best-response map for one buyer under a binding budget.

    Coordinate j maps to sqrt(q_j c_j S_j (R + sum_{k!=j} p_k/q_k) / sum_{k!=j} S_k),
    restricted to sellers with positive log-quality; a coordinate without
    positive-quality competitors falls back to the slack-budget price.
    """
    p = np.asarray(price_vector, dtype=float)
    q = instance.efficiencies()
    cs = instance.costs()
    caps = instance.price_caps()
    S = log_quality_row(instance, uav_index)
    R = instance.uavs[uav_index].budget
    positive = np.isfinite(S) & (S > 0.0)

    out = cs.astype(float).copy()
    sum_S = float(np.sum(S[positive]))
    sum_pq = float(np.sum(p[positive] / q[positive]))
    for j in range(instance.num_rsus):
        if not positive[j]:
            continue
        denom = sum_S - S[j]
        if denom <= 0.0:
            out[j] = leader_unconstrained_price(instance, j, uav_index)
            continue
        other = sum_pq - p[j] / q[j]
        out[j] = math.sqrt(q[j] * cs[j] * S[j] * (R + other) / denom)
    if clamp:
        out = np.clip(out, cs, caps)
    return out


def _solve_uav_prices(instance: GameInstance, uav_index: int,
                      tolerance: float, max_iterations: int):
    """Equilibrium price column for one buyer (subproblems decouple per buyer).

    Returns (prices, case, iterations, residual, consistent, diagnostic).
    """
    q = instance.efficiencies()
    cs = instance.costs()
    caps = instance.price_caps()
    S = log_quality_row(instance, uav_index)
    delta = instance.uavs[uav_index].delta
    positive = np.isfinite(S) & (S > 0.0)

    if not np.any(positive):
        return cs.copy(), CASE_BUDGET_INACTIVE, 0, 0.0, True, None

    # slack-budget candidate
    p_tilde = cs.copy()
    p_tilde[positive] = np.sqrt(delta * S[positive] * q[positive] * cs[positive])
    p_tilde = np.clip(p_tilde, cs, caps)
    fr_tilde = follower_best_response(instance, uav_index, p_tilde)
    if fr_tilde.case_label == CASE_BUDGET_INACTIVE:
        return p_tilde, CASE_BUDGET_INACTIVE, 0, 0.0, True, None

    # binding-budget candidate: fixed point of the clamped best-response map
    p = p_tilde.copy()
    residual = np.inf
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        p_next = leader_best_response_map(instance, uav_index, p)
        residual = float(np.max(np.abs(p_next - p)))
        p = p_next
        if residual < tolerance:
            break
    fr_hat = follower_best_response(instance, uav_index, p)
    if fr_hat.case_label == CASE_BUDGET_ACTIVE and residual < tolerance:
        return p, CASE_BUDGET_ACTIVE, iterations, residual, True, None

    # case assumptions contradicted: keep the self-consistent candidate, else
    # the more profitable one with a diagnostic
    def total_margin(prices, demands):
        return float(np.sum((prices - cs) * demands))

    inactive_ok = fr_tilde.case_label == CASE_BUDGET_INACTIVE
    active_ok = fr_hat.case_label == CASE_BUDGET_ACTIVE and residual < tolerance
    if active_ok and not inactive_ok:
        return p, CASE_BUDGET_ACTIVE, iterations, residual, True, None
    if inactive_ok and not active_ok:
        return p_tilde, CASE_BUDGET_INACTIVE, iterations, 0.0, True, None
    v_tilde = total_margin(p_tilde, fr_tilde.demands)
    v_hat = total_margin(p, fr_hat.demands)
    diag = (f"uav {uav_index}: mixed-case resolution "
            f"(slack-margin {v_tilde:.6g}, binding-margin {v_hat:.6g})")
    if v_hat >= v_tilde:
        return p, fr_hat.case_label, iterations, residual, False, diag
    return p_tilde, fr_tilde.case_label, iterations, 0.0, False, diag


def solve_equilibrium(instance: GameInstance, tolerance: float = FIXED_POINT_TOL,
                      max_iterations: int = FIXED_POINT_MAX_ITER) -> EquilibriumSolution:
    """Exact Stackelberg equilibrium: per-buyer price columns + true follower demands."""
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    I, J = instance.num_uavs, instance.num_rsus
    P = np.zeros((J, I))
    cases, diagnostics = [], []
    iterations = 0
    residual = 0.0
    consistent = True
    for i in range(I):
        p_i, case, iters, res, ok, diag = _solve_uav_prices(
            instance, i, tolerance, max_iterations)
        P[:, i] = p_i
        cases.append(case)
        iterations = max(iterations, iters)
        residual = max(residual, res)
        consistent = consistent and ok
        if diag:
            diagnostics.append(diag)

    prices = PriceMatrix(P, instance)
    demands = all_followers_respond(instance, prices)
    rsu_utils = np.array([
        rsu_utility(instance, j, P[j], demands.demands[:, j]) for j in range(J)
    ])
    uav_utils = np.array([
        uav_utility(instance, i, demands.demands[i], P[:, i]) for i in range(I)
    ])
    return EquilibriumSolution(prices, demands, rsu_utils, uav_utils, cases,
                               iterations, residual, consistent, diagnostics)


# ---------------------------------------------------------------------------
# Equilibrium verification
# ---------------------------------------------------------------------------

def verify_equilibrium(instance: GameInstance, solution: EquilibriumSolution,
                       num_probes: int = 1000, rng_seed: int = 0,
                       rel_tol: float = 1e-6) -> VerificationReport:
    """Numerical no-profitable-deviation check of the equilibrium definition.

    For each seller, random unilateral price-row perturbations (with followers
    re-solved) must not improve its margin; for each buyer, random feasible
    demand rows must not beat its equilibrium utility.
    """
    rng = np.random.default_rng(rng_seed)
    P = solution.prices.prices
    I, J = instance.num_uavs, instance.num_rsus
    cs = instance.costs()
    caps = instance.price_caps()
    budgets = np.array([u.budget for u in instance.uavs])

    rsu_violations: list[tuple[int, float]] = []
    max_violation = 0.0
    scale = max(1.0, float(np.max(np.abs(solution.rsu_utilities))))
    for j in range(J):
        base = solution.rsu_utilities[j]
        worst = 0.0
        for _ in range(num_probes):
            trial = P.copy()
            trial[j] = rng.uniform(cs[j], caps[j], size=I)
            demands = all_followers_respond(instance, trial)
            v = rsu_utility(instance, j, trial[j], demands.demands[:, j])
            worst = max(worst, (v - base) / scale)
        if worst > rel_tol:
            rsu_violations.append((j, worst))
        max_violation = max(max_violation, worst)

    uav_violations: list[tuple[int, float]] = []
    for i in range(I):
        base = solution.uav_utilities[i]
        p_i = P[:, i]
        worst = 0.0
        uscale = max(1.0, abs(base))
        for _ in range(num_probes):
            b = rng.uniform(0.0, 1.0, size=J)
            b *= rng.uniform(0.0, budgets[i]) / max(float(p_i @ b), 1e-12)
            u = uav_utility(instance, i, b, p_i)
            worst = max(worst, (u - base) / uscale)
        if worst > rel_tol:
            uav_violations.append((i, worst))
        max_violation = max(max_violation, worst)

    return VerificationReport(num_probes, rsu_violations, uav_violations, max_violation)

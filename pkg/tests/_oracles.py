"""Independent brute-force oracles and instance builders shared by the tests."""

from __future__ import annotations

import math

import numpy as np

from bwmarket.game import (
    ChannelLink,
    GameInstance,
    RsuProfile,
    SsimTriple,
    UavProfile,
    log_quality_row,
)


def link_with_efficiency(q: float) -> ChannelLink:
    """Link whose spectrum efficiency equals q (up to float rounding)."""
    snr_db = 10.0 * math.log10(2.0 ** q - 1.0)
    return ChannelLink(transmit_power_dbm=snr_db, channel_gain_db=0.0, noise_dbm=0.0)


def simple_instance(J: int = 2, delta: float = 10.0, ssim: float = 1.0,
                    threshold: float = 0.5, q: float = 10.0, cost: float = 1.0,
                    cap: float = 35.0, budget: float = 2.0) -> GameInstance:
    """Symmetric 1-UAV instance with S = ln(ssim/threshold) on every link."""
    rsus = [RsuProfile(cost, cap, link_with_efficiency(q)) for _ in range(J)]
    uav = UavProfile(delta, budget, threshold,
                     [SsimTriple(ssim, 1.0, 1.0) for _ in range(J)])
    return GameInstance([uav], rsus)


def random_instance(rng: np.random.Generator, I: int, J: int,
                    min_component: float = 0.0) -> GameInstance:
    """Random market drawn from the simulation parameter ranges.

    min_component raises the floor of the similarity components; 0.85 makes
    every log-quality positive (product >= 0.614 > max threshold 0.55).
    """
    rsus = []
    for _ in range(J):
        link = ChannelLink(
            transmit_power_dbm=rng.uniform(20.0, 25.0),
            channel_gain_db=rng.uniform(-25.0, -22.0),
            noise_dbm=rng.uniform(-116.0, -112.0),
        )
        cost = rng.uniform(1.0, 4.0)
        rsus.append(RsuProfile(cost, rng.uniform(5.0, 35.0), link))
    uavs = []
    for _ in range(I):
        triples = [SsimTriple(rng.uniform(min_component, 1.0),
                              rng.uniform(min_component, 1.0),
                              rng.uniform(min_component, 1.0))
                   for _ in range(J)]
        uavs.append(UavProfile(
            delta=rng.uniform(10.0, 20.0),
            budget=rng.uniform(1.0, 20.0),
            ssim_threshold=rng.uniform(0.5, 0.55),
            per_rsu_ssim=triples,
        ))
    return GameInstance(uavs, rsus)


def grid_follower_utility(instance: GameInstance, uav_index: int,
                          price_row, n: int = 200) -> float:
    """Brute-force follower optimum: separable utility over a budget-feasible grid."""
    p = np.asarray(price_row, dtype=float)
    q = instance.efficiencies()
    S = log_quality_row(instance, uav_index)
    uav = instance.uavs[uav_index]
    delta, R = uav.delta, uav.budget
    J = instance.num_rsus
    if J > 3:
        raise ValueError("grid oracle supports J <= 3")

    grids, utils = [], []
    for j in range(J):
        Sj = S[j] if np.isfinite(S[j]) else 0.0
        b_check = delta * Sj / p[j] - 1.0 / q[j] if Sj > 0 else 0.0
        upper = min(R / p[j], max(b_check, 0.0))
        g = np.linspace(0.0, max(upper, 0.0), n)
        grids.append(g)
        utils.append(np.where(g > 0, delta * np.log1p(g * q[j]) * Sj, 0.0) - p[j] * g)

    shape = [1] * J
    total_u = np.zeros([1] * J)
    total_spend = np.zeros([1] * J)
    for j in range(J):
        sh = shape.copy()
        sh[j] = n
        total_u = total_u + utils[j].reshape(sh)
        total_spend = total_spend + (p[j] * grids[j]).reshape(sh)
    feasible = total_spend <= R + 1e-12
    return float(np.max(np.where(feasible, total_u, -np.inf)))

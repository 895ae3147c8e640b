"""Training orchestration: hierarchical rollouts, shaping, and updates.

Each episode runs the twin for `horizon` ticks. High-level agents act every
`high_period` ticks, choosing a route and an emission budget fraction; the
budget induces a speed mask for the low-level agents, so capped runs are
constrained structurally as well as through the dual price. Rewards are
shaped per step (cap penalty, optional per-step fairness) and optionally
folded with an episode-level fairness term before the policy update.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .constraints import DualState, ViolationReport, constraint_penalty, dual_update, violation_stats
from .errors import ConfigurationError, StateCorruptionError
from .fairness import FAIRNESS_MODES, FAIRNESS_TIMINGS, BurdenLedger, fairness_term
from .learner import Learner, PPOHyper, Trajectory, batch_from_trajectories
from .metrics import KPIRecord, episode_kpis
from .policy import (
    BUDGET_FRACTIONS,
    N_ROUTE_CHOICES,
    HighDirective,
    PolicyParams,
    act,
    assemble_input,
    derive_feasible_mask,
    epsilon_at,
    init_policy,
    speed_levels,
)
from .scenario import Scenario
from .seeding import (
    STREAM_ACTION,
    STREAM_ENV_BASE,
    STREAM_POLICY_INIT_HIGH,
    STREAM_POLICY_INIT_LOW,
    STREAM_SHUFFLE,
    spawn_seed,
    stream_rng,
)
from .sim import OBS_LEN, Environment

# Calibrated mean episode emissions of the unconstrained default-scenario
# baseline (3-seed mean of run A's final 50 episodes); the binding cap
# variant is this scaled by AUTO_CAP_FRACTION.
REFERENCE_UNCONSTRAINED_EMISSIONS = 4.1133
AUTO_CAP_FRACTION = 0.85

N_SPEED_LEVELS = 5
N_HIGH_ACTIONS = N_ROUTE_CHOICES * len(BUDGET_FRACTIONS)
_BUDGET_OBS_SCALE = 1.0


@dataclass
class RunConfig:
    """Feature toggles and training dimensions for one run."""

    run_id: str = "custom"
    episodes: int = 1200
    horizon: int = 50
    cap_enabled: bool = False
    c_max: float | str | None = None  # None or "auto" resolves the binding preset
    alpha_lambda: float = 0.005
    dual_mode: str = "cap_only"
    lambda_persist: bool = True
    fairness_enabled: bool = False
    fairness_mode: str = "gini"
    fairness_weight: float = 0.1
    fairness_timing: str = "offline"
    storms_enabled: bool = True
    mask_fraction: float | None = None
    hierarchy_enabled: bool = True
    centralized_baseline: bool = False
    high_period: int = 10
    hyper: PPOHyper = field(default_factory=PPOHyper)

    def __post_init__(self) -> None:
        if self.episodes < 1 or self.horizon < 1:
            raise ConfigurationError("episodes and horizon must be >= 1")
        if self.high_period < 1:
            raise ConfigurationError(f"high_period must be >= 1, got {self.high_period}")
        if self.centralized_baseline and self.hierarchy_enabled:
            raise ConfigurationError(
                "centralized_baseline replaces the hierarchy; disable hierarchy_enabled"
            )
        if self.fairness_mode not in FAIRNESS_MODES:
            raise ConfigurationError(
                f"fairness_mode must be one of {FAIRNESS_MODES}, got '{self.fairness_mode}'"
            )
        if self.fairness_timing not in FAIRNESS_TIMINGS:
            raise ConfigurationError(
                f"fairness_timing must be one of {FAIRNESS_TIMINGS}, got '{self.fairness_timing}'"
            )
        if self.fairness_weight < 0.0:
            raise ConfigurationError(f"fairness_weight must be >= 0, got {self.fairness_weight}")
        if self.mask_fraction is not None and not 0.0 <= self.mask_fraction <= 1.0:
            raise ConfigurationError(f"mask_fraction {self.mask_fraction} outside [0, 1]")
        if isinstance(self.c_max, str) and self.c_max != "auto":
            raise ConfigurationError(f"c_max must be a number, null, or 'auto', got '{self.c_max}'")
        # Instantiating validates alpha and mode ranges.
        DualState(alpha=self.alpha_lambda, mode=self.dual_mode)


def resolve_c_max(config: RunConfig) -> float | None:
    """Concrete cap value, or None when the cap is disabled."""
    if not config.cap_enabled:
        return None
    if config.c_max is None or config.c_max == "auto":
        return AUTO_CAP_FRACTION * REFERENCE_UNCONSTRAINED_EMISSIONS
    value = float(config.c_max)
    if value <= 0.0:
        raise ConfigurationError(f"c_max must be positive, got {value}")
    return value


@dataclass
class RewardComponents:
    """Per-episode decomposition matrices, shape (horizon, n_agents)."""

    base: np.ndarray
    constraint: np.ndarray
    fairness: np.ndarray
    adjusted: np.ndarray

    def max_decomposition_error(self) -> float:
        recomposed = self.base + self.constraint + self.fairness
        return float(np.abs(self.adjusted - recomposed).max()) if self.adjusted.size else 0.0


def shape_rewards(
    base: np.ndarray,
    lam: float,
    emissions: np.ndarray,
    fairness_delta: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-agent (constraint, fairness, adjusted) for one tick."""
    constraint = constraint_penalty(lam, emissions)
    adjusted = base + constraint + fairness_delta
    return constraint, fairness_delta, adjusted


@dataclass
class PolicySet:
    low: PolicyParams | None = None
    high: PolicyParams | None = None
    central: PolicyParams | None = None


@dataclass
class EpisodeOutcome:
    components: RewardComponents
    low_trajs: list[Trajectory]
    high_trajs: list[Trajectory]
    central_traj: Trajectory | None
    cum_history: np.ndarray
    fuel_per_vessel: np.ndarray
    throughput: int
    queue_hours: float
    lam_end: float
    mask_violations: int


def low_input_dim(n_agents: int) -> int:
    return 2 * OBS_LEN + n_agents + 2


def high_input_dim(n_agents: int) -> int:
    return 2 * OBS_LEN + n_agents


def central_input_dim(n_agents: int) -> int:
    return 2 * OBS_LEN * n_agents


def _situational_only_stop(env: Environment, agent: int) -> bool:
    v = env.vessels[agent]
    return v.retired or v.queued or (v.berthed and not v.itinerary)


def _high_action_mask(env: Environment, agent: int) -> np.ndarray:
    """Permit route indices that exist for the vessel's next departure."""
    od = _next_departure(env, agent)
    mask = np.zeros(N_HIGH_ACTIONS)
    if od is None:
        n_routes = 1  # route component is inert; keep all budget choices open
    else:
        n_routes = len(env.scenario.route_options(*od))
    for r in range(min(n_routes, N_ROUTE_CHOICES)):
        for f in range(len(BUDGET_FRACTIONS)):
            mask[r * len(BUDGET_FRACTIONS) + f] = 1.0
    return mask


def _route_command(env: Environment, agent: int, directive: HighDirective | None) -> int:
    """Route index actually dispatched this tick.

    A directive outlives individual departures, so its route choice can
    refer to a departure that already happened; fall back to the first
    route whenever the stored index does not exist for the current one.
    """
    if directive is None:
        return 0
    v = env.vessels[agent]
    if not v.berthed or v.port is None or not v.itinerary:
        return 0
    options = env.scenario.route_options(v.port, v.itinerary[0])
    return directive.route_choice if directive.route_choice < len(options) else 0


def _next_departure(env: Environment, agent: int) -> tuple[int, int] | None:
    v = env.vessels[agent]
    if v.retired or not v.itinerary:
        return None
    if v.berthed and v.port is not None:
        return (v.port, v.itinerary[0])
    # Queued at the head port, or under way toward it: the next departure
    # leaves that port for the leg after it, if any.
    if len(v.itinerary) >= 2:
        return (v.itinerary[0], v.itinerary[1])
    return None


def _issue_directive(
    env: Environment,
    agent: int,
    action: int,
    c_max: float | None,
    levels: np.ndarray,
    window_hours: float,
    t: int,
) -> HighDirective:
    route_choice = action // len(BUDGET_FRACTIONS)
    fraction = BUDGET_FRACTIONS[action % len(BUDGET_FRACTIONS)]
    if c_max is None:
        budget = np.inf
    else:
        remaining = max(0.0, c_max - env.cum_emissions)
        budget = fraction * remaining / max(1, env.scenario.n_vessels)
    mask, cap_speed = derive_feasible_mask(budget, window_hours, env.scenario.k_f, levels)
    return HighDirective(
        agent=agent,
        route_choice=route_choice,
        budget=float(budget),
        speed_cap=cap_speed,
        mask=mask,
        issued_t=t,
    )


def run_episode(
    env: Environment,
    config: RunConfig,
    policies: PolicySet,
    act_rng: np.random.Generator,
    lam: float,
    c_max: float | None,
    epsilon: float,
) -> EpisodeOutcome:
    """One full rollout; returns trajectories, shaped components, and audits."""
    sc = env.scenario
    n = sc.n_vessels
    horizon = env.horizon
    if n == 0:
        raise ConfigurationError("training requires at least one vessel")
    levels = speed_levels(sc.v_max)
    ledger = BurdenLedger(n)

    base_m = np.zeros((horizon, n))
    con_m = np.zeros((horizon, n))
    fair_m = np.zeros((horizon, n))
    adj_m = np.zeros((horizon, n))
    cum_history = np.zeros(horizon)
    mask_violations = 0

    # Per-step storage for late trajectory assembly.
    low_store: list[dict] = []
    high_samples: list[dict] = []  # one entry per (window, agent)
    central_store: list[dict] = []
    directives: list[HighDirective | None] = [None] * n
    window_hours = config.high_period * sc.dt

    for t in range(horizon):
        if config.hierarchy_enabled and t % config.high_period == 0:
            xs = np.zeros((n, high_input_dim(n)))
            masks = np.zeros((n, N_HIGH_ACTIONS))
            for i in range(n):
                obs = env.observe(Environment.HIGH, i)
                xs[i] = assemble_input(obs, i, n)
                masks[i] = _high_action_mask(env, i)
            actions, logps, values = act(
                policies.high, xs, masks, act_rng, epsilon=epsilon
            )
            for i in range(n):
                a = int(actions[i, 0])
                if masks[i, a] != 1.0:
                    mask_violations += 1
                directives[i] = _issue_directive(env, i, a, c_max, levels, window_hours, t)
                high_samples.append({
                    "agent": i, "x": xs[i], "mask": masks[i], "action": a,
                    "logp": float(logps[i]), "value": float(values[i]),
                    "t0": t, "t1": min(t + config.high_period, horizon),
                })

        if config.centralized_baseline:
            parts = []
            cmasks = np.zeros((1, n * N_SPEED_LEVELS))
            for i in range(n):
                obs = env.observe(Environment.LOW, i)
                parts.append(obs.values)
                parts.append(obs.present.astype(np.float64))
                if _situational_only_stop(env, i):
                    cmasks[0, i * N_SPEED_LEVELS] = 1.0
                else:
                    cmasks[0, i * N_SPEED_LEVELS : (i + 1) * N_SPEED_LEVELS] = 1.0
            cx = np.concatenate(parts)[None, :]
            actions, logps, values = act(policies.central, cx, cmasks, act_rng, epsilon=epsilon)
            chosen = actions[0]
            for i in range(n):
                if cmasks[0, i * N_SPEED_LEVELS + int(chosen[i])] != 1.0:
                    mask_violations += 1
            central_store.append({
                "x": cx[0], "mask": cmasks[0], "actions": chosen.copy(),
                "logp": float(logps[0]), "value": float(values[0]),
            })
            speeds = levels[chosen]
            routes = np.zeros(n, dtype=np.int64)
        else:
            xs = np.zeros((n, low_input_dim(n)))
            masks = np.zeros((n, N_SPEED_LEVELS))
            routes = np.zeros(n, dtype=np.int64)
            for i in range(n):
                obs = env.observe(Environment.LOW, i)
                d = directives[i]
                if d is None:
                    extras = np.array([1.0, 1.0])
                    dmask = np.ones(N_SPEED_LEVELS)
                else:
                    budget_norm = 1.0 if np.isinf(d.budget) else min(d.budget, _BUDGET_OBS_SCALE)
                    extras = np.array([d.speed_cap / sc.v_max, budget_norm])
                    dmask = d.mask
                    routes[i] = _route_command(env, i, d)
                xs[i] = assemble_input(obs, i, n, extras)
                if _situational_only_stop(env, i):
                    masks[i, 0] = 1.0
                else:
                    masks[i] = dmask
            actions, logps, values = act(policies.low, xs, masks, act_rng, epsilon=epsilon)
            chosen = actions[:, 0]
            for i in range(n):
                if masks[i, int(chosen[i])] != 1.0:
                    mask_violations += 1
            low_store.append({
                "x": xs, "mask": masks, "actions": chosen.copy(),
                "logp": logps.copy(), "value": values.copy(),
            })
            speeds = levels[chosen]

        metrics = env.step(speeds, routes)
        cum_history[t] = metrics.cum_emissions
        ledger.add(metrics.step_fuel)

        if config.cap_enabled:
            lam = dual_update(lam, metrics.cum_emissions, c_max, config.alpha_lambda,
                              config.dual_mode)
            if lam < 0.0:
                raise StateCorruptionError(f"dual variable went negative: {lam}")
        if config.fairness_enabled and config.fairness_timing == "per_step":
            delta = fairness_term(
                config.fairness_mode, config.fairness_weight,
                ledger.burdens, -ledger.burdens,
            )
        else:
            delta = np.zeros(n)
        con, fair, adjusted = shape_rewards(
            metrics.base_rewards,
            lam if config.cap_enabled else 0.0,
            metrics.step_emissions,
            delta,
        )
        base_m[t] = metrics.base_rewards
        con_m[t] = con
        fair_m[t] = fair
        adj_m[t] = adjusted

    if config.fairness_enabled and config.fairness_timing == "offline":
        delta = fairness_term(
            config.fairness_mode, config.fairness_weight,
            ledger.burdens, -ledger.burdens,
        )
        fair_m += delta[None, :]
        adj_m += delta[None, :]

    low_trajs = [Trajectory() for _ in range(n)]
    high_trajs = [Trajectory() for _ in range(n)]
    central_traj: Trajectory | None = None
    if config.centralized_baseline:
        central_traj = Trajectory()
        for t, entry in enumerate(central_store):
            central_traj.append(
                entry["x"], entry["mask"], entry["actions"], entry["logp"],
                entry["value"], float(adj_m[t].sum()),
            )
    else:
        for t, entry in enumerate(low_store):
            for i in range(n):
                low_trajs[i].append(
                    entry["x"][i], entry["mask"][i], np.array([entry["actions"][i]]),
                    entry["logp"][i], entry["value"][i], float(adj_m[t, i]),
                )
        for sample in high_samples:
            i = sample["agent"]
            high_trajs[i].append(
                sample["x"], sample["mask"], np.array([sample["action"]]),
                sample["logp"], sample["value"],
                float(adj_m[sample["t0"]:sample["t1"], i].sum()),
            )

    env.check_state()
    return EpisodeOutcome(
        components=RewardComponents(base_m, con_m, fair_m, adj_m),
        low_trajs=low_trajs,
        high_trajs=high_trajs,
        central_traj=central_traj,
        cum_history=cum_history,
        fuel_per_vessel=np.array([v.fuel_used for v in env.vessels]),
        throughput=env.throughput,
        queue_hours=env.total_queue_hours,
        lam_end=lam,
        mask_violations=mask_violations,
    )


@dataclass
class TrainResult:
    records: list[KPIRecord]
    policies: PolicySet
    lam: float
    elapsed_seconds: float
    agent_steps: int


def train(
    scenario: Scenario,
    config: RunConfig,
    seed: int,
    progress=None,
) -> TrainResult:
    """Full training run for one seed; deterministic given all arguments."""
    n = scenario.n_vessels
    if n == 0:
        raise ConfigurationError("training requires a scenario with vessels")
    c_max = resolve_c_max(config)
    policies = PolicySet()
    learners: dict[str, Learner] = {}
    if config.centralized_baseline:
        params = init_policy(
            central_input_dim(n), N_SPEED_LEVELS,
            stream_rng(seed, STREAM_POLICY_INIT_LOW), n_heads=n,
        )
        policies.central = params
        learners["central"] = Learner(params, config.hyper)
    else:
        params = init_policy(
            low_input_dim(n), N_SPEED_LEVELS, stream_rng(seed, STREAM_POLICY_INIT_LOW)
        )
        policies.low = params
        learners["low"] = Learner(params, config.hyper)
        if config.hierarchy_enabled:
            hparams = init_policy(
                high_input_dim(n), N_HIGH_ACTIONS,
                stream_rng(seed, STREAM_POLICY_INIT_HIGH),
            )
            policies.high = hparams
            learners["high"] = Learner(hparams, config.hyper)

    act_rng = stream_rng(seed, STREAM_ACTION)
    shuffle_rng = stream_rng(seed, STREAM_SHUFFLE)
    mask_override = config.mask_fraction
    p_storm = None if config.storms_enabled else 0.0

    records: list[KPIRecord] = []
    lam = 0.0
    started = time.perf_counter()
    for episode in range(config.episodes):
        env = Environment(
            scenario, config.horizon, spawn_seed(seed, STREAM_ENV_BASE, episode),
            p_storm=p_storm, mask_fraction=mask_override, cap=c_max,
        )
        if not config.lambda_persist:
            lam = 0.0
        if config.hyper.exploration == "epsilon_greedy":
            epsilon = epsilon_at(
                episode, config.hyper.eps_start, config.hyper.eps_end,
                config.hyper.eps_decay_episodes,
            )
        else:
            epsilon = 0.0
        outcome = run_episode(env, config, policies, act_rng, lam, c_max, epsilon)
        lam = outcome.lam_end

        violations: ViolationReport | None = None
        if config.cap_enabled:
            violations = violation_stats(outcome.cum_history, c_max)
        record = episode_kpis(
            run=config.run_id,
            seed=seed,
            episode=episode,
            reward_adjusted=float(outcome.components.adjusted.sum()),
            reward_base=float(outcome.components.base.sum()),
            emissions=float(outcome.cum_history[-1]),
            fuel_per_vessel=outcome.fuel_per_vessel,
            throughput=outcome.throughput,
            queue_hours=outcome.queue_hours,
            violations=violations,
            lam=lam,
            decomposition_error=outcome.components.max_decomposition_error(),
            mask_violations=outcome.mask_violations,
        )
        records.append(record)

        if config.centralized_baseline:
            batch = batch_from_trajectories(
                [outcome.central_traj], config.hyper.gamma, config.hyper.gae_lambda
            )
            learners["central"].update(batch, shuffle_rng)
        else:
            batch = batch_from_trajectories(
                outcome.low_trajs, config.hyper.gamma, config.hyper.gae_lambda
            )
            learners["low"].update(batch, shuffle_rng)
            if config.hierarchy_enabled:
                hbatch = batch_from_trajectories(
                    outcome.high_trajs, config.hyper.gamma, config.hyper.gae_lambda
                )
                learners["high"].update(hbatch, shuffle_rng)
        if progress is not None:
            progress(episode, record)

    elapsed = time.perf_counter() - started
    return TrainResult(
        records=records,
        policies=policies,
        lam=lam,
        elapsed_seconds=elapsed,
        agent_steps=config.episodes * config.horizon * n,
    )

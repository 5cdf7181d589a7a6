"""Identification strategies with a uniform step-wise interface.

Every strategy owns a :class:`~linbai.linalg.PosteriorState` over V_t = I +
sum x x^T and exposes ``step(rng) -> StrategyStep`` plus ``finalize(rng) ->
(theta, z)``.  The harness never looks inside.

PEPS one step, in order: with the estimate theta_hat_t and precision V_{t-1}
available *before* the step's observation,
  1. z_hat_t = argmax over targets of <z, theta_hat_t>;
  2. sample theta_t from N(theta_hat_t, eta_p^-1 V_{t-1}^-1) restricted to
     the alternative of z_hat_t by rejection (budget exhaustion => this
     step's learner gains are zero and the step continues);
  3. mix lambda_tilde = (1 - t^-alpha) lambda_t + t^-alpha lambda_G when
     forced exploration is on, else lambda_tilde = lambda_t;
  4. draw x_t ~ lambda_tilde, observe y_t = <theta*, x_t> + N(0, sigma^2);
  5. rank-one update of (V, s, theta_hat);
  6. feed the learner gains g_x = <x, theta_t - theta_hat_t>^2.

The doubling wrapper restarts a fresh PEPS per epoch ell with horizon
T_ell = 2^ell and step sizes from :class:`TheoreticalConstants`; the
practical configuration instead runs a single PEPS with AdaHedge, eta_p = 1,
unbounded theta, and no forced exploration.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .design import closest_alternative_from_inverse, g_optimal, tau_star
from .errors import ConfigError, DegenerateTargetError
from .instances import (
    Ball,
    Instance,
    ThetaSpace,
    TopKTargets,
    Unbounded,
    argmax_oracle,
    theta_space_from_json,
)
from .learners import AdaHedge, Hedge
from .linalg import PosteriorState
from .sampling import PosteriorSpec, sample_alternative, sample_theta_space

logger = logging.getLogger(__name__)

_ETA_FLOOR = 1e-12


@dataclass(frozen=True)
class PepsConfig:
    """Tuning knobs for one PEPS run.

    ``eta_lambda``/``eta_p`` set to None mean "automatic": eta_p defaults to
    1 (the practical choice) and eta_lambda is only needed for the Hedge
    learner (AdaHedge tunes itself).  The doubling wrapper passes explicit
    per-epoch values instead.
    """

    horizon: int
    alpha: float = 0.25
    eta_lambda: float | None = None
    eta_p: float | None = None
    learner: str = "adahedge"
    forced_exploration: bool = False
    theta_space: ThetaSpace = field(default_factory=Unbounded)
    rejection_budget: int = 1000

    def __post_init__(self):
        if self.horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {self.horizon}")
        if not (0.0 < self.alpha < 0.5):
            raise ConfigError(f"alpha must lie in (0, 1/2), got {self.alpha}")
        if self.learner not in ("hedge", "adahedge"):
            raise ConfigError(f"learner must be 'hedge' or 'adahedge', got {self.learner!r}")
        if self.rejection_budget < 1:
            raise ConfigError(f"rejection_budget must be >= 1, got {self.rejection_budget}")
        for name in ("eta_lambda", "eta_p"):
            val = getattr(self, name)
            if val is not None and not (val > 0 and math.isfinite(val)):
                raise ConfigError(f"{name} must be positive and finite, got {val}")


@dataclass(frozen=True)
class TheoreticalConstants:
    """Problem constants feeding the doubling-trick step sizes.

    Only constructible for a Ball parameter space: Delta_max (and hence C3)
    is finite only there.  Two C3 conventions exist and are selected by
    ``variant``: "direct" uses Delta_max + L^2 sqrt(d log(T l^2)); the
    "beta" alternative routes through the confidence radius,
    B_X + Delta_max + L^2 beta(T, l^2) with B_X = L B.  Logarithms are
    clamped at zero so the epoch-0 formulas stay finite.
    """

    B: float
    L: float
    delta_max: float
    dim: int
    n_arms: int
    variant: str = "direct"

    def __post_init__(self):
        if self.variant not in ("direct", "beta"):
            raise ConfigError(f"unknown C3 variant {self.variant!r}")
        for name in ("B", "L", "delta_max"):
            if not (getattr(self, name) > 0):
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")

    @classmethod
    def from_instance(cls, instance: Instance, theta_space: ThetaSpace,
                      variant: str = "direct") -> "TheoreticalConstants":
        if not isinstance(theta_space, Ball):
            raise ConfigError(
                "theoretical constants need a Ball parameter space (Delta_max is "
                "unbounded otherwise); use the practical configuration for unbounded theta"
            )
        radius = theta_space.radius
        norm = float(np.linalg.norm(instance.theta_star))
        if radius < norm:
            raise ConfigError(f"ball radius {radius} is below ||theta*|| = {norm:.6g}")
        return cls(
            B=radius,
            L=instance.L,
            delta_max=theta_space.delta_max(instance.L),
            dim=instance.dim,
            n_arms=instance.arms.shape[0],
            variant=variant,
        )

    def beta(self, t: float, inv_delta: float) -> float:
        inner = 2.0 * math.log(max(inv_delta, 1.0)) + self.dim * math.log(
            (self.dim + t * self.L**2) / self.dim
        )
        return self.B + math.sqrt(max(inner, 0.0))

    def c3(self, t_ell: float, ell: int) -> float:
        if self.variant == "beta":
            return self.L * self.B + self.delta_max + self.L**2 * self.beta(t_ell, ell**2)
        inner = self.dim * math.log(max(t_ell * ell**2, 1.0))
        return self.delta_max + self.L**2 * math.sqrt(max(inner, 0.0))

    def eta_lambda(self, t_ell: int, ell: int) -> float:
        c3 = self.c3(t_ell, ell)
        return max(math.sqrt(math.log(self.n_arms) / (c3**2 * t_ell)), _ETA_FLOOR)

    def eta_p(self, t_ell: int, ell: int) -> float:
        c3 = self.c3(t_ell, ell)
        inner = self.dim * max(math.log(t_ell * c3), 0.0) / (c3**2 * t_ell)
        return max(math.sqrt(inner), _ETA_FLOOR)


@dataclass
class StrategyStep:
    chosen_arm: int
    z_hat: object
    rejections_used: int
    aux: dict | None = None


def _draw_from(rng: np.random.Generator, weights: np.ndarray) -> int:
    cdf = np.cumsum(weights)
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(idx, weights.shape[0] - 1)


def _check_identifiable(instance: Instance) -> None:
    if instance.targets.n_targets < 2:
        raise DegenerateTargetError("target set has a single element; nothing to identify")


def _make_learner(config: PepsConfig, n_arms: int):
    if config.learner == "adahedge":
        return AdaHedge(n_arms)
    if config.eta_lambda is None:
        raise ConfigError("the hedge learner needs an explicit eta_lambda (or use adahedge)")
    return Hedge(n_arms, config.eta_lambda)


class Peps:
    """Projection-free sampling strategy (see module docstring for one step)."""

    name = "peps"

    def __init__(self, instance: Instance, config: PepsConfig, g_weights: np.ndarray | None = None):
        _check_identifiable(instance)
        self.instance = instance
        self.config = config
        self.posterior = PosteriorState(instance.dim)
        self.learner = _make_learner(config, instance.arms.shape[0])
        self.eta_p = 1.0 if config.eta_p is None else config.eta_p
        if config.forced_exploration:
            self.g_weights = g_optimal(instance.arms) if g_weights is None else np.asarray(g_weights)
        else:
            self.g_weights = None
        self.exhausted_steps = 0

    @property
    def t(self) -> int:
        return self.posterior.t

    def sampling_distribution(self, t: int) -> np.ndarray:
        lam = self.learner.distribution()
        if self.g_weights is not None:
            gamma = t ** (-self.config.alpha)
            return (1.0 - gamma) * lam + gamma * self.g_weights
        return lam

    def step(self, rng: np.random.Generator) -> StrategyStep:
        inst = self.instance
        t = self.posterior.t + 1
        theta_hat = self.posterior.theta_hat.copy()
        z_hat, _ = argmax_oracle(inst.targets, theta_hat)
        spec = PosteriorSpec(theta_hat, self.posterior.spd, 1.0 / self.eta_p)
        report = sample_alternative(
            rng, spec, inst.targets, z_hat, self.config.rejection_budget
        )
        lam_tilde = self.sampling_distribution(t)
        arm = _draw_from(rng, lam_tilde)
        x = inst.arms[arm]
        y = float(x @ inst.theta_star) + inst.noise_std * rng.standard_normal()
        self.posterior.update(x, y)
        if report.exhausted:
            self.exhausted_steps += 1
            logger.debug("rejection budget exhausted at t=%d; z_hat=%s provisionally confirmed", t, z_hat)
            gains = np.zeros(inst.arms.shape[0])
        else:
            gains = (inst.arms @ (report.sample - theta_hat)) ** 2
        self.learner.update(gains)
        return StrategyStep(arm, z_hat, report.draws_used, {"exhausted": report.exhausted})

    def finalize(self, rng: np.random.Generator):
        """Sample theta_tilde from N(theta_hat, V_T^-1) on theta_space; return its argmax."""
        spec = PosteriorSpec(self.posterior.theta_hat.copy(), self.posterior.spd, 1.0)
        report = sample_theta_space(rng, spec, self.config.theta_space, self.config.rejection_budget)
        if report.exhausted:
            radius = self.config.theta_space.radius
            norm = float(np.linalg.norm(spec.mean))
            theta = spec.mean if norm <= radius else (radius / norm) * spec.mean
            logger.warning("theta-space sampling exhausted; falling back to projected mean")
        else:
            theta = report.sample
        z_out, _ = argmax_oracle(self.instance.targets, theta)
        return theta, z_out


@dataclass
class EpochResult:
    epoch: int
    horizon: int
    eta_lambda: float
    eta_p: float
    z_out: object
    confidence: float
    exhausted_steps: int


class DoublingPeps:
    """Horizon-doubling restart wrapper: epoch ell runs a fresh PEPS for 2^ell steps.

    Step sizes per epoch: eta_lambda = sqrt(log|X| / (C3^2 T)), eta_p =
    sqrt(d log(T C3) / (C3^2 T)), alpha = 1/4, Hedge learner, forced
    exploration on.  Requires a Ball parameter space for the constants.
    """

    name = "peps_doubling"

    def __init__(self, instance: Instance, theta_space: ThetaSpace, max_epoch: int = 30,
                 rejection_budget: int = 1000, c3_variant: str = "direct",
                 mc_draws: int = 1000):
        _check_identifiable(instance)
        if isinstance(theta_space, Unbounded):
            raise ConfigError(
                "the doubling configuration needs a Ball parameter space; "
                "use the practical configuration for unbounded theta"
            )
        if not (0 <= max_epoch <= 30):
            raise ConfigError(f"max_epoch must lie in [0, 30], got {max_epoch}")
        self.instance = instance
        self.theta_space = theta_space
        self.constants = TheoreticalConstants.from_instance(instance, theta_space, c3_variant)
        self.max_epoch = max_epoch
        self.rejection_budget = rejection_budget
        self.mc_draws = mc_draws
        self.g_weights = g_optimal(instance.arms)
        self.epoch = 0
        self.epoch_results: list[EpochResult] = []
        self.inner = self._fresh_epoch(0)

    def _fresh_epoch(self, ell: int) -> Peps:
        t_ell = 2**ell
        config = PepsConfig(
            horizon=t_ell,
            alpha=0.25,
            eta_lambda=self.constants.eta_lambda(t_ell, ell),
            eta_p=self.constants.eta_p(t_ell, ell),
            learner="hedge",
            forced_exploration=True,
            theta_space=self.theta_space,
            rejection_budget=self.rejection_budget,
        )
        return Peps(self.instance, config, g_weights=self.g_weights)

    @property
    def posterior(self) -> PosteriorState:
        return self.inner.posterior

    def step(self, rng: np.random.Generator) -> StrategyStep:
        if self.inner.t >= self.inner.config.horizon:
            self._record_epoch(rng)
            if self.epoch >= self.max_epoch:
                raise ConfigError(f"doubling run exceeded max_epoch={self.max_epoch}")
            self.epoch += 1
            self.inner = self._fresh_epoch(self.epoch)
        out = self.inner.step(rng)
        if out.aux is None:
            out.aux = {}
        out.aux["epoch"] = self.epoch
        return out

    def _record_epoch(self, rng: np.random.Generator) -> None:
        from .sampling import posterior_confidence

        inner = self.inner
        _, z_out = inner.finalize(rng)
        spec = PosteriorSpec(inner.posterior.theta_hat.copy(), inner.posterior.spd, 1.0)
        conf = posterior_confidence(rng, spec, self.instance.targets, z_out, self.mc_draws)
        self.epoch_results.append(
            EpochResult(
                epoch=self.epoch,
                horizon=inner.config.horizon,
                eta_lambda=inner.config.eta_lambda,
                eta_p=inner.config.eta_p,
                z_out=z_out,
                confidence=conf,
                exhausted_steps=inner.exhausted_steps,
            )
        )

    def finalize(self, rng: np.random.Generator):
        return self.inner.finalize(rng)


def doubling_run(instance: Instance, rng: np.random.Generator, max_epoch: int,
                 theta_space: ThetaSpace | None = None, rejection_budget: int = 1000,
                 c3_variant: str = "direct", mc_draws: int = 1000) -> list[EpochResult]:
    """Run epochs 0..max_epoch to completion and return their results."""
    if theta_space is None:
        theta_space = Ball(2.0 * float(np.linalg.norm(instance.theta_star)) + 1e-12)
    wrapper = DoublingPeps(instance, theta_space, max_epoch, rejection_budget, c3_variant, mc_draws)
    for _ in range(2 ** (max_epoch + 1) - 1):
        wrapper.step(rng)
    wrapper._record_epoch(rng)
    return wrapper.epoch_results


class LinTs:
    """Thompson sampling: pull argmax_x <x, theta> for theta drawn from the posterior.

    Only defined when the targets coincide with the arms.
    """

    name = "lints"

    def __init__(self, instance: Instance):
        _check_identifiable(instance)
        if isinstance(instance.targets, TopKTargets) or not np.array_equal(
            instance.targets.vectors, instance.arms
        ):
            raise ConfigError("lints is only defined when the target set equals the arm set")
        self.instance = instance
        self.posterior = PosteriorState(instance.dim)

    def step(self, rng: np.random.Generator) -> StrategyStep:
        inst = self.instance
        theta = self.posterior.sample(rng, 1.0)
        arm = int(np.argmax(inst.arms @ theta))
        x = inst.arms[arm]
        y = float(x @ inst.theta_star) + inst.noise_std * rng.standard_normal()
        self.posterior.update(x, y)
        z_hat, _ = argmax_oracle(inst.targets, self.posterior.theta_hat)
        return StrategyStep(arm, z_hat, 0, None)

    def finalize(self, rng: np.random.Generator):
        theta = self.posterior.theta_hat.copy()
        z_out, _ = argmax_oracle(self.instance.targets, theta)
        return theta, z_out


class LinGame:
    """Projection-based game baseline sharing PEPS's plumbing.

    The max-learner's gains come from the *projected* closest alternative
    theta_alt of the current estimate (a deterministic best-response in the
    A(lambda_t) metric) instead of a posterior sample; arm mixing, LS
    updates, and the learner are identical to PEPS so the comparison
    isolates projection vs sampling.
    """

    name = "lingame"

    def __init__(self, instance: Instance, config: PepsConfig, g_weights: np.ndarray | None = None):
        _check_identifiable(instance)
        self.instance = instance
        self.config = config
        self.posterior = PosteriorState(instance.dim)
        self.learner = _make_learner(config, instance.arms.shape[0])
        if config.forced_exploration:
            self.g_weights = g_optimal(instance.arms) if g_weights is None else np.asarray(g_weights)
        else:
            self.g_weights = None

    @property
    def t(self) -> int:
        return self.posterior.t

    def step(self, rng: np.random.Generator) -> StrategyStep:
        from .design import _inverse_spd, design_matrix  # reuse, not part of the public surface

        inst = self.instance
        t = self.posterior.t + 1
        theta_hat = self.posterior.theta_hat.copy()
        z_hat, _ = argmax_oracle(inst.targets, theta_hat)
        lam = self.learner.distribution()
        a_inv = _inverse_spd(design_matrix(inst.arms, lam))
        br = closest_alternative_from_inverse(a_inv, theta_hat, inst.targets)
        gains = (inst.arms @ (br.minimizer - theta_hat)) ** 2
        if self.g_weights is not None:
            gamma = t ** (-self.config.alpha)
            lam_tilde = (1.0 - gamma) * lam + gamma * self.g_weights
        else:
            lam_tilde = lam
        arm = _draw_from(rng, lam_tilde)
        x = inst.arms[arm]
        y = float(x @ inst.theta_star) + inst.noise_std * rng.standard_normal()
        self.posterior.update(x, y)
        self.learner.update(gains)
        return StrategyStep(arm, z_hat, 0, {"alternative": br.target})

    def finalize(self, rng: np.random.Generator):
        theta = self.posterior.theta_hat.copy()
        z_out, _ = argmax_oracle(self.instance.targets, theta)
        return theta, z_out


class FixedWeight:
    """Pull arms iid from a fixed design; estimate by least squares."""

    name = "fixed"

    def __init__(self, instance: Instance, weights):
        from .design import check_weights

        _check_identifiable(instance)
        self.instance = instance
        self.weights = check_weights(weights, instance.arms.shape[0])
        self.posterior = PosteriorState(instance.dim)

    def step(self, rng: np.random.Generator) -> StrategyStep:
        inst = self.instance
        arm = _draw_from(rng, self.weights)
        x = inst.arms[arm]
        y = float(x @ inst.theta_star) + inst.noise_std * rng.standard_normal()
        self.posterior.update(x, y)
        z_hat, _ = argmax_oracle(inst.targets, self.posterior.theta_hat)
        return StrategyStep(arm, z_hat, 0, None)

    def finalize(self, rng: np.random.Generator):
        theta = self.posterior.theta_hat.copy()
        z_out, _ = argmax_oracle(self.instance.targets, theta)
        return theta, z_out


def glrt_statistic(posterior: PosteriorState, instance: Instance) -> float:
    """min over z != z_hat of ||theta_hat - theta_alt||_{V_t}, via sqrt(2 value).

    The best-response value in the (unnormalized) V_t metric equals
    ½ ||theta_hat - theta_alt||²_{V_t}; callers compare the statistic against
    an anytime bound beta(t, 1/delta) for stopping.
    """
    _check_identifiable(instance)
    br = closest_alternative_from_inverse(
        posterior.spd.vinv, posterior.theta_hat, instance.targets
    )
    return math.sqrt(2.0 * max(br.value, 0.0))


# ---------------------------------------------------------------------------
# configuration-driven construction (harness / CLI surface)

STRATEGY_NAMES = ("peps", "lints", "lingame", "fixed", "oracle")


def make_strategy(instance: Instance, spec: dict, t_max: int):
    """Build a strategy from a JSON-style config dict.

    Recognized keys: strategy (required), mode (practical|theoretical),
    alpha, eta_p, eta_lambda, learner, forced_exploration, rejection_budget,
    theta_space, weights (fixed only), tau_iters (oracle only), label,
    c3_variant (theoretical only).
    """
    if not isinstance(spec, dict):
        raise ConfigError(f"strategy config must be an object, got {type(spec).__name__}")
    known = {
        "strategy", "mode", "alpha", "eta_p", "eta_lambda", "learner", "forced_exploration",
        "rejection_budget", "theta_space", "weights", "tau_iters", "label", "c3_variant",
        "max_epoch",
    }
    unknown = set(spec) - known
    if unknown:
        raise ConfigError(f"unknown strategy config keys: {sorted(unknown)}")
    name = spec.get("strategy")
    if name not in STRATEGY_NAMES:
        raise ConfigError(f"strategy must be one of {STRATEGY_NAMES}, got {name!r}")
    mode = spec.get("mode", "practical")
    if mode not in ("practical", "theoretical"):
        raise ConfigError(f"mode must be 'practical' or 'theoretical', got {mode!r}")
    theta_space = theta_space_from_json(spec["theta_space"]) if "theta_space" in spec else Unbounded()

    if name == "lints":
        return LinTs(instance)
    if name == "fixed":
        if "weights" not in spec:
            raise ConfigError("fixed strategy needs a 'weights' list")
        return FixedWeight(instance, np.asarray(spec["weights"], dtype=np.float64))
    if name == "oracle":
        solution = tau_star(instance, iters=int(spec.get("tau_iters", 2000)))
        return FixedWeight(instance, solution.lambda_star)

    if mode == "theoretical":
        if name != "peps":
            raise ConfigError("theoretical mode applies to the peps strategy only")
        return DoublingPeps(
            instance,
            theta_space,
            max_epoch=int(spec.get("max_epoch", 30)),
            rejection_budget=int(spec.get("rejection_budget", 1000)),
            c3_variant=spec.get("c3_variant", "direct"),
        )

    config = PepsConfig(
        horizon=t_max,
        alpha=float(spec.get("alpha", 0.25)),
        eta_lambda=None if spec.get("eta_lambda") is None else float(spec["eta_lambda"]),
        eta_p=None if spec.get("eta_p") is None else float(spec["eta_p"]),
        learner=spec.get("learner", "adahedge"),
        forced_exploration=bool(
            spec.get("forced_exploration", True if name == "lingame" else False)
        ),
        theta_space=theta_space,
        rejection_budget=int(spec.get("rejection_budget", 1000)),
    )
    if name == "lingame":
        return LinGame(instance, config)
    return Peps(instance, config)


def strategy_label(spec: dict) -> str:
    if "label" in spec:
        return str(spec["label"])
    name = spec.get("strategy", "unknown")
    if spec.get("mode", "practical") == "theoretical":
        return f"{name}_theoretical"
    return name

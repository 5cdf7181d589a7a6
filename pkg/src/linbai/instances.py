"""Benchmark problem instances and the target-set argmax oracle.

An :class:`Instance` bundles the measurement arms X (rows of a matrix), the
identification targets Z (either an explicit vector list or a combinatorial
top-k descriptor that is never materialized), the ground truth theta_star,
and unit observation noise.  All shipped families keep the best target
unique; construction fails otherwise.
"""
from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, InputError
from .linalg import as_matrix, as_vector

logger = logging.getLogger(__name__)

SCHEMA_NAME = "linbai-instance-v1"
_ENUMERATION_CAP = 10**6


# ---------------------------------------------------------------------------
# parameter spaces


@dataclass(frozen=True)
class Unbounded:
    """Theta ranges over all of R^d."""

    kind = "unbounded"

    def delta_max(self, arm_bound: float) -> None:
        return None

    def to_json(self) -> dict:
        return {"kind": "unbounded"}


@dataclass(frozen=True)
class Ball:
    """Theta restricted to the Euclidean ball of the given radius."""

    radius: float
    kind = "ball"

    def __post_init__(self):
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ConfigError(f"ball radius must be positive and finite, got {self.radius}")

    def delta_max(self, arm_bound: float) -> float:
        # max_x max_{theta, theta'} |x^T(theta - theta')| = 2 L B
        return 2.0 * arm_bound * self.radius

    def to_json(self) -> dict:
        return {"kind": "ball", "radius": self.radius}


ThetaSpace = Unbounded | Ball


def theta_space_from_json(obj) -> ThetaSpace:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ConfigError(f"theta_space must be an object with a 'kind' key, got {obj!r}")
    kind = obj["kind"]
    if kind == "unbounded":
        return Unbounded()
    if kind == "ball":
        if "radius" not in obj:
            raise ConfigError("theta_space kind 'ball' requires a 'radius'")
        return Ball(float(obj["radius"]))
    raise ConfigError(f"unknown theta_space kind {kind!r}")


# ---------------------------------------------------------------------------
# target sets


class ExplicitTargets:
    """A finite list of target vectors; keys are integer row indices."""

    def __init__(self, vectors):
        self.vectors = as_matrix(vectors, name="target vectors")
        if self.vectors.shape[0] == 0:
            raise ConfigError("target set must be nonempty")
        self.dim = self.vectors.shape[1]
        self.n_targets = self.vectors.shape[0]

    def argmax(self, theta) -> tuple[int, float]:
        values = self.vectors @ theta
        key = int(np.argmax(values))
        return key, float(values[key])

    def vector(self, key) -> np.ndarray:
        return self.vectors[int(key)]

    def keys(self):
        return range(self.n_targets)

    def to_json(self) -> dict:
        return {"kind": "explicit", "vectors": [list(map(float, row)) for row in self.vectors]}

    def __repr__(self):
        return f"ExplicitTargets(n={self.n_targets}, dim={self.dim})"


class TopKTargets:
    """Targets are indicator vectors of all size-k subsets of {0..d-1}.

    Never materialized: the argmax sorts theta instead of enumerating the
    C(d, k) subsets, with ties broken toward the lexicographically smallest
    index set.  Keys are sorted tuples of indices.
    """

    def __init__(self, dim: int, k: int):
        if not (1 <= k < dim):
            raise ConfigError(f"top-k requires 1 <= k < d, got k={k}, d={dim}")
        self.dim = int(dim)
        self.k = int(k)
        self.n_targets = math.comb(self.dim, self.k)

    def argmax(self, theta) -> tuple[tuple[int, ...], float]:
        theta = np.asarray(theta, dtype=np.float64)
        # stable by index for equal values => lexicographically smallest subset
        order = np.lexsort((np.arange(self.dim), -theta))
        key = tuple(sorted(int(i) for i in order[: self.k]))
        return key, float(theta[list(key)].sum())

    def vector(self, key) -> np.ndarray:
        key = self.check_key(key)
        v = np.zeros(self.dim)
        v[list(key)] = 1.0
        return v

    def check_key(self, key) -> tuple[int, ...]:
        key = tuple(int(i) for i in key)
        if len(key) != self.k or len(set(key)) != self.k:
            raise InputError(f"top-k key must hold {self.k} distinct indices, got {key}")
        if not all(0 <= i < self.dim for i in key):
            raise InputError(f"top-k key indices out of range: {key}")
        return tuple(sorted(key))

    def keys(self):
        if self.n_targets > _ENUMERATION_CAP:
            raise ConfigError(
                f"refusing to enumerate {self.n_targets} top-k targets (cap {_ENUMERATION_CAP})"
            )
        return itertools.combinations(range(self.dim), self.k)

    def mask(self, key) -> np.ndarray:
        m = np.zeros(self.dim, dtype=np.uint8)
        m[list(self.check_key(key))] = 1
        return m

    def swaps(self, key):
        """All (i, j) with i selected, j not: the adjacent-swap alternatives."""
        key = self.check_key(key)
        inside = set(key)
        outside = [j for j in range(self.dim) if j not in inside]
        return [(i, j) for i in key for j in outside]

    def swap_key(self, key, i: int, j: int) -> tuple[int, ...]:
        return tuple(sorted(set(self.check_key(key)) - {i} | {j}))

    def to_json(self) -> dict:
        return {"kind": "topk", "d": self.dim, "k": self.k}

    def __repr__(self):
        return f"TopKTargets(d={self.dim}, k={self.k})"


TargetSet = ExplicitTargets | TopKTargets


def targets_from_json(obj, dim: int) -> TargetSet:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ConfigError(f"targets must be an object with a 'kind' key, got {obj!r}")
    if obj["kind"] == "explicit":
        t = ExplicitTargets(np.asarray(obj["vectors"], dtype=np.float64))
        if t.dim != dim:
            raise ConfigError(f"target dim {t.dim} does not match instance dim {dim}")
        return t
    if obj["kind"] == "topk":
        if int(obj["d"]) != dim:
            raise ConfigError(f"top-k d={obj['d']} does not match instance dim {dim}")
        return TopKTargets(int(obj["d"]), int(obj["k"]))
    raise ConfigError(f"unknown target kind {obj['kind']!r}")


def argmax_oracle(targets: TargetSet, theta):
    """Maximizer of <z, theta> over the target set, with its value.

    Ties break to the lowest index (explicit) or the lexicographically
    smallest index set (top-k).
    """
    theta = as_vector(theta, targets.dim, "theta")
    return targets.argmax(theta)


# ---------------------------------------------------------------------------
# instances

_SPAN_RESIDUAL_TOL = 1e-8


class Instance:
    """Immutable problem description: arms X, targets Z, truth theta_star.

    Derived on construction: the arm-norm bound L, the best target z_star,
    its value, and the minimum gap delta_min = min_{z != z*} <theta*, z*-z>
    (must be positive: the best target is unique).
    """

    def __init__(self, name: str, arms, targets: TargetSet, theta_star, noise_std: float = 1.0):
        self.name = str(name)
        self.arms = as_matrix(arms, name="arms")
        if self.arms.shape[0] < 1:
            raise ConfigError("instance needs at least one arm")
        self.dim = self.arms.shape[1]
        if targets.dim != self.dim:
            raise DimensionError(f"targets dim {targets.dim} != arms dim {self.dim}")
        self.targets = targets
        self.theta_star = as_vector(theta_star, self.dim, "theta_star")
        self.noise_std = float(noise_std)
        if not (self.noise_std >= 0 and math.isfinite(self.noise_std)):
            raise ConfigError(f"noise_std must be finite and >= 0, got {self.noise_std}")

        self.arm_norms = np.linalg.norm(self.arms, axis=1)
        self.L = float(self.arm_norms.max())
        if self.L <= 0:
            raise ConfigError("all arms are zero; nothing to measure")
        self._check_target_span()

        self.z_star, self.best_value = self.targets.argmax(self.theta_star)
        self.delta_min = self._compute_delta_min()
        if not (self.delta_min > 0):
            raise ConfigError(
                f"best target must be unique: minimum gap {self.delta_min:.3g} is not positive"
            )

    # -- validation helpers

    def _check_target_span(self) -> None:
        rank = np.linalg.matrix_rank(self.arms)
        if isinstance(self.targets, TopKTargets):
            # top-k targets span R^d as soon as 1 <= k < d, so the arms must too
            if rank < self.dim:
                raise ConfigError(
                    f"top-k targets need arms spanning R^{self.dim}; arm rank is {rank}"
                )
            return
        # each explicit target must lie in the row space of the arm matrix
        sol, *_ = np.linalg.lstsq(self.arms.T, self.targets.vectors.T, rcond=None)
        resid = self.arms.T @ sol - self.targets.vectors.T
        worst = float(np.abs(resid).max())
        if worst > _SPAN_RESIDUAL_TOL:
            raise ConfigError(
                f"target set leaves the span of the arms (residual {worst:.3g} > {_SPAN_RESIDUAL_TOL})"
            )

    def _compute_delta_min(self) -> float:
        if isinstance(self.targets, TopKTargets):
            # best single swap: k-th largest minus (k+1)-th largest entry
            vals = np.sort(self.theta_star)[::-1]
            return float(vals[self.targets.k - 1] - vals[self.targets.k])
        values = self.targets.vectors @ self.theta_star
        others = np.delete(values, self.z_star)
        if others.size == 0:
            # single target: uniqueness is vacuous; strategies reject this later
            return math.inf
        return float(values[self.z_star] - others.max())

    # -- serialization

    def to_json_dict(self) -> dict:
        return {
            "schema": SCHEMA_NAME,
            "name": self.name,
            "arms": [list(map(float, row)) for row in self.arms],
            "targets": self.targets.to_json(),
            "theta_star": list(map(float, self.theta_star)),
            "noise_std": self.noise_std,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json_dict(cls, obj: dict) -> "Instance":
        try:
            if obj.get("schema", SCHEMA_NAME) != SCHEMA_NAME:
                raise ConfigError(f"unsupported instance schema {obj['schema']!r}")
            arms = np.asarray(obj["arms"], dtype=np.float64)
            targets = targets_from_json(obj["targets"], arms.shape[1] if arms.ndim == 2 else -1)
            return cls(
                name=obj.get("name", "instance"),
                arms=arms,
                targets=targets,
                theta_star=np.asarray(obj["theta_star"], dtype=np.float64),
                noise_std=float(obj.get("noise_std", 1.0)),
            )
        except KeyError as exc:
            raise ConfigError(f"instance JSON missing field {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "Instance":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"instance JSON is malformed: {exc}") from exc
        return cls.from_json_dict(obj)

    def __repr__(self):
        return (
            f"Instance({self.name!r}, n_arms={self.arms.shape[0]}, dim={self.dim}, "
            f"targets={self.targets!r})"
        )


def load_instance(path) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        return Instance.from_json(fh.read())


def save_instance(instance: Instance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(instance.to_json())
        fh.write("\n")


# ---------------------------------------------------------------------------
# shipped families


def make_soare(omega: float) -> Instance:
    """Two-dimensional family with an informative low-gap arm.

    Arms e1, e2 and (cos w, sin w); targets equal the arms; truth (1, 0).
    The best target is always e1 and the e1-vs-arm3 gap 1 - cos(w) shrinks
    as w -> 0, which is what makes small w hard.
    """
    omega = float(omega)
    if not (0.0 < omega < math.pi / 2):
        raise ConfigError(f"omega must lie in (0, pi/2), got {omega}")
    arms = np.array([[1.0, 0.0], [0.0, 1.0], [math.cos(omega), math.sin(omega)]])
    return Instance(
        name=f"soare_omega{omega:g}",
        arms=arms,
        targets=ExplicitTargets(arms),
        theta_star=np.array([1.0, 0.0]),
    )


def make_sphere(rng: np.random.Generator, d: int, n_arms: int, name: str | None = None) -> Instance:
    """Unit-sphere arms with the truth nudged just past the closest pair.

    Arms are iid normalized Gaussians; with (x, x') the closest pair,
    theta_star = x + 0.01 (x' - x), which provably keeps x the unique best
    target (the nudge is too small to flip any comparison).
    """
    d = int(d)
    n_arms = int(n_arms)
    if not n_arms > d or d < 2:
        raise ConfigError(f"sphere family requires n_arms > d >= 2, got d={d}, n_arms={n_arms}")
    for attempt in range(16):
        raw = rng.standard_normal((n_arms, d))
        norms = np.linalg.norm(raw, axis=1)
        if np.any(norms == 0):
            logger.warning("sphere draw produced a zero vector; regenerating")
            continue
        arms = raw / norms[:, None]
        i_best, j_best, best_dist = -1, -1, np.inf
        for i in range(n_arms):
            for j in range(i + 1, n_arms):
                dist = float(np.linalg.norm(arms[i] - arms[j]))
                if dist < best_dist:
                    i_best, j_best, best_dist = i, j, dist
        if best_dist == 0.0:
            logger.warning("sphere closest pair is degenerate (distance 0); regenerating")
            continue
        theta_star = arms[i_best] + 0.01 * (arms[j_best] - arms[i_best])
        return Instance(
            name=name or f"sphere_d{d}_n{n_arms}",
            arms=arms,
            targets=ExplicitTargets(arms),
            theta_star=theta_star,
        )
    raise ConfigError("could not draw a non-degenerate sphere instance in 16 attempts")


def make_topk(d: int, k: int) -> Instance:
    """Canonical basis arms with linearly decaying truth and top-k targets."""
    d = int(d)
    k = int(k)
    if d > 20:
        raise ConfigError(f"top-k family keeps gaps meaningful only for d <= 20, got d={d}")
    if not (1 <= k < d):
        raise ConfigError(f"top-k family requires 1 <= k < d, got k={k}, d={d}")
    theta_star = 1.0 - 0.05 * np.arange(d)
    return Instance(
        name=f"topk_d{d}_k{k}",
        arms=np.eye(d),
        targets=TopKTargets(d, k),
        theta_star=theta_star,
    )

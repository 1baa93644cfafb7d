"""Greedy/robust parameter regions and robust observation-region membership.

A parameter region is the open cone ``{theta : phi_k.theta > phi_i.theta for i != k}``,
stored as the list of normals ``phi_k - phi_i``.  An instance ``mu`` with best
arm ``k`` is robust when every basic solution of ``(Phi, mu)`` lies in that
cone; since each basic solution is linear in ``mu``, the robust observation
region is itself an open polyhedral cone in reward space, described by
:class:`ObservationConstraints`.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product

import numpy as np

from . import _dense
from .errors import (
    BoundaryWarning,
    DegenerateRegion,
    EmptyRegion,
    NotMember,
    RegionTooThin,
    TiedOptimum,
)
from .linalg_core import (
    FeatureMatrix,
    RewardInstance,
    _as_features,
    _as_values,
    enumerate_basic_solutions,
)
from .simplex import feasible_point

BOUNDARY_REL_TOL = 1e-9
MAX_REJECTIONS = 1_000_000
_SAMPLE_BATCH = 4096


@dataclass(frozen=True)
class HalfspaceSystem:
    """Open cone ``{theta : a . theta > 0 for every row a}``."""

    constraints: np.ndarray

    def __post_init__(self):
        a = np.array(self.constraints, dtype=float)
        if a.ndim == 1:
            a = a[None, :] if a.size else a.reshape(0, 0)
        if a.size and np.any(np.all(a == 0.0, axis=1)):
            raise DegenerateRegion("a zero constraint vector encodes a tie; the region is empty")
        a.setflags(write=False)
        object.__setattr__(self, "constraints", a)

    @property
    def dim(self) -> int:
        return self.constraints.shape[1]

    def __len__(self):
        return self.constraints.shape[0]

    def contains(self, theta) -> bool:
        return param_region_contains(self, theta)

    def interior_point(self):
        """A point with ``a . theta >= 1`` for all rows, or ``None`` if the cone is empty."""
        if len(self) == 0:
            return np.zeros(self.dim)
        return feasible_point(self.constraints, np.ones(len(self)))

    def is_empty(self) -> bool:
        return self.interior_point() is None

    def intersect(self, other: "HalfspaceSystem") -> "HalfspaceSystem":
        return HalfspaceSystem(np.vstack([self.constraints, other.constraints]))


def greedy_optimal_arm(mu) -> int:
    values = _as_values(mu)
    k = int(np.argmax(values))
    if np.count_nonzero(values == values[k]) > 1:
        raise TiedOptimum(f"maximum reward {values[k]!r} is attained by several arms")
    return k


def param_region(phi, k: int) -> HalfspaceSystem:
    """Parameters under which arm ``k`` has the strictly largest modelled reward."""
    x = phi.data if isinstance(phi, FeatureMatrix) else np.atleast_2d(np.asarray(phi, dtype=float))
    n = x.shape[0]
    if not 0 <= k < n:
        raise IndexError(f"arm {k} out of range for {n} arms")
    diffs = np.array([x[k] - x[i] for i in range(n) if i != k]).reshape(n - 1, x.shape[1])
    if np.any(np.all(diffs == 0.0, axis=1)):
        raise DegenerateRegion(f"arm {k} shares its feature with another arm")
    return HalfspaceSystem(diffs)


def param_region_contains(region: HalfspaceSystem, theta) -> bool:
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if len(region) == 0:
        return True
    return bool(np.all(region.constraints @ theta > 0.0))


@dataclass(frozen=True)
class Violation:
    subset: tuple
    theta: np.ndarray
    constraint: int


@dataclass(frozen=True)
class RobustMembershipReport:
    is_member: bool
    optimal_arm: object
    violating_subsets: tuple = ()
    margin: float = 0.0
    boundary_warning: bool = False
    empty_region: bool = False

    def to_dict(self):
        return {
            "is_member": self.is_member,
            "optimal_arm": self.optimal_arm,
            "margin": self.margin,
            "boundary_warning": self.boundary_warning,
            "empty_region": self.empty_region,
            "violations": [
                {"subset": list(v.subset), "theta": v.theta.tolist(), "constraint": v.constraint}
                for v in self.violating_subsets
            ],
        }

    def to_text(self) -> str:
        """Line-oriented ``key=value`` rendering used by the command line."""
        arm = self.optimal_arm
        arm_s = ",".join(str(a) for a in arm) if isinstance(arm, (tuple, list)) else str(arm)
        lines = [
            f"is_member={str(self.is_member).lower()}",
            f"optimal_arm={arm_s}",
            f"margin={self.margin!r}",
            f"boundary_warning={str(self.boundary_warning).lower()}",
            f"empty_region={str(self.empty_region).lower()}",
            f"violations={len(self.violating_subsets)}",
        ]
        for v in self.violating_subsets:
            subset = ",".join(map(str, v.subset))
            theta = ",".join(repr(float(t)) for t in v.theta)
            lines.append(f"violation subset={subset} theta={theta} constraint={v.constraint}")
        return "\n".join(lines)


@dataclass(frozen=True)
class ContextualInstance:
    """Contextual problem; row ``x * num_arms + a`` holds context ``x``, arm ``a``."""

    features: FeatureMatrix
    rewards: RewardInstance
    context_probs: np.ndarray
    num_contexts: int
    num_arms: int

    def __post_init__(self):
        feats = _as_features(self.features)
        rewards = self.rewards if isinstance(self.rewards, RewardInstance) else RewardInstance(self.rewards)
        probs = np.array(self.context_probs, dtype=float).reshape(-1)
        n = self.num_contexts * self.num_arms
        if feats.rows != n or len(rewards) != n:
            raise ValueError(f"expected {n} context-arm rows, got {feats.rows} features / {len(rewards)} rewards")
        if probs.shape[0] != self.num_contexts:
            raise ValueError("one probability per context is required")
        if np.any(probs <= 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("context probabilities must be positive and sum to 1")
        for x in range(self.num_contexts):
            greedy_optimal_arm(rewards.values[self.rows(x)])
        probs.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "rewards", rewards)
        object.__setattr__(self, "context_probs", probs)

    @classmethod
    def from_blocks(cls, blocks, rewards, context_probs=None):
        blocks = [np.atleast_2d(np.asarray(b, dtype=float)) for b in blocks]
        num_arms = blocks[0].shape[0]
        if any(b.shape[0] != num_arms for b in blocks):
            raise ValueError("every context needs the same number of arms")
        if context_probs is None:
            context_probs = np.full(len(blocks), 1.0 / len(blocks))
        return cls(FeatureMatrix(np.vstack(blocks)), rewards, context_probs, len(blocks), num_arms)

    def rows(self, x: int) -> slice:
        return slice(x * self.num_arms, (x + 1) * self.num_arms)

    def block(self, x: int) -> np.ndarray:
        return self.features.data[self.rows(x)]

    def blocks(self):
        return [self.block(x) for x in range(self.num_contexts)]

    def rewards_at(self, x: int) -> np.ndarray:
        return self.rewards.values[self.rows(x)]

    def optimal_arms(self) -> tuple:
        return tuple(greedy_optimal_arm(self.rewards_at(x)) for x in range(self.num_contexts))

    def gaps(self) -> np.ndarray:
        """Per-row sub-optimality gaps ``mu_{x,OPT(x)} - mu_{x,a}``."""
        out = np.empty(len(self.rewards))
        for x in range(self.num_contexts):
            r = self.rewards_at(x)
            out[self.rows(x)] = r.max() - r
        return out


def contextual_param_region(blocks, arms, check_empty: bool = True) -> HalfspaceSystem:
    """Intersection over contexts of the per-context parameter regions of ``arms[x]``.

    ``blocks`` is either a :class:`ContextualInstance` (``arms`` may then be
    ``None`` to use its optimal arms) or a sequence of per-context feature
    matrices.  Raises :class:`EmptyRegion` when ``check_empty`` and no
    strictly interior parameter exists.
    """
    if isinstance(blocks, ContextualInstance):
        if arms is None:
            arms = blocks.optimal_arms()
        blocks = blocks.blocks()
    if len(arms) != len(blocks):
        raise ValueError("need one target arm per context")
    system = np.vstack([param_region(b, a).constraints for b, a in zip(blocks, arms)])
    region = HalfspaceSystem(system)
    if check_empty and region.is_empty():
        raise EmptyRegion(f"no parameter makes arms {tuple(arms)} optimal in every context")
    return region


# ---------------------------------------------------------------------------
# reward-space description of robust observation regions


@dataclass(frozen=True)
class ObservationConstraints:
    """Rows ``c`` such that the robust region is ``{mu : c . mu > 0 for all c}``.

    ``labels[i]`` is ``("greedy", x, k, i)`` for optimality constraints or
    ``("basic", J, j)`` for constraint ``j`` of the parameter region applied
    to the basic solution on subset ``J``.
    """

    matrix: np.ndarray
    labels: tuple = field(default_factory=tuple)

    def slack(self, mu) -> np.ndarray:
        """Normalised slack ``c . mu / |c|_1`` per constraint (accepts a batch of rows)."""
        mu = np.asarray(mu, dtype=float)
        norms = np.abs(self.matrix).sum(axis=1)
        raw = mu @ self.matrix.T
        # an all-zero row is a constraint 0 > 0 that no instance satisfies
        return np.divide(raw, norms, out=np.zeros_like(raw), where=norms > 0)

    def margin(self, mu) -> float:
        s = self.slack(mu)
        return float(np.min(s, axis=-1)) if s.size else float("inf")


def _greedy_rows(n, rows, k, x=0):
    out, labels = [], []
    idx = list(range(rows.start, rows.stop))
    for i in idx:
        if i == idx[k]:
            continue
        c = np.zeros(n)
        c[idx[k]] = 1.0
        c[i] = -1.0
        out.append(c)
        labels.append(("greedy", x, k, i - rows.start))
    return out, labels


def _basic_rows(x_full, region, n_keep, exclude=()):
    """Reward-space rows for each (basic subset, region constraint) pair."""
    out, labels = [], []
    dummy = np.zeros(x_full.shape[0])
    normals = region.constraints.T
    for entry in enumerate_basic_solutions(x_full, dummy, exclude=exclude):
        block_t = x_full[list(entry.subset)].T
        # a . (Phi_J^{-1} mu_J) = (Phi_J^{-T} a) . mu_J, one column per constraint a
        coef = _dense.solve(block_t, normals, tol=0.0)
        for j in range(normals.shape[1]):
            c = np.zeros(n_keep)
            for pos, row in enumerate(entry.subset):
                if row < n_keep:
                    c[row] = coef[pos, j]
            out.append(c)
            labels.append(("basic", entry.subset, j))
    return out, labels


def _key(a):
    a = np.ascontiguousarray(a, dtype=float)
    return a.shape, a.tobytes()


@lru_cache(maxsize=256)
def _constraints_cached(kind, key, arms, ridge):
    shape, raw = key
    x = np.frombuffer(raw, dtype=float).reshape(shape)
    if kind == "bandit":
        region = param_region(x, arms[0])
        g, gl = _greedy_rows(shape[0], slice(0, shape[0]), arms[0])
        b, bl = _basic_rows(x, region, shape[0])
    elif kind == "ridge":
        k_rows, d = shape
        region = param_region(x, arms[0])
        aug = np.vstack([x, np.sqrt(ridge) * np.eye(d)])
        g, gl = _greedy_rows(k_rows, slice(0, k_rows), arms[0])
        b, bl = _basic_rows(aug, region, k_rows, exclude=[tuple(range(k_rows, k_rows + d))])
    else:
        num_contexts = len(arms)
        num_arms = shape[0] // num_contexts
        blocks = [x[c * num_arms:(c + 1) * num_arms] for c in range(num_contexts)]
        region = contextual_param_region(blocks, arms, check_empty=False)
        g, gl = [], []
        for c in range(num_contexts):
            rows, labels = _greedy_rows(shape[0], slice(c * num_arms, (c + 1) * num_arms), arms[c], c)
            g += rows
            gl += labels
        b, bl = _basic_rows(x, region, shape[0])
    matrix = np.array(g + b).reshape(-1, shape[0])
    matrix.setflags(write=False)
    return ObservationConstraints(matrix, tuple(gl + bl))


def observation_constraints(phi, k: int) -> ObservationConstraints:
    phi = _as_features(phi)
    if not 0 <= k < phi.rows:
        raise IndexError(f"arm {k} out of range for {phi.rows} arms")
    return _constraints_cached("bandit", _key(phi.data), (int(k),), 0.0)


def observation_constraints_ridge(phi, k: int, ridge: float) -> ObservationConstraints:
    phi = _as_features(phi)
    if not 0 <= k < phi.rows:
        raise IndexError(f"arm {k} out of range for {phi.rows} arms")
    return _constraints_cached("ridge", _key(phi.data), (int(k),), float(ridge))


def observation_constraints_contextual(features, num_contexts, num_arms, arms) -> ObservationConstraints:
    feats = _as_features(features)
    if feats.rows != num_contexts * num_arms or len(arms) != num_contexts:
        raise ValueError("feature rows must equal num_contexts * num_arms, with one arm per context")
    return _constraints_cached("contextual", _key(feats.data), tuple(int(a) for a in arms), 0.0)


@lru_cache(maxsize=256)
def _empty_cached(key):
    shape, raw = key
    return HalfspaceSystem(np.frombuffer(raw, dtype=float).reshape(shape)).is_empty()


# ---------------------------------------------------------------------------
# membership


def _check_basic(solutions, region):
    violations = []
    for entry in solutions:
        vals = region.constraints @ entry.theta
        for j in np.flatnonzero(~(vals > 0.0)):
            violations.append(Violation(entry.subset, entry.theta, int(j)))
    return tuple(violations)


def _finish(is_member, arm, violations, cons, mu, empty=False):
    margin = 0.0
    boundary = False
    if is_member:
        margin = max(cons.margin(mu), 0.0)
        scale = float(np.max(np.abs(mu))) if len(mu) else 0.0
        if margin <= BOUNDARY_REL_TOL * scale:
            boundary = True
            warnings.warn(f"instance lies within {margin:.3g} of the region boundary", BoundaryWarning, stacklevel=3)
    return RobustMembershipReport(is_member, arm, violations, margin, boundary, empty)


def robust_membership(phi, mu) -> RobustMembershipReport:
    """Is ``mu`` in the robust observation region of its own best arm?"""
    phi = _as_features(phi)
    values = _as_values(mu)
    k = greedy_optimal_arm(values)
    region = param_region(phi, k)
    violations = _check_basic(enumerate_basic_solutions(phi, values), region)
    member = not violations
    return _finish(member, k, violations, observation_constraints(phi, k) if member else None, values)


def robust_membership_ridge(phi, mu, ridge: float) -> RobustMembershipReport:
    """Membership in the ridge-regularised robust region.

    Basic solutions are taken over ``[Phi; sqrt(ridge) I]`` with zero-padded
    rewards, skipping only the all-regulariser subset.
    """
    if not ridge > 0:
        raise ValueError("ridge must be positive")
    phi = _as_features(phi)
    values = _as_values(mu)
    k = greedy_optimal_arm(values)
    region = param_region(phi, k)
    k_rows, d = phi.rows, phi.cols
    aug = FeatureMatrix(np.vstack([phi.data, np.sqrt(ridge) * np.eye(d)]))
    sols = enumerate_basic_solutions(aug, np.concatenate([values, np.zeros(d)]),
                                     exclude=[tuple(range(k_rows, k_rows + d))])
    violations = _check_basic(sols, region)
    member = not violations
    cons = observation_constraints_ridge(phi, k, ridge) if member else None
    return _finish(member, k, violations, cons, values)


def robust_membership_contextual(instance: ContextualInstance) -> RobustMembershipReport:
    arms = instance.optimal_arms()
    region = contextual_param_region(instance, arms, check_empty=False)
    empty = _empty_cached(_key(region.constraints))
    violations = _check_basic(enumerate_basic_solutions(instance.features, instance.rewards), region)
    member = not violations and not empty
    cons = None
    if member:
        cons = observation_constraints_contextual(instance.features, instance.num_contexts, instance.num_arms, arms)
    return _finish(member, arms, violations, cons, instance.rewards.values, empty)


def signed_margin(phi, mu) -> float:
    """Smallest normalised slack over the robust-region constraints of ``mu``'s best arm.

    Positive for members (where it equals :func:`interior_margin`), negative
    or zero otherwise; its magnitude is the l_inf depth of the worst violation.
    """
    values = _as_values(mu)
    return observation_constraints(phi, greedy_optimal_arm(values)).margin(values)


def interior_margin(phi, mu) -> float:
    """Half-width of the largest l_inf cell around ``mu`` inside its robust region."""
    values = _as_values(mu)
    report = robust_membership(phi, values)
    if not report.is_member:
        raise NotMember("instance is not in the robust observation region")
    return report.margin


def interior_margin_contextual(instance: ContextualInstance) -> float:
    report = robust_membership_contextual(instance)
    if not report.is_member:
        raise NotMember("contextual instance is not in the robust observation region")
    return report.margin


def interior_margin_ridge(phi, mu, ridge: float) -> float:
    report = robust_membership_ridge(phi, mu, ridge)
    if not report.is_member:
        raise NotMember("instance is not in the ridge robust observation region")
    return report.margin


# ---------------------------------------------------------------------------
# rejection sampling


def _candidates(rng, n, lo, hi, max_draws):
    drawn = 0
    while drawn < max_draws:
        size = min(_SAMPLE_BATCH, max_draws - drawn)
        batch = rng.uniform(lo, hi, size=(size, n))
        drawn += size
        yield batch, drawn


def _rejection(cons, confirm, n, box_low, box_high, seed, count, max_draws):
    if not (np.isfinite(box_low) and np.isfinite(box_high)) or not box_low < box_high:
        raise ValueError("box bounds must be finite with box_low < box_high")
    rng = np.random.Generator(np.random.Philox(seed))
    found = []
    drawn = 0
    for batch, drawn in _candidates(rng, n, box_low, box_high, max_draws):
        slack = cons.slack(batch).min(axis=1) if len(cons.labels) else np.full(len(batch), np.inf)
        scale = np.abs(batch).max(axis=1)
        for i in np.flatnonzero(slack > -BOUNDARY_REL_TOL * scale):
            mu = batch[i]
            if slack[i] <= BOUNDARY_REL_TOL * scale[i] and not confirm(mu):
                continue
            found.append(mu.copy())
            if len(found) == count:
                return found
    raise RegionTooThin(
        f"accepted {len(found)} of {count} requested instances after {drawn} draws "
        f"(acceptance rate < {max(len(found), 3) / max(drawn, 1):.2g})",
        draws=drawn,
        accepted=len(found),
    )


def _quiet(fn):
    def wrapped(*args):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", BoundaryWarning)
            try:
                return fn(*args)
            except TiedOptimum:
                return False
    return wrapped


def sample_robust_instances(phi, k, box_low, box_high, seed, n=1, max_draws=MAX_REJECTIONS):
    """Draw ``n`` instances uniformly from ``[box_low, box_high]^K`` restricted to C_k."""
    phi = _as_features(phi)
    if not 0 <= k < phi.rows:
        raise IndexError(f"arm {k} out of range")
    cons = observation_constraints(phi, k)

    @_quiet
    def confirm(mu):
        r = robust_membership(phi, mu)
        return r.is_member and r.optimal_arm == k

    found = _rejection(cons, confirm, phi.rows, box_low, box_high, seed, n, max_draws)
    return [RewardInstance(m) for m in found]


def sample_robust_instance(phi, k, box_low, box_high, seed, max_draws=MAX_REJECTIONS) -> RewardInstance:
    return sample_robust_instances(phi, k, box_low, box_high, seed, 1, max_draws)[0]


def sample_robust_instances_ridge(phi, k, ridge, box_low, box_high, seed, n=1, max_draws=MAX_REJECTIONS):
    phi = _as_features(phi)
    cons = observation_constraints_ridge(phi, k, ridge)

    @_quiet
    def confirm(mu):
        r = robust_membership_ridge(phi, mu, ridge)
        return r.is_member and r.optimal_arm == k

    found = _rejection(cons, confirm, phi.rows, box_low, box_high, seed, n, max_draws)
    return [RewardInstance(m) for m in found]


def sample_robust_contextual(blocks, arms, box_low, box_high, seed, n=1, context_probs=None,
                             max_draws=MAX_REJECTIONS):
    """Draw contextual instances whose optimal arms are ``arms`` and that lie in C^X."""
    blocks = [np.atleast_2d(np.asarray(b, dtype=float)) for b in blocks]
    num_contexts, num_arms = len(blocks), blocks[0].shape[0]
    feats = FeatureMatrix(np.vstack(blocks))
    arms = tuple(int(a) for a in arms)
    cons = observation_constraints_contextual(feats, num_contexts, num_arms, arms)
    probs = np.full(num_contexts, 1.0 / num_contexts) if context_probs is None else context_probs

    @_quiet
    def confirm(mu):
        inst = ContextualInstance(feats, mu, probs, num_contexts, num_arms)
        r = robust_membership_contextual(inst)
        return r.is_member and tuple(r.optimal_arm) == arms

    found = _rejection(cons, confirm, feats.rows, box_low, box_high, seed, n, max_draws)
    return [ContextualInstance(feats, m, probs, num_contexts, num_arms) for m in found]


def sample_region_points(cons: ObservationConstraints, box_low, box_high, seed, n):
    """Uniform box draws tagged with robust-region membership (for point-cloud dumps)."""
    rng = np.random.Generator(np.random.Philox(seed))
    pts = rng.uniform(box_low, box_high, size=(n, cons.matrix.shape[1]))
    accepted = cons.slack(pts).min(axis=1) > 0.0
    return pts, accepted


def all_region_systems(blocks):
    """Every per-context parameter region and every cross-context intersection.

    Returns ``(per_context, intersections)`` where ``per_context[x][a]`` is a
    :class:`HalfspaceSystem` (or ``None`` when degenerate) and
    ``intersections`` maps arm tuples to ``(system, empty)``.
    """
    blocks = [np.atleast_2d(np.asarray(b, dtype=float)) for b in blocks]
    per_context = []
    for b in blocks:
        row = []
        for a in range(b.shape[0]):
            try:
                row.append(param_region(b, a))
            except DegenerateRegion:
                row.append(None)
        per_context.append(row)
    intersections = {}
    if len(blocks) > 1:
        for arms in product(*[range(b.shape[0]) for b in blocks]):
            parts = [per_context[x][a] for x, a in enumerate(arms)]
            if any(p is None for p in parts):
                intersections[arms] = (None, True)
                continue
            system = HalfspaceSystem(np.vstack([p.constraints for p in parts]))
            intersections[arms] = (system, system.is_empty())
    return per_context, intersections

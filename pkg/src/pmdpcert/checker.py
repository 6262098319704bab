"""Maximal until-probability computation and memoryless policy synthesis.

The objective is the strong until "avoid nothing bad until the target":
a run satisfies it iff it reaches a `reach`-labeled state without visiting
an `avoid`-labeled state first.

Pipeline: qualitative graph analysis pins the probability-0 and
probability-1 states exactly, then Bellman value iteration solves the
remainder from below. Policies are total maps; on probability-1 states the
chosen action comes from the qualitative witness construction, which
guarantees the policy actually attains probability 1 (a raw argmax over
pinned values may tie with actions that loiter forever).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .model import ConcreteMDP


class CheckError(Exception):
    pass


class NonConvergence(CheckError):
    def __init__(self, iterations: int, residual: float, valuation=None):
        msg = f"value iteration did not converge in {iterations} iterations (residual {residual:g})"
        if valuation is not None:
            msg += f" at valuation {valuation}"
        super().__init__(msg)
        self.iterations = iterations
        self.residual = residual
        self.valuation = valuation


class PolicyIncomplete(CheckError):
    def __init__(self, state: int):
        super().__init__(f"policy does not choose an action for required state {state}")
        self.state = state


@dataclass(frozen=True)
class UntilProperty:
    avoid: str
    reach: str


@dataclass(frozen=True)
class SolverConfig:
    epsilon: float = 1e-6
    max_iterations: int = 1_000_000

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class Policy:
    """Memoryless deterministic policy: state -> local action index."""

    choice: dict

    def action(self, state: int):
        return self.choice.get(state)


@dataclass(frozen=True)
class CheckResult:
    value_at_initial: float
    values: np.ndarray
    policy: Policy
    iterations: int
    residual: float


# ---------------------------------------------------------------------------
# Qualitative analysis
# ---------------------------------------------------------------------------

def _masks(m: ConcreteMDP, prop: UntilProperty):
    avoid = m.label_mask(prop.avoid)
    reach = m.label_mask(prop.reach)
    return avoid, reach


def _pair_states(m: ConcreteMDP) -> np.ndarray:
    """Owning state of each state-action pair."""
    return np.repeat(np.arange(m.state_count, dtype=np.int64), np.diff(m.act_ptr))


def prob0_max(m: ConcreteMDP, prop: UntilProperty) -> frozenset:
    """States from which no policy reaches `reach` while avoiding `avoid`.

    Backward existential reachability over avoid-free states, complemented.
    """
    avoid, reach = _masks(m, prop)
    can = reach.copy()
    while True:
        pair_hit = np.logical_or.reduceat(can[m.cols], m.row_ptr[:-1])
        state_hit = np.logical_or.reduceat(pair_hit, m.act_ptr[:-1])
        new = can | (~avoid & state_hit)
        if (new == can).all():
            break
        can = new
    return frozenset(np.flatnonzero(~can).tolist())


def prob1_max(m: ConcreteMDP, prop: UntilProperty) -> frozenset:
    """States with some policy achieving the until objective with probability 1."""
    p1, _ = _prob1_with_witness(m, prop)
    return frozenset(np.flatnonzero(p1).tolist())


def _prob1_with_witness(m: ConcreteMDP, prop: UntilProperty):
    """Greatest fixed point of the standard double-fixpoint construction.

    Returns (mask, witness) where witness[s] is, for states in the set but
    not labeled `reach`, a local action index that stays inside the set and
    makes progress toward the target (so the induced chain reaches it almost
    surely). The action recorded is the lowest-index qualifying one in the
    layer where s was added, which keeps synthesis deterministic.
    """
    avoid, reach = _masks(m, prop)
    pair_state = _pair_states(m)
    n = m.state_count
    u = np.ones(n, dtype=bool)
    witness = np.full(n, -1, dtype=np.int64)

    while True:
        v = reach.copy()
        witness[:] = -1
        while True:
            pair_stay = np.logical_and.reduceat(u[m.cols], m.row_ptr[:-1])
            pair_prog = np.logical_or.reduceat(v[m.cols], m.row_ptr[:-1])
            pair_good = pair_stay & pair_prog
            # First qualifying pair per state (len(row_ptr)-1 when none).
            npairs = len(pair_good)
            masked = np.where(pair_good, np.arange(npairs, dtype=np.int64), npairs)
            first_good = np.minimum.reduceat(masked, m.act_ptr[:-1])
            state_good = first_good < npairs
            added = ~v & ~avoid & state_good
            if not added.any():
                break
            witness[added] = first_good[added] - m.act_ptr[:-1][added]
            v |= added
        if (v == u).all():
            return u, witness
        u = v


# ---------------------------------------------------------------------------
# Quantitative solve + policy synthesis
# ---------------------------------------------------------------------------

def max_until(m: ConcreteMDP, prop: UntilProperty,
              cfg: SolverConfig = SolverConfig()) -> CheckResult:
    """Maximal until probability per state with a synthesized total policy.

    Values start at 1 on the probability-1 set and 0 elsewhere (including
    the pinned probability-0 set) and iterate from below; the policy is the
    per-state argmax with lowest-action-index tie-break on iterated states
    and the qualitative witness on pinned probability-1 states.
    """
    avoid, reach = _masks(m, prop)
    p0 = prob0_max(m, prop)
    p1_mask, witness = _prob1_with_witness(m, prop)

    x0 = np.zeros(m.state_count, dtype=np.float64)
    x0[p1_mask] = 1.0
    frozen = p1_mask.copy()
    frozen[list(p0)] = True

    values, iterations, residual = kernels.value_iteration(
        m.act_ptr, m.row_ptr, m.cols, m.probs,
        frozen.astype(np.uint8), x0, cfg.epsilon, cfg.max_iterations)
    if residual >= cfg.epsilon:
        raise NonConvergence(iterations, residual)

    choice = _synthesize_choice(m, values, p1_mask, witness, reach, frozen)
    return CheckResult(
        value_at_initial=float(values[m.initial]),
        values=values,
        policy=Policy(choice),
        iterations=iterations,
        residual=residual,
    )


def _synthesize_choice(m, values, p1_mask, witness, reach, frozen) -> dict:
    pair_vals = kernels.backup_pairs(m.row_ptr, m.cols, m.probs, values)
    choice = {}
    act_ptr = m.act_ptr
    for s in range(m.state_count):
        lo, hi = act_ptr[s], act_ptr[s + 1]
        if p1_mask[s] and not reach[s] and witness[s] >= 0:
            choice[s] = int(witness[s])
        elif frozen[s]:
            choice[s] = 0
        else:
            choice[s] = int(np.argmax(pair_vals[lo:hi]))
    return choice


def _pair_indices(m: ConcreteMDP, pol: Policy, required: np.ndarray) -> np.ndarray:
    """Global state-action pair chosen by the policy at each state.

    States where the policy is silent fall back to action 0; that is only
    legal where `required` is False (the caller passes the complement of the
    states whose value the chain solve actually depends on).
    """
    pair_idx = np.empty(m.state_count, dtype=np.int64)
    for s in range(m.state_count):
        a = pol.action(s)
        if a is None:
            if required[s]:
                raise PolicyIncomplete(s)
            a = 0
        lo, hi = m.act_ptr[s], m.act_ptr[s + 1]
        if not (0 <= a < hi - lo):
            raise PolicyIncomplete(s)
        pair_idx[s] = lo + a
    return pair_idx


def _chain_arrays(m: ConcreteMDP, pol: Policy, required: np.ndarray):
    """Flatten the induced Markov chain: one row per state."""
    pair_idx = _pair_indices(m, pol, required)
    lengths = (m.row_ptr[pair_idx + 1] - m.row_ptr[pair_idx]).astype(np.int64)
    crow_ptr = np.concatenate(([0], np.cumsum(lengths)))
    take = np.concatenate([np.arange(m.row_ptr[k], m.row_ptr[k + 1]) for k in pair_idx]) \
        if m.state_count else np.empty(0, dtype=np.int64)
    ccols = m.cols[take]
    cprobs = m.probs[take]
    cact_ptr = np.arange(m.state_count + 1, dtype=np.int64)
    return cact_ptr, crow_ptr.astype(np.int64), ccols, cprobs, pair_idx


def _chain_prob01(cact_ptr, crow_ptr, ccols, avoid, reach):
    """Exact value-0 and value-1 state masks of the induced chain."""
    n = len(cact_ptr) - 1
    can = reach.copy()
    while True:
        hit = np.logical_or.reduceat(can[ccols], crow_ptr[:-1])
        new = can | (~avoid & hit)
        if (new == can).all():
            break
        can = new
    zero = ~can

    # value < 1 iff the chain can reach, without passing through `reach`,
    # a state that is avoid-labeled or value-zero.
    bad = (avoid & ~reach) | zero
    risky = bad.copy()
    while True:
        hit = np.logical_or.reduceat(risky[ccols], crow_ptr[:-1])
        new = risky | (~reach & hit)
        if (new == risky).all():
            break
        risky = new
    one = ~risky
    return zero, one


def _policy_value(m: ConcreteMDP, pol: Policy, prop: UntilProperty, cfg: SolverConfig):
    avoid, reach = _masks(m, prop)
    required = ~reach  # refined below: prob0 states are also exempt
    p0 = prob0_max(m, prop)
    required[list(p0)] = False
    cact_ptr, crow_ptr, ccols, cprobs, pair_idx = _chain_arrays(m, pol, required)
    zero, one = _chain_prob01(cact_ptr, crow_ptr, ccols, avoid, reach)

    x0 = np.zeros(m.state_count, dtype=np.float64)
    x0[one] = 1.0
    frozen = zero | one
    values, iterations, residual = kernels.value_iteration(
        cact_ptr, crow_ptr, ccols, cprobs,
        frozen.astype(np.uint8), x0, cfg.epsilon, cfg.max_iterations)
    if residual >= cfg.epsilon:
        raise NonConvergence(iterations, residual)
    return values, iterations, residual, pair_idx


def evaluate_policy(m: ConcreteMDP, pol: Policy, prop: UntilProperty,
                    cfg: SolverConfig = SolverConfig()) -> float:
    """Until probability of the chain induced by a fixed policy, at the initial state."""
    values, _, _, _ = _policy_value(m, pol, prop, cfg)
    return float(values[m.initial])


def evaluate_policy_detailed(m, pol, prop, cfg: SolverConfig = SolverConfig()):
    """(value at initial, iterations, residual); used by sweep records."""
    values, iterations, residual, _ = _policy_value(m, pol, prop, cfg)
    return float(values[m.initial]), iterations, residual


def simulate(m: ConcreteMDP, pol: Policy, prop: UntilProperty,
             episodes: int, horizon: int, seed: int) -> float:
    """Monte Carlo conformance estimate of the policy's until probability.

    Episodes that neither reach the target nor hit an avoid state within
    `horizon` steps count as failures (a conservative bias, never an
    overstatement of safety). Deterministic given the seed.
    """
    if episodes < 1 or horizon < 1:
        raise ValueError("episodes and horizon must be >= 1")
    avoid, reach = _masks(m, prop)
    required = ~reach
    required[list(prob0_max(m, prop))] = False
    pair_idx = _pair_indices(m, pol, required)

    # Per-row inclusive cumulative sums, shared verbatim by both kernel paths.
    cumprobs = np.empty_like(m.probs)
    for k in range(len(m.row_ptr) - 1):
        lo, hi = m.row_ptr[k], m.row_ptr[k + 1]
        cumprobs[lo:hi] = np.cumsum(m.probs[lo:hi])

    successes = kernels.simulate_episodes(
        int(m.initial), pair_idx, np.asarray(m.row_ptr), np.asarray(m.cols), cumprobs,
        reach.astype(np.uint8), avoid.astype(np.uint8),
        int(episodes), int(horizon), int(seed))
    return successes / episodes


# ---------------------------------------------------------------------------
# Policy export
# ---------------------------------------------------------------------------

def write_policy(pol: Policy, f, header: str = "") -> None:
    """Text map `state-index action-index`, one per line, with # header lines."""
    if header:
        for line in header.splitlines():
            f.write(f"# {line}\n")
    for s in sorted(pol.choice):
        f.write(f"{s} {pol.choice[s]}\n")


def read_policy(f) -> Policy:
    choice = {}
    for raw in f:
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        s, a = line.split()
        choice[int(s)] = int(a)
    return Policy(choice)

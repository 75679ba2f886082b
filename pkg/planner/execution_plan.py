"""
Execution Planner

Builds every execution plan with the minimum number of decomposition units
(one unit per vertex of a minimum connected dominating set), then picks one:

    fewest units -> smallest span of dp_0.piv -> highest verification score
    -> highest degree-weighted score -> smallest pivot/leaf ids

Patterns are tiny (at most 16 vertices), so all searches are exhaustive.
"""

import itertools
import logging
import math
import random
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, Iterator, List, Optional, Sequence, Set, Tuple

import networkx as nx
from networkx.algorithms.tree.mst import SpanningTreeIterator

from graph.pattern import (
    MAX_PATTERN_VERTICES,
    NO_CONSTRAINTS,
    Edge,
    OrderConstraints,
    QueryPattern,
    canonical_edge,
    span,
    symmetry_constraints,
)
from utils.errors import NotAPlanError, PatternTooLargeError, PlanError

logger = logging.getLogger(__name__)

DEFAULT_RHO = 1.0
DEFAULT_MLST_SEARCH_LIMIT = 200000
SCORE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class DecompositionUnit:
    piv: int
    leaves: Tuple[int, ...]
    e_star: FrozenSet[Edge] = frozenset()
    e_sib: FrozenSet[Edge] = frozenset()
    e_cro: FrozenSet[Edge] = frozenset()

    @property
    def verification_edges(self) -> FrozenSet[Edge]:
        return self.e_sib | self.e_cro


@dataclass(frozen=True)
class ExecutionPlan:
    units: Tuple[DecompositionUnit, ...]
    rho: float = DEFAULT_RHO
    matching_order: Tuple[int, ...] = ()
    constraints: OrderConstraints = field(default=NO_CONSTRAINTS, compare=False)

    @property
    def pivots(self) -> Tuple[int, ...]:
        return tuple(unit.piv for unit in self.units)

    def key(self) -> Tuple:
        return tuple((unit.piv, tuple(unit.leaves)) for unit in self.units)

    def vertices_through(self, i: int) -> Set[int]:
        """V_{P_i}"""
        vertices = {self.units[0].piv}
        for unit in self.units[: i + 1]:
            vertices.update(unit.leaves)
        return vertices

    def prefix_size(self, i: int) -> int:
        """|V_{P_i}|; -1 gives the single seed vertex."""
        if i < 0:
            return 1
        return 1 + sum(len(unit.leaves) for unit in self.units[: i + 1])

    def position(self, u: int) -> int:
        return self.matching_order.index(u)


# ===== DOMINATION =====

def is_connected_dominating(p: QueryPattern, subset: Set[int]) -> bool:
    if not subset:
        return False
    return nx.is_dominating_set(p.graph, subset) and nx.is_connected(p.graph.subgraph(subset))


def _spanning_trees(p: QueryPattern, subset: Sequence[int]) -> Iterator[Tuple[Edge, ...]]:
    """Every spanning tree of the subgraph induced by subset, as sorted edge tuples."""
    induced = p.graph.subgraph(subset)
    if induced.number_of_nodes() == 1:
        yield ()
        return
    for tree in SpanningTreeIterator(induced):
        yield tuple(sorted(canonical_edge(a, b) for a, b in tree.edges()))


def max_leaf_spanning_tree(p: QueryPattern, search_limit: int = DEFAULT_MLST_SEARCH_LIMIT) -> Optional[Tuple[int, Tuple[Edge, ...]]]:
    """
    Exhaustive maximum-leaf spanning tree.

    Returns (leaf count, tree edges), or None when the number of candidate
    edge subsets exceeds search_limit.
    """
    n = len(p.vertices)
    if math.comb(len(p.edges), n - 1) > search_limit:
        return None
    best: Optional[Tuple[int, Tuple[Edge, ...]]] = None
    for tree in _spanning_trees(p, p.vertices):
        leaves = sum(1 for _, d in nx.Graph(tree).degree() if d == 1)
        if best is None or leaves > best[0] or (leaves == best[0] and tree < best[1]):
            best = (leaves, tree)
    return best


def connected_dominating_number(
    p: QueryPattern, search_limit: int = DEFAULT_MLST_SEARCH_LIMIT
) -> Tuple[int, List[FrozenSet[int]]]:
    """c_P and every minimum connected dominating set, smallest subsets first."""
    n = len(p.vertices)
    if n > MAX_PATTERN_VERTICES:
        raise PatternTooLargeError(f"pattern has {n} vertices; at most {MAX_PATTERN_VERTICES} supported")

    for k in range(1, n + 1):
        found = [
            frozenset(combo)
            for combo in itertools.combinations(p.vertices, k)
            if is_connected_dominating(p, set(combo))
        ]
        if found:
            break

    if n >= 3:
        mlst = max_leaf_spanning_tree(p, search_limit)
        if mlst is None:
            logger.debug(f"MLST cross-check skipped: more than {search_limit} edge subsets")
        elif mlst[0] + k != n:
            raise AssertionError(f"|V_P|={n} but c_P={k} and l_P={mlst[0]}")
    return k, found


# ===== PLAN CONSTRUCTION =====

def _rooted_children(tree: Sequence[Edge], members: Set[int], root: int) -> Dict[int, List[int]]:
    children: Dict[int, List[int]] = {u: [] for u in members}
    if tree:
        children.update(nx.bfs_successors(nx.Graph(tree), root, sort_neighbors=sorted))
    return children


def _pivot_orderings(root: int, children: Dict[int, List[int]]) -> Iterator[Tuple[int, ...]]:
    """Orderings of the tree's vertices in which each vertex follows its parent."""
    def extend(order: List[int], available: FrozenSet[int]):
        if not available:
            yield tuple(order)
            return
        for x in sorted(available):
            yield from extend(order + [x], (available - {x}) | frozenset(children[x]))

    yield from extend([root], frozenset(children[root]))


def classify_edges(plan: ExecutionPlan, p: QueryPattern) -> ExecutionPlan:
    """Fill e_star / e_sib / e_cro for every unit."""
    placed = {plan.units[0].piv}
    classified = []
    for i, unit in enumerate(plan.units):
        if i > 0 and unit.piv not in placed:
            raise NotAPlanError(f"pivot {unit.piv} of unit {i} is not in P_{i - 1}")
        leaves = set(unit.leaves)
        e_star, e_sib, e_cro = set(), set(), set()
        for leaf in unit.leaves:
            for n in p.adjacency[leaf]:
                edge = canonical_edge(leaf, n)
                if n == unit.piv:
                    e_star.add(edge)
                elif n in leaves:
                    e_sib.add(edge)
                elif n in placed:
                    e_cro.add(edge)
        classified.append(replace(unit, e_star=frozenset(e_star), e_sib=frozenset(e_sib), e_cro=frozenset(e_cro)))
        placed |= leaves
    return replace(plan, units=tuple(classified))


def validate_plan(plan: ExecutionPlan, p: QueryPattern):
    """Raise NotAPlanError unless plan satisfies every execution-plan condition."""
    if not plan.units:
        raise NotAPlanError("plan has no units")
    placed = {plan.units[0].piv}
    star_edges = set()
    for i, unit in enumerate(plan.units):
        if not unit.leaves:
            raise NotAPlanError(f"unit {i} has no leaves")
        if i > 0 and unit.piv not in placed:
            raise NotAPlanError(f"pivot {unit.piv} of unit {i} is not in P_{i - 1}")
        for leaf in unit.leaves:
            if not p.has_edge(unit.piv, leaf):
                raise NotAPlanError(f"leaf {leaf} of unit {i} is not adjacent to pivot {unit.piv}")
            if leaf in placed:
                raise NotAPlanError(f"leaf {leaf} of unit {i} already appears in an earlier unit")
            star_edges.add(canonical_edge(unit.piv, leaf))
        placed |= set(unit.leaves)
    if placed != set(p.vertices):
        raise NotAPlanError(f"plan covers {sorted(placed)}, pattern has {list(p.vertices)}")
    if len(star_edges) != len(p.vertices) - 1:
        raise NotAPlanError("expansion edges do not form a spanning tree")

    assigned = [e for unit in plan.units for e in (unit.e_star | unit.e_sib | unit.e_cro)]
    if assigned and (len(assigned) != len(p.edges) or set(assigned) != set(p.edges)):
        raise NotAPlanError("edge classes do not partition the pattern's edges")


def enumerate_min_plans(p: QueryPattern, rho: float = DEFAULT_RHO,
                        search_limit: int = DEFAULT_MLST_SEARCH_LIMIT) -> List[ExecutionPlan]:
    """Every execution plan with exactly c_P units, edges classified."""
    _, mcds_list = connected_dominating_number(p, search_limit)
    plans: Dict[Tuple, ExecutionPlan] = {}

    for mcds in mcds_list:
        members = set(mcds)
        outside = [u for u in p.vertices if u not in members]
        for tree in _spanning_trees(p, sorted(members)):
            for root in sorted(members):
                children = _rooted_children(tree, members, root)
                for order in _pivot_orderings(root, children):
                    leaves = {piv: list(children[piv]) for piv in order}
                    for u in outside:
                        first = next(piv for piv in order if p.has_edge(piv, u))
                        leaves[first].append(u)
                    units = tuple(DecompositionUnit(piv, tuple(sorted(leaves[piv]))) for piv in order)
                    plan = ExecutionPlan(units=units, rho=rho)
                    if plan.key() not in plans:
                        plan = classify_edges(plan, p)
                        validate_plan(plan, p)
                        plans[plan.key()] = plan

    logger.debug(f"Enumerated {len(plans)} minimum-round plans")
    return list(plans.values())


# ===== SCORING AND SELECTION =====

def score_plan(plan: ExecutionPlan, rho: float = DEFAULT_RHO) -> float:
    return sum(
        len(unit.verification_edges) / (i + 1) ** rho
        for i, unit in enumerate(plan.units)
    )


def degree_score(plan: ExecutionPlan, p: QueryPattern, rho: float = DEFAULT_RHO) -> float:
    """Primary score plus sum of deg(dp_i.piv) / (i + 1)."""
    return score_plan(plan, rho) + sum(p.degree(unit.piv) / (i + 1) for i, unit in enumerate(plan.units))


def _keep_best(plans: List[ExecutionPlan], score) -> List[ExecutionPlan]:
    scores = [score(plan) for plan in plans]
    best = max(scores)
    return [plan for plan, s in zip(plans, scores) if math.isclose(s, best, rel_tol=SCORE_TOLERANCE, abs_tol=SCORE_TOLERANCE)]


def matching_order(plan: ExecutionPlan, p: QueryPattern) -> Tuple[int, ...]:
    later_pivot = {unit.piv: i for i, unit in enumerate(plan.units) if i > 0}
    order = [plan.units[0].piv]
    for unit in plan.units:
        pivot_leaves = sorted((l for l in unit.leaves if l in later_pivot), key=later_pivot.__getitem__)
        other_leaves = sorted((l for l in unit.leaves if l not in later_pivot), key=lambda l: (-p.degree(l), l))
        order.extend(pivot_leaves)
        order.extend(other_leaves)
    return tuple(order)


def in_matching_order(plan: ExecutionPlan, p: QueryPattern, embedding: Sequence[int]) -> Tuple[int, ...]:
    """Rearrange an embedding given in sorted pattern-vertex order into plan.matching_order."""
    images = dict(zip(p.vertices, embedding))
    return tuple(images[u] for u in plan.matching_order)


def select_plan(p: QueryPattern, rho: float = DEFAULT_RHO,
                search_limit: int = DEFAULT_MLST_SEARCH_LIMIT) -> ExecutionPlan:
    return choose_plan(enumerate_min_plans(p, rho, search_limit), p, rho)


def choose_plan(plans: Sequence[ExecutionPlan], p: QueryPattern, rho: float = DEFAULT_RHO) -> ExecutionPlan:
    """Apply the selection cascade to classified candidate plans."""
    if not plans:
        raise PlanError("no candidate plans")
    plans = list(plans)
    fewest = min(len(plan.units) for plan in plans)
    plans = [plan for plan in plans if len(plan.units) == fewest]

    spans = {u: span(p, u) for u in {plan.units[0].piv for plan in plans}}
    smallest = min(spans.values())
    plans = [plan for plan in plans if spans[plan.units[0].piv] == smallest]

    plans = _keep_best(plans, lambda plan: score_plan(plan, rho))
    plans = _keep_best(plans, lambda plan: degree_score(plan, p, rho))
    chosen = min(plans, key=lambda plan: (plan.pivots, plan.key()))

    chosen = _finalize(chosen, p)
    logger.info(
        f"Selected plan with {len(chosen.units)} units, pivots {list(chosen.pivots)}, "
        f"score {score_plan(chosen, rho):.4f}"
    )
    return chosen


def _finalize(plan: ExecutionPlan, p: QueryPattern) -> ExecutionPlan:
    return replace(plan, matching_order=matching_order(plan, p), constraints=symmetry_constraints(p))


# ===== BASELINE STRATEGIES =====

def random_min_plan(p: QueryPattern, rng: random.Random, rho: float = DEFAULT_RHO,
                    search_limit: int = DEFAULT_MLST_SEARCH_LIMIT) -> ExecutionPlan:
    """A uniformly drawn minimum-round plan, ignoring every scoring rule."""
    plans = sorted(enumerate_min_plans(p, rho, search_limit), key=ExecutionPlan.key)
    return _finalize(rng.choice(plans), p)


def random_star_plan(p: QueryPattern, rng: random.Random, rho: float = DEFAULT_RHO) -> ExecutionPlan:
    """
    Random star decomposition: a random root, then repeatedly a random placed
    vertex with unplaced neighbors becomes the next pivot and takes all of them
    as leaves. The unit count is not minimized.
    """
    root = rng.choice(p.vertices)
    placed = {root}
    frontier = [root]
    units = []
    while len(placed) < len(p.vertices):
        candidates = sorted(u for u in frontier if any(n not in placed for n in p.neighbors(u)))
        piv = rng.choice(candidates)
        frontier.remove(piv)
        leaves = tuple(sorted(n for n in p.neighbors(piv) if n not in placed))
        units.append(DecompositionUnit(piv, leaves))
        placed.update(leaves)
        frontier.extend(leaves)
    plan = classify_edges(ExecutionPlan(units=tuple(units), rho=rho), p)
    validate_plan(plan, p)
    return _finalize(plan, p)


def plan_for_strategy(p: QueryPattern, strategy: str = "rads", rho: float = DEFAULT_RHO,
                      search_limit: int = DEFAULT_MLST_SEARCH_LIMIT, seed: int = 0) -> ExecutionPlan:
    """
    rads: the scored selection cascade
    ranm: a random plan with the minimum number of units
    rans: random star units of any size
    """
    if strategy == "rads":
        return select_plan(p, rho, search_limit)
    rng = random.Random(seed)
    if strategy == "ranm":
        plan = random_min_plan(p, rng, rho, search_limit)
    elif strategy == "rans":
        plan = random_star_plan(p, rng, rho)
    else:
        raise PlanError(f"Unknown plan strategy: {strategy}")
    logger.info(f"{strategy} plan with {len(plan.units)} units, pivots {list(plan.pivots)}, "
                f"score {score_plan(plan, rho):.4f}")
    return plan


def render_plan(plan: ExecutionPlan, p: QueryPattern) -> str:
    """Stable text form: one unit per line, then order, constraints and scores."""
    def edges(es):
        return "{" + ", ".join(f"({a},{b})" for a, b in sorted(es)) + "}"

    lines = []
    for i, unit in enumerate(plan.units):
        lines.append(
            f"dp{i}: piv=u{unit.piv} leaves={{{', '.join(f'u{l}' for l in unit.leaves)}}} "
            f"star={edges(unit.e_star)} sib={edges(unit.e_sib)} cro={edges(unit.e_cro)}"
        )
    order = matching_order(plan, p) if not plan.matching_order else plan.matching_order
    lines.append("matching order: " + " ".join(f"u{u}" for u in order))
    lines.append("constraints: " + (", ".join(f"u{a}<u{b}" for a, b in sorted(plan.constraints.pairs)) or "none"))
    lines.append(f"units: {len(plan.units)}")
    lines.append(f"score: {score_plan(plan, plan.rho):.2f}")
    lines.append(f"degree score: {degree_score(plan, p, plan.rho):.2f}")
    return "\n".join(lines)

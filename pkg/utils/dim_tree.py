"""
Dimension Tree Scheduling
Contraction plans for the Y = X x_{k != n} Q_k^T tensors of CP-ALS-QR:
naive Multi-TTM, the classical dimension tree and branch reutilization,
with runtime freshness checks and exact TTM/flop accounting
"""

import logging
import re
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Tuple

import numpy as np

from models import STRATEGIES, CostReport
from utils.errors import InvalidInputError, StalenessError, UnsupportedOrderError
from utils.tensor_core import ttm, ttm_flops

logger = logging.getLogger(__name__)

TREE_ORDERS = (3, 4)

# Root TTMs over the first three iterations
EXPECTED_ROOT_COUNTS = {
    3: {'naive': 9, 'dim-tree': 6, 'branch-reuse': 4},
    4: {'naive': 12, 'dim-tree': 6, 'branch-reuse': 4},
}

# ============================================================================
# SCHEDULE TABLES (1-based modes)
# Each update: (mode, ((free modes of the source, contracted mode), ...)).
# The source (1, ..., N) is the input tensor itself.
# ============================================================================

DIM_TREE_3 = (
    (1, (((1, 2, 3), 3), ((1, 2), 2))),
    (2, (((1, 2), 1),)),
    (3, (((1, 2, 3), 2), ((1, 3), 1))),
)

BRANCH_REUSE_3 = (
    DIM_TREE_3,
    (
        (1, (((1, 3), 3),)),
        (3, (((1, 3), 1),)),
        (2, (((1, 2, 3), 1), ((2, 3), 3))),
    ),
    (
        (2, (((2, 3), 3),)),
        (3, (((2, 3), 2),)),
        (1, (((1, 2, 3), 2), ((1, 3), 3))),
    ),
)

DIM_TREE_4 = (
    (1, (((1, 2, 3, 4), 4), ((1, 2, 3), 3), ((1, 2), 2))),
    (2, (((1, 2), 1),)),
    (3, (((1, 2, 3), 2), ((1, 3), 1))),
    (4, (((1, 2, 3, 4), 1), ((2, 3, 4), 2), ((3, 4), 3))),
)

BRANCH_REUSE_4 = (
    DIM_TREE_4,
    (
        (3, (((3, 4), 4),)),
        (4, (((3, 4), 3),)),
        (2, (((2, 3, 4), 3), ((2, 4), 4))),
        (1, (((1, 2, 3, 4), 2), ((1, 3, 4), 3), ((1, 4), 4))),
    ),
    (
        (1, (((1, 4), 4),)),
        (3, (((1, 3, 4), 4), ((1, 3), 1))),
        (4, (((1, 3, 4), 3), ((1, 4), 1))),
        (2, (((1, 2, 3, 4), 3), ((1, 2, 4), 1), ((2, 4), 4))),
    ),
)

# Relabelling that maps the cache left by iteration 1 onto the cache left by
# iteration 3; iterations 4+ replay iterations 2 and 3 under its powers.
BRANCH_REUSE_4_ROTATION = {1: 3, 2: 1, 3: 4, 4: 2}

# Naive Multi-TTM contraction order per updated mode
NAIVE_ORDERS = {
    3: {1: (3, 2), 2: (1, 3), 3: (2, 1)},
    4: {1: (4, 3, 2), 2: (4, 3, 1), 3: (1, 2, 4), 4: (1, 2, 3)},
}

# Published first-three-iteration totals: (full-extent modes, power of R, coefficient)
CLOSED_FORM_TERMS = {
    (3, 'naive'): (
        ((1, 2, 3), 1, 18), ((1, 2), 2, 6), ((2, 3), 2, 6), ((1, 3), 2, 6),
    ),
    (3, 'dim-tree'): (
        ((1, 2, 3), 1, 12), ((1, 2), 2, 12), ((1, 3), 2, 6),
    ),
    (3, 'branch-reuse'): (
        ((1, 2, 3), 1, 8), ((1, 2), 2, 4), ((1, 3), 2, 8), ((2, 3), 2, 6),
    ),
    (4, 'naive'): (
        ((1, 2, 3, 4), 1, 24), ((1, 2, 3), 2, 12), ((2, 3, 4), 2, 12),
        ((1, 2), 3, 12), ((3, 4), 3, 12),
    ),
    (4, 'dim-tree'): (
        ((1, 2, 3, 4), 1, 12), ((1, 2, 3), 2, 12), ((2, 3, 4), 2, 6),
        ((1, 2), 3, 12), ((1, 3), 3, 6), ((3, 4), 3, 6),
    ),
    # As published, including the repeated I3I4R^3 term (summed on evaluation)
    (4, 'branch-reuse'): (
        ((1, 2, 3, 4), 1, 8), ((2, 4), 3, 4), ((1, 4), 3, 6), ((1, 3), 3, 2),
        ((3, 4), 3, 4), ((1, 2), 3, 4), ((2, 3), 3, 2), ((1, 3, 4), 2, 4),
        ((1, 2, 4), 2, 2), ((3, 4), 3, 2), ((2, 3, 4), 2, 4), ((1, 2, 3), 2, 4),
    ),
}


# ============================================================================
# SCHEDULE TYPES
# ============================================================================

class ContractionStep(NamedTuple):
    source: frozenset
    contract_mode: int

    @property
    def produces(self):
        return self.source - {self.contract_mode}


class ModeUpdate(NamedTuple):
    mode: int
    steps: Tuple[ContractionStep, ...]


@dataclass
class Schedule:
    order: int
    strategy: str
    prefix: List[Tuple[ModeUpdate, ...]]
    cycle: List[Tuple[ModeUpdate, ...]]
    num_iterations: int = 1

    @property
    def root(self):
        return frozenset(range(self.order))

    @property
    def cycle_start(self):
        return len(self.prefix) + 1

    @property
    def cycle_length(self):
        return len(self.cycle)

    @property
    def iterations(self):
        return [self.updates(k) for k in range(1, self.num_iterations + 1)]

    def updates(self, iteration):
        """The ordered mode updates of a 1-based iteration."""
        if iteration < 1:
            raise InvalidInputError(f'iterations are 1-based, got {iteration}')
        if iteration < self.cycle_start:
            return self.prefix[iteration - 1]
        return self.cycle[(iteration - self.cycle_start) % self.cycle_length]

    def update_order(self, iteration):
        return tuple(update.mode for update in self.updates(iteration))

    def update_for(self, iteration, mode):
        for index, update in enumerate(self.updates(iteration)):
            if update.mode == mode:
                return index, update
        raise InvalidInputError(f'iteration {iteration} has no update for mode {mode}')

    def is_read_later(self, key, iteration, update_index, step_index):
        """True if `key` is read again before the schedule overwrites it."""
        horizon = iteration + self.cycle_start + self.cycle_length + 1
        position = (update_index, step_index + 1)
        for k in range(iteration, horizon):
            updates = self.updates(k)
            first_update = position[0] if k == iteration else 0
            for u in range(first_update, len(updates)):
                steps = updates[u].steps
                first_step = position[1] if (k == iteration and u == position[0]) else 0
                for step in steps[first_step:]:
                    if step.source == key:
                        return True
                    if step.produces == key:
                        return False
        return False

    def to_dict(self):
        return {
            'order': self.order,
            'strategy': self.strategy,
            'cycle_start': self.cycle_start,
            'cycle_length': self.cycle_length,
            'iterations': [
                [
                    {
                        'mode': update.mode + 1,
                        'steps': [
                            (sorted(m + 1 for m in step.source), step.contract_mode + 1)
                            for step in update.steps
                        ],
                    }
                    for update in plan
                ]
                for plan in self.iterations
            ],
        }


class IntermediateCache:
    """Partially contracted tensors keyed by free-mode set, stamped with factor versions."""

    def __init__(self):
        self.entries: Dict[frozenset, Tuple[np.ndarray, Dict[int, int]]] = {}

    def __contains__(self, key):
        return key in self.entries

    def __len__(self):
        return len(self.entries)

    def put(self, key, tensor, stamp):
        self.entries[key] = (tensor, stamp)

    def evict(self, key):
        self.entries.pop(key, None)

    def read(self, key, versions, where=''):
        if key not in self.entries:
            raise StalenessError(f'{where}: intermediate {_label_modes(key)} is not cached')
        tensor, stamp = self.entries[key]
        stale = {m: v for m, v in stamp.items() if versions[m] != v}
        if stale:
            raise StalenessError(
                f'{where}: intermediate {_label_modes(key)} was contracted with outdated '
                f'factors {sorted(m + 1 for m in stale)}'
            )
        return tensor, stamp


# ============================================================================
# BUILDING
# ============================================================================

def _label_modes(modes):
    return '(' + ','.join(str(m + 1) for m in sorted(modes)) + ')'


def category_label(source, order):
    """Size class of a TTM from `source`, e.g. I1I2R^2."""
    power = order - len(source) + 1
    label = ''.join(f'I{m + 1}' for m in sorted(source)) + 'R'
    return label if power == 1 else f'{label}^{power}'


def _compile(table, relabel=None):
    relabel = relabel or {}

    def mode(m):
        return relabel.get(m, m) - 1

    return tuple(
        ModeUpdate(
            mode(updated),
            tuple(ContractionStep(frozenset(mode(m) for m in source), mode(c)) for source, c in steps),
        )
        for updated, steps in table
    )


def _power(mapping, times):
    result = {m: m for m in mapping}
    for _ in range(times):
        result = {m: mapping[result[m]] for m in mapping}
    return result


def naive_plan(order):
    updates = []
    for n in range(order):
        if order in NAIVE_ORDERS:
            contract = [c - 1 for c in NAIVE_ORDERS[order][n + 1]]
        else:
            contract = [(n - j) % order for j in range(1, order)]
        source = frozenset(range(order))
        steps = []
        for c in contract:
            steps.append(ContractionStep(source, c))
            source = source - {c}
        updates.append(ModeUpdate(n, tuple(steps)))
    return tuple(updates)


def build_schedule(order, strategy, num_iterations=1):
    """Normative schedule for `strategy`, freshness-validated before it is returned."""
    if strategy not in STRATEGIES:
        raise InvalidInputError(f'unknown strategy {strategy!r}')
    if order < 2:
        raise InvalidInputError(f'order must be >= 2, got {order}')
    if strategy != 'naive' and order not in TREE_ORDERS:
        raise UnsupportedOrderError(
            f'{strategy} schedules exist for orders {TREE_ORDERS}, not {order}'
        )

    if strategy == 'naive':
        prefix, cycle = [], [naive_plan(order)]
    elif strategy == 'dim-tree':
        prefix, cycle = [], [_compile(DIM_TREE_3 if order == 3 else DIM_TREE_4)]
    elif order == 3:
        prefix = [_compile(BRANCH_REUSE_3[0])]
        cycle = [_compile(BRANCH_REUSE_3[1]), _compile(BRANCH_REUSE_3[2])]
    else:
        prefix = [_compile(BRANCH_REUSE_4[0])]
        cycle = []
        for turn in range(4):
            rotation = _power(BRANCH_REUSE_4_ROTATION, turn)
            cycle.append(_compile(BRANCH_REUSE_4[1], rotation))
            cycle.append(_compile(BRANCH_REUSE_4[2], rotation))

    schedule = Schedule(order, strategy, prefix, cycle, num_iterations)
    horizon = max(num_iterations, schedule.cycle_start + 2 * schedule.cycle_length)
    _simulate(schedule, horizon, dims=(1,) * order, rank=1)
    logger.debug('built %s schedule for order %d (cycle %d from %d)',
                 strategy, order, schedule.cycle_length, schedule.cycle_start)
    return schedule


# ============================================================================
# DRY RUN / COST ACCOUNTING
# ============================================================================

def _step_flops(step, dims, rank):
    reduced = [min(d, rank) for d in dims]
    out = 1
    for k, d in enumerate(dims):
        if k in step.source and k != step.contract_mode:
            out *= d
        else:
            out *= reduced[k]
    return 2 * out * dims[step.contract_mode]


def _simulate(schedule, iterations, dims, rank):
    """
    Replay the schedule symbolically: versions, stamps and evictions exactly as
    `execute` applies them. Returns one CostReport per iteration.
    """
    order = schedule.order
    versions = [0] * order
    cache = {}
    reports = []
    for k in range(1, iterations + 1):
        report = CostReport()
        updates = schedule.updates(k)
        if sorted(u.mode for u in updates) != list(range(order)):
            raise StalenessError(f'iteration {k} does not update every mode exactly once')
        for u_index, update in enumerate(updates):
            for s_index, step in enumerate(update.steps):
                where = f'iteration {k}, mode {update.mode + 1}, step {s_index + 1}'
                if step.contract_mode not in step.source:
                    raise StalenessError(f'{where}: mode {step.contract_mode + 1} is already contracted')
                is_root = step.source == schedule.root
                if is_root:
                    stamp = {}
                elif step.source not in cache:
                    raise StalenessError(f'{where}: intermediate {_label_modes(step.source)} is not cached')
                else:
                    stamp = cache[step.source]
                    if any(versions[m] != v for m, v in stamp.items()):
                        raise StalenessError(f'{where}: intermediate {_label_modes(step.source)} is stale')
                report.add(category_label(step.source, order), _step_flops(step, dims, rank), is_root)
                if not is_root and not schedule.is_read_later(step.source, k, u_index, s_index):
                    cache.pop(step.source, None)
                new_stamp = dict(stamp)
                new_stamp[step.contract_mode] = versions[step.contract_mode]
                if s_index == len(update.steps) - 1:
                    if step.produces != frozenset({update.mode}):
                        raise StalenessError(f'{where}: final tensor keeps modes {_label_modes(step.produces)}')
                else:
                    cache[step.produces] = new_stamp
            versions[update.mode] += 1
        reports.append(report)
    return reports


def measured_cost(schedule, dims, rank, iterations=3):
    """Dry-run TTM counts and flops over the first `iterations` iterations."""
    return sum_reports(measured_cost_by_iteration(schedule, dims, rank, iterations))


def measured_cost_by_iteration(schedule, dims, rank, iterations=3):
    dims = tuple(int(d) for d in dims)
    if len(dims) != schedule.order:
        raise InvalidInputError(f'{len(dims)} extents given for an order-{schedule.order} schedule')
    return _simulate(schedule, iterations, dims, rank)


def sum_reports(reports):
    total = CostReport()
    for report in reports:
        total.merge(report)
    return total


class ClosedFormCost(NamedTuple):
    terms: Dict[str, int]
    flops: int


def closed_form_cost(order, strategy, dims, rank):
    """Published first-three-iteration totals, as labelled coefficients and evaluated flops."""
    if (order, strategy) not in CLOSED_FORM_TERMS:
        raise UnsupportedOrderError(f'no closed form for order {order}, strategy {strategy!r}')
    dims = tuple(int(d) for d in dims)
    if len(dims) != order:
        raise InvalidInputError(f'{len(dims)} extents given for order {order}')
    terms = {}
    flops = 0
    for modes, power, coefficient in CLOSED_FORM_TERMS[(order, strategy)]:
        label = ''.join(f'I{m}' for m in modes) + 'R' + ('' if power == 1 else f'^{power}')
        terms[label] = terms.get(label, 0) + coefficient
        flops += coefficient * int(np.prod([dims[m - 1] for m in modes])) * rank ** power
    return ClosedFormCost(terms, flops)


def leading_label(order):
    return ''.join(f'I{m}' for m in range(1, order + 1)) + 'R'


def term_size(label, dims, rank):
    """Value of a category label such as I1I3R^2 at the given extents and rank."""
    match = re.fullmatch(r'((?:I\d+)+)R(?:\^(\d+))?', label)
    if match is None:
        raise InvalidInputError(f'malformed cost label {label!r}')
    modes = [int(m) for m in re.findall(r'\d+', match.group(1))]
    power = int(match.group(2) or 1)
    return int(np.prod([dims[m - 1] for m in modes])) * rank ** power


# ============================================================================
# EXECUTION
# ============================================================================

def execute(schedule, x, state, cache, iteration, mode):
    """
    Produce Y = X x_{k != mode} Q_k^T for `mode` at `iteration` through the
    schedule, reading and refreshing `cache`. Returns (Y, CostReport).
    """
    update_index, update = schedule.update_for(iteration, mode)
    report = CostReport()
    result = None
    last = len(update.steps) - 1
    for s_index, step in enumerate(update.steps):
        where = f'iteration {iteration}, mode {mode + 1}, step {s_index + 1}'
        is_root = step.source == schedule.root
        if is_root:
            source, stamp = x, {}
        else:
            source, stamp = cache.read(step.source, state.versions, where)
        c = step.contract_mode
        q = state.qr[c].q
        out = ttm(source, q.T, c)
        report.add(category_label(step.source, schedule.order),
                   ttm_flops(source.shape, c, q.shape[1]), is_root)
        if not is_root and not schedule.is_read_later(step.source, iteration, update_index, s_index):
            cache.evict(step.source)
        if s_index == last:
            result = out
        else:
            new_stamp = dict(stamp)
            new_stamp[c] = state.versions[c]
            cache.put(step.produces, out, new_stamp)
    return result, report

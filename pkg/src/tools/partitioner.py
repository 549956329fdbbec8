import heapq
from dataclasses import (
    dataclass,
    field,
)
from logging import Logger
from typing import (
    Dict,
    List,
    Optional,
    Sequence,
    Tuple,
)

from src.tools.cachesim import (
    DEFAULT_T_HDD_US,
    DEFAULT_T_SSD_US,
)
from src.tools.rdist import HitRatioFn
from src.utils.logging_utils import get_logger

logger: Logger = get_logger(name=__name__)

DEFAULT_C_MIN = 1000
EXACT_FRONTIER_LIMIT = 20_000
# frontier points x candidate sizes summed over the merges
EXACT_WORK_LIMIT = 2_000_000
_EPS = 1e-12


class AllocationError(RuntimeError):
    pass


@dataclass
class VmDemand:
    vm_id: int
    hit_fn: HitRatioFn
    demand_blocks: int
    c_min: int = DEFAULT_C_MIN
    # carried for parity with the per-VM weights of the sizing problem; unused by the objective
    weight: float = 1.0

    @property
    def upper_bound(self) -> int:
        return max(self.c_min, self.demand_blocks)

    def candidates(self) -> List[int]:
        """c_min plus every breakpoint above it that does not exceed the demand."""
        sizes = [self.c_min]
        for breakpoint in self.hit_fn.breakpoints:
            if self.c_min < breakpoint <= self.upper_bound:
                sizes.append(breakpoint)
        return sizes


@dataclass
class PartitionProblem:
    capacity_blocks: int
    vms: List[VmDemand]
    t_hdd_us: float = DEFAULT_T_HDD_US
    t_ssd_us: float = DEFAULT_T_SSD_US

    @property
    def n(self) -> int:
        return len(self.vms)


@dataclass
class AllocationPlan:
    allocations: Dict[int, int] = field(default_factory=dict)
    demands: Dict[int, int] = field(default_factory=dict)
    feasible: bool = True
    objective_us: float = 0.0
    solver: str = "feasible"

    @property
    def total_blocks(self) -> int:
        return sum(self.allocations.values())


def feasibility_check(demands: Sequence[int], capacity_blocks: int) -> bool:
    return sum(demands) <= capacity_blocks


def vm_latency(hit_fn: HitRatioFn, size: int, t_hdd_us: float, t_ssd_us: float) -> float:
    if size < 0:
        raise ValueError(f"cache size must be non-negative, got {size}")
    h = hit_fn(size)
    return h * t_ssd_us + (1.0 - h) * t_hdd_us


def total_latency(sizes: Dict[int, int], problem: PartitionProblem) -> float:
    return sum(
        vm_latency(vm.hit_fn, sizes[vm.vm_id], problem.t_hdd_us, problem.t_ssd_us)
        for vm in problem.vms
    )


def reference_objective(sizes: Dict[int, int], problem: PartitionProblem) -> float:
    """
    Diagnostic scorer: unused capacity plus the hit-weighted device latencies.

    It mixes block and time units, so it is only reported, never optimised.
    """
    diff = problem.capacity_blocks - sum(sizes.values())
    hsum = sum(vm.hit_fn(sizes[vm.vm_id]) for vm in problem.vms)
    return diff + hsum * problem.t_ssd_us + (problem.n - hsum) * problem.t_hdd_us


def _solve_exact(problem: PartitionProblem) -> Optional[Dict[int, int]]:
    """
    Multiple-choice knapsack over breakpoints, merging one VM at a time into a Pareto
    frontier of (total size -> best total hit ratio). Returns None when the frontier
    outgrows EXACT_FRONTIER_LIMIT or the merges would cost more than EXACT_WORK_LIMIT.
    """
    # total size -> (total hit, chosen sizes)
    frontier: Dict[int, Tuple[float, Tuple[int, ...]]] = {0: (0.0, ())}
    work = 0
    for vm in problem.vms:
        options = [(size, vm.hit_fn(size)) for size in vm.candidates()]
        work += len(frontier) * len(options)
        if work > EXACT_WORK_LIMIT:
            logger.warning(
                f"Exact merge of VM {vm.vm_id} would exceed {EXACT_WORK_LIMIT} steps; "
                f"falling back to greedy."
            )
            return None
        merged: Dict[int, Tuple[float, Tuple[int, ...]]] = {}
        for used, (gain, chosen) in sorted(frontier.items()):
            for size, hit in options:
                total = used + size
                if total > problem.capacity_blocks:
                    break
                value = gain + hit
                best = merged.get(total)
                if best is None or value > best[0] + _EPS:
                    merged[total] = (value, chosen + (size,))

        frontier = {}
        best_gain = None
        for total in sorted(merged):
            gain, chosen = merged[total]
            if best_gain is None or gain > best_gain + _EPS:
                frontier[total] = (gain, chosen)
                best_gain = gain
        if len(frontier) > EXACT_FRONTIER_LIMIT:
            logger.warning(
                f"Exact frontier reached {len(frontier)} points; falling back to greedy."
            )
            return None

    if not frontier:
        return None
    # the last frontier point has the highest gain and the smallest size reaching it
    _, chosen = frontier[max(frontier)]
    return {vm.vm_id: size for vm, size in zip(problem.vms, chosen)}


def _upper_hull(points: List[Tuple[int, float]]) -> List[Tuple[int, float]]:
    hull: List[Tuple[int, float]] = []
    for x, y in points:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            # drop the middle point when it lies on or below the chord
            if (y2 - y1) * (x - x1) <= (y - y1) * (x2 - x1):
                hull.pop()
            else:
                break
        hull.append((x, y))
    return hull


def _solve_greedy(problem: PartitionProblem) -> Dict[int, int]:
    """
    Greedy over the concave majorant of each VM's (size -> hit ratio) points: the budget
    goes to the hull segment with the best hit gain per block, ties to the lower vm_id.
    """
    sizes = {vm.vm_id: vm.c_min for vm in problem.vms}
    budget = problem.capacity_blocks - sum(sizes.values())
    hulls = {}
    heap: List[Tuple[float, int, int]] = []
    for vm in problem.vms:
        points = [(size, vm.hit_fn(size)) for size in vm.candidates()]
        hulls[vm.vm_id] = (vm, points, _upper_hull(points))
        if len(hulls[vm.vm_id][2]) > 1:
            heapq.heappush(heap, (-_slope(hulls[vm.vm_id][2], 0), vm.vm_id, 0))

    while heap and budget > 0:
        _, vm_id, segment = heapq.heappop(heap)
        vm, points, hull = hulls[vm_id]
        (x0, _), (x1, _) = hull[segment], hull[segment + 1]
        if x1 - x0 <= budget:
            sizes[vm_id] = x1
            budget -= x1 - x0
            if segment + 2 < len(hull):
                heapq.heappush(heap, (-_slope(hull, segment + 1), vm_id, segment + 1))
            continue
        # segment too wide: settle on the best real point still affordable and close the VM
        reachable = [(y, -x) for x, y in points if x0 < x <= x0 + budget]
        if reachable:
            y, neg_x = max(reachable)
            if y > vm.hit_fn(x0) + _EPS:
                budget -= -neg_x - x0
                sizes[vm_id] = -neg_x
    return sizes


def _slope(hull: List[Tuple[int, float]], segment: int) -> float:
    (x0, y0), (x1, y1) = hull[segment], hull[segment + 1]
    return (y1 - y0) / (x1 - x0)


def _check_plan(plan: AllocationPlan, problem: PartitionProblem) -> None:
    if plan.total_blocks > problem.capacity_blocks:
        logger.error(f"Plan uses {plan.total_blocks} > {problem.capacity_blocks} blocks.")
        raise AllocationError("allocation exceeds the SSD capacity")
    for vm in problem.vms:
        size = plan.allocations[vm.vm_id]
        if not vm.c_min <= size <= vm.upper_bound:
            logger.error(f"VM {vm.vm_id} allocation {size} outside [{vm.c_min}, {vm.upper_bound}].")
            raise AllocationError(f"allocation of VM {vm.vm_id} violates its bounds")


def allocate(problem: PartitionProblem) -> AllocationPlan:
    """
    Decides the cache size of every VM for the next interval.

    Args:
        problem (PartitionProblem): Capacity, per-VM demands and hit-ratio functions.

    Returns:
        AllocationPlan: Demands when they fit, otherwise the latency-minimising sizes.

    Raises:
        ValueError: If the capacity cannot cover every VM's minimum allocation.
    """
    minimum = sum(vm.c_min for vm in problem.vms)
    if problem.capacity_blocks < minimum:
        logger.error(
            f"Capacity {problem.capacity_blocks} cannot honour minimum allocations ({minimum})."
        )
        raise ValueError("capacity is below the sum of minimum allocations")

    demands = {vm.vm_id: vm.upper_bound for vm in problem.vms}
    if feasibility_check(list(demands.values()), problem.capacity_blocks):
        plan = AllocationPlan(allocations=dict(demands), demands=demands)
    else:
        sizes = _solve_exact(problem)
        solver = "exact"
        if sizes is None:
            sizes = _solve_greedy(problem)
            solver = "greedy"
        plan = AllocationPlan(
            allocations=sizes, demands=demands, feasible=False, solver=solver
        )
        logger.info(
            f"Infeasible demands ({sum(demands.values())} > {problem.capacity_blocks}); "
            f"solved with {solver}."
        )

    plan.objective_us = total_latency(plan.allocations, problem)
    _check_plan(plan, problem)
    return plan

from dataclasses import (
    dataclass,
    field,
)
from logging import Logger
from typing import (
    Dict,
    FrozenSet,
    List,
    Optional,
)

from src.tools.classifier import write_ratio
from src.tools.models import (
    ClassCounts,
    WritePolicy,
)
from src.utils.logging_utils import get_logger

logger: Logger = get_logger(name=__name__)

DEFAULT_WTHRESHOLD = 0.5


def assign_policy(
    counts: ClassCounts,
    wthreshold: float = DEFAULT_WTHRESHOLD,
    previous: WritePolicy = WritePolicy.WB,
) -> WritePolicy:
    """
    Picks the write policy of a VM from its interval class counts.

    Args:
        counts (ClassCounts): Access-class counts of the interval.
        wthreshold (float): WAW+WAR ratio at or above which writes bypass the cache.
        previous (WritePolicy): Policy kept when the interval had no requests.

    Returns:
        WritePolicy: RO when the write ratio reaches the threshold, WB otherwise.
    """
    if not 0.0 <= wthreshold <= 1.0:
        raise ValueError(f"wthreshold must be in [0, 1], got {wthreshold}")
    if counts.total == 0:
        return previous
    return WritePolicy.RO if write_ratio(counts) >= wthreshold else WritePolicy.WB


@dataclass
class PolicyDecision:
    vm_id: int
    write_ratio: Optional[float]
    policy: WritePolicy


@dataclass
class PolicyState:
    """
    Per-VM write policies. Every VM starts in WB; VMs listed in force_ro are always RO.
    """

    wthreshold: float = DEFAULT_WTHRESHOLD
    force_ro: FrozenSet[int] = frozenset()
    policies: Dict[int, WritePolicy] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0.0 <= self.wthreshold <= 1.0:
            raise ValueError(f"wthreshold must be in [0, 1], got {self.wthreshold}")
        self.force_ro = frozenset(self.force_ro)

    def current(self, vm_id: int) -> WritePolicy:
        return self.policies.get(vm_id, WritePolicy.WB)

    def update(self, vm_id: int, counts: ClassCounts) -> PolicyDecision:
        previous = self.current(vm_id)
        ratio = write_ratio(counts) if counts.total else None
        if vm_id in self.force_ro:
            policy = WritePolicy.RO
        else:
            policy = assign_policy(counts, self.wthreshold, previous)
        if policy is not previous:
            logger.info(
                f"VM {vm_id}: write policy {previous.value} -> {policy.value} (write ratio {ratio})"
            )
        self.policies[vm_id] = policy
        return PolicyDecision(vm_id=vm_id, write_ratio=ratio, policy=policy)

    def update_all(self, counts: Dict[int, ClassCounts]) -> List[PolicyDecision]:
        return [self.update(vm_id, counts[vm_id]) for vm_id in sorted(counts)]

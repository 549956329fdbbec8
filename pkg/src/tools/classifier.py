from logging import Logger
from typing import (
    Dict,
    Iterable,
    List,
    Optional,
    Tuple,
)

from src.tools.models import (
    AccessClass,
    ClassCounts,
    IoRequest,
    Op,
)
from src.utils.logging_utils import get_logger

logger: Logger = get_logger(name=__name__)

ClassifiedRequest = Tuple[IoRequest, AccessClass]

_PAIR_CLASS = {
    (Op.READ, Op.READ): AccessClass.RAR,
    (Op.WRITE, Op.READ): AccessClass.RAW,
    (Op.READ, Op.WRITE): AccessClass.WAR,
    (Op.WRITE, Op.WRITE): AccessClass.WAW,
}


class AccessClassifier:
    """
    Tags the requests of one VM with their access class.

    History is kept for the whole run; only the counters are reset between intervals,
    so a block written in one interval and rewritten in the next is a WAW.

    Attributes:
        vm_id (Optional[int]): VM whose stream is being classified, fixed by the first request.
        counts (ClassCounts): Counts accumulated since the last call to take_counts().
    """

    def __init__(self) -> None:
        self.vm_id: Optional[int] = None
        self.counts = ClassCounts()
        self._last_op: Dict[int, Op] = {}

    def classify_one(self, req: IoRequest) -> AccessClass:
        if req.len_blocks != 1:
            raise ValueError(
                f"classifier expects single-block requests, got len_blocks={req.len_blocks}"
            )
        if self.vm_id is None:
            self.vm_id = req.vm_id
        elif req.vm_id != self.vm_id:
            raise ValueError(
                f"classifier for VM {self.vm_id} received a request of VM {req.vm_id}"
            )

        previous = self._last_op.get(req.block)
        if previous is None:
            access_class = AccessClass.CR if req.op is Op.READ else AccessClass.CW
        else:
            access_class = _PAIR_CLASS[(previous, req.op)]
        self._last_op[req.block] = req.op
        self.counts.add(access_class)
        return access_class

    def classify(self, stream: Iterable[IoRequest]) -> List[ClassifiedRequest]:
        return [(req, self.classify_one(req)) for req in stream]

    def take_counts(self) -> ClassCounts:
        """Returns the counts of the interval that just ended and starts a new one."""
        counts, self.counts = self.counts, ClassCounts()
        return counts


def classify(stream: Iterable[IoRequest]) -> List[ClassifiedRequest]:
    return AccessClassifier().classify(stream)


def write_ratio(counts: ClassCounts) -> float:
    """
    Fraction of requests that overwrite a block (WAW + WAR) in an interval.

    Raises:
        ValueError: If the counts are empty.
    """
    if counts.total == 0:
        logger.error("write_ratio requested for an empty interval.")
        raise ValueError("write ratio is undefined for an empty interval")
    return (counts[AccessClass.WAW] + counts[AccessClass.WAR]) / counts.total

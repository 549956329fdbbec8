import bisect
from collections import Counter
from dataclasses import (
    dataclass,
    field,
)
from logging import Logger
from typing import (
    Dict,
    Iterable,
    Optional,
    Tuple,
)

from src.tools.classifier import ClassifiedRequest
from src.tools.models import (
    AccessClass,
    DistanceMode,
)
from src.utils.logging_utils import get_logger

logger: Logger = get_logger(name=__name__)


class FenwickTree:
    """Binary indexed tree of counts over positions [0, size)."""

    def __init__(self, size: int) -> None:
        self.size = size
        self._tree = [0] * (size + 1)

    def add(self, index: int, delta: int) -> None:
        i = index + 1
        while i <= self.size:
            self._tree[i] += delta
            i += i & -i

    def prefix_sum(self, index: int) -> int:
        """Sum over positions [0, index]."""
        if index < 0:
            return 0
        i = min(index, self.size - 1) + 1
        total = 0
        while i > 0:
            total += self._tree[i]
            i -= i & -i
        return total

    def range_sum(self, lo: int, hi: int) -> int:
        if hi < lo:
            return 0
        return self.prefix_sum(hi) - self.prefix_sum(lo - 1)


class StackDistanceEngine:
    """
    Computes stack distances (distinct blocks touched since the previous access to the
    same block) in O(log n) per access.

    A position in the tree is marked when it holds the most recent access of some block,
    so the distance of a reuse is the number of marks strictly between the two accesses.
    """

    def __init__(self, capacity: int = 1024) -> None:
        self._tree = FenwickTree(max(1, capacity))
        self._last_seen: Dict[int, int] = {}
        self._clock = 0

    def _grow(self) -> None:
        tree = FenwickTree(self._tree.size * 2)
        for position in self._last_seen.values():
            tree.add(position, 1)
        self._tree = tree

    def touch(self, block: int) -> Optional[int]:
        """Records an access and returns its distance, or None for a first touch."""
        if self._clock >= self._tree.size:
            self._grow()
        previous = self._last_seen.get(block)
        distance = None
        if previous is not None:
            distance = self._tree.range_sum(previous + 1, self._clock - 1)
            self._tree.add(previous, -1)
        self._tree.add(self._clock, 1)
        self._last_seen[block] = self._clock
        self._clock += 1
        return distance


@dataclass
class ReuseProfile:
    trd_hist: Counter = field(default_factory=Counter)
    urd_hist: Counter = field(default_factory=Counter)
    total_accesses: int = 0

    @property
    def max_trd(self) -> int:
        return max(self.trd_hist) if self.trd_hist else -1

    @property
    def max_urd(self) -> int:
        return max(self.urd_hist) if self.urd_hist else -1

    def histogram(self, mode: DistanceMode) -> Counter:
        return self.trd_hist if DistanceMode(mode) is DistanceMode.TRD else self.urd_hist

    def max_distance(self, mode: DistanceMode) -> int:
        return self.max_trd if DistanceMode(mode) is DistanceMode.TRD else self.max_urd


class ReuseProfiler:
    """
    Feeds classified requests through a stack-distance engine and fills the TRD and URD
    histograms.

    WAR and WAW accesses refresh recency like any access but never add a URD sample.
    The TRD histogram is always filled: every URD pair is also a TRD pair, which keeps
    max_urd <= max_trd.
    """

    def __init__(self, modes: Tuple[DistanceMode, ...] = tuple(DistanceMode)) -> None:
        self.modes = frozenset(DistanceMode(mode) for mode in modes) | {DistanceMode.TRD}
        self.engine = StackDistanceEngine()
        self.profile = ReuseProfile()

    def observe(self, block: int, access_class: Optional[AccessClass]) -> Optional[int]:
        if access_class is None:
            logger.error(f"Untagged request for block {block}.")
            raise ValueError(f"request for block {block} carries no access class")
        distance = self.engine.touch(block)
        self.profile.total_accesses += 1
        if distance is not None:
            if DistanceMode.TRD in self.modes:
                self.profile.trd_hist[distance] += 1
            if DistanceMode.URD in self.modes and AccessClass(access_class).is_useful:
                self.profile.urd_hist[distance] += 1
        return distance

    def feed(self, stream: Iterable[ClassifiedRequest]) -> ReuseProfile:
        for req, access_class in stream:
            self.observe(req.block, access_class)
        return self.profile


def stack_distance(
    stream: Iterable[ClassifiedRequest], mode: Optional[DistanceMode] = None
) -> ReuseProfile:
    """
    Builds the reuse profile of a classified single-VM stream.

    Args:
        stream (Iterable[ClassifiedRequest]): (request, access class) pairs.
        mode (Optional[DistanceMode]): Histogram to fill; None fills both. URD also
            fills TRD.

    Returns:
        ReuseProfile: Distance histograms and the number of accesses.
    """
    modes = tuple(DistanceMode) if mode is None else (DistanceMode(mode),)
    profile = ReuseProfiler(modes).feed(stream)
    logger.debug(
        f"Profiled {profile.total_accesses} accesses: max_trd={profile.max_trd}, max_urd={profile.max_urd}"
    )
    return profile


@dataclass(frozen=True)
class HitRatioFn:
    """Step function from cache size (blocks) to hit ratio."""

    breakpoints: Tuple[int, ...] = ()
    values: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if len(self.breakpoints) != len(self.values):
            raise ValueError("breakpoints and values must have the same length")
        if list(self.breakpoints) != sorted(set(self.breakpoints)):
            raise ValueError("breakpoints must be strictly ascending")
        if any(b > a for a, b in zip(self.values[1:], self.values)):
            raise ValueError("hit ratio values must be non-decreasing")
        if self.values and not (0.0 <= self.values[0] and self.values[-1] <= 1.0):
            raise ValueError("hit ratio values must lie in [0, 1]")

    @classmethod
    def zero(cls) -> "HitRatioFn":
        return cls()

    def __call__(self, size: int) -> float:
        index = bisect.bisect_right(self.breakpoints, size)
        return self.values[index - 1] if index else 0.0


def hit_ratio_fn(profile: ReuseProfile, mode: DistanceMode) -> HitRatioFn:
    """
    H(c) = (reuses with distance <= c - 1) / total accesses; an empty profile gives
    the constant-zero function.
    """
    if profile.total_accesses == 0:
        return HitRatioFn.zero()
    histogram = profile.histogram(mode)
    breakpoints = []
    values = []
    cumulative = 0
    for distance in sorted(histogram):
        cumulative += histogram[distance]
        breakpoints.append(distance + 1)
        values.append(cumulative / profile.total_accesses)
    return HitRatioFn(tuple(breakpoints), tuple(values))


def urd_based_size(profile: ReuseProfile) -> int:
    return profile.max_urd + 1


def trd_based_size(profile: ReuseProfile) -> int:
    return profile.max_trd + 1

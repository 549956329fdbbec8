from dataclasses import (
    dataclass,
    field,
)
from enum import Enum
from typing import (
    Dict,
    Iterable,
)

MAX_ADDRESS = 2**64


class Op(str, Enum):
    READ = "R"
    WRITE = "W"


class AccessClass(str, Enum):
    """Access-pair class: the current op After the previous op to the same block."""

    CR = "CR"
    CW = "CW"
    RAR = "RAR"
    RAW = "RAW"
    WAR = "WAR"
    WAW = "WAW"

    @property
    def is_cold(self) -> bool:
        return self in (AccessClass.CR, AccessClass.CW)

    @property
    def is_useful(self) -> bool:
        """Only read reuses count towards the useful reuse distance."""
        return self in (AccessClass.RAR, AccessClass.RAW)


class WritePolicy(str, Enum):
    WB = "WB"
    WT = "WT"
    RO = "RO"


class DistanceMode(str, Enum):
    TRD = "TRD"
    URD = "URD"


class TraceSource(str, Enum):
    MSR_CSV = "msr_csv"
    SYNTHETIC = "synthetic"
    INTERNAL_BINARY = "internal_binary"


@dataclass(frozen=True)
class IoRequest:
    """One block-level access as seen by the hypervisor."""

    vm_id: int
    ts: int
    block: int
    op: Op
    len_blocks: int = 1

    def __post_init__(self) -> None:
        if self.len_blocks < 1:
            raise ValueError(f"len_blocks must be >= 1, got {self.len_blocks}")
        if self.block < 0 or self.ts < 0 or self.vm_id < 0:
            raise ValueError(
                f"vm_id, ts and block must be non-negative: {self.vm_id}, {self.ts}, {self.block}"
            )
        if self.block + self.len_blocks > MAX_ADDRESS:
            raise ValueError(f"block range overflows the address type: {self.block}")


@dataclass
class TraceMeta:
    block_size_bytes: int = 8192
    vm_count: int = 1
    source: TraceSource = TraceSource.MSR_CSV

    def __post_init__(self) -> None:
        size = self.block_size_bytes
        if size <= 0 or size & (size - 1):
            raise ValueError(f"block_size_bytes must be a power of two, got {size}")
        if self.vm_count < 1:
            raise ValueError(f"vm_count must be positive, got {self.vm_count}")


@dataclass
class ClassCounts:
    counts: Dict[AccessClass, int] = field(
        default_factory=lambda: {cls: 0 for cls in AccessClass}
    )

    @classmethod
    def from_classes(cls, classes: Iterable[AccessClass]) -> "ClassCounts":
        result = cls()
        for access_class in classes:
            result.add(access_class)
        return result

    @classmethod
    def from_mapping(cls, **values: int) -> "ClassCounts":
        """Build counts from keyword arguments such as ``WAW=77, RAR=23``."""
        result = cls()
        for name, value in values.items():
            if value < 0:
                raise ValueError(f"class count {name} must be non-negative")
            result.counts[AccessClass(name)] = value
        return result

    def add(self, access_class: AccessClass, amount: int = 1) -> None:
        self.counts[access_class] += amount

    def __getitem__(self, access_class: AccessClass) -> int:
        return self.counts[AccessClass(access_class)]

    def __add__(self, other: "ClassCounts") -> "ClassCounts":
        merged = ClassCounts()
        for access_class in AccessClass:
            merged.counts[access_class] = self[access_class] + other[access_class]
        return merged

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def as_dict(self) -> Dict[str, int]:
        return {access_class.value: self.counts[access_class] for access_class in AccessClass}

import os
from dataclasses import (
    asdict,
    dataclass,
    field,
    fields,
)
from enum import Enum
from typing import (
    Any,
    Dict,
    List,
    Optional,
    Tuple,
)

import yaml


class ConfigError(ValueError):
    pass


class Mode(str, Enum):
    ECI = "eci"
    TRD_BASELINE = "trd"


class ProfileWindow(str, Enum):
    INTERVAL = "interval"
    CUMULATIVE = "cumulative"


@dataclass
class RunConfig:
    interval_ms: int = 600_000
    # MSR timestamps are Windows filetime ticks of 100 ns
    ticks_per_ms: int = 10_000
    mode: Mode = Mode.ECI
    capacity_blocks: int = 3_000_000
    block_size_bytes: int = 8192
    wthreshold: float = 0.5
    c_min: int = 1000
    t_hdd_us: float = 5000.0
    t_ssd_us: float = 100.0
    seed: int = 0
    profile_window: ProfileWindow = ProfileWindow.INTERVAL
    force_ro_vms: List[int] = field(default_factory=list)
    vm_map: Dict[str, int] = field(default_factory=dict)
    record_timing: bool = False

    def __post_init__(self) -> None:
        self.mode = Mode(self.mode)
        self.profile_window = ProfileWindow(self.profile_window)

    @property
    def interval_ticks(self) -> int:
        return self.interval_ms * self.ticks_per_ms

    def validate(self, vm_count: int = 1) -> None:
        """Raises ConfigError when the configuration cannot drive a run of ``vm_count`` VMs."""
        problems = []
        if self.interval_ms <= 0 or self.ticks_per_ms <= 0:
            problems.append("interval_ms and ticks_per_ms must be positive")
        size = self.block_size_bytes
        if size <= 0 or size & (size - 1):
            problems.append(f"block_size_bytes must be a power of two, got {size}")
        if not 0.0 <= self.wthreshold <= 1.0:
            problems.append(f"wthreshold must be in [0, 1], got {self.wthreshold}")
        if self.c_min < 0:
            problems.append(f"c_min must be non-negative, got {self.c_min}")
        if self.capacity_blocks <= 0:
            problems.append(f"capacity_blocks must be positive, got {self.capacity_blocks}")
        elif self.capacity_blocks < vm_count * self.c_min:
            problems.append(
                f"capacity_blocks {self.capacity_blocks} < {vm_count} VMs x c_min {self.c_min}"
            )
        if not 0 <= self.t_ssd_us < self.t_hdd_us:
            problems.append(
                f"t_ssd_us ({self.t_ssd_us}) must be below t_hdd_us ({self.t_hdd_us})"
            )
        if problems:
            raise ConfigError("; ".join(problems))

    def vm_key_map(self) -> Dict[Tuple[str, int], int]:
        """Turns the ``"host:disk" -> vm_id`` sidecar entries into parser keys."""
        mapping = {}
        for key, vm_id in self.vm_map.items():
            host, sep, disk = str(key).rpartition(":")
            if not sep or not disk.isdigit():
                raise ConfigError(f"vm_map key must look like 'host:disk', got {key!r}")
            mapping[(host, int(disk))] = int(vm_id)
        return mapping

    def to_dict(self) -> Dict[str, Any]:
        values = asdict(self)
        values["mode"] = self.mode.value
        values["profile_window"] = self.profile_window.value
        return values


def load_config_file(path: Optional[str]) -> Dict[str, Any]:
    """Reads a key-value YAML sidecar file; a missing path yields no overrides."""
    if not path:
        return {}
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, "rt") as f:
        values = yaml.safe_load(f.read()) or {}
    if not isinstance(values, dict):
        raise ConfigError(f"config file {path} must hold key-value pairs")
    return values


def build_run_config(
    file_values: Dict[str, Any], overrides: Dict[str, Any]
) -> RunConfig:
    """Merges file values and flag overrides (flags win) into a RunConfig."""
    known = {f.name for f in fields(RunConfig)}
    merged = dict(file_values)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    unknown = sorted(set(merged) - known)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    try:
        return RunConfig(**merged)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid configuration: {e}") from e

import os
from typing import (
    List,
    Sequence,
    Tuple,
)

import pytest

from src.tools.models import (
    IoRequest,
    Op,
)

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def fixture_path(name: str) -> str:
    return os.path.join(FIXTURES, name)


def make_stream(
    accesses: Sequence[Tuple[str, int]], vm_id: int = 0, ts0: int = 0
) -> List[IoRequest]:
    """Builds a single-VM stream from ("R"|"W", block) pairs, one tick apart."""
    return [
        IoRequest(vm_id=vm_id, ts=ts0 + i, block=block, op=Op(op))
        for i, (op, block) in enumerate(accesses)
    ]


SEVEN_REQUESTS = [("W", 1), ("R", 2), ("R", 1), ("W", 3), ("R", 4), ("W", 5), ("W", 2)]


@pytest.fixture
def seven_stream() -> List[IoRequest]:
    return make_stream(SEVEN_REQUESTS)

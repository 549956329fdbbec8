import struct
from logging import Logger
from typing import (
    Dict,
    Iterable,
    List,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import regex as re

from src.tools.models import (
    IoRequest,
    Op,
    TraceMeta,
    TraceSource,
)
from src.utils.logging_utils import get_logger

logger: Logger = get_logger(name=__name__)

BINARY_MAGIC = b"ECI1"
# vm_id: u16, ts: u64, block: u64, op: u8
BINARY_RECORD = struct.Struct("<HQQB")

MSR_RECORD = re.compile(
    r"^\s*(?P<ts>\d+),(?P<host>[^,]*),(?P<disk>\d+),(?P<type>[^,]+),"
    r"(?P<offset>\d+),(?P<size>\d+),(?P<response>\d+)\s*$"
)

VmKey = Tuple[str, int]
TraceInput = Union[bytes, str, Iterable[Union[bytes, str]]]


class TraceFormatError(ValueError):
    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        prefix = f"line {line_number}: " if line_number is not None else ""
        super().__init__(prefix + message)


def _iter_lines(stream: TraceInput) -> Iterable[Tuple[int, str]]:
    """Yields (line number, text); bytes are decoded line by line as UTF-8."""
    if isinstance(stream, (bytes, str)):
        stream = stream.splitlines()
    for line_number, line in enumerate(stream, start=1):
        if isinstance(line, bytes):
            try:
                line = line.decode("utf-8")
            except UnicodeDecodeError as e:
                logger.error(f"Line {line_number} is not valid UTF-8: {e}")
                raise TraceFormatError("invalid UTF-8 in record", line_number) from e
        yield line_number, line


class MsrParser:
    """
    Parses MSR Cambridge CSV records into IoRequests.

    Attributes:
        block_size_bytes (int): Cache block size used to convert byte offsets.
        vm_map (Optional[Dict[VmKey, int]]): Fixed (Hostname, DiskNumber) -> vm_id mapping.
            When absent, VM ids are handed out in order of first appearance.
        skipped_zero_size (int): Number of zero-length records dropped so far.
    """

    def __init__(
        self, block_size_bytes: int = 8192, vm_map: Optional[Dict[VmKey, int]] = None
    ) -> None:
        if block_size_bytes <= 0 or block_size_bytes & (block_size_bytes - 1):
            raise ValueError(
                f"block_size_bytes must be a power of two, got {block_size_bytes}"
            )
        self.block_size_bytes = block_size_bytes
        self.fixed_map = vm_map is not None
        self.vm_map: Dict[VmKey, int] = dict(vm_map or {})
        self.skipped_zero_size = 0

    def _vm_id(self, key: VmKey, line_number: int) -> int:
        if key not in self.vm_map:
            if self.fixed_map:
                logger.error(f"No VM mapping for {key[0]}:{key[1]}")
                raise TraceFormatError(
                    f"no VM mapping for {key[0]}:{key[1]}", line_number
                )
            self.vm_map[key] = len(self.vm_map)
            logger.info(f"Assigned vm_id {self.vm_map[key]} to {key[0]}:{key[1]}")
        return self.vm_map[key]

    def parse_record(self, line: str, line_number: int) -> Optional[IoRequest]:
        """
        Converts one CSV record into an IoRequest.

        Returns:
            Optional[IoRequest]: None when the record has Size = 0.

        Raises:
            TraceFormatError: On a malformed record or an unknown request type.
        """
        match = MSR_RECORD.match(line)
        if not match:
            logger.error(f"Malformed MSR record at line {line_number}: {line!r}")
            raise TraceFormatError(f"malformed record {line!r}", line_number)

        kind = match.group("type").strip().lower()
        if kind == "read":
            op = Op.READ
        elif kind == "write":
            op = Op.WRITE
        else:
            logger.error(f"Unknown request type at line {line_number}: {kind!r}")
            raise TraceFormatError(f"unknown request type {kind!r}", line_number)

        size = int(match.group("size"))
        if size == 0:
            self.skipped_zero_size += 1
            logger.warning(f"Skipping zero-size record at line {line_number}")
            return None

        offset = int(match.group("offset"))
        bs = self.block_size_bytes
        key = (match.group("host"), int(match.group("disk")))
        return IoRequest(
            vm_id=self._vm_id(key, line_number),
            ts=int(match.group("ts")),
            block=offset // bs,
            op=op,
            len_blocks=-(-(offset % bs + size) // bs),
        )

    def parse(self, stream: TraceInput) -> List[IoRequest]:
        requests = []
        for line_number, line in _iter_lines(stream):
            if not line.strip():
                continue
            request = self.parse_record(line, line_number)
            if request is not None:
                requests.append(request)

        if self.skipped_zero_size:
            logger.warning(f"Skipped {self.skipped_zero_size} zero-size records.")
        logger.info(f"Parsed {len(requests)} requests from MSR trace.")
        return requests


def parse_msr(
    stream: TraceInput,
    block_size_bytes: int = 8192,
    vm_map: Optional[Dict[VmKey, int]] = None,
) -> List[IoRequest]:
    return MsrParser(block_size_bytes, vm_map).parse(stream)


def serialize_msr(
    requests: Iterable[IoRequest],
    block_size_bytes: int = 8192,
    hosts: Optional[Dict[int, VmKey]] = None,
) -> bytes:
    """
    Writes requests back as MSR CSV. The response-time column is written as 0.

    Args:
        requests (Iterable[IoRequest]): Requests to serialize.
        block_size_bytes (int): Block size used to rebuild byte offsets.
        hosts (Optional[Dict[int, VmKey]]): vm_id -> (Hostname, DiskNumber); defaults to ("vm<id>", 0).

    Returns:
        bytes: The CSV text, one record per line.
    """
    hosts = hosts or {}
    lines = []
    for req in requests:
        host, disk = hosts.get(req.vm_id, (f"vm{req.vm_id}", 0))
        kind = "Read" if req.op is Op.READ else "Write"
        lines.append(
            f"{req.ts},{host},{disk},{kind},{req.block * block_size_bytes},"
            f"{req.len_blocks * block_size_bytes},0"
        )
    return ("\n".join(lines) + "\n").encode("utf-8") if lines else b""


def expand_multiblock(requests: Iterable[IoRequest]) -> List[IoRequest]:
    expanded = []
    for req in requests:
        if req.len_blocks == 1:
            expanded.append(req)
            continue
        for offset in range(req.len_blocks):
            expanded.append(
                IoRequest(vm_id=req.vm_id, ts=req.ts, block=req.block + offset, op=req.op)
            )
    return expanded


def write_binary(requests: Iterable[IoRequest]) -> bytes:
    chunks = [BINARY_MAGIC]
    for req in expand_multiblock(requests):
        chunks.append(
            BINARY_RECORD.pack(req.vm_id, req.ts, req.block, 0 if req.op is Op.READ else 1)
        )
    return b"".join(chunks)


def read_binary(data: bytes) -> List[IoRequest]:
    if not data.startswith(BINARY_MAGIC):
        logger.error("Binary trace does not start with the ECI1 magic.")
        raise TraceFormatError("missing ECI1 magic")
    body = memoryview(data)[len(BINARY_MAGIC):]
    if len(body) % BINARY_RECORD.size:
        logger.error(f"Binary trace has a truncated record ({len(body)} body bytes).")
        raise TraceFormatError(
            f"truncated record at byte {len(data) - len(body) % BINARY_RECORD.size}"
        )

    requests = []
    for index, (vm_id, ts, block, op) in enumerate(BINARY_RECORD.iter_unpack(body)):
        if op not in (0, 1):
            logger.error(f"Binary record {index} has unknown op code {op}.")
            raise TraceFormatError(f"record {index}: unknown op code {op}")
        requests.append(
            IoRequest(vm_id=vm_id, ts=ts, block=block, op=Op.READ if op == 0 else Op.WRITE)
        )
    logger.info(f"Read {len(requests)} requests from binary trace.")
    return requests


def load_trace(
    path: str,
    block_size_bytes: int = 8192,
    parser: Optional[MsrParser] = None,
) -> List[IoRequest]:
    """
    Loads a trace file, picking the binary reader when the file starts with the ECI1 magic.

    Args:
        path (str): Trace file path.
        block_size_bytes (int): Block size for CSV traces.
        parser (Optional[MsrParser]): Shared parser so several files share one VM registry.

    Returns:
        List[IoRequest]: Requests in file order.
    """
    with open(path, "rb") as f:
        data = f.read()
    logger.info(f"Loading trace {path} ({len(data)} bytes).")
    if data.startswith(BINARY_MAGIC):
        return read_binary(data)
    parser = parser or MsrParser(block_size_bytes)
    return parser.parse(data)


def split_by_vm(requests: Sequence[IoRequest]) -> Dict[int, List[IoRequest]]:
    streams: Dict[int, List[IoRequest]] = {}
    for req in requests:
        streams.setdefault(req.vm_id, []).append(req)
    return {vm_id: streams[vm_id] for vm_id in sorted(streams)}


def sniff_source(path: str) -> TraceSource:
    with open(path, "rb") as f:
        head = f.read(len(BINARY_MAGIC))
    return TraceSource.INTERNAL_BINARY if head == BINARY_MAGIC else TraceSource.MSR_CSV


def describe_traces(
    streams: Dict[int, List[IoRequest]], block_size_bytes: int, source: TraceSource
) -> TraceMeta:
    return TraceMeta(block_size_bytes, max(1, len(streams)), source)

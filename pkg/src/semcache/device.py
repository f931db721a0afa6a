"""Service-time models for the cache device and the lower level."""
from __future__ import annotations

from dataclasses import asdict, dataclass


class DeviceError(ValueError):
    pass


@dataclass(frozen=True)
class DeviceProfile:
    seq_read_MBps: float
    seq_write_MBps: float
    rand_read_IOPS: float
    rand_write_IOPS: float
    per_request_overhead_us: float = 0.0
    block_size_bytes: int = 8192

    def __post_init__(self):
        for name in ("seq_read_MBps", "seq_write_MBps", "rand_read_IOPS", "rand_write_IOPS"):
            if not getattr(self, name) > 0:
                raise DeviceError(f"{name} must be positive")
        if self.per_request_overhead_us < 0:
            raise DeviceError("per_request_overhead_us must be non-negative")
        bs = self.block_size_bytes
        if bs <= 0 or bs & (bs - 1):
            raise DeviceError("block_size_bytes must be a power of two")

    @classmethod
    def from_dict(cls, d: dict) -> "DeviceProfile":
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


# Intel 320 Series figures; MB is 10**6 bytes.
SSD_PROFILE = DeviceProfile(seq_read_MBps=270, seq_write_MBps=205,
                            rand_read_IOPS=39_500, rand_write_IOPS=23_000)
# 15K RPM class drive.
HDD_PROFILE = DeviceProfile(seq_read_MBps=150, seq_write_MBps=150,
                            rand_read_IOPS=200, rand_write_IOPS=200)


def service_time(profile: DeviceProfile, direction: str, sequential: bool, blocks: int) -> float:
    """Microseconds to move ``blocks`` blocks in one request."""
    if blocks < 1:
        raise DeviceError("a request moves at least one block")
    if direction not in ("read", "write"):
        raise DeviceError(f"unknown direction {direction!r}")
    if sequential:
        mbps = profile.seq_read_MBps if direction == "read" else profile.seq_write_MBps
        transfer = blocks * profile.block_size_bytes / mbps  # bytes / (MB/s) == us
    else:
        iops = profile.rand_read_IOPS if direction == "read" else profile.rand_write_IOPS
        transfer = blocks * 1e6 / iops
    return profile.per_request_overhead_us + transfer

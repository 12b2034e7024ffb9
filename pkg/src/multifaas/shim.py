"""Uniform interface over datastores and FaaS platforms.

The runtime talks to backends only through :class:`Backend`,
:class:`DataStore` and :class:`FaaSClient`.  The simulator in
:mod:`multifaas.sim` is the one implementation shipped here; a real cloud
adapter would implement the same three protocols.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Protocol

if TYPE_CHECKING:
    from .envelope import JointObject

TABLE = "table"
OBJECT = "object"
DS_KINDS = (TABLE, OBJECT)

# managed-table item limit; larger values go to the object store
TABLE_ITEM_LIMIT = 400_000


class ShimError(Exception):
    pass


class PlatformUnavailable(ShimError):
    def __init__(self, platform: str):
        super().__init__(f"platform {platform} is unavailable")
        self.platform = platform


class UnknownFunction(ShimError):
    def __init__(self, function: str, platform: str):
        super().__init__(f"function {function!r} is not deployed on {platform}")
        self.function = function
        self.platform = platform


class PayloadTooLarge(ShimError):
    def __init__(self, size: int, limit: int):
        super().__init__(f"payload of {size} bytes exceeds the {limit} byte limit")
        self.size = size
        self.limit = limit


class ValueTooLarge(ShimError):
    def __init__(self, size: int, limit: int = TABLE_ITEM_LIMIT):
        super().__init__(f"value of {size} bytes exceeds the table item limit {limit}")
        self.size = size
        self.limit = limit


class MissingList(ShimError):
    pass


class MissingBitmap(ShimError):
    pass


class IndexOutOfRange(ShimError):
    pass


class UnknownPlatform(ShimError):
    pass


@dataclass(frozen=True)
class DsSpec:
    platform: str
    kind: str = TABLE
    credentials: str = field(default="opaque", compare=False, repr=False)


@dataclass(frozen=True)
class FaaSSpec:
    platform: str
    credentials: str = field(default="opaque", compare=False, repr=False)


@dataclass(frozen=True)
class AcceptToken:
    request_id: str
    platform: str


@dataclass(frozen=True)
class Bitmap:
    """Snapshot of a coordination bitmap.

    ``closer`` is the index whose update turned the bitmap all-true; it is
    set once, atomically with that update, and never changes afterwards.
    """

    bits: tuple[bool, ...]
    closer: int | None = None

    @property
    def complete(self) -> bool:
        return all(self.bits)


@dataclass(frozen=True)
class ObjectStub:
    """Table placeholder for a value that was rerouted to the object store."""

    key: str
    platform: str


class DataStore(Protocol):
    platform: str
    kind: str

    def store_output_data(self, key: str, data: bytes) -> bool: ...

    def get_value(self, key: str) -> Any: ...

    def create_invocation_list(self, key: str) -> bool: ...

    def append_and_get_list(self, key: str, names: list[str]) -> list[str]: ...

    def create_bitmap(self, size: int, key: str) -> bool: ...

    def update_bitmap(self, index: int, key: str) -> Bitmap: ...

    def delete_prefix(self, prefix: str) -> int: ...


class FaaSClient(Protocol):
    platform: str

    def async_invoke(self, function: str, payload: JointObject) -> AcceptToken: ...


class Backend(Protocol):
    def ds_create(self, spec: DsSpec) -> DataStore: ...

    def faas_create(self, spec: FaaSSpec) -> FaaSClient: ...


class Hooks(Protocol):
    """Protocol points where a test backend may inject a crash."""

    def at(self, point: str, k: int | None = None) -> None: ...


class NoHooks:
    def at(self, point: str, k: int | None = None) -> None:
        return None

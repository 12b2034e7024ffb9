"""The event envelope passed between functions, and its JSON wire form.

Wire schema (``v`` = 1)::

    {"v": 1,
     "control": {"workflowId", "step", "branch": [int], "session", "invokeMode"},
     "data": {"mode": "direct", "payload": <base64>}
           | {"mode": "indirect", "refs": [{"key", "platform", "kind"}]}
           | {"mode": "none"},
     "meta": {"caller": str|null, "iteration": int, "label": str|null,
              "request": str|null, "extraGc": [str]}}

``branch`` is top-first (most recent fan-out level first).
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field, replace

from .shim import TABLE

WIRE_VERSION = 1


class MalformedEnvelope(ValueError):
    pass


@dataclass(frozen=True)
class Ref:
    key: str
    platform: str
    kind: str = TABLE

    def to_dict(self) -> dict:
        return {"key": self.key, "platform": self.platform, "kind": self.kind}


@dataclass(frozen=True)
class JointObject:
    workflow_id: str
    step: int = 0
    branch: tuple[int, ...] = ()
    session: str = ""
    invoke_mode: str = "Sequence"
    payload: bytes | None = None
    refs: tuple[Ref, ...] = ()
    caller: str | None = None
    iteration: int = 0
    label: str | None = None
    request: str | None = None
    extra_gc: tuple[str, ...] = field(default=())

    @property
    def data_mode(self) -> str:
        if self.payload is not None:
            return "direct"
        return "indirect" if self.refs else "none"

    def wire_size(self) -> int:
        """Request size as a platform would meter it (payload counted raw)."""
        raw = len(self.payload) if self.payload is not None else 0
        return raw + len(json.dumps(self._dict(with_payload=False)))

    def evolve(self, **changes) -> JointObject:
        return replace(self, **changes)

    def _dict(self, with_payload: bool = True) -> dict:
        if self.payload is not None:
            data = {"mode": "direct"}
            if with_payload:
                data["payload"] = base64.b64encode(self.payload).decode("ascii")
        elif self.refs:
            data = {"mode": "indirect", "refs": [r.to_dict() for r in self.refs]}
        else:
            data = {"mode": "none"}
        return {
            "v": WIRE_VERSION,
            "control": {
                "workflowId": self.workflow_id,
                "step": self.step,
                "branch": list(self.branch),
                "session": self.session,
                "invokeMode": self.invoke_mode,
            },
            "data": data,
            "meta": {
                "caller": self.caller,
                "iteration": self.iteration,
                "label": self.label,
                "request": self.request,
                "extraGc": list(self.extra_gc),
            },
        }

    def to_dict(self) -> dict:
        return self._dict()

    def to_json(self) -> str:
        return json.dumps(self._dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> JointObject:
        try:
            if d.get("v") != WIRE_VERSION:
                raise MalformedEnvelope(f"unsupported envelope version {d.get('v')!r}")
            c, data, meta = d["control"], d["data"], d.get("meta", {})
            payload, refs = None, ()
            mode = data["mode"]
            if mode == "direct":
                payload = base64.b64decode(data["payload"], validate=True)
            elif mode == "indirect":
                refs = tuple(Ref(r["key"], r["platform"], r.get("kind", TABLE)) for r in data["refs"])
                if not refs:
                    raise MalformedEnvelope("indirect data without refs")
            elif mode != "none":
                raise MalformedEnvelope(f"unknown data mode {mode!r}")
            step = c["step"]
            if not isinstance(step, int) or step < 0:
                raise MalformedEnvelope(f"bad step {step!r}")
            return cls(
                workflow_id=str(c["workflowId"]),
                step=step,
                branch=tuple(int(b) for b in c.get("branch", [])),
                session=str(c.get("session", "")),
                invoke_mode=str(c.get("invokeMode", "Sequence")),
                payload=payload,
                refs=refs,
                caller=meta.get("caller"),
                iteration=int(meta.get("iteration", 0)),
                label=meta.get("label"),
                request=meta.get("request"),
                extra_gc=tuple(meta.get("extraGc", ())),
            )
        except MalformedEnvelope:
            raise
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise MalformedEnvelope(str(exc)) from exc

    @classmethod
    def from_json(cls, text: str) -> JointObject:
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MalformedEnvelope(str(exc)) from exc
        if not isinstance(d, dict):
            raise MalformedEnvelope("envelope must be a JSON object")
        return cls.from_dict(d)

import asyncio
import hashlib
import inspect
import json
from datetime import datetime, timezone
from typing import Any, Awaitable, Callable, Dict, Optional

from .events import RunEventName

# Tried in order; a bare callable is the fallback.
_SINK_METHODS = ("send", "put", "append", "asend")


def _sink(broker: Any) -> Callable[[dict], Any]:
    for name in _SINK_METHODS:
        method = getattr(broker, name, None)
        if callable(method):
            return method
    if callable(broker):
        return broker
    raise TypeError(f"cannot publish run events to a {type(broker).__name__}")


def _deliver(broker: Any, event: dict) -> Optional[Awaitable[Any]]:
    """Hands ``event`` to the broker; returns what is still to be awaited, if anything."""
    result = _sink(broker)(event)
    return result if inspect.isawaitable(result) else None


async def _settle(pending: Awaitable[Any]) -> None:
    await pending


def _event(run_id: str,
           event: RunEventName,
           stage: Optional[str],
           details: Optional[dict]) -> dict:
    msg = {
        "run_id":    run_id,
        "event":     event.value,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    if stage:
        msg["stage"] = stage
    if details:
        msg["details"] = details
    return msg


def publish(broker: Any,
            run_id: str,
            event: RunEventName,
            stage: Optional[str] = None,
            details: Optional[dict] = None) -> None:
    """
    Send one progress event to ``broker`` from synchronous code; a ``None``
    broker drops it. An asynchronous sink is awaited to completion when no
    loop is running and scheduled on the running loop otherwise.
    """
    if broker is None:
        return
    pending = _deliver(broker, _event(run_id, event, stage, details))
    if pending is None:
        return
    try:
        asyncio.get_running_loop()
    except RuntimeError:
        asyncio.run(_settle(pending))
    else:
        asyncio.ensure_future(pending)


async def apublish(broker: Any,
                   run_id: str,
                   event: RunEventName,
                   stage: Optional[str] = None,
                   details: Optional[dict] = None) -> None:
    if broker is None:
        return
    pending = _deliver(broker, _event(run_id, event, stage, details))
    if pending is not None:
        await pending


def canonical_json(data: Any) -> bytes:
    """
    Deterministic JSON serialisation (no spaces, sorted keys).
    """
    return json.dumps(
        data,
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")

def digest(data: Any) -> str:
    return hashlib.sha256(canonical_json(data)).hexdigest()

def input_hashes(inputs: Dict[str, Any]) -> Dict[str, str]:
    return {name: digest(value) for name, value in sorted(inputs.items())}

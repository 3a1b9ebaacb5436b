import asyncio
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

from .events import RunEventName
from .utils import apublish

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Trial:
    """One independent unit of work: ``fn(*args)`` is pure given its arguments."""

    name: str
    fn: Callable[..., Any]
    args: tuple = ()
    details: Dict[str, Any] = field(default_factory=dict)


class ExperimentRunner:
    """
    Runs trials concurrently in worker threads and returns their results in
    submission order. Progress goes to an optional message broker.
    """

    def __init__(self, message_broker: Any = None, run_id: str = "run",
                 max_concurrency: Optional[int] = None):
        self.message_broker = message_broker
        self.run_id = run_id
        self.max_concurrency = max_concurrency

    async def _publish(self, event: RunEventName, stage: Optional[str] = None,
                       details: Optional[dict] = None) -> None:
        await apublish(self.message_broker, self.run_id, event, stage, details)

    async def _run_one(self, trial: Trial, gate: Optional[asyncio.Semaphore]) -> Any:
        async def body():
            await self._publish(RunEventName.TRIAL_START, trial.name, trial.details or None)
            try:
                result = await asyncio.to_thread(trial.fn, *trial.args)
            except Exception as exc:
                await self._publish(RunEventName.ERROR, trial.name, {"error": str(exc)})
                raise
            summary = result.to_dict() if hasattr(result, "to_dict") else None
            await self._publish(RunEventName.TRIAL_FINISH, trial.name, summary)
            return result

        if gate is None:
            return await body()
        async with gate:
            return await body()

    async def arun(self, trials: Sequence[Trial]) -> List[Any]:
        await self._publish(RunEventName.RUN_START, details={"trials": len(trials)})
        gate = asyncio.Semaphore(self.max_concurrency) if self.max_concurrency else None
        results = await asyncio.gather(*(self._run_one(t, gate) for t in trials))
        await self._publish(RunEventName.DONE, details={"trials": len(trials)})
        logger.debug("%s: %d trials finished", self.run_id, len(trials))
        return list(results)

    def run(self, trials: Sequence[Trial]) -> List[Any]:
        try:
            asyncio.get_running_loop()
        except RuntimeError:
            return asyncio.run(self.arun(trials))
        raise RuntimeError("ExperimentRunner.run called inside an event loop; await arun instead")

import asyncio
import json
import threading
import time

import pytest

from quasilattice.config import Settings, load_settings
from quasilattice.events import RunEventName
from quasilattice.exceptions import SpecParseError
from quasilattice.runner import ExperimentRunner, Trial
from quasilattice.utils import apublish, canonical_json, digest, input_hashes, publish


def slow_square(x, pause):
    time.sleep(pause)
    return x * x


def test_results_keep_submission_order():
    trials = [Trial(f"t{i}", slow_square, (i, 0.01 * (5 - i))) for i in range(5)]
    assert ExperimentRunner().run(trials) == [0, 1, 4, 9, 16]


def test_events_reach_the_broker():
    events = []
    ExperimentRunner(events, run_id="demo").run([Trial("only", slow_square, (3, 0.0), {"x": 3})])
    assert [e["event"] for e in events] == ["run_start", "trial_start", "trial_finish", "done"]
    assert all(e["run_id"] == "demo" for e in events)
    assert events[1]["stage"] == "only" and events[1]["details"] == {"x": 3}


def test_async_broker():
    received = []

    async def send(msg):
        received.append(msg["event"])

    ExperimentRunner(send).run([Trial("a", slow_square, (1, 0.0))])
    assert received[0] == "run_start" and received[-1] == "done"


def test_errors_propagate_and_are_reported():
    events = []

    def boom():
        raise ValueError("bad trial")

    with pytest.raises(ValueError):
        ExperimentRunner(events).run([Trial("boom", boom)])
    assert any(e["event"] == "error" and e["details"]["error"] == "bad trial" for e in events)


def test_concurrency_limit():
    active, peak = [0], [0]
    lock = threading.Lock()

    def work():
        with lock:
            active[0] += 1
            peak[0] = max(peak[0], active[0])
        time.sleep(0.02)
        with lock:
            active[0] -= 1

    ExperimentRunner(max_concurrency=2).run([Trial(str(i), work) for i in range(6)])
    assert peak[0] <= 2


def test_run_inside_a_loop_is_refused():
    async def inner():
        with pytest.raises(RuntimeError):
            ExperimentRunner().run([])
        return await ExperimentRunner().arun([Trial("x", slow_square, (2, 0.0))])

    assert asyncio.run(inner()) == [4]


def test_publish_without_broker_is_a_no_op():
    publish(None, "r", RunEventName.DONE)
    sink = []
    publish(sink, "r", RunEventName.STAGE_START, stage="s")
    assert sink[0]["stage"] == "s" and "details" not in sink[0]


class Outbox:
    def __init__(self):
        self.sent = []

    async def send(self, event):
        self.sent.append(event["event"])


def test_publish_reaches_every_kind_of_sink():
    seen = []
    publish(seen.append, "r", RunEventName.RUN_START)

    async def deliver(event):
        seen.append(event["event"])

    publish(deliver, "r", RunEventName.DONE)
    outbox = Outbox()
    publish(outbox, "r", RunEventName.ERROR, details={"error": "x"})
    assert seen == ["run_start", "done"]
    assert outbox.sent == ["error"]
    with pytest.raises(TypeError):
        publish(42, "r", RunEventName.DONE)


def test_publish_inside_a_loop_is_scheduled():
    outbox = Outbox()

    async def inner():
        publish(outbox, "r", RunEventName.STAGE_START, stage="s")
        await asyncio.sleep(0)
        await asyncio.sleep(0)

    asyncio.run(inner())
    assert outbox.sent == ["stage_start"]


def test_apublish_awaits_a_queue():
    async def inner():
        queue = asyncio.Queue()
        await apublish(queue, "r", RunEventName.TRIAL_FINISH, stage="t")
        await apublish(None, "r", RunEventName.DONE)
        return queue.get_nowait()

    event = asyncio.run(inner())
    assert event["event"] == "trial_finish" and event["stage"] == "t"


def test_hashes_are_canonical():
    assert canonical_json({"b": 1, "a": [1, 2]}) == b'{"a":[1,2],"b":1}'
    assert digest({"a": 1, "b": 2}) == digest({"b": 2, "a": 1})
    hashes = input_hashes({"z": 1, "a": 2})
    assert list(hashes) == ["a", "z"]
    assert all(len(h) == 64 for h in hashes.values())


def test_settings(tmp_path):
    packaged = load_settings()
    assert packaged == Settings()
    path = tmp_path / "calibration.json"
    path.write_text(json.dumps({"theta_sampling": 0.01, "max_candidates": 1000}))
    custom = load_settings(path)
    assert custom.theta_sampling == 0.01
    assert custom.max_candidates == 1000
    assert custom.tail_tolerance == packaged.tail_tolerance
    path.write_text("[1, 2]")
    with pytest.raises(SpecParseError):
        load_settings(path)
    with pytest.raises(SpecParseError):
        load_settings(tmp_path / "missing.json")
    with pytest.raises(SpecParseError):
        Settings.from_dict({"theta_sampling": "high"})

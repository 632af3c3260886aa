"""Action-path delay injection: immediate, fixed-delay FIFO, and realtime modes.

The buffer sits between the policy and the simulator and only changes *when*
a command executes, never its contents.
"""

from __future__ import annotations

import math
from collections import deque

from .core import SIM_RATE_DEFAULT, Action, stop_action

MODES = ("immediate", "fixed", "realtime")


def ticks_from_ms(latency_ms: float, rate_hz: int = SIM_RATE_DEFAULT) -> int:
    """Convert a millisecond delay into whole simulation ticks (floor)."""
    if latency_ms < 0:
        raise ValueError(f"latency_ms must be >= 0, got {latency_ms}")
    if rate_hz <= 0:
        raise ValueError(f"rate_hz must be positive, got {rate_hz}")
    return int(math.floor(latency_ms * rate_hz / 1000.0))


class ActionBuffer:
    """Delays application of policy commands.

    fixed mode: the command applied at tick t was created at tick t - delay
    (warmup command before the queue fills). realtime mode: a command whose
    measured inference time fits inside the tick period lands the same tick;
    slower commands land ``floor(ms * rate / 1000)`` ticks later and the last
    applied command is repeated in between.
    """

    def __init__(self, mode: str = "immediate", delay_ticks: int = 0,
                 rate_hz: int = SIM_RATE_DEFAULT,
                 warmup_action: Action | None = None):
        if mode not in MODES:
            raise ValueError(f"unknown latency mode {mode!r}")
        if delay_ticks < 0:
            raise ValueError("delay_ticks must be >= 0")
        self.mode = mode
        self.delay_ticks = delay_ticks
        self.rate_hz = rate_hz
        self.warmup_action = warmup_action if warmup_action is not None else stop_action()
        self.last_applied = self.warmup_action
        self._queue: deque[Action] = deque()
        # realtime: actions in flight as (lands_at_tick, action), ordered.
        self._pending: deque[tuple[int, Action]] = deque()

    @property
    def queue_len(self) -> int:
        return len(self._queue)

    def push_then_pop(self, fresh: Action, tick: int) -> Action:
        """Insert this tick's fresh command, return the one to execute."""
        if self.mode == "immediate":
            self.last_applied = fresh
            return fresh
        if self.mode == "realtime":
            raise RuntimeError("realtime mode requires realtime_apply with a measured time")
        self._queue.append(fresh)
        if tick >= self.delay_ticks:
            applied = self._queue.popleft()
        else:
            applied = self.warmup_action
        self.last_applied = applied
        return applied

    def _landing_delay(self, measured_ms: float) -> int:
        period_ms = 1000.0 / self.rate_hz
        if measured_ms <= period_ms:
            return 0
        return ticks_from_ms(measured_ms, self.rate_hz)

    def realtime_apply(self, fresh: Action, measured_ms: float, tick: int) -> Action:
        """Schedule `fresh` by its measured wall-clock inference time.

        Within-cycle commands execute immediately; late commands land after
        their landing delay while the cached last command is reused.
        """
        if self.mode != "realtime":
            raise RuntimeError(f"realtime_apply called in {self.mode!r} mode")
        if measured_ms < 0:
            raise ValueError("measured_inference_ms must be >= 0")
        delay = self._landing_delay(measured_ms)
        self._pending.append((tick + delay, fresh))
        # Apply the newest command that has landed; anything created earlier
        # is stale by then and dropped, landed or not.
        newest = -1
        for i, (lands_at, _) in enumerate(self._pending):
            if lands_at <= tick:
                newest = i
        if newest >= 0:
            self.last_applied = self._pending[newest][1]
            for _ in range(newest + 1):
                self._pending.popleft()
        return self.last_applied


def load_latency_trace(path) -> list[float]:
    """Read an inference-time trace: one milliseconds value per line."""
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            values.append(float(line))
    return values

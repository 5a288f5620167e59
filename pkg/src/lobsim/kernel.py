"""Deterministic discrete-event simulation kernel.

Agents exchange timestamped messages through a single-threaded event loop.
Time is an integer count of nanoseconds since midnight of the simulated
trading day.  Delivery order is a total order: events pop sorted by
(deliver_at, insertion sequence), so ties at equal timestamps resolve FIFO
by insertion.  Runs with identical configuration and seed are bit-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from heapq import heappop, heappush
from typing import Any, Optional

import numpy as np

SimTime = int  # nanoseconds since midnight

NANOS_PER_SECOND = 1_000_000_000
NANOS_PER_MINUTE = 60 * NANOS_PER_SECOND
NANOS_PER_HOUR = 60 * NANOS_PER_MINUTE


def time_from_str(text: str) -> SimTime:
    """Parse "HH:MM:SS" or "HH:MM:SS.fraction" into nanoseconds since midnight."""
    parts = text.strip().split(":")
    if len(parts) != 3:
        raise ValueError(f"expected HH:MM:SS, got {text!r}")
    hours, minutes = int(parts[0]), int(parts[1])
    if "." in parts[2]:
        sec_part, frac = parts[2].split(".", 1)
        frac_nanos = int(frac.ljust(9, "0")[:9])
    else:
        sec_part, frac_nanos = parts[2], 0
    return hours * NANOS_PER_HOUR + minutes * NANOS_PER_MINUTE + int(sec_part) * NANOS_PER_SECOND + frac_nanos


def time_to_str(t: SimTime) -> str:
    """Format nanoseconds since midnight as "HH:MM:SS.fffffffff"."""
    seconds, nanos = divmod(t, NANOS_PER_SECOND)
    minutes, sec = divmod(seconds, 60)
    hours, mins = divmod(minutes, 60)
    return f"{hours:02d}:{mins:02d}:{sec:02d}.{nanos:09d}"


def seconds(x: float) -> SimTime:
    return int(round(x * NANOS_PER_SECOND))


class KernelError(Exception):
    """Base error for kernel misuse."""


class SchedulingError(KernelError):
    """Raised when a wakeup is requested in the simulated past."""


class UnknownRecipientError(KernelError):
    """Raised to the sender when a message targets an unregistered agent."""


class AgentFault(KernelError):
    """Wraps an exception escaping an agent callback; identifies the agent."""

    def __init__(self, agent_id: int, agent_name: str, cause: BaseException):
        super().__init__(f"agent {agent_id} ({agent_name}) failed: {cause!r}")
        self.agent_id = agent_id
        self.agent_name = agent_name
        self.__cause__ = cause


@dataclass(frozen=True)
class Wakeup:
    """Kernel-generated payload delivered by schedule_wakeup."""

    tag = "wakeup"

    def summary(self) -> str:
        return ""


@dataclass
class Message:
    """A point-to-point payload between agents.

    deliver_at is assigned by the kernel when the message is enqueued
    (send time + computation delay + pairwise latency); callers leave it
    at the default.
    """

    sender_id: int
    recipient_id: int
    payload: Any
    deliver_at: SimTime = -1


@dataclass
class KernelConfig:
    start_time: SimTime
    stop_time: SimTime
    latency_nanos: int = 0
    computation_delay_nanos: int = 0
    rng_seed: int = 0
    # overrides keyed by (sender_id, recipient_id); the scalar applies elsewhere
    latency_overrides: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.start_time >= self.stop_time:
            raise ValueError("start_time must precede stop_time")
        if self.latency_nanos < 0 or self.computation_delay_nanos < 0:
            raise ValueError("latency and computation delay must be non-negative")
        for value in self.latency_overrides.values():
            if value < 0:
                raise ValueError("latency overrides must be non-negative")


@dataclass(frozen=True)
class LogRecord:
    time: SimTime
    sender_id: int
    recipient_id: int
    tag: str
    summary: str
    detail: Optional[dict] = None

    def to_json(self) -> str:
        body = {
            "time": self.time,
            "sender": self.sender_id,
            "recipient": self.recipient_id,
            "tag": self.tag,
            "summary": self.summary,
        }
        if self.detail is not None:
            body["detail"] = self.detail
        return json.dumps(body, sort_keys=True)


class SimulationLog:
    """Record of every delivered message plus final agent states."""

    def __init__(self) -> None:
        self.records: list[LogRecord] = []
        self.final_states: dict[int, dict] = {}

    def append(self, record: LogRecord) -> None:
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for record in self.records:
                fh.write(record.to_json())
                fh.write("\n")
            fh.write(json.dumps({"final_states": self.final_states}, sort_keys=True))
            fh.write("\n")


class Agent:
    """Base class for kernel-resident agents.

    The kernel assigns `agent_id` at registration and a seeded numpy
    Generator (`rng`) before on_start.  Callbacks run on the kernel thread;
    agents must not retain references to kernel internals across callbacks.
    """

    def __init__(self, name: str = ""):
        self.agent_id: int = -1
        self.name = name or type(self).__name__
        self.kernel: Optional["Kernel"] = None
        self.rng: Optional[np.random.Generator] = None

    def on_start(self, kernel: "Kernel") -> None:
        """Called once at start_time, before any event is delivered."""

    def on_wakeup(self, now: SimTime) -> None:
        """Called when a Wakeup scheduled by this agent is delivered."""

    def on_message(self, now: SimTime, sender_id: int, payload: Any) -> None:
        """Called when a message from another agent is delivered."""

    def on_stop(self) -> None:
        """Called once after the event loop terminates."""

    def state_summary(self) -> dict:
        return {}


class Kernel:
    """Single-threaded event loop delivering messages between agents."""

    def __init__(self, config: KernelConfig):
        config.validate()
        self.config = config
        self.agents: list[Agent] = []
        self.now: SimTime = config.start_time
        self._queue: list[tuple[SimTime, int, Message]] = []
        self._sequence = 0
        self._running = False

    def register(self, agent: Agent) -> int:
        if self._running:
            raise KernelError("cannot register agents while running")
        agent.agent_id = len(self.agents)
        self.agents.append(agent)
        return agent.agent_id

    def latency(self, sender_id: int, recipient_id: int) -> int:
        return self.config.latency_overrides.get((sender_id, recipient_id), self.config.latency_nanos)

    def schedule_wakeup(self, agent_id: int, at: SimTime) -> None:
        if at < self.now:
            raise SchedulingError(f"wakeup at {at} is in the past (now={self.now})")
        self._check_agent(agent_id)
        self._enqueue(Message(agent_id, agent_id, Wakeup(), deliver_at=at))

    def send_message(self, msg: Message) -> None:
        self._check_agent(msg.sender_id)
        if not 0 <= msg.recipient_id < len(self.agents):
            raise UnknownRecipientError(f"unknown recipient {msg.recipient_id}")
        msg.deliver_at = self.now + self.config.computation_delay_nanos + self.latency(msg.sender_id, msg.recipient_id)
        self._enqueue(msg)

    def send(self, sender_id: int, recipient_id: int, payload: Any) -> None:
        self.send_message(Message(sender_id, recipient_id, payload))

    def _check_agent(self, agent_id: int) -> None:
        if not 0 <= agent_id < len(self.agents):
            raise KernelError(f"unregistered agent {agent_id}")

    def _enqueue(self, msg: Message) -> None:
        heappush(self._queue, (msg.deliver_at, self._sequence, msg))
        self._sequence += 1

    def run(self) -> SimulationLog:
        """Deliver events in (deliver_at, insertion) order until the queue
        drains or stop_time passes; returns the full delivery log."""
        log = SimulationLog()
        self.now = self.config.start_time
        self._running = True
        try:
            for agent in self.agents:
                self._invoke(agent, agent.on_start, self)
            while self._queue:
                deliver_at, _, msg = self._queue[0]
                if deliver_at > self.config.stop_time:
                    break
                heappop(self._queue)
                self.now = deliver_at
                recipient = self.agents[msg.recipient_id]
                payload = msg.payload
                tag = getattr(payload, "tag", type(payload).__name__.lower())
                summary = payload.summary() if hasattr(payload, "summary") else str(payload)
                detail = payload.detail() if hasattr(payload, "detail") else None
                log.append(LogRecord(deliver_at, msg.sender_id, msg.recipient_id, tag, summary, detail))
                if isinstance(payload, Wakeup):
                    self._invoke(recipient, recipient.on_wakeup, deliver_at)
                else:
                    self._invoke(recipient, recipient.on_message, deliver_at, msg.sender_id, payload)
            for agent in self.agents:
                self._invoke(agent, agent.on_stop)
                log.final_states[agent.agent_id] = agent.state_summary()
        finally:
            self._running = False
        return log

    def _invoke(self, agent: Agent, callback, *args) -> None:
        try:
            callback(*args)
        except KernelError:
            raise
        except Exception as exc:  # abort with the offending agent identified
            raise AgentFault(agent.agent_id, agent.name, exc) from exc


def build_kernel(config: KernelConfig, agents: list[Agent]) -> Kernel:
    """Register `agents` in order and hand each a child RNG derived from the
    config seed, so identical (config, roster) pairs replay identically."""
    kernel = Kernel(config)
    seed_seq = np.random.SeedSequence(config.rng_seed)
    children = seed_seq.spawn(len(agents)) if agents else []
    for agent, child in zip(agents, children):
        kernel.register(agent)
        agent.kernel = kernel
        agent.rng = np.random.default_rng(child)
    return kernel


def run_simulation(config: KernelConfig, agents: list[Agent]) -> SimulationLog:
    return build_kernel(config, agents).run()

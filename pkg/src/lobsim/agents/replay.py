"""Replays a historical or synthetic LOBSTER event stream into the exchange.

Event mapping:
  type 1 -> LimitOrder under the event's own order id
  type 2 -> partial CancelOrder (reduce by the event size)
  type 3 -> full CancelOrder
  type 4 -> a market order for the executed size on the side opposite the
            resting order, which reproduces the trade without force-filling
  types 5 and 7 -> skipped, counted
Events stamped at or before the kernel start time are submitted in one
burst at start (fast-forward warmup).
"""

from __future__ import annotations

from typing import Iterable

from ..kernel import SimTime
from ..lobster import EventType, LobsterEvent
from ..messages import LimitOrder, MarketOrder, CancelOrder
from .base import TradingAgent


class MarketReplayAgent(TradingAgent):
    def __init__(self, events: Iterable[LobsterEvent], exchange_id: int = 0,
                 name: str = "replay"):
        super().__init__(exchange_id, name)
        self.events = list(events)
        self._cursor = 0
        self.submitted = 0
        self.skipped: dict[str, int] = {}
        self.type4_market_orders = 0

    def on_start(self, kernel) -> None:
        self.kernel.schedule_wakeup(self.agent_id, kernel.config.start_time)

    def on_wakeup(self, now: SimTime) -> None:
        while self._cursor < len(self.events) and self.events[self._cursor].time_ns <= now:
            self._submit(self.events[self._cursor])
            self._cursor += 1
        if self._cursor < len(self.events):
            next_at = self.events[self._cursor].time_ns
            if next_at <= self.kernel.config.stop_time:
                self.kernel.schedule_wakeup(self.agent_id, next_at)

    def _submit(self, event: LobsterEvent) -> None:
        if event.event_type is EventType.NEW_LIMIT:
            payload = LimitOrder(event.order_id, event.side, event.size, event.price)
        elif event.event_type is EventType.PARTIAL_CANCEL:
            payload = CancelOrder(event.order_id, event.size)
        elif event.event_type is EventType.DELETE:
            payload = CancelOrder(event.order_id)
        elif event.event_type is EventType.EXECUTE_VISIBLE:
            # the aggressor of a visible execution sits opposite the resting
            # order the event describes
            payload = MarketOrder(self.next_order_id(), event.side.opposite, event.size)
            self.type4_market_orders += 1
        else:
            key = event.event_type.name.lower()
            self.skipped[key] = self.skipped.get(key, 0) + 1
            return
        self.kernel.send(self.agent_id, self.exchange_id, payload)
        self.submitted += 1

    def state_summary(self) -> dict:
        return {
            "submitted": self.submitted,
            "skipped": dict(sorted(self.skipped.items())),
            "type4_market_orders": self.type4_market_orders,
            "events_total": len(self.events),
        }

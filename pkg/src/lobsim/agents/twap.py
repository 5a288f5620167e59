"""TWAP benchmark: the parent order split evenly across period boundaries
and sent as market orders.

The agent runs the same query-then-act period loop as the learning agent
(market-data query at each boundary, child order on the reply) so paired
comparisons see identical timing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ..book import Side
from ..kernel import SimTime, seconds
from ..messages import MarketDataReply, OrderExecuted
from ..rl import ActionSpace, EpisodeResult, PLACEMENT_MARKET
from .base import TradingAgent


@dataclass
class TWAPConfig:
    parent_quantity: int
    side: Side
    session_start: SimTime
    session_end: SimTime
    period: SimTime = seconds(30)

    def validate(self) -> None:
        if self.parent_quantity <= 0:
            raise ValueError("parent_quantity must be positive")
        if self.session_start >= self.session_end:
            raise ValueError("session start must precede end")
        length = self.session_end - self.session_start
        if self.period <= 0 or length % self.period != 0:
            raise ValueError("session length must be a whole number of periods")

    @property
    def num_periods(self) -> int:
        return (self.session_end - self.session_start) // self.period


def twap_schedule(config: TWAPConfig) -> list:
    """(time, quantity) per period boundary; quantities sum to the parent
    quantity, remainder shares going to the earliest periods."""
    config.validate()
    periods = config.num_periods
    base, remainder = divmod(config.parent_quantity, periods)
    return [
        (config.session_start + i * config.period, base + (1 if i < remainder else 0))
        for i in range(periods)
    ]


class TWAPExecutionAgent(TradingAgent):
    def __init__(self, config: TWAPConfig, exchange_id: int = 0, name: str = "twap"):
        config.validate()
        super().__init__(exchange_id, name)
        self.config = config
        self.schedule = twap_schedule(config)
        self._period = 0
        self._pending_quantity: Optional[int] = None
        self._order_period: dict = {}
        self.fills: list = []  # (period, quantity, price_ticks)
        self.result = EpisodeResult(episode=0, parent_quantity=config.parent_quantity)

    def on_start(self, kernel) -> None:
        self.kernel.schedule_wakeup(self.agent_id, self.schedule[0][0])

    def on_wakeup(self, now: SimTime) -> None:
        self._pending_quantity = self.schedule[self._period][1]
        self.query_market_data(depth=1)

    def on_message(self, now: SimTime, sender_id: int, payload) -> None:
        if isinstance(payload, MarketDataReply):
            self._act(payload)
        elif isinstance(payload, OrderExecuted):
            period = self._order_period.get(payload.order_id, self._period)
            self.fills.append((period, payload.quantity, payload.price))
            self.result.filled_quantity += payload.quantity

    def _act(self, payload: MarketDataReply) -> None:
        if self._pending_quantity is None:
            return
        mid = payload.snapshot.mid_price
        if self.result.arrival_price is None and mid is not None:
            self.result.arrival_price = mid
        quantity = self._pending_quantity
        self._pending_quantity = None
        if quantity > 0:
            order_id = self.send_market(self.config.side, quantity)
            self._order_period[order_id] = self._period
        self.result.action_trace.append(ActionSpace().encode(1.0, PLACEMENT_MARKET))
        self._period += 1
        if self._period < len(self.schedule):
            self.kernel.schedule_wakeup(self.agent_id, self.schedule[self._period][0])

    def per_period_vwap(self) -> list:
        """Realized (period, filled, vwap) rows for reporting."""
        rows = {}
        for period, quantity, price in self.fills:
            filled, notional = rows.get(period, (0, 0))
            rows[period] = (filled + quantity, notional + quantity * price)
        return [(p, q, n / q) for p, (q, n) in sorted(rows.items())]

    def on_stop(self) -> None:
        total = sum(q for _, q, _ in self.fills)
        if total > 0:
            notional = sum(q * p for _, q, p in self.fills)
            self.result.fill_vwap = notional / total

    def state_summary(self) -> dict:
        return {
            "filled_quantity": self.result.filled_quantity,
            "fill_vwap": self.result.fill_vwap,
            "arrival_price": self.result.arrival_price,
        }

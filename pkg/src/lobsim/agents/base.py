"""Shared plumbing for agents that talk to the exchange."""

from __future__ import annotations

from ..book import Side
from ..kernel import Agent
from ..messages import CancelOrder, LimitOrder, MarketDataQuery, MarketOrder

# Each agent's order ids live in a disjoint band so they can never collide
# with replayed historical ids (which are far smaller in practice).
ORDER_ID_BAND = 10**12


class TradingAgent(Agent):
    """An agent that submits orders to a single exchange agent."""

    def __init__(self, exchange_id: int = 0, name: str = ""):
        super().__init__(name)
        self.exchange_id = exchange_id
        self._order_seq = 0

    def next_order_id(self) -> int:
        self._order_seq += 1
        return (self.agent_id + 1) * ORDER_ID_BAND + self._order_seq

    def send_limit(self, side: Side, quantity: int, price_ticks: int) -> int:
        order_id = self.next_order_id()
        self.kernel.send(self.agent_id, self.exchange_id,
                         LimitOrder(order_id, side, quantity, price_ticks))
        return order_id

    def send_market(self, side: Side, quantity: int) -> int:
        order_id = self.next_order_id()
        self.kernel.send(self.agent_id, self.exchange_id,
                         MarketOrder(order_id, side, quantity))
        return order_id

    def send_cancel(self, order_id: int, quantity=None) -> None:
        self.kernel.send(self.agent_id, self.exchange_id, CancelOrder(order_id, quantity))

    def query_market_data(self, depth: int = 3) -> None:
        self.kernel.send(self.agent_id, self.exchange_id, MarketDataQuery(depth))

"""The exchange: owns the book, matches orders, answers market-data queries.

Notification protocol, in emission order per inbound message:
  * each fill -> OrderExecuted to the taker's owner and to each maker's owner
  * a resting remainder -> OrderAccepted to the sender
  * an unfilled market remainder -> OrderCancelled(reason "unfilled")
  * CancelOrder -> OrderCancelled ack with the removed quantity
    (reason "not_found" with quantity 0 when the id is unknown)
  * malformed or duplicate orders -> OrderCancelled(reason "rejected:...")
  * MarketDataQuery -> MarketDataReply with a depth-k snapshot
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from ..book import BookError, Order, OrderBook, OrderKind, Side
from ..kernel import Agent, SimTime
from ..messages import (
    CancelOrder,
    LimitOrder,
    MarketDataQuery,
    MarketDataReply,
    MarketOrder,
    OrderAccepted,
    OrderCancelled,
    OrderExecuted,
)


@dataclass(frozen=True)
class FlowRecord:
    """One accepted inbound order action, for stylized-fact analysis."""

    time: SimTime
    kind: str  # "limit", "market", "cancel", "reduce"
    size: int
    side: Optional[Side]
    price_ticks: Optional[int]
    agent_id: int


@dataclass(frozen=True)
class QuoteRecord:
    time: SimTime
    best_bid: Optional[int]
    best_ask: Optional[int]
    last_trade_price: Optional[int]


class ExchangeAgent(Agent):
    def __init__(self, allow_self_trade: bool = True, record_quotes: bool = False,
                 name: str = "exchange"):
        super().__init__(name)
        self.book = OrderBook(allow_self_trade=allow_self_trade)
        self.record_quotes = record_quotes
        self.owners: dict[int, int] = {}
        self.flow: list[FlowRecord] = []
        self.quotes: list[QuoteRecord] = []

    def on_message(self, now: SimTime, sender_id: int, payload) -> None:
        if isinstance(payload, LimitOrder):
            self._handle_order(now, sender_id, payload, OrderKind.LIMIT)
        elif isinstance(payload, MarketOrder):
            self._handle_order(now, sender_id, payload, OrderKind.MARKET)
        elif isinstance(payload, CancelOrder):
            self._handle_cancel(now, sender_id, payload)
        elif isinstance(payload, MarketDataQuery):
            self._send(sender_id, MarketDataReply(self.book.snapshot(payload.depth)))
            return  # queries do not move the book; skip quote recording
        else:
            self._send(sender_id, OrderCancelled(-1, 0, "rejected:unsupported_payload"))
            return
        if self.record_quotes:
            self.quotes.append(QuoteRecord(now, self.book.best_bid(), self.book.best_ask(),
                                           self.book.last_trade_price))

    def _handle_order(self, now: SimTime, sender_id: int, payload, kind: OrderKind) -> None:
        price = payload.price if kind is OrderKind.LIMIT else 0
        order = Order(payload.order_id, sender_id, payload.side, price,
                      payload.quantity, kind, now)
        try:
            fills, resting = self.book.submit(order)
        except BookError as exc:
            self._send(sender_id, OrderCancelled(payload.order_id, payload.quantity,
                                                 f"rejected:{exc}"))
            return
        self.owners[payload.order_id] = sender_id
        self.flow.append(FlowRecord(now, kind.name.lower(), payload.quantity,
                                    payload.side, price if kind is OrderKind.LIMIT else None,
                                    sender_id))
        for cancelled in self.book.self_trade_cancels:
            self._send(self.owners.get(cancelled.order_id, sender_id),
                       OrderCancelled(cancelled.order_id, cancelled.quantity,
                                      "self_trade_prevented"))
        self._notify_fills(sender_id, fills)
        if resting is not None:
            self._send(sender_id, OrderAccepted(payload.order_id))
        elif kind is OrderKind.MARKET:
            unfilled = payload.quantity - sum(f.quantity for f in fills)
            if unfilled > 0:
                self._send(sender_id, OrderCancelled(payload.order_id, unfilled, "unfilled"))

    def _notify_fills(self, taker_owner: int, fills) -> None:
        for fill in fills:
            self._send(taker_owner,
                       OrderExecuted(fill.taker_order_id, fill.quantity, fill.price_ticks))
            maker_owner = self.owners.get(fill.maker_order_id)
            if maker_owner is not None:
                self._send(maker_owner,
                           OrderExecuted(fill.maker_order_id, fill.quantity, fill.price_ticks))

    def _handle_cancel(self, now: SimTime, sender_id: int, payload: CancelOrder) -> None:
        owner = self.owners.get(payload.order_id)
        if owner is not None and owner != sender_id:
            self._send(sender_id, OrderCancelled(payload.order_id, 0, "rejected:not_owner"))
            return
        if payload.quantity is None:
            removed = self.book.cancel(payload.order_id)
            reason = "cancelled" if removed > 0 else "not_found"
            if removed > 0:
                self.flow.append(FlowRecord(now, "cancel", removed, None, None, sender_id))
            self._send(sender_id, OrderCancelled(payload.order_id, removed, reason))
        else:
            order = self.book.order(payload.order_id)
            if order is None:
                self._send(sender_id, OrderCancelled(payload.order_id, 0, "not_found"))
                return
            before = order.quantity
            try:
                remaining = self.book.reduce(payload.order_id, payload.quantity)
            except BookError as exc:
                self._send(sender_id, OrderCancelled(payload.order_id, 0, f"rejected:{exc}"))
                return
            removed = before - remaining
            self.flow.append(FlowRecord(now, "reduce", removed, None, None, sender_id))
            self._send(sender_id, OrderCancelled(payload.order_id, removed, "reduced"))

    def _send(self, recipient_id: int, payload) -> None:
        self.kernel.send(self.agent_id, recipient_id, payload)

    def state_summary(self) -> dict:
        return {
            "resting_quantity": self.book.resting_quantity(),
            "best_bid": self.book.best_bid(),
            "best_ask": self.book.best_ask(),
            "last_trade_price": self.book.last_trade_price,
        }

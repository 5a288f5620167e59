"""Naive flat-list matching oracle.

Deliberately simple and slow: resting orders live in one unsorted list and
every marketable step rescans it for the current best opposite order.  Kept
free of any shared code with lobsim.book so disagreements are meaningful.
"""

from dataclasses import dataclass

BID = "bid"
ASK = "ask"


@dataclass
class RefOrder:
    order_id: int
    side: str
    price: int
    quantity: int
    placed_at: int


class ReferenceBook:
    def __init__(self):
        self.resting: list[RefOrder] = []
        self.filled = 0
        self.cancelled = 0

    def _best_opposite(self, side: str, limit_price, is_market: bool):
        """Best-priced, oldest opposite order this incoming order may hit."""
        best = None
        for order in self.resting:
            if order.side == side:
                continue
            if not is_market:
                if side == BID and order.price > limit_price:
                    continue
                if side == ASK and order.price < limit_price:
                    continue
            if best is None:
                best = order
                continue
            if side == BID:  # taker buys: lowest ask first
                better = order.price < best.price
            else:
                better = order.price > best.price
            if better or (
                order.price == best.price
                and (order.placed_at, order.order_id) < (best.placed_at, best.order_id)
            ):
                best = order
        return best

    def submit(self, order_id: int, side: str, price: int, quantity: int,
               is_market: bool, placed_at: int):
        """Returns (fills, rested) where fills are
        (taker_id, maker_id, price, quantity) tuples in execution order."""
        fills = []
        remaining = quantity
        while remaining > 0:
            maker = self._best_opposite(side, price, is_market)
            if maker is None:
                break
            take = min(remaining, maker.quantity)
            fills.append((order_id, maker.order_id, maker.price, take))
            maker.quantity -= take
            remaining -= take
            self.filled += 2 * take
            if maker.quantity == 0:
                self.resting.remove(maker)
        rested = False
        if not is_market and remaining > 0:
            self.resting.append(RefOrder(order_id, side, price, remaining, placed_at))
            rested = True
        elif remaining > 0:
            self.cancelled += remaining
        return fills, rested

    def cancel(self, order_id: int) -> int:
        for order in self.resting:
            if order.order_id == order_id:
                self.resting.remove(order)
                self.cancelled += order.quantity
                return order.quantity
        return 0

    def reduce(self, order_id: int, by: int):
        """Returns remaining quantity, or None when the id is unknown."""
        for order in self.resting:
            if order.order_id == order_id:
                removed = min(by, order.quantity)
                order.quantity -= removed
                self.cancelled += removed
                if order.quantity == 0:
                    self.resting.remove(order)
                return order.quantity
        return None

    def state(self):
        """Canonical book state: per side, price levels in priority order with
        their order queues."""
        out = {}
        for side in (BID, ASK):
            orders = [o for o in self.resting if o.side == side]
            prices = sorted({o.price for o in orders}, reverse=(side == BID))
            out[side] = [
                (
                    price,
                    [
                        (o.order_id, o.quantity)
                        for o in sorted(
                            (o for o in orders if o.price == price),
                            key=lambda o: (o.placed_at, o.order_id),
                        )
                    ],
                )
                for price in prices
            ]
        return out

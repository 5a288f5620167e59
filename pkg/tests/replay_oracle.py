"""Standalone LOBSTER reconstruction oracle.

Rebuilds best bid/ask directly from the event stream with a flat id -> order
dict, no price levels and no shared code with the simulator.  Type 4 events
consume the referenced resting order in place (the real replay realizes them
as market orders; both must land on the same quotes).
"""


class OracleBook:
    def __init__(self):
        self.orders: dict[int, tuple] = {}  # id -> [direction, price, size]

    def apply(self, event) -> None:
        etype = int(event.event_type)
        if etype == 1:
            self.orders[event.order_id] = [event.direction, event.price, event.size]
        elif etype == 2:
            entry = self.orders.get(event.order_id)
            if entry is not None:
                entry[2] -= event.size
                if entry[2] <= 0:
                    del self.orders[event.order_id]
        elif etype in (3,):
            self.orders.pop(event.order_id, None)
        elif etype == 4:
            entry = self.orders.get(event.order_id)
            if entry is not None:
                entry[2] -= event.size
                if entry[2] <= 0:
                    del self.orders[event.order_id]
        # types 5 and 7 leave the visible book untouched

    def best_bid(self):
        prices = [price for direction, price, _ in self.orders.values() if direction == 1]
        return max(prices) if prices else None

    def best_ask(self):
        prices = [price for direction, price, _ in self.orders.values() if direction == -1]
        return min(prices) if prices else None

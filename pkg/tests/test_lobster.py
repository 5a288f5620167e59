"""Message-file parsing, canonical serialization, and synthetic flow statistics."""

import math

import numpy as np
import pytest

from lobsim import (
    EventType,
    LobsterEvent,
    LobsterParseError,
    Side,
    SyntheticFlowConfig,
    generate_synthetic,
    generate_to_file,
    parse_message_file,
    write_message_file,
)
from lobsim.lobster import parse_line, parse_time_seconds

from replay_oracle import OracleBook


def parse_text(tmp_path, text):
    path = tmp_path / "messages.csv"
    path.write_text(text)
    return list(parse_message_file(path))


class TestParsing:
    def test_new_limit_buy_row(self):
        event = parse_line("34200.000000001,1,11885113,21,2238100,1", 1)
        assert event.time_ns == 34_200_000_000_001
        assert event.event_type is EventType.NEW_LIMIT
        assert event.order_id == 11885113
        assert event.size == 21
        assert event.price == 2_238_100  # $223.81 in dollars x 10^4
        assert event.direction == 1
        assert event.side is Side.BID

    def test_delete_sell_row(self):
        event = parse_line("36000.5,3,42,100,1000000,-1", 1)
        assert event.time_ns == 36_000_500_000_000
        assert event.event_type is EventType.DELETE
        assert event.order_id == 42
        assert event.side is Side.ASK

    def test_empty_file_yields_nothing(self, tmp_path):
        assert parse_text(tmp_path, "") == []

    def test_blank_lines_skipped(self, tmp_path):
        text = "\n34200.0,1,1,10,1000000,1\n\n"
        assert len(parse_text(tmp_path, text)) == 1

    def test_time_parsing_pads_and_truncates(self):
        assert parse_time_seconds("100") == 100_000_000_000
        assert parse_time_seconds("0.123456789") == 123_456_789
        assert parse_time_seconds("1.1234567891") == 1_123_456_789

    def test_wrong_column_count_carries_line_number(self, tmp_path):
        text = "34200.0,1,1,10,1000000,1\n34200.1,1,2,10,1000000\n"
        with pytest.raises(LobsterParseError, match="line 2") as excinfo:
            parse_text(tmp_path, text)
        assert excinfo.value.line_number == 2

    @pytest.mark.parametrize(
        "row,reason",
        [
            ("34200.0,6,1,10,1000000,1", "6"),  # no such event type
            ("34200.0,1,x,10,1000000,1", "invalid literal"),
            ("34200.0,1,1,0,1000000,1", "size must be positive"),
            ("34200.0,1,1,10,0,1", "price must be positive"),
            ("34200.0,1,1,10,1000000,2", "direction"),
            ("-1.0,1,1,10,1000000,1", "negative time"),
        ],
    )
    def test_malformed_rows_rejected(self, row, reason):
        with pytest.raises(LobsterParseError, match=reason):
            parse_line(row, 7)

    def test_hidden_execution_allows_nonpositive_price(self):
        event = parse_line("100.0,5,0,50,0,1", 3)
        assert event.event_type is EventType.EXECUTE_HIDDEN

    def test_nonmonotone_time_warns_but_keeps_event(self, tmp_path):
        text = "100.0,1,1,10,1000000,1\n99.0,1,2,10,1000000,1\n"
        with pytest.warns(UserWarning, match="backwards"):
            events = parse_text(tmp_path, text)
        assert [e.order_id for e in events] == [1, 2]


class TestRoundTrip:
    def test_canonical_time_formatting(self):
        event = parse_line("36000.5,3,42,100,1000000,-1", 1)
        assert event.to_csv_row() == "36000.500000000,3,42,100,1000000,-1"

    def test_parse_write_parse_is_identity(self, tmp_path):
        text = (
            "34200.000000001,1,11885113,21,2238100,1\n"
            "36000.5,3,42,100,1000000,-1\n"
            "36001,2,7,5,2238100,1\n"
            "36002.25,4,11885113,21,2238100,1\n"
        )
        first = parse_text(tmp_path, text)
        out = tmp_path / "canonical.csv"
        write_message_file(first, out)
        second = list(parse_message_file(out))
        assert second == first
        # canonical text is a fixed point
        again = tmp_path / "canonical2.csv"
        write_message_file(second, again)
        assert again.read_bytes() == out.read_bytes()


def hour_config(**kw) -> SyntheticFlowConfig:
    defaults = dict(arrival_rate_per_side=2.0, seed=42)
    defaults.update(kw)
    return SyntheticFlowConfig(**defaults)


class TestSyntheticFlow:
    def test_event_count_within_poisson_band(self):
        # merged rate 4/s over 3600s: mean 14_400, sigma = sqrt(14_400) = 120
        events = list(generate_synthetic(hour_config()))
        assert abs(len(events) - 14_400) <= 3 * 120

    def test_times_within_session_and_nondecreasing(self):
        config = hour_config(seed=3)
        times = [e.time_ns for e in generate_synthetic(config)]
        assert times == sorted(times)
        assert config.session_start_ns <= times[0]
        assert times[-1] <= config.session_end_ns

    def test_same_seed_identical_streams(self):
        a = list(generate_synthetic(hour_config(seed=11)))
        b = list(generate_synthetic(hour_config(seed=11)))
        assert a == b

    def test_different_seed_differs(self):
        a = list(generate_synthetic(hour_config(seed=1)))
        b = list(generate_synthetic(hour_config(seed=2)))
        assert a != b

    def test_zero_cancel_probability_means_only_new_limits(self):
        events = generate_synthetic(hour_config(seed=5, cancel_probability=0.0))
        assert all(e.event_type is EventType.NEW_LIMIT for e in events)

    def test_sizes_at_least_one(self):
        events = generate_synthetic(hour_config(seed=6, size_gamma_shape=0.2, size_gamma_scale=0.5))
        assert all(e.size >= 1 for e in events)

    def test_placements_never_cross(self):
        # rebuild the book independently; each new limit must leave it uncrossed
        book = OracleBook()
        for event in generate_synthetic(hour_config(seed=9)):
            if event.event_type is EventType.NEW_LIMIT:
                if event.direction == 1 and book.best_ask() is not None:
                    assert event.price < book.best_ask()
                if event.direction == -1 and book.best_bid() is not None:
                    assert event.price > book.best_bid()
            book.apply(event)

    def test_interarrival_rate_recoverable(self):
        # MLE exponential rate over >= 10k events within 5% of the merged rate
        config = hour_config(seed=13)
        times = np.array([e.time_ns for e in generate_synthetic(config)], dtype=np.int64)
        assert len(times) >= 10_000
        gaps = np.diff(np.concatenate(([config.session_start_ns], times))) / 1e9
        rate_hat = len(gaps) / gaps.sum()
        assert abs(rate_hat - 4.0) / 4.0 < 0.05

    def test_invalid_configs_rejected(self):
        with pytest.raises(ValueError):
            hour_config(arrival_rate_per_side=0.0).validate()
        with pytest.raises(ValueError):
            hour_config(cancel_probability=1.0).validate()
        with pytest.raises(ValueError):
            hour_config(placement_geometric_p=0.0).validate()
        with pytest.raises(ValueError):
            hour_config(session_end_ns=0).validate()


class TestGenerateToFile:
    def test_file_and_sidecar(self, tmp_path):
        config = hour_config(seed=21, session_end_ns=60 * 1_000_000_000)
        path = tmp_path / "flow.csv"
        sidecar = generate_to_file(config, path)
        events = list(parse_message_file(path))
        assert sidecar["total_events"] == len(events)
        assert sum(sidecar["event_counts"].values()) == len(events)
        assert sidecar["config"]["seed"] == 21
        assert (tmp_path / "flow.csv.meta.json").exists()

    def test_regenerating_is_byte_identical(self, tmp_path):
        config = hour_config(seed=22, session_end_ns=60 * 1_000_000_000)
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        generate_to_file(config, a)
        generate_to_file(config, b)
        assert a.read_bytes() == b.read_bytes()

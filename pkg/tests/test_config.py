import json
import logging
from fractions import Fraction
from pathlib import Path

import pytest

from analysis import audit_run
from config import RunConfig
from dynamics import SigmaExemption, run
from services.report_writer import emit_report, failure_row, format_trace, parse_report_json
from utils.errors import ParameterError
from utils.log_setup import ASSERTIONS_LOGGER, MOVES_LOGGER, JsonFormatter, configure_logging


def test_env_defaults_and_overrides(monkeypatch):
    monkeypatch.setenv("MCAST_POS_GUARD", "25")
    monkeypatch.setenv("MCAST_POS_FORMAT", "json")
    monkeypatch.setenv("MCAST_POS_OUT", "/tmp/mcast")
    config = RunConfig.from_env(guard=None, absorb_order="from-r")
    assert config.guard == 25
    assert config.report_format == "json"
    assert config.out_dir == Path("/tmp/mcast")
    assert config.absorb_order == "from-r"
    assert RunConfig.from_env(guard=3).guard == 3


def test_invalid_env_value_is_a_parameter_error(monkeypatch):
    monkeypatch.setenv("MCAST_POS_ABSORB_ORDER", "sideways")
    with pytest.raises(ParameterError):
        RunConfig.from_env()


def test_oracle_caps():
    config = RunConfig().with_caps("steiner=6, profiles=500")
    assert config.steiner_terminal_cap == 6
    assert config.profile_cap == 500
    assert RunConfig().with_caps(None) == RunConfig()
    with pytest.raises(ParameterError):
        RunConfig().with_caps("steiner=many")
    with pytest.raises(ParameterError):
        RunConfig().with_caps("steiner=0")


def test_configure_logging_levels():
    assert configure_logging("moves") == "moves"
    assert logging.getLogger(MOVES_LOGGER).level == logging.INFO
    assert logging.getLogger(ASSERTIONS_LOGGER).level == logging.NOTSET
    assert configure_logging("full") == "full"
    assert logging.getLogger().level == logging.DEBUG
    assert configure_logging("chatty") == "quiet"
    assert logging.getLogger().level == logging.WARNING


def test_json_formatter():
    record = logging.LogRecord("mcast.moves", logging.INFO, __file__, 1, "move %d", (3,), None)
    payload = json.loads(JsonFormatter().format(record))
    assert payload["message"] == "move 3"
    assert payload["name"] == "mcast.moves"
    assert payload["level"] == "INFO"


def test_reports_and_trace(triangle):
    result = run(triangle)
    report = audit_run(result, name="tri", seed=4)
    text = emit_report([report], "json")
    assert parse_report_json(text)[0] == report
    csv_text = emit_report([report], "csv")
    assert csv_text.splitlines()[1] == "4,3,3,4,4,1,1,0,0,true"
    assert format_trace(result.trace) == "start phi=11/2\n"
    with pytest.raises(ValueError):
        emit_report([report], "xml")


def test_trace_lists_sigma_exemptions(triangle):
    result = run(triangle)
    result.trace.exempt(SigmaExemption(0, 3, 3, 0, Fraction(0), Fraction(786432, 7), Fraction(2000)))
    last = format_trace(result.trace).splitlines()[-1]
    assert last == "sigma-exempt 0 v=3 edge=3 q=0 c_q=0 floor=786432/7 sigma=2000"


def test_failure_row():
    row = failure_row(3, "overlap")
    assert row["audit_pass"] == "false:overlap"
    assert row["seed"] == 3
    assert row["moves"] == ""
    assert "instance" not in row

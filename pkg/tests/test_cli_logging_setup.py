import io
import logging
from contextlib import redirect_stderr, redirect_stdout

import pytest

from junctionfab.cli import logger, main, setup_logging
from junctionfab.features.geometry import DolanMask, EvaporationStep, StackGeometry, overlay


@pytest.fixture(autouse=True)
def reset_logging():
    """Reset logging configuration after each test."""
    package = logging.getLogger("junctionfab")
    original_handlers = logging.root.handlers[:]
    original_level = logging.root.level
    original_package_level = package.level
    yield
    logging.root.handlers = original_handlers
    logging.root.setLevel(original_level)
    package.setLevel(original_package_level)


def _captured(fn):
    stdout_capture, stderr_capture = io.StringIO(), io.StringIO()
    with redirect_stdout(stdout_capture), redirect_stderr(stderr_capture):
        result = fn()
    return result, stdout_capture.getvalue(), stderr_capture.getvalue()


def test_logging_routing():
    """Errors go to stderr, everything else to stdout."""
    def emit():
        setup_logging(level=logging.DEBUG)
        logger.debug("stack loaded")
        logger.warning("field size extrapolated")
        logger.error("dataset rejected")

    _, out, err = _captured(emit)

    assert "stack loaded" in out
    assert "field size extrapolated" in out
    assert "dataset rejected" in err
    assert "dataset rejected" not in out


def test_level_filtering():
    def emit():
        setup_logging(level=logging.INFO)
        logger.debug("per-site draws")
        logger.info("simulated 12 junctions")

    _, out, _ = _captured(emit)

    assert "per-site draws" not in out
    assert "simulated 12 junctions" in out


def test_geometry_warning_reaches_stdout():
    def clip():
        setup_logging(level=logging.INFO)
        return overlay(StackGeometry(), DolanMask(), EvaporationStep(angle=70.0), EvaporationStep())

    result, out, err = _captured(clip)

    assert result.clipped
    assert "clipped by the resist wall" in out
    assert err == ""


def test_failed_command_reports_on_stderr(tmp_path, monkeypatch):
    monkeypatch.setenv("JF_LOG_TO_FILE", "false")
    missing = tmp_path / "absent.yaml"

    code, out, err = _captured(
        lambda: main(["simulate", "--config", str(missing), "--out", str(tmp_path / "out")]))

    assert code == 1
    assert "absent.yaml" in err
    assert "ERROR" in err
    assert "absent.yaml" not in out


def test_run_log_written_without_console(tmp_path, monkeypatch):
    monkeypatch.setenv("JF_LOG_TO_CONSOLE", "false")

    code, out, _ = _captured(lambda: main(["repro", "fig2b", "--out", str(tmp_path)]))

    assert code == 0
    assert "running fig2b" in (tmp_path / "run.log").read_text()
    assert "running fig2b" not in out
    assert "PASS" in out

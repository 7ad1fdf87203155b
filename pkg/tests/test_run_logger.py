import logging

from run_logger import LOGGER_NAME, RunLogger, get_logger


def _owned_handlers():
    return [h for h in logging.getLogger(LOGGER_NAME).handlers if getattr(h, "_spikeslab_owned", False)]


def test_reinitialising_replaces_handlers():
    RunLogger()
    RunLogger(verbose=True)
    handlers = _owned_handlers()
    assert len(handlers) == 1
    assert handlers[0].level == logging.DEBUG


def test_file_handler_receives_library_messages(tmp_path):
    log_file = tmp_path / "run.log"
    log = RunLogger(log_file=str(log_file))
    get_logger("sampler").debug("chain finished")
    log.banner("Fit complete", {"selected": 3})
    for handler in _owned_handlers():
        handler.flush()

    text = log_file.read_text(encoding="utf-8")
    assert "DEBUG - chain finished" in text
    assert "selected: 3" in text
    assert len(_owned_handlers()) == 2
    RunLogger()


def test_child_logger_name():
    assert get_logger("twostage").name == "spikeslab_ar.twostage"

from gridcheck.model import SimConfig


def small_config(**changes) -> SimConfig:
    """A few resources and gridlets; fast enough for unit tests."""
    cfg = SimConfig().replace(**{"resources.count": 6, "gridlets.count": 20, "gridlets.length_max": 20000.0})
    return cfg.replace(**changes) if changes else cfg


def faulty_config(**changes) -> SimConfig:
    base = {
        "faults.mean_time_to_failure": 800.0,
        "faults.repair_delay": 50.0,
        "faults.permanent_resources": 2,
    }
    base.update(changes)
    return small_config(**base)


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])

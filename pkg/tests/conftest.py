import datetime as dt

import numpy as np
import pytest

from helios.data import IrradianceRecord, StepSeries


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def constant_records(date, ghi, resolution=900):
    """Records at ``resolution`` seconds covering the whole of ``date`` with a fixed GHI."""
    midnight = dt.datetime.combine(date, dt.time())
    return [IrradianceRecord(midnight + dt.timedelta(seconds=s), float(ghi)) for s in range(0, 86400, resolution)]


def flat_day(ppfd, date=dt.date(2001, 6, 1), T=64):
    return StepSeries.from_ppfd(date, np.full(T, float(ppfd)))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

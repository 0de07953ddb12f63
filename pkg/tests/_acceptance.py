"""Shared record of acceptance outcomes, printed by the terminal-summary hook."""

RESULTS = {}


def record(number, title, ok, detail=""):
    RESULTS[number] = (title, bool(ok), detail)
    return ok

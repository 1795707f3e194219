import json

import pytest

from actscore.synth import GenConfig, generate

LANES5 = ("Top", "Jungle", "Mid", "Bottom", "Utility")


def minimal_doc(n_frames=1, duration_ms=None, events=(), champions=None, winner="blue"):
    """A valid match document with optional events and evenly spaced frames."""
    champions = champions or ["Annie", "Kayle", "Shyvana", "Vayne", "Annie"] * 2
    duration = duration_ms if duration_ms is not None else max(0, (n_frames - 1) * 60_000)
    players = [
        {"participant_id": i, "team": "blue" if i <= 5 else "red", "champion": champions[i - 1], "lane": LANES5[(i - 1) % 5]}
        for i in range(1, 11)
    ]
    frames = []
    for f in range(n_frames):
        frames.append(
            {
                "timestamp_ms": f * 60_000,
                "players": {
                    str(i): {
                        "position": [0, 0] if i <= 5 else [15000, 15000],
                        "total_gold": 500 + 100 * f,
                        "minions_killed": 5 * f,
                        "jungle_minions_killed": 0,
                        "level": 1 + f,
                    }
                    for i in range(1, 11)
                },
            }
        )
    return {
        "meta": {"match_id": "T-1", "duration_ms": duration, "winner": winner, "players": players},
        "events": list(events),
        "frames": frames,
    }


def dump(doc) -> bytes:
    return json.dumps(doc).encode()


@pytest.fixture(scope="session")
def small_corpus():
    """Twenty synthetic matches with raw records kept."""
    return generate(GenConfig(seed=3, n_matches=20), keep_raw=True)


# acceptance criteria record one line each; printed after the run
ACCEPTANCE: dict[int, str] = {}


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[number] = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])

from __future__ import annotations

import random
from pathlib import Path

import pytest

from agentchess import rules

FIXTURES = Path(__file__).parent / "fixtures"
FAKE_UCI = Path(__file__).parent / "fake_uci.py"


def random_playout(seed: int, max_plies: int = 80) -> list:
    """Play random legal moves from the start, returning every position seen."""
    rng = random.Random(seed)
    board = rules.Board.initial()
    positions = [board]
    for _ in range(max_plies):
        moves = rules.legal_moves(board)
        if not moves:
            break
        board = rules.apply_move(board, rng.choice(moves))
        positions.append(board)
        if rules.game_status(board).kind != rules.ONGOING:
            break
    return positions


@pytest.fixture(scope="session")
def playout_positions() -> list:
    """1000 positions sampled from seeded random playouts."""
    positions = []
    seed = 0
    while len(positions) < 1000:
        positions.extend(random_playout(seed))
        seed += 1
    return positions[:1000]


def make_record(
    termination: str,
    *,
    subject_color: str = "b",
    ply_count: int = 40,
    opponent: dict | None = None,
    model: str = "mock-model",
    excluded: bool = False,
    detail: str | None = None,
    stats: dict | None = None,
    seed: int = 0,
):
    """Synthesize a GameRecord for aggregation and Elo tests.

    Plies are structurally plausible (alternating movers) but carry dummy
    move text; metric code only reads movers, counts and the config.
    """
    from agentchess import runner

    opponent = opponent or {"kind": "random"}
    subject = {"kind": "endpoint", "model": model, "base_url": "http://mock"}
    white, black = (subject, opponent) if subject_color == "w" else (opponent, subject)
    plies = [
        runner.PlyRecord(mover="w" if i % 2 == 0 else "b", uci="e2e4", fen_after="-")
        for i in range(ply_count)
    ]
    error = termination == runner.TERM_MODEL_ERROR
    return runner.GameRecord(
        config={
            "white": white,
            "black": black,
            "limits": {"max_turns_per_ply": 10, "max_attempts_per_turn": 3, "max_full_moves": 100},
            "variant": {"board_style": "unicode"},
            "seed": seed,
            "error_policy": runner.COUNT_MODEL_ERRORS_AS_LOSS,
            "subject_color": subject_color,
        },
        plies=plies,
        termination=termination,
        termination_detail=detail if detail is not None else ("timeout" if error else None),
        error_side=subject_color if error else None,
        subject_color=subject_color,
        failed_transcript=None,
        stats=runner.GameStats(**(stats or {})),
        excluded=excluded,
        duration_s=1.0,
        started_at="2026-01-01T00:00:00+00:00",
        finished_at="2026-01-01T00:00:01+00:00",
    )

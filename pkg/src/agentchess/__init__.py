"""Tournament harness that scores chat-completion agents at chess.

Agents act through a constrained three-action dialog (query the board,
query the legal moves, make a move) against random or UCI-engine opponents;
the harness records full transcripts and produces Win/Loss, termination
breakdowns, per-ply move-quality judgments, and maximum-likelihood Elo
estimates with confidence intervals.
"""

__version__ = "0.1.0"

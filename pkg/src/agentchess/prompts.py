"""Frozen prompt and reflection texts for the move dialog.

These strings are observable harness behavior (players see them and logs
store them), so they live here verbatim and are byte-checked against the
fixture files under tests/fixtures. Do not reflow or "fix" them; the typo
in the invalid-action reflection is intentional.
"""

GAME_LOOP_HEADER = (
    "You are a professional chess player and you play as {color}. "
    "Now is your turn to make a move. "
    "Before making a move you can pick one of the following actions:"
)

ACTION_LINE_GET_BOARD = "- `get_current_board' to get the schema and current status of the board"
ACTION_LINE_GET_LEGAL_MOVES = "- `get_legal_moves' to get a UCI formatted list of available moves"
ACTION_LINE_MAKE_MOVE = (
    "- `make_move <UCI formatted move>' when you are ready to complete your turn "
    "(e.g., 'make_move e2e4')"
)

GAME_LOOP_FOOTER = "Respond with the action."

INVALID_ACTION_HEADER = (
    "Invalid action. Pick one, reply exactly with the name and space delimitted argument: "
)

MAKE_MOVE_USAGE = "make_move <UCI formatted move>"

MOVE_MADE = "Move made, switching player"

ILLEGAL_MOVE_PREFIX = "Failed to make move: "

MOVE_HISTORY_HEADER = "Previous moves (UCI): "

INLINE_BOARD_HEADER = "Current board:"

INLINE_LEGAL_MOVES_HEADER = "Legal moves (UCI): "

MOA_SYNTHESIZER_PROMPT = (
    "You will be provided with a set of responses from various open-source models "
    "to the latest user query.\n"
    "\n"
    "Your task is to synthesize these responses into a single, high-quality response "
    "in British English spelling.\n"
    "\n"
    "It is crucial to critically evaluate the information provided in these responses, "
    "recognizing that some of it may be biased or incorrect.\n"
    "\n"
    "Your response should not simply replicate the given answers but should offer a "
    "refined, accurate, and comprehensive reply to the instruction.\n"
    "\n"
    "Ensure your response is well-structured, coherent and adheres to the highest "
    "standards of accuracy and reliability."
)

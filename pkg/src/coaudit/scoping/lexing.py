"""Lexical helpers shared by the flattener and the parser.

The parser works on a *masked* copy of the source: comments and the content
of string literals are replaced by spaces (newlines are kept), so that every
offset in the masked copy is also a valid offset in the original text and
brace matching never trips over a ``}`` inside a comment or string.
"""

import bisect
import re
from dataclasses import dataclass

from coaudit.errors import SoliditySyntaxError

IDENTIFIER = r"[A-Za-z_$][\w$]*"

# Matches on masked code only, so keywords inside comments never count
CONTRACT_HEADER = re.compile(
    rf"\b(?P<abstract>abstract\s+)?(?P<kind>contract|interface|library)\s+"
    rf"(?P<name>{IDENTIFIER})(?P<rest>[^{{;]*)\{{"
)
IMPORT_STATEMENT = re.compile(r"\bimport\b[^;]*;")
PRAGMA_STATEMENT = re.compile(r"\bpragma\b[^;]*;")

_OPENERS = {"{": "}", "(": ")", "[": "]"}
_CLOSERS = {v: k for k, v in _OPENERS.items()}


@dataclass(frozen=True)
class LexedText:
    """Original text with its masked twin and the comment spans.

    Attributes:
        text: The original source text.
        code: Same length as ``text``; comments and string contents blanked.
        comments: Sorted (start, end) spans of every comment in ``text``.
    """

    text: str
    code: str
    comments: tuple[tuple[int, int], ...]


def line_at(text: str, offset: int) -> int:
    """Return the 1-based line number of ``offset`` in ``text``."""
    return text.count("\n", 0, offset) + 1


def lex(text: str) -> LexedText:
    """Mask comments and string contents of a Solidity source.

    Args:
        text: Solidity source code.

    Returns:
        The masked view of the text.

    Raises:
        SoliditySyntaxError: If a string literal or block comment is not
            terminated.
    """
    masked = list(text)
    comments: list[tuple[int, int]] = []
    i = 0
    n = len(text)
    while i < n:
        char = text[i]
        nxt = text[i + 1] if i + 1 < n else ""
        if char == "/" and nxt == "/":
            # Line comment runs until (not including) the newline
            end = text.find("\n", i)
            end = n if end == -1 else end
            comments.append((i, end))
            for k in range(i, end):
                masked[k] = " "
            i = end
        elif char == "/" and nxt == "*":
            end = text.find("*/", i + 2)
            if end == -1:
                raise SoliditySyntaxError(
                    "Unterminated block comment", line_at(text, i)
                )
            end += 2
            comments.append((i, end))
            for k in range(i, end):
                if text[k] != "\n":
                    masked[k] = " "
            i = end
        elif char in "\"'":
            k = i + 1
            while k < n and text[k] != char:
                if text[k] == "\n":
                    break
                k += 2 if text[k] == "\\" else 1
            if k >= n or text[k] != char:
                raise SoliditySyntaxError(
                    "Unterminated string literal", line_at(text, i)
                )
            # Keep the quotes, blank the content
            for j in range(i + 1, k):
                masked[j] = " "
            i = k + 1
        else:
            i += 1
    return LexedText(text=text, code="".join(masked), comments=tuple(comments))


def matching_close(code: str, open_index: int) -> int:
    """Find the bracket closing the one at ``open_index``.

    Args:
        code: Masked source (see :func:`lex`).
        open_index: Offset of a ``{``, ``(`` or ``[``.

    Returns:
        Offset of the matching closing bracket.

    Raises:
        SoliditySyntaxError: If brackets are unbalanced or interleaved.
    """
    stack: list[tuple[str, int]] = []
    for i in range(open_index, len(code)):
        char = code[i]
        if char in _OPENERS:
            stack.append((char, i))
        elif char in _CLOSERS:
            if not stack or stack[-1][0] != _CLOSERS[char]:
                raise SoliditySyntaxError(
                    f"Unexpected '{char}'", line_at(code, i)
                )
            stack.pop()
            if not stack:
                return i
    raise SoliditySyntaxError(
        f"Unbalanced '{code[open_index]}'", line_at(code, open_index)
    )


def split_top_level(code: str, start: int, end: int) -> list[tuple[int, int]]:
    """Split ``code[start:end]`` at commas outside nested brackets.

    Args:
        code: Masked source.
        start: First offset of the region.
        end: Offset one past the region.

    Returns:
        (start, end) spans of the non-empty comma separated parts.
    """
    parts = []
    depth = 0
    part_start = start
    for i in range(start, end):
        char = code[i]
        if char in _OPENERS:
            depth += 1
        elif char in _CLOSERS:
            depth -= 1
        elif char == "," and depth == 0:
            parts.append((part_start, i))
            part_start = i + 1
    parts.append((part_start, end))
    return [(s, e) for s, e in parts if code[s:e].strip()]


def leading_comment_start(lexed: LexedText, offset: int) -> int:
    """Extend a declaration start backwards over the comments right above it.

    Comments attach to a declaration when nothing but whitespace with at most
    one line break separates them from it (or from the next attached
    comment).

    Args:
        lexed: The lexed source.
        offset: Offset of the declaration's first keyword.

    Returns:
        Offset where the declaration including its doc comments starts.
    """
    start = offset
    index = bisect.bisect_right(lexed.comments, (offset, offset))
    for comment_start, comment_end in reversed(lexed.comments[:index]):
        if comment_end > start:
            continue
        gap = lexed.text[comment_end:start]
        if gap.strip() or gap.count("\n") > 1:
            break
        # A comment trailing code on its own line belongs to that code
        line_start = lexed.text.rfind("\n", 0, comment_start) + 1
        if lexed.text[line_start:comment_start].strip():
            break
        start = comment_start
    return start

"""Lexical scanning for JS/JSX/TS sources.

Deliberately not a full ECMAScript grammar: a masking scanner that blanks
strings, comments, and regex literals (preserving offsets) so that pattern
matching and brace balancing run over code only. Robust to JSX text content
and template literals with nested ``${}`` expressions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

_REGEX_PREV_CHARS = set("(,=:[!&|?{};+-*%~^<>")
_REGEX_PREV_WORDS = (
    "return", "typeof", "case", "in", "of", "new", "delete", "void",
    "do", "else", "instanceof", "yield", "await",
)


@dataclass
class MaskResult:
    masked: str
    terminated: bool  # False when a string/comment/template never closed


def _prev_significant(masked: list[str], upto: int) -> str:
    i = upto - 1
    while i >= 0:
        c = masked[i]
        if not c.isspace():
            return c
        i -= 1
    return ""


def _prev_word(masked: list[str], pos: int) -> str:
    i = pos - 1
    while i >= 0 and masked[i].isspace():
        i -= 1
    end = i + 1
    while i >= 0 and (masked[i].isalnum() or masked[i] == "_"):
        i -= 1
    return "".join(masked[i + 1 : end])


def _regex_allowed(masked: list[str], pos: int) -> bool:
    prev = _prev_significant(masked, pos)
    if prev == "" or prev in _REGEX_PREV_CHARS:
        return True
    return _prev_word(masked, pos) in _REGEX_PREV_WORDS


_STRING_PREV_CHARS = set("(,=:[!&|?{};+*%~^-")


def _string_allowed(masked: list[str], pos: int) -> bool:
    """A quote opens a string only in expression position. Quotes inside
    JSX text (``Don't``) follow an identifier or a tag's ``>`` and are
    treated as plain text."""
    prev = _prev_significant(masked, pos)
    if prev == "" or prev in _STRING_PREV_CHARS:
        return True
    if prev == ">":
        # arrow function body vs JSX tag close
        i = pos - 1
        while i >= 0 and masked[i].isspace():
            i -= 1
        return i > 0 and masked[i - 1] == "="
    return _prev_word(masked, pos) in _REGEX_PREV_WORDS


def mask_code(text: str) -> MaskResult:
    """Blank string/comment/regex content (newlines kept) so offsets into
    the mask line up with the original text."""
    out = list(text)
    n = len(text)
    i = 0
    # stack entries: "`" for template literal, "${" for interpolation
    template_stack: list[str] = []
    terminated = True

    def blank(a: int, b: int) -> None:
        for j in range(a, min(b, n)):
            if out[j] != "\n":
                out[j] = " "

    while i < n:
        c = text[i]
        if template_stack and template_stack[-1] == "`":
            # inside template literal body
            if c == "\\":
                blank(i, i + 2)
                i += 2
                continue
            if c == "`":
                blank(i, i + 1)
                template_stack.pop()
                i += 1
                continue
            if c == "$" and i + 1 < n and text[i + 1] == "{":
                template_stack.append("${")
                i += 2  # keep `${` unmasked; inner code is real code
                continue
            blank(i, i + 1)
            i += 1
            continue

        if c == "/" and i + 1 < n and text[i + 1] == "/":
            j = text.find("\n", i)
            j = n if j == -1 else j
            blank(i, j)
            i = j
            continue
        if c == "/" and i + 1 < n and text[i + 1] == "*":
            j = text.find("*/", i + 2)
            if j == -1:
                blank(i, n)
                terminated = False
                break
            blank(i, j + 2)
            i = j + 2
            continue
        if c in "'\"":
            if not _string_allowed(out, i):
                i += 1  # apostrophe in JSX text, not a string delimiter
                continue
            quote = c
            j = i + 1
            closed = False
            while j < n:
                if text[j] == "\\":
                    j += 2
                    continue
                if text[j] == quote or text[j] == "\n":
                    closed = text[j] == quote
                    break
                j += 1
            if not closed:
                terminated = False
            blank(i, min(j + 1, n))
            i = min(j + 1, n)
            continue
        if c == "`":
            blank(i, i + 1)
            template_stack.append("`")
            i += 1
            continue
        if c == "/" and _regex_allowed(out, i):
            j = i + 1
            in_class = False
            closed = False
            while j < n:
                cj = text[j]
                if cj == "\\":
                    j += 2
                    continue
                if cj == "\n":
                    break
                if cj == "[":
                    in_class = True
                elif cj == "]":
                    in_class = False
                elif cj == "/" and not in_class:
                    closed = True
                    break
                j += 1
            if closed:
                j += 1
                while j < n and text[j].isalpha():  # flags
                    j += 1
                blank(i, j)
                i = j
                continue
            # not actually a regex (e.g. bare division); fall through
        if c == "}" and template_stack and template_stack[-1] == "${":
            template_stack.pop()
            i += 1
            continue
        i += 1

    if template_stack:
        terminated = False
    return MaskResult(masked="".join(out), terminated=terminated)


_OPEN = {"(": ")", "{": "}", "[": "]"}
_CLOSE = {")": "(", "}": "{", "]": "["}


def is_balanced(text: str) -> bool:
    """True when quotes terminate and (), {}, [] nest correctly in code."""
    res = mask_code(text)
    if not res.terminated:
        return False
    stack: list[str] = []
    for c in res.masked:
        if c in _OPEN:
            stack.append(c)
        elif c in _CLOSE:
            if not stack or stack[-1] != _CLOSE[c]:
                return False
            stack.pop()
    return not stack


def matching_close(masked: str, open_pos: int) -> int:
    """Index of the bracket closing the one at open_pos, or -1."""
    opener = masked[open_pos]
    closer = _OPEN[opener]
    depth = 0
    for i in range(open_pos, len(masked)):
        c = masked[i]
        if c == opener:
            depth += 1
        elif c == closer:
            depth -= 1
            if depth == 0:
                return i
    return -1


def depth_profile(masked: str) -> list[int]:
    """Combined (){}[] nesting depth before each character position."""
    depths = []
    depth = 0
    for c in masked:
        depths.append(depth)
        if c in _OPEN:
            depth += 1
        elif c in _CLOSE:
            depth = max(0, depth - 1)
    return depths


_STATEMENT_KEYWORD_RE = re.compile(
    r"(export\s+(?:default\s+)?)?(async\s+)?(function|class|const|let|var|import|export)\b"
)


@dataclass
class Statement:
    start: int
    end: int  # exclusive
    keyword: str  # function|class|const|let|var|import|export|expr

    def slice(self, text: str) -> str:
        return text[self.start : self.end]


def top_level_statements(text: str, masked: str | None = None) -> list[Statement]:
    """Split a module into top-level statement spans.

    Statement ends: a ``;`` at depth 0, or the close of a top-level brace
    block (function/class bodies, or an initializer followed by a newline
    under semicolonless style).
    """
    if masked is None:
        masked = mask_code(text).masked
    n = len(masked)
    statements: list[Statement] = []
    i = 0
    while i < n:
        while i < n and masked[i].isspace():
            i += 1
        if i >= n:
            break
        start = i
        m = _STATEMENT_KEYWORD_RE.match(masked, i)
        keyword = m.group(3) if m else "expr"
        depth = 0
        end = n
        had_block = False
        j = i
        while j < n:
            c = masked[j]
            if c in _OPEN:
                depth += 1
            elif c in _CLOSE:
                depth = max(0, depth - 1)
                if depth == 0:
                    had_block = True
                    if keyword in ("function", "class") and c == "}":
                        # declaration body closed; optional trailing ;
                        k = j + 1
                        while k < n and masked[k] in " \t":
                            k += 1
                        if k < n and masked[k] == ";":
                            end = k + 1
                        else:
                            end = j + 1
                        break
            elif depth == 0:
                if c == ";":
                    end = j + 1
                    break
                if c == "\n" and had_block:
                    # ASI: a closed block followed by a fresh statement
                    k = j + 1
                    while k < n and masked[k].isspace():
                        k += 1
                    if k >= n or _STATEMENT_KEYWORD_RE.match(masked, k):
                        end = j
                        break
            j += 1
        statements.append(Statement(start=start, end=end, keyword=keyword))
        i = max(end, start + 1)
    return statements


def identifiers(masked_slice: str) -> set[str]:
    return set(re.findall(r"[A-Za-z_$][A-Za-z0-9_$]*", masked_slice))

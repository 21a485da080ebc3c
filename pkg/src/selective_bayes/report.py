"""Plain-text report serialization.

Reports are a single key-value tree document: `key: value` lines, nested
sections indented by two spaces under a bare `key:` line, sequences inline
in brackets. Floats are written with repr so parsing returns the exact same
double. content_hash produces the same digest `git hash-object` would, so
input files can be audited against a checkout.
"""

import hashlib
import json
import re

import numpy as np

from .errors import ContractViolationError

_BARE_STRING = re.compile(r"^[A-Za-z_][A-Za-z0-9_\-\. /]*$")


def content_hash(data):
    """Hex sha1 of a git-style blob header plus the payload."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _is_scalar(v):
    return v is None or isinstance(v, (bool, int, float, str, np.integer,
                                       np.floating, np.bool_))


def _render_scalar(v):
    if v is None or isinstance(v, (bool, np.bool_)):
        return repr(bool(v)) if v is not None else "None"
    if isinstance(v, (int, np.integer)):
        return repr(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, str):
        # bare only when it survives the round trip as a string
        if _BARE_STRING.match(v) and isinstance(_parse_scalar(v), str):
            return v
        return json.dumps(v)
    raise ContractViolationError(f"cannot serialize {type(v).__name__}")


def _render_inline(v):
    if _is_scalar(v):
        return _render_scalar(v)
    if isinstance(v, np.ndarray):
        v = v.tolist()
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_render_inline(x) for x in v) + "]"
    raise ContractViolationError(f"cannot inline {type(v).__name__}")


def _sequence_of_mappings(v):
    return isinstance(v, (list, tuple)) and any(isinstance(x, dict) for x in v)


def _render_lines(tree, indent, out):
    pad = "  " * indent
    for key, v in tree.items():
        key = str(key)
        if ":" in key or key != key.strip() or not key:
            raise ContractViolationError(f"bad report key {key!r}")
        if isinstance(v, dict):
            out.append(f"{pad}{key}:")
            _render_lines(v, indent + 1, out)
        elif _sequence_of_mappings(v):
            out.append(f"{pad}{key}:")
            _render_lines({str(i): x for i, x in enumerate(v)}, indent + 1, out)
        else:
            out.append(f"{pad}{key}: {_render_inline(v)}")


def render_report(tree):
    """Serialize a nested dict of scalars/sequences/dicts to report text."""
    if not isinstance(tree, dict):
        raise ContractViolationError("a report must be a mapping at top level")
    out = []
    _render_lines(tree, 0, out)
    return "\n".join(out) + "\n"


def _parse_scalar(tok):
    if tok in ("True", "False"):
        return tok == "True"
    if tok == "None":
        return None
    if tok.startswith('"'):
        return json.loads(tok)
    try:
        return int(tok)
    except ValueError:
        pass
    try:
        return float(tok)
    except ValueError:
        return tok


def _split_inline(body):
    """Split a bracketed list body on top-level commas."""
    parts, depth, start, i = [], 0, 0, 0
    while i < len(body):
        c = body[i]
        if c == '"':
            i += 1
            while i < len(body):
                if body[i] == "\\":
                    i += 2
                    continue
                if body[i] == '"':
                    break
                i += 1
        elif c == "[":
            depth += 1
        elif c == "]":
            depth -= 1
        elif c == "," and depth == 0:
            parts.append(body[start:i])
            start = i + 1
        i += 1
    tail = body[start:]
    if tail.strip() or parts:
        parts.append(tail)
    return parts


def _parse_value(text):
    text = text.strip()
    if text.startswith("["):
        if not text.endswith("]"):
            raise ContractViolationError(f"unterminated list: {text!r}")
        body = text[1:-1].strip()
        if not body:
            return []
        return [_parse_value(p) for p in _split_inline(body)]
    return _parse_scalar(text)


def parse_report(text):
    """Inverse of render_report (sequences come back as lists)."""
    root = {}
    stack = [(-1, root)]
    for lineno, raw in enumerate(text.splitlines(), 1):
        if not raw.strip():
            continue
        stripped = raw.lstrip(" ")
        n_spaces = len(raw) - len(stripped)
        if n_spaces % 2:
            raise ContractViolationError(f"odd indent on line {lineno}")
        level = n_spaces // 2
        if ":" not in stripped:
            raise ContractViolationError(f"missing ':' on line {lineno}")
        key, _, rest = stripped.partition(":")
        while stack and stack[-1][0] >= level:
            stack.pop()
        if not stack or stack[-1][0] != level - 1:
            raise ContractViolationError(f"bad nesting on line {lineno}")
        parent = stack[-1][1]
        if rest.strip():
            parent[key] = _parse_value(rest)
        else:
            child = {}
            parent[key] = child
            stack.append((level, child))
    return root

import inspect
import re

_SECTION = re.compile(r"^(Args|Arguments|Parameters|Returns?|Raises|Examples?):\s*$", re.IGNORECASE)
_ENTRY = re.compile(r"^(\w+)\s*(?:\(([^)]+)\))?:\s*(.*)$")


def _indent(line: str) -> int:
    return len(line) - len(line.lstrip())


def parse_docstring(docstring: str):
    """
    Parses a Google-style docstring.
    Returns a dictionary in the format:
        { 'description': str, 'args': {name: {'type': ..., 'desc': ...}},
          'return': {'desc': ...}, 'raises': {name: desc} }

    Lines indented deeper than an entry continue that entry.
    """

    parsed = {
        "description": "",
        "args": {},
        "return": {},
        "raises": {},
    }

    if not docstring:
        return parsed

    mode = "desc"
    current = None
    entry_indent = None

    for raw in inspect.cleandoc(docstring).splitlines():
        line = raw.strip()
        section = _SECTION.match(line)
        if section:
            head = section.group(1).lower()
            if head in ("args", "arguments", "parameters"):
                mode = "args"
            elif head.startswith("return"):
                mode = "return"
            elif head == "raises":
                mode = "raises"
            else:
                mode = "skip"
            current, entry_indent = None, None
            continue
        if not line:
            continue

        if mode == "desc":
            parsed["description"] += line + " "

        elif mode in ("args", "raises"):
            if entry_indent is None:
                entry_indent = _indent(raw)
            match = _ENTRY.match(line)
            if match and _indent(raw) <= entry_indent:
                name, kind, desc = match.groups()
                current = name
                if mode == "args":
                    parsed["args"][name] = {"type": (kind or "").split(",")[0].strip(), "desc": desc.strip()}
                else:
                    parsed["raises"][name] = desc.strip()
            elif current is not None:
                if mode == "args":
                    entry = parsed["args"][current]
                    entry["desc"] = (entry["desc"] + " " + line).strip()
                else:
                    parsed["raises"][current] = (parsed["raises"][current] + " " + line).strip()

        elif mode == "return":
            prev = parsed["return"].get("desc", "")
            parsed["return"]["desc"] = (prev + " " + line).strip()

    parsed["description"] = parsed["description"].strip()
    return parsed

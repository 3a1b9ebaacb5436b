import argparse
import inspect
import typing
import warnings
from typing import Any, Callable, Dict, List, Optional, Tuple, get_type_hints

from .docstring_parser import parse_docstring
from .exceptions import SpecParseError

REGISTERED_COMMANDS: Dict[Tuple[str, ...], Callable] = {}


def command(_func=None, *, name: Optional[str] = None, summary: Optional[str] = None):
    """
    Registers a CLI subcommand. ``name`` may hold a space ("scheme build") for a
    nested subcommand; it defaults to the function name without a ``cmd_`` prefix.
    """
    def decorator(fn):
        raw = name or fn.__name__.removeprefix("cmd_")
        path = tuple(raw.split())
        if path in REGISTERED_COMMANDS:
            raise ValueError(f"command {' '.join(path)!r} registered twice")
        fn._quasilattice_command = {"path": path, "summary": summary}
        REGISTERED_COMMANDS[path] = fn
        return fn

    if _func is None:
        return decorator
    return decorator(_func)


def csv_list(item_type: Callable[[str], Any]) -> Callable[[str], List[Any]]:
    """argparse type for comma-separated values."""
    def convert(text: str) -> List[Any]:
        return [item_type(part.strip()) for part in str(text).split(",") if part.strip()]

    convert.__name__ = f"list of {getattr(item_type, '__name__', 'values')}"
    return convert


def _unwrap_optional(hint):
    if typing.get_origin(hint) is typing.Union:
        args = [a for a in typing.get_args(hint) if a is not type(None)]
        if len(args) == 1:
            return args[0]
    return hint


def _converter(hint) -> Tuple[Optional[Callable], str]:
    hint = _unwrap_optional(hint)
    origin = typing.get_origin(hint)
    if origin in (list, tuple):
        args = typing.get_args(hint) or (str,)
        return csv_list(args[0]), f"{args[0].__name__},..."
    if hint is bool:
        return None, "flag"
    if hint in (int, float, str):
        return hint, hint.__name__
    return str, "str"


def get_registered_commands() -> List[Dict[str, Any]]:
    """Description of every command: path, summary and options."""
    commands = []
    for path, fn in sorted(REGISTERED_COMMANDS.items()):
        sig = inspect.signature(fn)
        hints = get_type_hints(fn)
        doc = parse_docstring(fn.__doc__ or "")
        if not fn.__doc__:
            warnings.warn(f"[{fn.__name__}] No docstring detected.", stacklevel=2)

        options = []
        for pname, param in sig.parameters.items():
            info = doc["args"].get(pname, {})
            if not info:
                warnings.warn(f"[{fn.__name__}] No description for the arg '{pname}'.", stacklevel=2)
            convert, kind = _converter(hints.get(pname, str))
            options.append({
                "name": pname,
                "flag": "--" + pname.replace("_", "-"),
                "type": info.get("type") or kind,
                "convert": convert,
                "description": info.get("desc", ""),
                "required": param.default is inspect.Parameter.empty,
                "default": None if param.default is inspect.Parameter.empty else param.default,
            })
        commands.append({
            "path": path,
            "function": fn,
            "summary": fn._quasilattice_command.get("summary") or doc["description"],
            "description": doc["description"],
            "options": options,
        })
    return commands


class CommandParser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting on bad input."""

    def error(self, message):
        raise SpecParseError(f"{self.prog}: {message}")


def build_parser(prog: str, version: str) -> CommandParser:
    parser = CommandParser(prog=prog, description="Cut-and-project schemes and their quasicrystals.")
    parser.add_argument("--version", action="version", version=f"{prog} {version}")
    root = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=CommandParser)
    groups: Dict[Tuple[str, ...], Any] = {(): root}

    for cmd in get_registered_commands():
        path = cmd["path"]
        for depth in range(1, len(path)):
            prefix = path[:depth]
            if prefix not in groups:
                holder = groups[prefix[:-1]].add_parser(prefix[-1], help=f"{prefix[-1]} commands")
                groups[prefix] = holder.add_subparsers(dest=f"command_{depth}", metavar="COMMAND",
                                                       parser_class=CommandParser)
        sub = groups[path[:-1]].add_parser(path[-1], help=cmd["summary"], description=cmd["description"])
        for opt in cmd["options"]:
            if opt["convert"] is None:
                sub.add_argument(opt["flag"], dest=opt["name"], action="store_true",
                                 help=opt["description"])
                continue
            sub.add_argument(
                opt["flag"],
                dest=opt["name"],
                type=opt["convert"],
                required=opt["required"],
                default=opt["default"],
                metavar=opt["type"].upper() if opt["type"] else None,
                help=opt["description"],
            )
        sub.set_defaults(_handler=cmd["function"])
    return parser

"""Input checks shared by the estimators."""

from __future__ import annotations

from .panel import CharacteristicSet, Panel, PanelError


def check_panel(p, name: str = "panel") -> Panel:
    if not isinstance(p, Panel):
        raise TypeError(f"{name} must be a Panel, got {type(p).__name__}")
    return p


def check_characteristics(cs, keys, name: str = "characteristics") -> CharacteristicSet:
    if not isinstance(cs, CharacteristicSet):
        raise TypeError(f"{name} must be a CharacteristicSet, got {type(cs).__name__}")
    missing = [k for k in keys if k not in cs]
    if missing:
        raise KeyError(f"{name} lacks {missing}")
    return cs


def check_same_axes(a: Panel, b: Panel, what: str = "inputs") -> None:
    if not a.same_axes(b):
        raise PanelError(
            f"{what} are not aligned: {a.start}..{a.end} x {a.n_stocks} vs "
            f"{b.start}..{b.end} x {b.n_stocks}"
        )


def check_same_dates(a, b, what: str = "inputs") -> None:
    if a.start != b.start or a.n_dates != b.n_dates:
        raise PanelError(f"{what} cover different dates")

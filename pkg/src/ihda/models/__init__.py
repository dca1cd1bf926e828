"""Bundled transfer-cell models."""

from importlib import resources

from ..ipn import IPN, parse_ipn

BUNDLED = ("transfer_buggy", "transfer_fixed", "transfer_mutex")


def model_text(name: str) -> str:
    if name not in BUNDLED:
        raise KeyError(f"no bundled model {name!r} (have: {', '.join(BUNDLED)})")
    return resources.files(__name__).joinpath(f"{name}.ipn").read_text(encoding="utf-8")


def load(name: str) -> IPN:
    return parse_ipn(model_text(name))

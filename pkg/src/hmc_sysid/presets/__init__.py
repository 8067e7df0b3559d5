"""Ready-made experiment configs, one per studied identification problem."""

from __future__ import annotations

from importlib import resources

PRESET_NAMES = (
    "arx_known_order",
    "arx_order10_gaussian",
    "arx_order10_laplace",
    "arx_order10_horseshoe",
    "oe_order10_horseshoe",
    "arx_student_t",
    "pendulum_sim",
)


def preset_text(name: str) -> str:
    """Raw JSON text of a named preset."""
    if name not in PRESET_NAMES:
        raise KeyError(f"unknown preset {name!r}, have {PRESET_NAMES}")
    return resources.files(__package__).joinpath(f"{name}.json").read_text("utf-8")


def load_preset(name: str):
    """Parsed experiment config for a named preset."""
    from ..cli.config import parse_config

    return parse_config(preset_text(name))

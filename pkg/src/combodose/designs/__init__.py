"""Escalation designs and the JSON config surface that builds them."""

from __future__ import annotations

from typing import Any

from ..core import DoseGrid
from .blrm import DEFAULT_PRIORS, BlrmDesign, BlrmParams, blrm_prob
from .interval import (
    BoinDesign,
    BoinParams,
    KeyboardDesign,
    KeyParams,
    boin_boundaries,
    build_keys,
)
from .pipe import Contour, PipeDesign, PipeParams, enumerate_contours
from .sfd import SfdDesign, SfdParams, surface_from_ratios

CONFIG_SCHEMA_VERSION = 1

#: calibrated defaults for each design id, in config-file form
DESIGN_DEFAULTS: dict[str, dict[str, Any]] = {
    "boin": {"design": "boin", "a1": 0.65, "a2": 1.40, "epsilon": 0.84},
    "keyboard": {"design": "keyboard", "b1": 0.21, "b2": 0.39, "epsilon": 0.84},
    "pipe": {
        "design": "pipe",
        "rho": 0.05,
        "delta": 0.025,
        "prior_ss": 1.0 / 18.0,
        "epsilon": 0.50,
    },
    "sfd": {
        "design": "sfd",
        "m": 0.875,
        "s": 4,
        "epsilon": 0.65,
        "mcmc": {"burn_in": 2000, "iterations": 8000},
    },
    "blrm": {
        "design": "blrm",
        "priors": {k: list(v) for k, v in DEFAULT_PRIORS.items()},
        "reference_doses": [300.0, 300.0],
        "epsilon": 0.25,
        "mcmc": {"burn_in": 4000, "iterations": 16000},
    },
}

DESIGN_IDS = tuple(DESIGN_DEFAULTS)


class ConfigError(ValueError):
    """Raised for malformed or unknown design configuration."""


def design_params(config: dict[str, Any], phi: float = 0.30):
    """Build the typed parameter object described by a design config dict."""
    cfg = dict(config)
    cfg.pop("schema", None)
    design_id = cfg.pop("design", None)
    if design_id not in DESIGN_DEFAULTS:
        raise ConfigError(f"unknown design {design_id!r}; expected one of {DESIGN_IDS}")
    merged = {k: v for k, v in DESIGN_DEFAULTS[design_id].items() if k != "design"}
    merged.update(cfg)
    try:
        if design_id == "boin":
            return BoinParams(
                phi=phi,
                a1=merged["a1"],
                a2=merged["a2"],
                epsilon=merged["epsilon"],
            )
        if design_id == "keyboard":
            return KeyParams(
                phi=phi,
                b1=merged["b1"],
                b2=merged["b2"],
                epsilon=merged["epsilon"],
            )
        if design_id == "pipe":
            return PipeParams(
                rho=merged["rho"],
                delta=merged["delta"],
                prior_ss=merged["prior_ss"],
                epsilon=merged["epsilon"],
            )
        if design_id == "sfd":
            mcmc = merged.get("mcmc", {})
            return SfdParams(
                m=merged["m"],
                s=merged["s"],
                epsilon=merged["epsilon"],
                burn_in=mcmc.get("burn_in", 2000),
                iterations=mcmc.get("iterations", 8000),
            )
        mcmc = merged.get("mcmc", {})
        priors = {k: tuple(v) for k, v in merged["priors"].items()}
        return BlrmParams(
            priors=priors,
            reference_doses=tuple(merged["reference_doses"]),
            epsilon=merged["epsilon"],
            burn_in=mcmc.get("burn_in", 4000),
            iterations=mcmc.get("iterations", 16000),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad {design_id} config: {exc}") from exc


def make_design(
    config: dict[str, Any] | str,
    grid: DoseGrid,
    phi: float = 0.30,
    max_n: int = 36,
    **kwargs: Any,
):
    """Instantiate a design from a config dict (or bare design id)."""
    if isinstance(config, str):
        config = {"design": config}
    design_id = config.get("design")
    params = design_params(config, phi=phi)
    if design_id == "boin":
        return BoinDesign(grid, params, max_n=max_n)
    if design_id == "keyboard":
        return KeyboardDesign(grid, params, max_n=max_n)
    if design_id == "pipe":
        return PipeDesign(grid, params, phi=phi)
    if design_id == "sfd":
        return SfdDesign(grid, params, phi=phi)
    return BlrmDesign(grid, params, **kwargs)


__all__ = [
    "BoinDesign",
    "BoinParams",
    "KeyboardDesign",
    "KeyParams",
    "PipeDesign",
    "PipeParams",
    "Contour",
    "SfdDesign",
    "SfdParams",
    "BlrmDesign",
    "BlrmParams",
    "ConfigError",
    "DESIGN_DEFAULTS",
    "DESIGN_IDS",
    "boin_boundaries",
    "build_keys",
    "enumerate_contours",
    "surface_from_ratios",
    "blrm_prob",
    "design_params",
    "make_design",
]

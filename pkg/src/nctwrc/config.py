"""Flat ``key = value`` configuration files.

One file describes one experiment. Model keys are named after the
:class:`~nctwrc.model.ModelParams` fields; channel keys carry a ``channel1.`` or
``channel2.`` prefix. Lines starting with ``#`` or ``;`` are comments.

Example::

    name = fig4
    L1 = 3
    L2 = 3
    p1 = 0.1
    p2 = 0.2
    lambda_hold = 0.05
    xi_overflow = 4
    tau_tx = 1
    eta_err = 2
    beta = 0.97
    channel1.K = 8
    channel1.mean_snr_db = 0
    channel2.K = 8
    channel2.mean_snr_db = 0
    checks = theorem2, a1~b1, a2~b2
    expect.a1~b1 = pass
"""
from __future__ import annotations

import configparser
from pathlib import Path

from .channel import DEFAULT_DOPPLER, ChannelConfig, ChannelError
from .model import ConfigurationError, ModelParams

__all__ = ["ConfigError", "parse_config", "read_config", "params_from_mapping", "KNOWN_KEYS"]

_SECTION = "spec"
MODEL_KEYS = ("L1", "L2", "p1", "p2", "lambda_hold", "xi_overflow", "tau_tx", "eta_err", "beta")
CHANNEL_KEYS = ("K", "mean_snr_db", "doppler_symbol_product", "modulation")
OTHER_KEYS = (
    "name", "mode", "checks", "seed",
    "solver.tolerance", "solver.max_iters",
    "simulate.horizon", "simulate.replications", "simulate.initial_state", "simulate.burn_in",
)
KNOWN_KEYS = MODEL_KEYS + tuple(f"channel{i}.{k}" for i in (1, 2) for k in CHANNEL_KEYS) + OTHER_KEYS


class ConfigError(ValueError):
    """Malformed or invalid configuration."""


def parse_config(text: str, source: str = "<string>") -> dict:
    """Parse config text into a flat ``{key: str}`` mapping (unknown keys rejected)."""
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=("#",), delimiters=("=",))
    cp.optionxform = str
    try:
        cp.read_string(f"[{_SECTION}]\n{text}", source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    if cp.sections() != [_SECTION]:
        raise ConfigError(f"{source}: sections are not supported; use flat keys")
    raw = dict(cp[_SECTION])
    for k in raw:
        if k not in KNOWN_KEYS and not k.startswith("expect."):
            raise ConfigError(f"{source}: unknown key {k!r}")
    return raw


def read_config(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    raw = parse_config(text, str(path))
    raw.setdefault("name", path.stem)
    return raw


def _num(raw, key, kind, default=None):
    if key not in raw:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        if kind is int:
            v = float(raw[key])
            if v != int(v):
                raise ValueError
            return int(v)
        return kind(raw[key])
    except ValueError:
        raise ConfigError(f"key {key!r}: cannot parse {raw[key]!r} as {kind.__name__}") from None


def params_from_mapping(raw: dict) -> ModelParams:
    """Build validated :class:`ModelParams`; any violation is a :class:`ConfigError`."""
    try:
        chans = []
        for i in (1, 2):
            pre = f"channel{i}."
            chans.append(ChannelConfig.from_db(
                _num(raw, pre + "K", int),
                _num(raw, pre + "mean_snr_db", float),
                _num(raw, pre + "doppler_symbol_product", float, DEFAULT_DOPPLER),
                raw.get(pre + "modulation", "BPSK"),
            ))
        return ModelParams(
            L1=_num(raw, "L1", int), L2=_num(raw, "L2", int),
            p1=_num(raw, "p1", float), p2=_num(raw, "p2", float),
            lambda_hold=_num(raw, "lambda_hold", float),
            xi_overflow=_num(raw, "xi_overflow", float),
            tau_tx=_num(raw, "tau_tx", float),
            eta_err=_num(raw, "eta_err", float),
            beta=_num(raw, "beta", float),
            channel1=chans[0], channel2=chans[1],
        )
    except (ConfigurationError, ChannelError) as exc:
        raise ConfigError(str(exc)) from exc

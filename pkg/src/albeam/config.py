"""YAML configuration covering probe, grid, beamformer and session settings.

Every section is optional; omitted sections fall back to the desk-scale
defaults, so a config file only needs to state what it changes.
"""

from __future__ import annotations

from pathlib import Path

import yaml

from .beamformers import GcfConfig, MvdrConfig
from .exceptions import ConfigurationError
from .geometry import ImageGrid
from .neural import TrainConfig, UNetConfig, desk_unet_config
from .session import SessionConfig
from .sim import ProbeConfig, desk_probe


def _section(doc: dict, name: str) -> dict:
    value = doc.get(name, {})
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigurationError(f"config section {name!r} must be a mapping")
    return dict(value)


def session_config_from_dict(doc: dict) -> SessionConfig:
    probe_d = _section(doc, "probe")
    probe = (ProbeConfig.from_dict({**desk_probe().to_dict(), **probe_d})
             if probe_d else desk_probe())

    grid_d = _section(doc, "grid")
    if grid_d:
        grid = ImageGrid.from_dict({**ImageGrid.for_probe(probe).to_dict(),
                                    **grid_d})
    else:
        grid = ImageGrid.for_probe(probe)

    unet_d = _section(doc, "model")
    unet = (UNetConfig.from_dict({**desk_unet_config(probe.num_channels).to_dict(),
                                  **unet_d})
            if unet_d else desk_unet_config(probe.num_channels))

    train_d = _section(doc, "train")
    train = (TrainConfig.from_dict({**TrainConfig().to_dict(), **train_d})
             if train_d else TrainConfig())

    mvdr_d = _section(doc, "mvdr")
    mvdr = (MvdrConfig.from_dict({**MvdrConfig().to_dict(), **mvdr_d})
            if mvdr_d else MvdrConfig())

    gcf_d = _section(doc, "gcf")
    gcf = (GcfConfig.from_dict({**GcfConfig().to_dict(), **gcf_d})
           if gcf_d else GcfConfig())

    sess = _section(doc, "session")
    return SessionConfig(probe=probe, grid=grid, unet=unet, train=train,
                         mvdr=mvdr, gcf=gcf,
                         dynamic_range=float(sess.get("dynamic_range", 60.0)),
                         warmup_rounds=int(sess.get("warmup_rounds", 5)),
                         epochs_per_selection=int(
                             sess.get("epochs_per_selection", 1)),
                         session_seed=int(sess.get("session_seed", 0)),
                         retain_frames=bool(sess.get("retain_frames", False)))


def load_session_config(path=None) -> SessionConfig:
    if path is None:
        return session_config_from_dict({})
    doc = yaml.safe_load(Path(path).read_text())
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigurationError("config file must contain a mapping")
    return session_config_from_dict(doc)

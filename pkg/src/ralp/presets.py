"""Built-in experiment presets for the standard study set-ups.

Each preset is a list of ``ExperimentConfig`` (one per curve).  Type-2
curves come in three flavours: no injected type-1 error, one forced false
alarm and one forced miss, all on top of perfect type-1 cancellation.
"""

import dataclasses

from .channel import ChannelConfig
from .harness import ExperimentConfig
from .sic import ErrorInjection

TYPE1_TRIALS = 25_000
TYPE2_TRIALS = 10_000


def _channel(m=10, p1_db=12.0, p2_db=6.0, k1=2, k2=5):
    return ChannelConfig.from_db(m=m, p1_db=p1_db, p2_db=p2_db, k1=k1, k2=k2)


def _type1(name, channel, n, sweep_var, values, eps=1e-2, l2_size=None):
    return ExperimentConfig(
        channel=channel,
        n=n,
        l2_size=l2_size or 5 * n,
        sweep_var=sweep_var,
        sweep_values=tuple(values),
        eps=eps,
        trials=TYPE1_TRIALS,
        stage="type1",
        name=name,
    )


def _type2(name, channel, n, sweep_var, values, l2_size=None):
    base = ExperimentConfig(
        channel=channel,
        n=n,
        l2_size=l2_size or 5 * n,
        sweep_var=sweep_var,
        sweep_values=tuple(values),
        trials=TYPE2_TRIALS,
        stage="full",
        sic_mode="genie",
        name=name,
    )
    return [
        dataclasses.replace(base, error_injection=mode, name=f"{name}/{mode.value}")
        for mode in ErrorInjection
    ]


def figure_presets():
    p1_grid = (8, 10, 12, 14, 16)
    m_grid = tuple(range(4, 17, 2))
    return {
        "fig4": [
            _type1("eps=1e-2", _channel(k2=0), 13, "k2", range(0, 14), eps=1e-2),
            _type1("eps=1e-3", _channel(k2=0), 13, "k2", range(0, 14), eps=1e-3),
        ],
        "fig5a": [_type1("n=13", _channel(k2=10), 13, "m", m_grid)],
        "fig5b": [_type1("n=37", _channel(k2=30), 37, "m", m_grid)],
        "fig6a": [_type1("p2=6dB", _channel(), 13, "p1_db", p1_grid)],
        "fig6b": [_type1("p1=12dB", _channel(), 13, "p2_db", (0, 2, 4, 6, 8, 10))],
        "fig7a": _type2("n=13", _channel(), 13, "k2", (2, 4, 6, 8, 10, 12)),
        "fig7b": _type2("n=37", _channel(), 37, "k2", (5, 10, 15, 20, 25, 30)),
        "fig8": _type2("k2=5", _channel(), 13, "m", m_grid),
        "fig9": _type2("k2=5", _channel(), 13, "p1_db", p1_grid),
        "fig10": _type2("k2=5", _channel(), 13, "l2", tuple(k * 13 for k in range(2, 8))),
    }


def get_preset(name, trials=None, seed=None, eps=None):
    presets = figure_presets()
    if name not in presets:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(presets)}")
    out = []
    for cfg in presets[name]:
        changes = {}
        if trials is not None:
            changes["trials"] = trials
        if seed is not None:
            changes["seed"] = seed
        if eps is not None:
            changes["eps"] = eps
        out.append(dataclasses.replace(cfg, **changes) if changes else cfg)
    return out

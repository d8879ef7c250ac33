"""INI run configuration (``configparser``) for the command-line pipeline."""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field
from pathlib import Path


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    hamiltonian: Path
    layers: int = 1
    angles: str = "vqe"  # "vqe" or a path to whitespace-separated angles
    vqe_seed: int = 0
    sigma_coh: float = 0.0
    lam_low: float = 0.0
    lam_high: float = 0.0
    noise_seed: int = 0
    shots_mode: str = "infinite"
    shots_train: int = 0
    shots_val: int = 0
    shots_seed: int = 0
    save_shots: bool = False
    r: int = 2
    eta: float = 0.05
    max_sweeps: int = 10
    patience: int = 2
    mpc_seed: int = 0
    baselines: bool = True
    dmrg_bonds: list[int] = field(default_factory=lambda: [2])
    output_dir: Path = Path("mpchannel-out")
    source_text: str = ""

    def echo(self) -> dict:
        out = asdict(self)
        out.pop("source_text")
        out["hamiltonian"] = str(self.hamiltonian)
        out["output_dir"] = str(self.output_dir)
        return out


_SCHEMA = {
    "hamiltonian": {"path"},
    "ansatz": {"layers", "angles", "vqe_seed"},
    "noise": {"sigma_coh", "lam_low", "lam_high", "seed"},
    "shots": {"mode", "train", "val", "seed", "save"},
    "mpc": {"r", "eta", "max_sweeps", "patience", "seed"},
    "baselines": {"enabled", "dmrg_bonds"},
    "output": {"dir"},
}


def _get(cp, section, key, conv, default):
    if not cp.has_option(section, key):
        return default
    raw = cp.get(section, key)
    try:
        return conv(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key} = {raw!r} is not a valid {conv.__name__}") from None


def _bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(raw)


def _int_list(raw: str) -> list[int]:
    return [int(x) for x in raw.replace(",", " ").split()]


def parse_config(text: str, base_dir: Path | str = ".") -> RunConfig:
    """Parse and validate; relative paths resolve against ``base_dir``."""
    base_dir = Path(base_dir)
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        unknown = set(cp.options(section)) - _SCHEMA[section]
        if unknown:
            raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")
    if not cp.has_option("hamiltonian", "path"):
        raise ConfigError("[hamiltonian] path is required")
    ham = base_dir / cp.get("hamiltonian", "path")
    if not ham.is_file():
        raise ConfigError(f"Hamiltonian file {ham} does not exist")
    angles = _get(cp, "ansatz", "angles", str, "vqe").strip()
    if angles != "vqe":
        apath = base_dir / angles
        if not apath.is_file():
            raise ConfigError(f"angles file {apath} does not exist")
        angles = str(apath)
    cfg = RunConfig(
        hamiltonian=ham,
        layers=_get(cp, "ansatz", "layers", int, 1),
        angles=angles,
        vqe_seed=_get(cp, "ansatz", "vqe_seed", int, 0),
        sigma_coh=_get(cp, "noise", "sigma_coh", float, 0.0),
        lam_low=_get(cp, "noise", "lam_low", float, 0.0),
        lam_high=_get(cp, "noise", "lam_high", float, 0.0),
        noise_seed=_get(cp, "noise", "seed", int, 0),
        shots_mode=_get(cp, "shots", "mode", str, "infinite").strip().lower(),
        shots_train=_get(cp, "shots", "train", int, 0),
        shots_val=_get(cp, "shots", "val", int, 0),
        shots_seed=_get(cp, "shots", "seed", int, 0),
        save_shots=_get(cp, "shots", "save", _bool, False),
        r=_get(cp, "mpc", "r", int, 2),
        eta=_get(cp, "mpc", "eta", float, 0.05),
        max_sweeps=_get(cp, "mpc", "max_sweeps", int, 10),
        patience=_get(cp, "mpc", "patience", int, 2),
        mpc_seed=_get(cp, "mpc", "seed", int, 0),
        baselines=_get(cp, "baselines", "enabled", _bool, True),
        dmrg_bonds=_get(cp, "baselines", "dmrg_bonds", _int_list, [2]),
        output_dir=Path(_get(cp, "output", "dir", str, "mpchannel-out")),
        source_text=text,
    )
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.layers < 0:
        raise ConfigError("[ansatz] layers must be >= 0")
    if cfg.sigma_coh < 0 or cfg.lam_low < 0 or cfg.lam_high < cfg.lam_low:
        raise ConfigError("[noise] needs sigma_coh >= 0 and 0 <= lam_low <= lam_high")
    if cfg.shots_mode not in ("infinite", "finite"):
        raise ConfigError("[shots] mode must be 'infinite' or 'finite'")
    if cfg.shots_mode == "finite" and (cfg.shots_train < 1 or cfg.shots_val < 1):
        raise ConfigError("[shots] train and val must be >= 1 in finite mode")
    if cfg.r < 1 or cfg.max_sweeps < 0 or cfg.patience < 1 or cfg.eta < 0:
        raise ConfigError("[mpc] needs r >= 1, max_sweeps >= 0, patience >= 1, eta >= 0")
    if any(b < 1 for b in cfg.dmrg_bonds):
        raise ConfigError("[baselines] dmrg_bonds must be positive")


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"configuration file {path} does not exist")
    return parse_config(path.read_text(), path.parent)

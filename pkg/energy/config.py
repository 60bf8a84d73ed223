"""
Run configuration shared by every management command.

A config file is a dotenv-style KEY=VALUE file. Values are validated by
RunConfigForm; the model invariants (battery, process, APINN sizes) are
checked by building the corresponding objects. Defaults come from
settings.ENERGY.
"""
import io
import logging
from dataclasses import dataclass, fields

from django import forms
from django.conf import settings
from dotenv import dotenv_values

from .apinn import APPLY_MODES, ApinnConfig
from .bench import DATA_CLASSES, SCENARIOS, get_class, process_config
from .exceptions import ConfigError, DomainError
from .regress import ARCHITECTURES, SvrParams, TrainConfig
from .snes_model import SCENARIO_EFFICIENCY, BatteryParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunConfig:
    class_id: str = "S1"
    scenario: str = "high"
    architecture: str = "nn"
    seed: int = 0
    horizon: int = 10
    trajectories: int = 3000
    rounds: int = 10
    levels: tuple = tuple(range(10))
    improvement_samples: int = 200
    apply_mode: str = "online_greedy"
    exploration: float = 0.2
    instances: int = 2000
    initial_storage: int = 0
    jobs: int = 1
    r_max: int = 30
    gamma_inject: int = 6
    gamma_withdraw: int = 3
    hold_cost: float = 0.0005
    eta_inject: float = 0.05
    eta_withdraw: float = 0.05
    nn_batch_size: int = 100
    nn_epochs: int = 15
    nn_step: float = 0.001
    nn_dropout: float = 0.2
    nn_hidden: tuple = (10, 10)
    svr_penalty: float = 1.0
    svr_epsilon: float = 0.0
    svr_max_iter: int = 1000
    instances_dir: str = ""
    policy_path: str = ""
    model_path: str = ""
    diagnostics_path: str = ""
    summary_path: str = ""
    results_path: str = ""

    def battery_params(self):
        return BatteryParams(
            r_max=self.r_max,
            gamma_inject=self.gamma_inject,
            gamma_withdraw=self.gamma_withdraw,
            hold_cost=self.hold_cost,
            eta_inject=self.eta_inject,
            eta_withdraw=self.eta_withdraw,
        )

    def process_config(self):
        return process_config(get_class(self.class_id), self.horizon)

    def train_config(self):
        return TrainConfig(
            batch_size=self.nn_batch_size,
            epochs=self.nn_epochs,
            step=self.nn_step,
            dropout=self.nn_dropout,
            hidden=self.nn_hidden,
        )

    def svr_params(self):
        return SvrParams(
            penalty=self.svr_penalty,
            epsilon=self.svr_epsilon,
            max_iter=self.svr_max_iter,
        )

    def apinn_config(self):
        return ApinnConfig(
            n_trajectories=self.trajectories,
            horizon=self.horizon,
            rounds=self.rounds,
            levels=self.levels,
            architecture=self.architecture,
            improvement_samples=self.improvement_samples,
            seed=self.seed,
            apply_mode=self.apply_mode,
            exploration=self.exploration,
            jobs=self.jobs,
            process=self.process_config(),
            battery=self.battery_params(),
            train=self.train_config(),
            svr=self.svr_params(),
        )


CONFIG_KEYS = tuple(f.name for f in fields(RunConfig))


def _int_tuple(value, name):
    try:
        items = tuple(int(v) for v in str(value).split(",") if v.strip())
    except ValueError:
        raise forms.ValidationError(f"expected comma-separated integers, got '{value}'")
    if not items:
        raise forms.ValidationError(f"{name} must not be empty")
    return items


class RunConfigForm(forms.Form):
    class_id = forms.ChoiceField(choices=[(c, c) for c in DATA_CLASSES])
    scenario = forms.ChoiceField(choices=[(s, s) for s in SCENARIOS])
    architecture = forms.ChoiceField(choices=[(a, a) for a in ARCHITECTURES])
    seed = forms.IntegerField(min_value=0)
    horizon = forms.IntegerField(min_value=1)
    trajectories = forms.IntegerField(min_value=1)
    rounds = forms.IntegerField(min_value=1)
    levels = forms.CharField()
    improvement_samples = forms.IntegerField(min_value=1)
    apply_mode = forms.ChoiceField(choices=[(m, m) for m in APPLY_MODES])
    exploration = forms.FloatField(min_value=0.0, max_value=0.99)
    instances = forms.IntegerField(min_value=1)
    initial_storage = forms.IntegerField(min_value=0)
    jobs = forms.IntegerField(min_value=1)
    r_max = forms.IntegerField(min_value=1)
    gamma_inject = forms.IntegerField(min_value=1)
    gamma_withdraw = forms.IntegerField(min_value=1)
    hold_cost = forms.FloatField(min_value=0.0)
    eta_inject = forms.FloatField(min_value=0.0, max_value=1.0, required=False)
    eta_withdraw = forms.FloatField(min_value=0.0, max_value=1.0, required=False)
    nn_batch_size = forms.IntegerField(min_value=1)
    nn_epochs = forms.IntegerField(min_value=1)
    nn_step = forms.FloatField()
    nn_dropout = forms.FloatField(min_value=0.0)
    nn_hidden = forms.CharField()
    svr_penalty = forms.FloatField()
    svr_epsilon = forms.FloatField(min_value=0.0)
    svr_max_iter = forms.IntegerField(min_value=1)
    instances_dir = forms.CharField(required=False)
    policy_path = forms.CharField(required=False)
    model_path = forms.CharField(required=False)
    diagnostics_path = forms.CharField(required=False)
    summary_path = forms.CharField(required=False)
    results_path = forms.CharField(required=False)

    def clean_levels(self):
        return _int_tuple(self.cleaned_data["levels"], "levels")

    def clean_nn_hidden(self):
        hidden = _int_tuple(self.cleaned_data["nn_hidden"], "nn_hidden")
        if any(width < 1 for width in hidden):
            raise forms.ValidationError("hidden layer widths must be positive")
        return hidden

    def clean(self):
        cleaned = super().clean()
        scenario = cleaned.get("scenario")
        if scenario in SCENARIO_EFFICIENCY:
            for name in ("eta_inject", "eta_withdraw"):
                if cleaned.get(name) is None and name not in self.errors:
                    cleaned[name] = SCENARIO_EFFICIENCY[scenario]
        return cleaned


def _render(value):
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def defaults(desk=False):
    """Default values as form input, from settings.ENERGY."""
    energy = getattr(settings, "ENERGY", {})
    values = {key: _render(getattr(RunConfig, key)) for key in CONFIG_KEYS}
    values.pop("eta_inject")
    values.pop("eta_withdraw")
    for key, setting in (
        ("r_max", "R_MAX"),
        ("hold_cost", "HOLD_COST"),
        ("gamma_inject", "GAMMA_INJECT"),
        ("gamma_withdraw", "GAMMA_WITHDRAW"),
        ("horizon", "HORIZON"),
        ("trajectories", "TRAJECTORIES"),
        ("rounds", "ROUNDS"),
        ("levels", "LEVELS"),
        ("improvement_samples", "IMPROVEMENT_SAMPLES"),
        ("instances", "INSTANCES"),
        ("seed", "SEED"),
        ("jobs", "JOBS"),
    ):
        if setting in energy:
            value = energy[setting]
            values[key] = ",".join(str(v) for v in value) if isinstance(value, (list, tuple)) else str(value)
    if desk:
        desk_scale = energy.get("DESK_SCALE", {})
        for key in ("trajectories", "rounds", "instances"):
            if key in desk_scale:
                values[key] = str(desk_scale[key])
    return values


def _read_file(path=None, text=None):
    try:
        if text is not None:
            raw = dotenv_values(stream=io.StringIO(text))
        elif path is not None:
            with open(path, encoding="utf-8") as fh:
                raw = dotenv_values(stream=fh)
        else:
            raw = {}
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc

    values = {}
    for key, value in raw.items():
        name = key.strip().lower()
        if name not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key '{key}'")
        values[name] = "" if value is None else value
    return values


def parse_config(path=None, overrides=None, text=None, desk=False):
    """
    Build a validated RunConfig from defaults, then the config file
    (``path`` or ``text``), then ``overrides`` (keys set to None are
    ignored). ``desk`` swaps in the desk-scale run sizes for keys the
    caller did not set.
    """
    data = defaults(desk=desk)
    data.update(_read_file(path, text))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key '{key}'")
        data[key] = _render(tuple(value) if isinstance(value, list) else value)
    data["class_id"] = data["class_id"].upper()

    form = RunConfigForm(data=data)
    if not form.is_valid():
        messages = [
            f"{field}: {message}"
            for field, errors in form.errors.items()
            for message in errors
        ]
        raise ConfigError("; ".join(messages))

    cfg = RunConfig(**form.cleaned_data)
    try:
        cfg.battery_params()
        cfg.train_config()
        cfg.svr_params()
        cfg.apinn_config()
        if cfg.initial_storage > cfg.r_max:
            raise DomainError(f"initial_storage {cfg.initial_storage} exceeds r_max {cfg.r_max}")
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def dump_config(cfg):
    """Canonical KEY=VALUE text; parse_config(text=...) reproduces cfg."""
    lines = []
    for key in CONFIG_KEYS:
        value = getattr(cfg, key)
        lines.append(f"{key}={_render(repr(value) if isinstance(value, float) else value)}")
    return "\n".join(lines) + "\n"


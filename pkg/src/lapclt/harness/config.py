"""Experiment configuration, preset definitions, and the config file format.

Config files are plain text with dotted keys, `key = value` per line and
`#` comments, e.g.::

    manifold.kind = circle
    manifold.radius = 1.0
    run.sample_sizes = 1000, 2000, 4000
    run.eps_constant = 1.0
    run.eps_exponent = 0.2
    run.repetitions = 200
    run.master_seed = 7

Every CLI flag overrides the corresponding config key.  The default thread
count comes from the LAPCLT_THREADS environment variable.
"""

import os
from dataclasses import dataclass, field, replace

import numpy as np

from ..graph import KernelScaling
from ..manifolds import (Circle, Ellipse, EmbeddedTorus, FlatTorus, Sphere)

__all__ = ["ExperimentConfig", "parse_config_text", "load_config_file",
           "config_from_dict", "preset", "PRESET_NAMES", "manifold_from_dict"]

PRESET_NAMES = ("normality", "variance-ratio", "estimator-ratio", "small-eps",
                "bias-vs-std", "covariance-heatmap", "normality-8sphere")


@dataclass(frozen=True)
class ExperimentConfig:
    manifold: object
    sample_sizes: tuple
    eps_constant: float = 1.0
    eps_exponent: float = None  # default 1/(m+4)
    kernel_profile: str = "indicator"
    kernel_scaling: KernelScaling = KernelScaling.RAW
    eigen_indices: tuple = (2,)
    repetitions: int = 200
    master_seed: int = 0
    center_mode: str = "mc_mean"  # or "analytic_lambda"
    eigen_statistic: str = "matched"  # or "ordered"
    output_dir: str = "out"
    threads: int = None
    name: str = "custom"
    max_failure_fraction: float = 0.05

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if min(self.eigen_indices) < 1:
            raise ValueError("eigen indices are 1-based and must be >= 1")
        if self.eps_exponent is None:
            object.__setattr__(self, "eps_exponent",
                               1.0 / (self.manifold.intrinsic_dim + 4))
        if self.eps_exponent <= 0:
            raise ValueError("eps exponent must be positive")
        if self.center_mode not in ("mc_mean", "analytic_lambda"):
            raise ValueError(f"unknown center mode {self.center_mode}")
        if self.eigen_statistic not in ("matched", "ordered"):
            raise ValueError(f"unknown eigen statistic {self.eigen_statistic}")
        object.__setattr__(self, "sample_sizes",
                           tuple(int(n) for n in self.sample_sizes))
        object.__setattr__(self, "eigen_indices",
                           tuple(int(l) for l in self.eigen_indices))

    def eps_for(self, n):
        return self.eps_constant * float(n) ** (-self.eps_exponent)

    def eps_warnings(self):
        return [n for n in self.sample_sizes if self.eps_for(n) > 1.0]

    def resolved_threads(self):
        if self.threads is not None:
            return max(1, int(self.threads))
        env = os.environ.get("LAPCLT_THREADS")
        if env:
            return max(1, int(env))
        return max(1, min(8, os.cpu_count() or 1))


def manifold_from_dict(d):
    kind = str(d.get("kind", "circle")).lower()
    if kind == "circle":
        return Circle(radius=float(d.get("radius", 1.0)))
    if kind == "ellipse":
        return Ellipse(semi_axis_a=float(d.get("semi_axis_a", 1.0)),
                       semi_axis_b=float(d.get("semi_axis_b", np.sqrt(2.0))))
    if kind == "sphere":
        return Sphere(intrinsic_dim=int(d.get("intrinsic_dim", 2)),
                      radius=float(d.get("radius", 1.0)))
    if kind in ("torus", "embedded-torus", "embedded_torus"):
        return EmbeddedTorus(major_radius=float(d.get("major_radius", 1.0)),
                             minor_radius=float(d.get("minor_radius", 1.0)))
    if kind in ("flat-torus", "flat_torus"):
        sides = d.get("side_lengths", (2 * np.pi, 2 * np.pi))
        if isinstance(sides, str):
            sides = [float(s) for s in sides.split(",")]
        return FlatTorus(side_lengths=tuple(float(s) for s in sides))
    raise ValueError(f"unknown manifold kind {kind!r}")


def manifold_to_dict(spec):
    if isinstance(spec, Circle):
        return {"kind": "circle", "radius": spec.radius}
    if isinstance(spec, Ellipse):
        return {"kind": "ellipse", "semi_axis_a": spec.semi_axis_a,
                "semi_axis_b": spec.semi_axis_b}
    if isinstance(spec, Sphere):
        return {"kind": "sphere", "intrinsic_dim": spec.intrinsic_dim,
                "radius": spec.radius}
    if isinstance(spec, EmbeddedTorus):
        return {"kind": "torus", "major_radius": spec.major_radius,
                "minor_radius": spec.minor_radius}
    if isinstance(spec, FlatTorus):
        return {"kind": "flat-torus",
                "side_lengths": ",".join(repr(s) for s in spec.side_lengths)}
    raise ValueError(f"unknown manifold spec {spec!r}")


def _parse_scalar(text):
    text = text.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def parse_config_text(text):
    """Nested key-value text -> nested dict; values with commas become
    lists."""
    tree = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        parts = [p.strip() for p in key.strip().split(".")]
        if any(not p for p in parts):
            raise ValueError(f"line {lineno}: bad key {key!r}")
        if "," in value:
            parsed = [_parse_scalar(v) for v in value.split(",") if v.strip()]
        else:
            parsed = _parse_scalar(value)
        node = tree
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ValueError(f"line {lineno}: key conflict at {p!r}")
        node[parts[-1]] = parsed
    return tree


def load_config_file(path):
    with open(path) as fh:
        return parse_config_text(fh.read())


def config_from_dict(tree, overrides=None):
    tree = dict(tree)
    if overrides:
        for key, value in overrides.items():
            if value is None:
                continue
            node = tree
            parts = key.split(".")
            for p in parts[:-1]:
                node = node.setdefault(p, {})
            node[parts[-1]] = value
    man = manifold_from_dict(tree.get("manifold", {}))
    run = tree.get("run", {})
    kern = tree.get("kernel", {})
    sizes = run.get("sample_sizes", [1000])
    if not isinstance(sizes, (list, tuple)):
        sizes = [sizes]
    indices = run.get("eigen_indices", [2])
    if not isinstance(indices, (list, tuple)):
        indices = [indices]
    scaling = KernelScaling(str(kern.get("scaling", "raw")).lower())
    return ExperimentConfig(
        manifold=man,
        sample_sizes=tuple(sizes),
        eps_constant=float(run.get("eps_constant", 1.0)),
        eps_exponent=run.get("eps_exponent"),
        kernel_profile=str(kern.get("profile", "indicator")),
        kernel_scaling=scaling,
        eigen_indices=tuple(indices),
        repetitions=int(run.get("repetitions", 200)),
        master_seed=int(run.get("master_seed", 0)),
        center_mode=str(run.get("center_mode", "mc_mean")),
        eigen_statistic=str(run.get("eigen_statistic", "matched")),
        output_dir=str(run.get("output_dir", "out")),
        threads=run.get("threads"),
        name=str(run.get("name", "custom")),
    )


def preset(name, reps=None, seed=0, output_dir=None):
    """Experiment configurations mirroring the reference study at desk scale.

    Multi-manifold presets (normality, bias-vs-std) return a list of
    configs; covariance-heatmap needs no sampling and returns a marker
    config consumed by the report stage.
    """
    if name not in PRESET_NAMES:
        raise ValueError(f"unknown preset {name!r}; choose from "
                         f"{', '.join(PRESET_NAMES)}")
    out = output_dir or f"out-{name}"

    def mk(man, sizes, const, exp, reps_default, cname, statistic="matched",
           indices=(2,), center="mc_mean"):
        return ExperimentConfig(
            manifold=man, sample_sizes=sizes, eps_constant=const,
            eps_exponent=exp, repetitions=reps or reps_default,
            master_seed=seed, output_dir=out, name=cname,
            eigen_indices=indices, eigen_statistic=statistic,
            center_mode=center)

    if name == "normality":
        sizes = (1000, 2000, 4000)
        return [
            mk(Circle(1.0), sizes, 1.0, 1.0 / 5, 500, "normality-circle"),
            mk(Ellipse(1.0, np.sqrt(2.0)), sizes, 1.0, 1.0 / 5, 500,
               "normality-ellipse"),
            mk(Sphere(2, 1.0), sizes, 1.0, 1.0 / 6, 500, "normality-sphere"),
            mk(EmbeddedTorus(1.0, 1.0), sizes, 6.0, 1.0 / 6, 500,
               "normality-torus", statistic="ordered"),
        ]
    if name == "variance-ratio":
        return [mk(Circle(1.0), tuple(range(1000, 7001, 1000)), 1.0, 1.0 / 5,
                   500, "variance-ratio")]
    if name == "estimator-ratio":
        return [mk(Circle(1.0), tuple(range(1000, 7001, 1000)), 1.0, 1.0 / 5,
                   100, "estimator-ratio")]
    if name == "small-eps":
        return [mk(Sphere(2, 1.0), (4000, 8000, 12000), 1.0, 1.0 / 3, 200,
                   "small-eps")]
    if name == "bias-vs-std":
        sizes = (1024, 2048, 4096, 8192, 16384)
        cfgs = []
        for m in (1, 2, 3, 4):
            cfgs.append(mk(Sphere(m, 1.0), sizes, 4.0,
                           1.0 / 3.5, 100, f"bias-vs-std-m{m}-rule-a",
                           statistic="ordered", center="analytic_lambda"))
            cfgs.append(mk(Sphere(m, 1.0), sizes, 5.0,
                           1.0 / (m + 0.5), 100, f"bias-vs-std-m{m}-rule-b",
                           statistic="ordered", center="analytic_lambda"))
        return cfgs
    if name == "normality-8sphere":
        return [mk(Sphere(8, 1.0), (16000, 22000, 28000, 32000), 1.0,
                   1.0 / 12, 200, "normality-8sphere", statistic="ordered")]
    if name == "covariance-heatmap":
        # quadrature only; consumed by report --kind heatmap
        return [mk(Circle(1.0), (0,), 1.0, 0.2, 1, "covariance-heatmap")]
    raise AssertionError

"""Scenes (a pair of sets with a common point) and radius schedules."""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import SamplingWarning, SetFormatError
from .sets import (
    MEMBERSHIP_TOL,
    SetSpec,
    as_vector,
    distance,
    sample_set_points,
    set_from_dict,
)


@dataclass(frozen=True, eq=False)
class Scene:
    A: SetSpec
    B: SetSpec
    xbar: np.ndarray
    intersection: SetSpec | None = None
    name: str = "scene"

    def __post_init__(self):
        if self.A.dim != self.B.dim:
            raise SetFormatError("A and B live in different dimensions")
        xbar = as_vector(self.xbar, self.A.dim, "xbar")
        object.__setattr__(self, "xbar", xbar)
        for label, S in (("A", self.A), ("B", self.B)):
            gap = distance(S, xbar)
            if gap > MEMBERSHIP_TOL:
                raise SetFormatError(f"xbar is at distance {gap:.3e} from {label}")
        if self.intersection is not None:
            self._spot_check_oracle()

    def _spot_check_oracle(self):
        I = self.intersection
        if I.dim != self.A.dim:
            raise SetFormatError("intersection oracle has the wrong dimension")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SamplingWarning)
            pts = sample_set_points(I, self.xbar, 1.0, 32, seed=0)
        pts.append(self.xbar)
        for p in pts:
            if distance(self.A, p) > 1e-8 or distance(self.B, p) > 1e-8:
                raise SetFormatError("intersection oracle is not contained in A and B")

    @property
    def dim(self) -> int:
        return self.A.dim

    def scaled(self, c: float) -> "Scene":
        I = None if self.intersection is None else self.intersection.scale(c)
        return Scene(self.A.scale(c), self.B.scale(c), c * self.xbar, I, self.name)

    def to_dict(self) -> dict:
        d = {"id": self.name, "A": self.A.to_dict(), "B": self.B.to_dict(),
             "xbar": self.xbar.tolist()}
        if self.intersection is not None:
            d["intersection"] = self.intersection.to_dict()
        return d

    @property
    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha1(blob.encode()).hexdigest()


def scene_from_dict(d: dict) -> Scene:
    if not isinstance(d, dict):
        raise SetFormatError("scene description must be an object")
    try:
        inter = d.get("intersection")
        return Scene(set_from_dict(d["A"]), set_from_dict(d["B"]),
                     as_vector(d["xbar"], what="xbar"),
                     None if inter is None else set_from_dict(inter),
                     str(d.get("id", "scene")))
    except KeyError as exc:
        raise SetFormatError(f"scene is missing field {exc}") from exc


def load_scene(path) -> Scene:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SetFormatError(f"{path}: {exc}") from exc
    return scene_from_dict(data)


def dump_scene(scene: Scene, path) -> None:
    Path(path).write_text(json.dumps(scene.to_dict(), indent=2) + "\n")


@dataclass(frozen=True)
class RadiusSchedule:
    """Shrinking radii with a sample budget per radius.

    ``relaxation`` multiplies the radius to give the slack used for relaxed
    equality constraints (cone residuals in itr_c and itr_w).
    """

    radii: tuple
    samples_per_radius: int = 2000
    relaxation: float = 1.0
    seed: int = 0

    def __post_init__(self):
        r = tuple(float(v) for v in self.radii)
        if not r or any(v <= 0 for v in r) or any(b >= a for a, b in zip(r, r[1:])):
            raise SetFormatError("radii must be positive and strictly decreasing")
        if self.samples_per_radius <= 0:
            raise SetFormatError("samples_per_radius must be positive")
        object.__setattr__(self, "radii", r)

    @classmethod
    def geometric(cls, delta0=0.5, factor=0.5, count=5, samples_per_radius=2000,
                  relaxation=1.0, seed=0):
        if not 0 < factor < 1:
            raise SetFormatError("factor must lie in (0, 1)")
        radii = tuple(delta0 * factor ** k for k in range(int(count)))
        return cls(radii, int(samples_per_radius), relaxation, int(seed))

    def slack(self, radius: float) -> float:
        return self.relaxation * radius

    def to_dict(self) -> dict:
        return {"radii": list(self.radii), "samples_per_radius": self.samples_per_radius,
                "relaxation": self.relaxation, "seed": self.seed}


CORPUS_IDS = (
    "perpendicular_axes",
    "lines_pi_3",
    "identical_halfplanes",
    "tangential_parabola",
    "axes_in_r3",
    "circle_line",
)


def corpus_dir() -> Path:
    return Path(str(resources.files("transversality") / "corpus"))


def load_corpus() -> dict[str, Scene]:
    return {sid: load_scene(corpus_dir() / f"{sid}.json") for sid in CORPUS_IDS}

"""Seed derivation and quasi-random point clouds."""

from __future__ import annotations

import zlib

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc


def derive_seed(seed: int, *keys) -> int:
    """Derive a child seed from ``seed`` and a path of labels.

    The derivation is a pure function of its arguments, so work items can be
    scheduled in any order without changing their random streams.
    """
    words = [int(seed) & 0xFFFFFFFF]
    for k in keys:
        words.append(zlib.crc32(str(k).encode("utf-8")))
    return int(np.random.SeedSequence(words).generate_state(1, dtype=np.uint32)[0])


def rng_for(seed: int, *keys) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, *keys))


def unit_cube(dim: int, count: int, seed: int) -> np.ndarray:
    """Scrambled Halton points in [0, 1)^dim."""
    if count <= 0:
        return np.zeros((0, dim))
    sampler = qmc.Halton(d=dim, scramble=True, seed=np.random.default_rng(seed))
    return sampler.random(count)


def ball_points(dim: int, count: int, seed: int) -> np.ndarray:
    """Low-discrepancy points in the closed unit ball of R^dim.

    One extra Halton coordinate sets the radius (``u**(1/dim)`` gives the
    uniform radial law); the remaining ones are pushed through the normal
    quantile function to get an isotropic direction.
    """
    u = unit_cube(dim + 1, count, seed)
    u = np.clip(u, 1e-12, 1.0 - 1e-12)
    g = ndtri(u[:, :dim])
    nrm = np.linalg.norm(g, axis=1, keepdims=True)
    nrm[nrm == 0.0] = 1.0
    r = u[:, dim:] ** (1.0 / dim)
    return g / nrm * r


def sphere_points(dim: int, count: int, seed: int) -> np.ndarray:
    """Low-discrepancy unit vectors in R^dim."""
    u = np.clip(unit_cube(dim, count, seed), 1e-12, 1.0 - 1e-12)
    g = ndtri(u)
    nrm = np.linalg.norm(g, axis=1, keepdims=True)
    nrm[nrm == 0.0] = 1.0
    return g / nrm

"""Domain types: dataset, configuration, parameter state, chain result.

Dimension conventions used throughout:

==============  =========================================
n_subjects      rows shared by both modalities
n_binary        binary items (columns of ``binary_items``)
n_continuous    continuous measures
n_clusters      mixture components
n_traits        latent trait dimensions
==============  =========================================

Cluster labels and membership indices are 0-based everywhere.
"""

import dataclasses
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError

THETA_SIMPLEX_TOL = 1e-12
# floor applied to omega before computing kappa/omega ratios
OMEGA_FLOOR = 1e-12


@dataclass
class MixedDataset:
    """A binary response matrix and a continuous measure matrix over shared subjects."""

    binary_items: np.ndarray
    continuous_measures: np.ndarray
    item_names: list = None
    measure_names: list = None

    def __post_init__(self):
        self.binary_items = np.asarray(self.binary_items, dtype=np.float64)
        self.continuous_measures = np.asarray(self.continuous_measures, dtype=np.float64)
        if self.binary_items.ndim != 2 or self.continuous_measures.ndim != 2:
            raise DimensionError("both modalities must be 2-D matrices")
        if self.binary_items.shape[0] != self.continuous_measures.shape[0]:
            raise DimensionError(
                f"modalities disagree on subject count: "
                f"{self.binary_items.shape[0]} vs {self.continuous_measures.shape[0]}")
        if self.binary_items.shape[1] < 1 or self.continuous_measures.shape[1] < 1:
            raise DimensionError("each modality needs at least one column")
        bad = ~np.isin(self.binary_items, (0.0, 1.0))
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise DimensionError(
                f"binary item column {j} has a non-binary value at row {i}")
        if not np.isfinite(self.continuous_measures).all():
            i, j = np.argwhere(~np.isfinite(self.continuous_measures))[0]
            raise DimensionError(
                f"continuous measure column {j} has a non-finite value at row {i}")
        if self.item_names is None:
            self.item_names = [f"item_{j}" for j in range(self.n_binary)]
        if self.measure_names is None:
            self.measure_names = [f"measure_{j}" for j in range(self.n_continuous)]

    @property
    def n_subjects(self):
        return self.binary_items.shape[0]

    @property
    def n_binary(self):
        return self.binary_items.shape[1]

    @property
    def n_continuous(self):
        return self.continuous_measures.shape[1]

    def subset(self, rows):
        return MixedDataset(self.binary_items[rows], self.continuous_measures[rows],
                            list(self.item_names), list(self.measure_names))

    def kappa(self):
        """Centered binary responses y - 1/2 (the augmented-likelihood pseudo-data)."""
        return self.binary_items - 0.5


@dataclass
class ModelConfig:
    """Cluster count, trait dimension, prior hyperparameters, and sampler schedule."""

    n_clusters: int = 2
    n_traits: int = 1
    mu_x: float = 0.0
    mu_v: float = 0.0
    mu_u: float = 0.0
    sigma2_x: float = 100.0
    sigma2_v: float = 100.0
    sigma2_u: float = 100.0
    sigma2_a: float = 100.0
    alpha_b: float = 0.01
    beta_b: float = 0.01
    alpha_j: float = 0.01
    beta_j: float = 0.01
    n_iterations: int = 5000
    burn_in: int = 2000
    seed: int = 0
    kmeans_warm_start: bool = False

    def __post_init__(self):
        if self.n_clusters < 1:
            raise ValueError("n_clusters must be >= 1")
        if self.n_traits < 1:
            raise ValueError("n_traits must be >= 1")
        if not (0 <= self.burn_in < self.n_iterations):
            raise ValueError("burn_in must satisfy 0 <= burn_in < n_iterations")
        for name in ("sigma2_x", "sigma2_v", "sigma2_u", "sigma2_a",
                     "alpha_b", "beta_b", "alpha_j", "beta_j"):
            if not (getattr(self, name) > 0):
                raise ValueError(f"{name} must be strictly positive")

    @property
    def dirichlet_weight(self):
        return 1.0 / self.n_clusters

    def check_identifiability(self, n_binary, n_continuous):
        """Warn when the parameter-count condition for a unique canonical solution fails."""
        d = n_binary + n_continuous
        ok = self.n_clusters * self.n_traits + 2 <= (self.n_clusters - self.n_traits - 1) * d
        if not ok:
            warnings.warn(
                f"identifiability count condition violated for "
                f"n_clusters={self.n_clusters}, n_traits={self.n_traits}, "
                f"{n_binary}+{n_continuous} items; canonicalization may be non-unique",
                stacklevel=2)
        return ok

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)


@dataclass
class ParameterState:
    """One complete draw of every model unknown."""

    cluster_centers: np.ndarray      # (n_clusters, n_traits)
    memberships: np.ndarray          # (n_subjects,) int, values in [0, n_clusters)
    subject_traits: np.ndarray       # (n_subjects, n_traits)
    binary_loadings: np.ndarray      # (n_traits, n_binary)
    continuous_loadings: np.ndarray  # (n_traits, n_continuous)
    binary_thresholds: np.ndarray    # (n_binary,)
    continuous_thresholds: np.ndarray  # (n_continuous,)
    mixture_weights: np.ndarray      # (n_clusters,)
    trait_variance: float
    noise_variances: np.ndarray      # (n_continuous,)
    augmentation: np.ndarray         # (n_subjects, n_binary), positive

    @property
    def n_clusters(self):
        return self.cluster_centers.shape[0]

    @property
    def n_traits(self):
        return self.cluster_centers.shape[1]

    @property
    def n_subjects(self):
        return self.memberships.shape[0]

    @property
    def n_binary(self):
        return self.binary_loadings.shape[1]

    @property
    def n_continuous(self):
        return self.continuous_loadings.shape[1]

    def effective_traits(self):
        """Per-subject trait rows X[Z_i] + b_i."""
        return self.cluster_centers[self.memberships] + self.subject_traits

    def binary_predictor(self):
        """psi matrix: (X[Z] + b) V - a1, shape (n_subjects, n_binary)."""
        return self.effective_traits() @ self.binary_loadings - self.binary_thresholds

    def continuous_predictor(self):
        """Mean matrix: (X[Z] + b) U - a2, shape (n_subjects, n_continuous)."""
        return self.effective_traits() @ self.continuous_loadings - self.continuous_thresholds

    def copy(self):
        return ParameterState(
            self.cluster_centers.copy(), self.memberships.copy(),
            self.subject_traits.copy(), self.binary_loadings.copy(),
            self.continuous_loadings.copy(), self.binary_thresholds.copy(),
            self.continuous_thresholds.copy(), self.mixture_weights.copy(),
            float(self.trait_variance), self.noise_variances.copy(),
            self.augmentation.copy())

    def validate(self):
        th = self.mixture_weights
        if th.min() < 0 or abs(th.sum() - 1.0) > THETA_SIMPLEX_TOL:
            raise ValueError("mixture weights are off the simplex")
        if not (self.trait_variance > 0) or (self.noise_variances <= 0).any():
            raise ValueError("variances must be strictly positive")
        if (self.augmentation <= 0).any():
            raise ValueError("augmentation values must be strictly positive")
        z = self.memberships
        if z.min() < 0 or z.max() >= self.n_clusters:
            raise ValueError("membership index out of range")
        return self

    def block_arrays(self):
        """Ordered name -> array view of every block (used by serialization and tests)."""
        return {
            "cluster_centers": self.cluster_centers,
            "memberships": self.memberships,
            "subject_traits": self.subject_traits,
            "binary_loadings": self.binary_loadings,
            "continuous_loadings": self.continuous_loadings,
            "binary_thresholds": self.binary_thresholds,
            "continuous_thresholds": self.continuous_thresholds,
            "mixture_weights": self.mixture_weights,
            "trait_variance": np.asarray(self.trait_variance),
            "noise_variances": self.noise_variances,
            "augmentation": self.augmentation,
        }


def state_from_blocks(blocks):
    return ParameterState(
        np.asarray(blocks["cluster_centers"], dtype=np.float64),
        np.asarray(blocks["memberships"], dtype=np.int64),
        np.asarray(blocks["subject_traits"], dtype=np.float64),
        np.asarray(blocks["binary_loadings"], dtype=np.float64),
        np.asarray(blocks["continuous_loadings"], dtype=np.float64),
        np.asarray(blocks["binary_thresholds"], dtype=np.float64),
        np.asarray(blocks["continuous_thresholds"], dtype=np.float64),
        np.asarray(blocks["mixture_weights"], dtype=np.float64),
        float(np.asarray(blocks["trait_variance"])),
        np.asarray(blocks["noise_variances"], dtype=np.float64),
        np.asarray(blocks["augmentation"], dtype=np.float64),
    )


def save_state(state, path):
    """Serialize a ParameterState to .npz, bit-exactly."""
    np.savez(path, **state.block_arrays())


def load_state(path):
    with np.load(path) as blocks:
        return state_from_blocks(blocks)


def _check_state_data(state, data):
    if (state.n_subjects != data.n_subjects or state.n_binary != data.n_binary
            or state.n_continuous != data.n_continuous):
        raise DimensionError(
            f"state dims (subjects={state.n_subjects}, binary={state.n_binary}, "
            f"continuous={state.n_continuous}) do not match data "
            f"({data.n_subjects}, {data.n_binary}, {data.n_continuous})")


def linear_predictor(state, subject, item, modality):
    """Linear predictor for one cell: psi for "binary", the Gaussian mean for "continuous"."""
    if not 0 <= subject < state.n_subjects:
        raise IndexError(f"subject index {subject} out of range")
    row = state.cluster_centers[state.memberships[subject]] + state.subject_traits[subject]
    if modality == "binary":
        if not 0 <= item < state.n_binary:
            raise IndexError(f"binary item index {item} out of range")
        return float(row @ state.binary_loadings[:, item] - state.binary_thresholds[item])
    if modality == "continuous":
        if not 0 <= item < state.n_continuous:
            raise IndexError(f"continuous measure index {item} out of range")
        return float(row @ state.continuous_loadings[:, item]
                     - state.continuous_thresholds[item])
    raise ValueError(f"unknown modality {modality!r}")


def joint_log_likelihood(state, data):
    """Observed-data log-likelihood given all parameters.

    Bernoulli log-mass at logistic(psi) plus Gaussian log-density for the
    continuous modality. The augmentation does not enter.
    """
    _check_state_data(state, data)
    psi = state.binary_predictor()
    y = data.binary_items
    # y*psi - log(1 + exp(psi)), computed stably
    binary_ll = np.sum(y * psi - np.logaddexp(0.0, psi))
    resid = data.continuous_measures - state.continuous_predictor()
    s2 = state.noise_variances
    continuous_ll = np.sum(-0.5 * np.log(2.0 * np.pi * s2)
                           - 0.5 * resid ** 2 / s2)
    return float(binary_ll + continuous_ll)


@dataclass
class ChainResult:
    """Post-burn-in draws, likelihood trace, relabeled point estimate, and diagnostics."""

    draws: list                          # relabeled ParameterState snapshots
    log_likelihoods: np.ndarray          # full trace, length n_iterations
    retained_log_likelihoods: np.ndarray
    retained_iterations: np.ndarray
    point_estimate: ParameterState
    membership_probabilities: np.ndarray  # (n_subjects, n_clusters)
    relabel_maps: np.ndarray              # (n_retained, n_clusters) permutations
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_retained(self):
        return len(self.retained_iterations)

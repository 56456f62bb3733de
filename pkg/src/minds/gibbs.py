"""Gibbs sampler for the joint binary/continuous latent mixture model.

One function per conditional update, a sweep in the fixed schedule order, and
``run_chain`` which handles burn-in, thinning, relabeling, point estimates,
and checkpointing. Update functions mutate the passed state in place and
return the updated block, so they can be exercised one at a time in tests.

Derivation notes (validated by the prior/posterior agreement test):

* the cluster-center precision includes the continuous-modality term
  sum_j U_tj^2 / sigma_j^2 alongside the omega-weighted binary term;
* binary thresholds use omega weights, continuous thresholds use 1/sigma_j^2;
* the continuous residual entering the noise-variance update is
  y + a2 - (X[Z]+b)U.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import pg
from .core import (
    OMEGA_FLOOR,
    ChainResult,
    MixedDataset,
    ParameterState,
    _check_state_data,
    joint_log_likelihood,
)
from .errors import NumericalError

UPDATE_ORDER = (
    "omega",
    "cluster_centers",
    "memberships",
    "binary_loadings",
    "continuous_loadings",
    "subject_traits",
    "binary_thresholds",
    "continuous_thresholds",
    "mixture_weights",
    "trait_variance",
    "noise_variances",
)

# prior draws of variances are clamped to this range at initialization only;
# the default IG(0.01, 0.01) hyperprior has draws spanning hundreds of orders
# of magnitude, which would overflow the first sweep
INIT_VARIANCE_CLAMP = (1e-2, 1e2)


@dataclass
class SamplerSchedule:
    """Thinning/checkpoint settings; the update order itself is fixed."""

    thin: int = 1
    checkpoint_interval: int = 0  # 0 disables checkpoints
    store_draws: bool = True      # False keeps summaries only (large experiments)
    update_order: tuple = UPDATE_ORDER

    def __post_init__(self):
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.update_order != UPDATE_ORDER:
            raise ValueError("update order is fixed by the sampler derivation")


# ---------------------------------------------------------------------------
# prior sampling and forward simulation


def sample_prior_state(config, n_subjects, n_binary, n_continuous, rng,
                       clamp_variances=False):
    """Draw every block from its prior; optionally clamp variance draws.

    Used both to initialize chains (with clamping) and as the marginal
    simulator in sampler-validation tests (without).
    """
    k, t = config.n_clusters, config.n_traits
    theta = rng.dirichlet(np.full(k, config.dirichlet_weight))
    z = _categorical_rows(np.tile(theta, (n_subjects, 1)), rng)
    sigma2_b = float(config.beta_b / rng.gamma(config.alpha_b))
    sigma2 = config.beta_j / rng.gamma(config.alpha_j, size=n_continuous)
    if clamp_variances:
        lo, hi = INIT_VARIANCE_CLAMP
        sigma2_b = float(np.clip(sigma2_b, lo, hi))
        sigma2 = np.clip(sigma2, lo, hi)
    state = ParameterState(
        cluster_centers=rng.normal(config.mu_x, math.sqrt(config.sigma2_x), (k, t)),
        memberships=z,
        subject_traits=rng.normal(0.0, math.sqrt(sigma2_b), (n_subjects, t)),
        binary_loadings=rng.normal(config.mu_v, math.sqrt(config.sigma2_v), (t, n_binary)),
        continuous_loadings=rng.normal(config.mu_u, math.sqrt(config.sigma2_u),
                                       (t, n_continuous)),
        binary_thresholds=rng.normal(0.0, math.sqrt(config.sigma2_a), n_binary),
        continuous_thresholds=rng.normal(0.0, math.sqrt(config.sigma2_a), n_continuous),
        mixture_weights=theta,
        trait_variance=sigma2_b,
        noise_variances=sigma2,
        augmentation=np.ones((n_subjects, n_binary)),
    )
    return state


def sample_dataset_given_state(state, rng, item_names=None, measure_names=None):
    """Forward-simulate both modalities from the likelihood at ``state``."""
    p = 1.0 / (1.0 + np.exp(-state.binary_predictor()))
    binary = (rng.random(p.shape) < p).astype(np.float64)
    mean = state.continuous_predictor()
    continuous = mean + rng.standard_normal(mean.shape) * np.sqrt(state.noise_variances)
    return MixedDataset(binary, continuous, item_names, measure_names)


# ---------------------------------------------------------------------------
# conditional updates


def _categorical_rows(probs, rng):
    """One categorical draw per row of a probability matrix."""
    u = rng.random(probs.shape[0])
    return np.clip((probs.cumsum(axis=1) < u[:, None]).sum(axis=1),
                   0, probs.shape[1] - 1).astype(np.int64)


def _kappa_over_omega(data, state):
    return data.kappa() / np.maximum(state.augmentation, OMEGA_FLOOR)


def update_omega(state, data, rng):
    """Refresh the augmentation: omega_ij ~ PG(1, psi_ij)."""
    state.augmentation = pg.pg1_array(state.binary_predictor(), rng)
    return state.augmentation


def update_cluster_centers(state, data, rng):
    """Draw each trait column of X from its conditional normal.

    Per cluster/trait the precision is 1/sigma2_x plus omega-weighted binary
    and 1/sigma_j^2-weighted continuous contributions from member subjects;
    the mean combines leave-one-trait-out residuals from both modalities.
    """
    x, z, b = state.cluster_centers, state.memberships, state.subject_traits
    v, u = state.binary_loadings, state.continuous_loadings
    om = state.augmentation
    w2 = 1.0 / state.noise_variances
    k = state.n_clusters
    cfg = state._config
    a = x[z] + b
    r1 = _kappa_over_omega(data, state) + state.binary_thresholds - a @ v
    r2 = data.continuous_measures + state.continuous_thresholds - a @ u
    for t in range(state.n_traits):
        xt = x[z, t]
        phi = r1 + np.outer(xt, v[t])
        phi2 = r2 + np.outer(xt, u[t])
        contrib_mean = (om * phi) @ v[t] + (phi2 * w2) @ u[t]
        contrib_prec = om @ (v[t] ** 2) + float(w2 @ (u[t] ** 2))
        prec = np.bincount(z, weights=contrib_prec, minlength=k) + 1.0 / cfg.sigma2_x
        num = np.bincount(z, weights=contrib_mean, minlength=k) + cfg.mu_x / cfg.sigma2_x
        var = 1.0 / prec
        new_col = num * var + np.sqrt(var) * rng.standard_normal(k)
        delta = new_col[z] - xt
        r1 -= np.outer(delta, v[t])
        r2 -= np.outer(delta, u[t])
        x[:, t] = new_col
    return x


def update_memberships(state, data, rng):
    """Draw each Z_i from its categorical conditional, computed in log space."""
    x, b = state.cluster_centers, state.subject_traits
    v, u = state.binary_loadings, state.continuous_loadings
    om = state.augmentation
    w2 = 1.0 / state.noise_variances
    base1 = b @ v - state.binary_thresholds - _kappa_over_omega(data, state)
    base2 = b @ u - state.continuous_thresholds - data.continuous_measures
    xv = x @ v
    xu = x @ u
    logp = np.empty((state.n_subjects, state.n_clusters))
    log_theta = np.log(np.maximum(state.mixture_weights, 1e-300))
    for k in range(state.n_clusters):
        q1 = base1 + xv[k]
        q2 = base2 + xu[k]
        logp[:, k] = log_theta[k] - 0.5 * ((om * q1 * q1).sum(axis=1)
                                           + (q2 * q2 * w2).sum(axis=1))
    logp -= logp.max(axis=1, keepdims=True)
    probs = np.exp(logp)
    norm = probs.sum(axis=1, keepdims=True)
    if not np.isfinite(norm).all() or (norm == 0).any():
        raise NumericalError("membership probabilities degenerate")
    probs /= norm
    state.memberships = _categorical_rows(probs, rng)
    return state.memberships


def update_binary_loadings(state, data, rng):
    x, z, b = state.cluster_centers, state.memberships, state.subject_traits
    v = state.binary_loadings
    om = state.augmentation
    cfg = state._config
    a = x[z] + b
    resid = _kappa_over_omega(data, state) + state.binary_thresholds - a @ v
    for t in range(state.n_traits):
        at = a[:, t]
        psi_t = resid + np.outer(at, v[t])
        prec = 1.0 / cfg.sigma2_v + om.T @ (at * at)
        num = cfg.mu_v / cfg.sigma2_v + (om * psi_t).T @ at
        var = 1.0 / prec
        new_row = num * var + np.sqrt(var) * rng.standard_normal(state.n_binary)
        resid -= np.outer(at, new_row - v[t])
        v[t] = new_row
    return v


def update_continuous_loadings(state, data, rng):
    x, z, b = state.cluster_centers, state.memberships, state.subject_traits
    u = state.continuous_loadings
    w2 = 1.0 / state.noise_variances
    cfg = state._config
    a = x[z] + b
    resid = data.continuous_measures + state.continuous_thresholds - a @ u
    for t in range(state.n_traits):
        at = a[:, t]
        psi_t = resid + np.outer(at, u[t])
        prec = 1.0 / cfg.sigma2_u + w2 * float(at @ at)
        num = cfg.mu_u / cfg.sigma2_u + w2 * (psi_t.T @ at)
        var = 1.0 / prec
        new_row = num * var + np.sqrt(var) * rng.standard_normal(state.n_continuous)
        resid -= np.outer(at, new_row - u[t])
        u[t] = new_row
    return u


def update_subject_traits(state, data, rng):
    """Draw each b_it combining omega-weighted binary and 1/sigma_j^2 continuous evidence."""
    x, z, b = state.cluster_centers, state.memberships, state.subject_traits
    v, u = state.binary_loadings, state.continuous_loadings
    om = state.augmentation
    w2 = 1.0 / state.noise_variances
    a = x[z] + b
    c1 = _kappa_over_omega(data, state) + state.binary_thresholds - a @ v
    c2 = data.continuous_measures + state.continuous_thresholds - a @ u
    prior_prec = 1.0 / state.trait_variance
    for t in range(state.n_traits):
        ct = c1 + np.outer(b[:, t], v[t])
        dt = c2 + np.outer(b[:, t], u[t])
        prec = prior_prec + om @ (v[t] ** 2) + float(w2 @ (u[t] ** 2))
        num = (om * ct) @ v[t] + (dt * w2) @ u[t]
        var = 1.0 / prec
        new_col = num * var + np.sqrt(var) * rng.standard_normal(state.n_subjects)
        delta = new_col - b[:, t]
        c1 -= np.outer(delta, v[t])
        c2 -= np.outer(delta, u[t])
        b[:, t] = new_col
    return b


def update_binary_thresholds(state, data, rng):
    om = state.augmentation
    cfg = state._config
    r1 = state.effective_traits() @ state.binary_loadings - _kappa_over_omega(data, state)
    prec = om.sum(axis=0) + 1.0 / cfg.sigma2_a
    mean = (om * r1).sum(axis=0) / prec
    state.binary_thresholds = mean + rng.standard_normal(state.n_binary) / np.sqrt(prec)
    return state.binary_thresholds


def update_continuous_thresholds(state, data, rng):
    w2 = 1.0 / state.noise_variances
    cfg = state._config
    r2 = state.effective_traits() @ state.continuous_loadings - data.continuous_measures
    prec = 1.0 / cfg.sigma2_a + state.n_subjects * w2
    mean = w2 * r2.sum(axis=0) / prec
    state.continuous_thresholds = (mean
                                   + rng.standard_normal(state.n_continuous) / np.sqrt(prec))
    return state.continuous_thresholds


def update_weights(state, rng):
    """theta ~ Dirichlet(cluster counts + 1/n_clusters)."""
    counts = np.bincount(state.memberships, minlength=state.n_clusters)
    state.mixture_weights = rng.dirichlet(counts + state._config.dirichlet_weight)
    return state.mixture_weights


def update_trait_variance(state, rng):
    """sigma_b^2 ~ IG over all subject-trait entries."""
    cfg = state._config
    shape = 0.5 * state.n_subjects * state.n_traits + cfg.alpha_b
    scale = 0.5 * float((state.subject_traits ** 2).sum()) + cfg.beta_b
    state.trait_variance = float(scale / rng.gamma(shape))
    return state.trait_variance


def update_noise_variances(state, data, rng):
    """sigma_j^2 ~ IG with the continuous-modality squared residuals."""
    cfg = state._config
    resid = data.continuous_measures - state.continuous_predictor()
    shape = 0.5 * state.n_subjects + cfg.alpha_j
    scale = 0.5 * (resid ** 2).sum(axis=0) + cfg.beta_j
    state.noise_variances = scale / rng.gamma(shape, size=state.n_continuous)
    return state.noise_variances


_UPDATE_FUNCS = {
    "omega": update_omega,
    "cluster_centers": update_cluster_centers,
    "memberships": update_memberships,
    "binary_loadings": update_binary_loadings,
    "continuous_loadings": update_continuous_loadings,
    "subject_traits": update_subject_traits,
    "binary_thresholds": update_binary_thresholds,
    "continuous_thresholds": update_continuous_thresholds,
    "mixture_weights": lambda state, data, rng: update_weights(state, rng),
    "trait_variance": lambda state, data, rng: update_trait_variance(state, rng),
    "noise_variances": update_noise_variances,
}


def attach_config(state, config):
    """Bind prior hyperparameters to a state so update functions can see them."""
    state._config = config
    return state


def gibbs_sweep(state, data, config, rng, iteration=None):
    """One full systematic scan in the fixed update order. Mutates ``state``."""
    attach_config(state, config)
    for step in UPDATE_ORDER:
        block = _UPDATE_FUNCS[step](state, data, rng)
        arr = np.asarray(block)
        if not np.isfinite(arr).all():
            raise NumericalError("non-finite draw", iteration=iteration, step=step)
    return state


# ---------------------------------------------------------------------------
# relabeling


def relabel_permutation(x_draw, x_ref):
    """Permutation sending draw clusters to reference labels.

    Minimum-cost matching on squared Euclidean distance between cluster-center
    rows; perm[k] is the reference label assigned to draw cluster k.
    """
    cost = ((x_draw[:, None, :] - x_ref[None, :, :]) ** 2).sum(axis=-1)
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty_like(cols)
    perm[rows] = cols
    return perm


def apply_relabel(state, perm):
    """Return a copy of ``state`` with cluster labels permuted by ``perm``."""
    out = state.copy()
    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.size)
    out.cluster_centers = state.cluster_centers[inv]
    out.mixture_weights = state.mixture_weights[inv]
    out.memberships = perm[state.memberships]
    return out


# ---------------------------------------------------------------------------
# trend diagnostic


def mann_kendall_pvalue(values, max_points=200):
    """Two-sided Mann-Kendall trend test p-value, on an evenly thinned subsample."""
    x = np.asarray(values, dtype=np.float64)
    if x.size > max_points:
        idx = np.linspace(0, x.size - 1, max_points).astype(int)
        x = x[idx]
    n = x.size
    if n < 3:
        return 1.0
    sgn = np.sign(x[None, :] - x[:, None])
    s = float(np.triu(sgn, 1).sum())
    _, counts = np.unique(x, return_counts=True)
    tie_term = float((counts * (counts - 1) * (2 * counts + 5)).sum())
    var = (n * (n - 1) * (2 * n + 5) - tie_term) / 18.0
    if var <= 0:
        return 1.0
    z = (s - np.sign(s)) / math.sqrt(var)
    return float(math.erfc(abs(z) / math.sqrt(2.0)))


# ---------------------------------------------------------------------------
# chain driver


class _ChainAccumulator:
    """Online relabeled accumulation of retained draws."""

    def __init__(self, reference_centers, n_subjects, n_clusters):
        self.x_ref = reference_centers
        self.n = 0
        self.sums = None
        self.z_counts = np.zeros((n_subjects, n_clusters), dtype=np.int64)
        self.maps = []
        self.draws = []

    def add(self, state, keep_snapshot=True):
        perm = relabel_permutation(state.cluster_centers, self.x_ref)
        relabeled = apply_relabel(state, perm)
        self.maps.append(perm)
        if keep_snapshot:
            self.draws.append(relabeled)
        blocks = relabeled.block_arrays()
        if self.sums is None:
            self.sums = {name: np.zeros_like(np.asarray(arr, dtype=np.float64))
                         for name, arr in blocks.items() if name != "memberships"}
        for name, arr in blocks.items():
            if name != "memberships":
                self.sums[name] += arr
        self.z_counts[np.arange(relabeled.n_subjects), relabeled.memberships] += 1
        self.n += 1

    def point_estimate(self):
        """Posterior means for continuous blocks; modal memberships (ties -> lower index)."""
        from .core import state_from_blocks

        means = {name: arr / self.n for name, arr in self.sums.items()}
        means["memberships"] = self.z_counts.argmax(axis=1)
        return state_from_blocks(means)

    def membership_probabilities(self):
        return self.z_counts / self.n


def _initial_state(data, config, rng):
    state = sample_prior_state(config, data.n_subjects, data.n_binary,
                               data.n_continuous, rng, clamp_variances=True)
    if config.kmeans_warm_start:
        from .baselines import kmeans, standardize_columns

        feats = standardize_columns(data.continuous_measures)
        state.memberships = kmeans(feats, config.n_clusters, rng)
    return state


def run_chain(data, config, schedule=None, checkpoint_dir=None):
    """Run the full sampler and return a ChainResult.

    The relabeling reference is the final burn-in state; every retained draw
    is aligned to it by minimum-cost matching of cluster-center rows before
    accumulation, so point estimates and membership frequencies are
    label-coherent.
    """
    if schedule is None:
        schedule = SamplerSchedule()
    config.check_identifiability(data.n_binary, data.n_continuous)
    rng = np.random.default_rng(config.seed)
    state = _initial_state(data, config, rng)
    attach_config(state, config)

    n_iter, burn = config.n_iterations, config.burn_in
    trace = np.empty(n_iter)
    accV = None
    retained_ll = []
    retained_iter = []

    for it in range(n_iter):
        gibbs_sweep(state, data, config, rng, iteration=it)
        trace[it] = joint_log_likelihood(state, data)
        if it == burn - 1 or (burn == 0 and it == 0 and accV is None):
            accV = _ChainAccumulator(state.cluster_centers.copy(),
                                     data.n_subjects, config.n_clusters)
        if it >= burn and (it - burn) % schedule.thin == 0:
            if accV is None:  # burn_in == 0: reference is the first retained state
                accV = _ChainAccumulator(state.cluster_centers.copy(),
                                         data.n_subjects, config.n_clusters)
            accV.add(state.copy())
            retained_ll.append(trace[it])
            retained_iter.append(it)
        if checkpoint_dir and schedule.checkpoint_interval and \
                (it + 1) % schedule.checkpoint_interval == 0:
            from .io import write_checkpoint

            write_checkpoint(checkpoint_dir, it, state, rng)

    point = accV.point_estimate()
    point._config = config
    result = ChainResult(
        draws=accV.draws,
        log_likelihoods=trace,
        retained_log_likelihoods=np.asarray(retained_ll),
        retained_iterations=np.asarray(retained_iter, dtype=np.int64),
        point_estimate=point,
        membership_probabilities=accV.membership_probabilities(),
        relabel_maps=np.asarray(accV.maps, dtype=np.int64),
        diagnostics={
            "mann_kendall_p": mann_kendall_pvalue(trace[burn:]),
            "seed": config.seed,
        },
    )
    return result


# ---------------------------------------------------------------------------
# identifiability


def canonicalize_state(state, warn=True):
    """Re-express (X, V, U, a1, a2, b) in the canonical gauge.

    The fitted cluster-level predictors P = X W - 1 a' (W = [V U]) are
    invariant under an affine change of trait basis. This map rebuilds the
    blocks deterministically from P alone: the trait basis comes from an SVD
    of the predictor row-differences, the first cluster row is the minimum
    norm vector satisfying X_11 = 1 and a1_1 = 0. Applying it twice is a
    fixed point, and nearby predictor matrices give nearby canonical blocks.

    Returns the canonicalized copy; on degenerate inputs warns and returns
    the state unchanged.
    """
    k, t = state.n_clusters, state.n_traits
    d1 = state.n_binary
    w_old = np.hstack([state.binary_loadings, state.continuous_loadings])
    a_old = np.concatenate([state.binary_thresholds, state.continuous_thresholds])
    p = state.cluster_centers @ w_old - a_old

    def _bail(msg):
        if warn:
            warnings.warn(f"canonicalization skipped: {msg}", stacklevel=3)
        return state.copy()

    if k - 1 < t:
        return _bail(f"need at least n_traits+1 clusters (k={k}, t={t})")
    m = p[1:] - p[0]
    svals = None
    try:
        left, svals, right = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError:
        return _bail("SVD failed")
    if svals[t - 1] <= 1e-12 * max(svals[0], 1.0):
        return _bail("predictor rows are rank-deficient")
    # sign convention: largest-magnitude entry of each trait direction positive
    w_new = right[:t].copy()
    c = left[:, :t] * svals[:t]
    for j in range(t):
        lead = w_new[j, np.argmax(np.abs(w_new[j]))]
        if lead < 0:
            w_new[j] = -w_new[j]
            c[:, j] = -c[:, j]
    w0 = w_new[:, 0]
    if t == 1:
        # remaining scale freedom absorbs the a1_1 = 0 constraint
        if abs(p[0, 0]) < 1e-12 or abs(w0[0]) < 1e-12:
            return _bail("first binary predictor too small to pin the scale")
        g = float(w0[0] / p[0, 0])
        w_new = w_new / g
        c = c * g
        x1 = np.ones(1)
    else:
        con = np.vstack([np.eye(t)[0], w0])
        rhs = np.array([1.0, p[0, 0]])
        x1, *_ = np.linalg.lstsq(con, rhs, rcond=None)
        if not np.allclose(con @ x1, rhs, atol=1e-8):
            return _bail("gauge constraints are degenerate for this state")
    out = state.copy()
    out.cluster_centers = np.vstack([x1, c + x1])
    out.binary_loadings = w_new[:, :d1]
    out.continuous_loadings = w_new[:, d1:]
    a_new = w_new.T @ x1 - p[0]
    out.binary_thresholds = a_new[:d1]
    out.continuous_thresholds = a_new[d1:]
    # keep subject-level predictors fixed: b' rows reproduce b @ w_old
    bw = state.subject_traits @ w_old
    out.subject_traits, *_ = np.linalg.lstsq(w_new.T, bw.T, rcond=None)
    out.subject_traits = out.subject_traits.T
    return out


def resolve_identifiability(chain, config):
    """Canonicalize a chain's point estimate; warn and return raw when non-identifiable."""
    state = chain.point_estimate
    d = state.n_binary + state.n_continuous
    n_params = (config.n_clusters * config.n_traits + config.n_traits * d + d - 2)
    n_equations = config.n_clusters * d
    if n_params > n_equations:
        warnings.warn(
            f"parameter count {n_params} exceeds equation count {n_equations}; "
            "returning the raw estimate", stacklevel=2)
        return state.copy()
    return canonicalize_state(state)

"""Monte Carlo designs for validating the sparse selection procedure.

Two designs over jointly normal monthly returns:

* experiment "one": mutually independent assets (diagonal covariance) with a
  common sparsity target; defaults mean 0.01, sd 0.05 per asset.
* experiment "two": 50 assets where a block A (5 assets, mean 0.30, sd 0.15)
  and a block B (5 assets, mean 0.15, sd 0.10) jointly dominate 40 noise
  assets (mean 0.10, sd 0.50); pairwise correlation 0.001 throughout.

Draws are i.i.d. over time via the Cholesky factor of the design covariance,
with per-replication seed streams split off a root seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, ParameterError
from .panel import ReturnPanel, panel_from_array
from .spanning import SpanningConfig, fss_select

EXP2_MEAN_A, EXP2_SD_A, EXP2_N_A = 0.3, 0.15, 5
EXP2_MEAN_B, EXP2_SD_B, EXP2_N_B = 0.15, 0.1, 5
EXP2_MEAN_NOISE, EXP2_SD_NOISE = 0.1, 0.5
EXP2_CORRELATION = 0.001
EXP2_N_ASSETS = 50


@dataclass
class McDesign:
    """One Monte Carlo configuration."""

    experiment: str                 # "one" | "two"
    n_assets: int
    t_obs: int
    q: int
    replications: int = 50
    seed: int = 0
    mean: float | np.ndarray = 0.01   # experiment one only
    sd: float | np.ndarray = 0.05     # experiment one only
    n1: int = 10
    n2: int = 5
    loss_tolerance: float = 1e-6

    def __post_init__(self):
        if self.experiment not in ("one", "two"):
            raise ParameterError(f"experiment must be 'one' or 'two', got {self.experiment!r}")
        if self.experiment == "two" and self.n_assets != EXP2_N_ASSETS:
            raise ParameterError(f"experiment two is defined for {EXP2_N_ASSETS} assets")
        if self.t_obs < 2 or self.n_assets < 1 or self.q < 1:
            raise ParameterError("t_obs, n_assets and q must be positive")
        if self.replications < 1:
            raise ParameterError("replications must be >= 1")


def _exp2_moments() -> tuple[np.ndarray, np.ndarray]:
    mu = np.r_[np.full(EXP2_N_A, EXP2_MEAN_A), np.full(EXP2_N_B, EXP2_MEAN_B),
               np.full(EXP2_N_ASSETS - EXP2_N_A - EXP2_N_B, EXP2_MEAN_NOISE)]
    sd = np.r_[np.full(EXP2_N_A, EXP2_SD_A), np.full(EXP2_N_B, EXP2_SD_B),
               np.full(EXP2_N_ASSETS - EXP2_N_A - EXP2_N_B, EXP2_SD_NOISE)]
    return mu, sd


def exp2_asset_names() -> list[str]:
    return ([f"A{i + 1}" for i in range(EXP2_N_A)]
            + [f"B{i + 1}" for i in range(EXP2_N_B)]
            + [f"C{i + 1}" for i in range(EXP2_N_ASSETS - EXP2_N_A - EXP2_N_B)])


def design_covariance(design: McDesign) -> tuple[np.ndarray, np.ndarray]:
    """(mean vector, covariance matrix) implied by the design."""
    if design.experiment == "two":
        mu, sd = _exp2_moments()
        corr = np.full((EXP2_N_ASSETS, EXP2_N_ASSETS), EXP2_CORRELATION)
        np.fill_diagonal(corr, 1.0)
        return mu, np.outer(sd, sd) * corr
    mu = np.broadcast_to(np.asarray(design.mean, dtype=float), design.n_assets).copy()
    sd = np.broadcast_to(np.asarray(design.sd, dtype=float), design.n_assets).copy()
    if (sd <= 0).any():
        raise ParameterError("standard deviations must be positive")
    return mu, np.diag(sd**2)


def generate(design: McDesign, replication: int) -> ReturnPanel:
    """Panel for one replication; deterministic in (seed, replication)."""
    mu, cov = design_covariance(design)
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"design covariance is not positive definite: {exc}") from None
    rng = np.random.default_rng(np.random.SeedSequence((design.seed, replication)))
    draws = mu + rng.standard_normal((design.t_obs, design.n_assets)) @ chol.T
    names = exp2_asset_names() if design.experiment == "two" else None
    return panel_from_array(draws, assets=names)


@dataclass
class McRecord:
    replication: int
    n_selected: int
    loss: float
    support: list[str]
    in_dominant_block: bool | None    # support inside A+B (experiment two only)


@dataclass
class McReport:
    design: McDesign
    records: list[McRecord]
    metadata: dict = field(default_factory=dict)

    @property
    def average_selected(self) -> float:
        return float(np.mean([r.n_selected for r in self.records]))

    @property
    def sd_selected(self) -> float:
        counts = [r.n_selected for r in self.records]
        return float(np.std(counts, ddof=1)) if len(counts) > 1 else 0.0

    @property
    def average_loss(self) -> float:
        return float(np.mean([r.loss for r in self.records]))

    @property
    def loss_standard_error(self) -> float:
        losses = [r.loss for r in self.records]
        if len(losses) < 2:
            return 0.0
        return float(np.std(losses, ddof=1) / np.sqrt(len(losses)))

    @property
    def dominant_block_rate(self) -> float | None:
        flags = [r.in_dominant_block for r in self.records if r.in_dominant_block is not None]
        return float(np.mean(flags)) if flags else None

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "experiment": self.design.experiment,
            "n_assets": self.design.n_assets,
            "t_obs": self.design.t_obs,
            "q": self.design.q,
            "replications": self.design.replications,
            "seed": self.design.seed,
            "average_selected": self.average_selected,
            "sd_selected": self.sd_selected,
            "average_loss": self.average_loss,
            "loss_standard_error": self.loss_standard_error,
            "dominant_block_rate": self.dominant_block_rate,
            "records": [
                {"replication": r.replication, "n_selected": r.n_selected,
                 "loss": r.loss, "support": r.support,
                 "in_dominant_block": r.in_dominant_block}
                for r in self.records
            ],
            "metadata": self.metadata,
        }


def run_replication(design: McDesign, replication: int) -> McRecord:
    panel = generate(design, replication)
    config = SpanningConfig(q_max=design.q, loss_tolerance=design.loss_tolerance,
                            n1=design.n1, n2=design.n2)
    result = fss_select(panel, config, compute_per_utility=False)
    in_block = None
    if design.experiment == "two":
        dominant = set(range(EXP2_N_A + EXP2_N_B))
        in_block = set(result.support).issubset(dominant)
    return McRecord(
        replication=replication, n_selected=len(result.support),
        loss=float(result.loss),
        support=[result.asset_names[i] for i in range(len(result.support))],
        in_dominant_block=in_block,
    )


def run_experiment(design: McDesign, n_jobs: int = 1, progress=None) -> McReport:
    """All replications, aggregated; records kept in replication order."""
    records: list[McRecord] = []
    if n_jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            futures = [pool.submit(run_replication, design, r)
                       for r in range(design.replications)]
            for r, fut in enumerate(futures):
                records.append(fut.result())
                if progress:
                    progress(r + 1, design.replications)
    else:
        for r in range(design.replications):
            records.append(run_replication(design, r))
            if progress:
                progress(r + 1, design.replications)
    return McReport(design=design, records=records,
                    metadata={"n1": design.n1, "n2": design.n2,
                              "loss_tolerance": design.loss_tolerance})

"""The augmentation loop.

Every full combination of the subgroup key with fewer than ``tau`` real rows
receives synthetic rows until it reaches ``tau``.  Batches are drawn from a
generator, screened by the one-class SVM and the discriminator, and accepted
batches are appended (truncated at the gap).
"""
from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np

from .dataset import Dataset, subset_by_pattern
from .encode import Encoder, fit_encoder
from .filtering import DEFAULT_ALPHA, DEFAULT_NU, OcsvmModel, evaluate_batch, train_ocsvm
from .generators import Generator
from .pattern import Pattern
from .subgroups import uncovered_combinations

log = logging.getLogger(__name__)

DEFAULT_KEY = ("gender", "race", "age")


class Strategy(str, Enum):
    CONDITIONAL = "conditional"
    PER_SUBGROUP = "per-subgroup"


class AugmentationError(RuntimeError):
    def __init__(self, pattern: Pattern, cause: Exception):
        super().__init__(f"augmenting {pattern.label()}: {cause}")
        self.pattern = pattern


@dataclass(frozen=True)
class EqualizerConfig:
    tau: int = 150
    batch_size: int = 50
    alpha: float = DEFAULT_ALPHA
    strategy: Strategy = Strategy.CONDITIONAL
    max_attempts: int = 50
    master_seed: int = 0
    subgroup_key: tuple[str, ...] = DEFAULT_KEY
    nu: float = DEFAULT_NU
    gamma: float | None = None
    overshoot: bool = False

    def __post_init__(self):
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        object.__setattr__(self, "subgroup_key", tuple(self.subgroup_key))
        if self.tau < 1:
            raise ValueError("tau must be at least 1")
        if self.batch_size < 1:
            raise ValueError("batch size must be at least 1")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be at least 1")
        if self.master_seed < 0:
            raise ValueError("seed must be unsigned")
        if not self.subgroup_key:
            raise ValueError("subgroup key is empty")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["strategy"] = self.strategy.value
        d["subgroup_key"] = list(self.subgroup_key)
        return d


def compute_gap(tau: int, subgroup_count: int) -> int:
    if tau < 1:
        raise ValueError("tau must be at least 1")
    return max(0, tau - subgroup_count)


def subgroup_seed(master_seed: int, pattern: Pattern) -> int:
    """Seed derived from the master seed and the pattern alone, so results do
    not depend on the order in which subgroups are processed."""
    text = f"{master_seed}|{pattern.label()}".encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little")


def batch_seeds(sub_seed: int, attempt: int) -> tuple[int, int]:
    s = np.random.SeedSequence([sub_seed & 0xFFFFFFFF, sub_seed >> 32, attempt]).generate_state(2)
    return int(s[0]), int(s[1])


@dataclass
class BatchRecord:
    attempt: int
    sample_seed: int
    split_seed: int
    n_sampled: int
    n_valid: int
    auc: float | None
    outcome: str  # accepted | rejected_distribution | rejected_auc
    n_added: int = 0


@dataclass
class SubgroupLog:
    pattern: Pattern
    initial_count: int
    gap: int
    attempts: int = 0
    batches_accepted: int = 0
    batches_rejected_distribution: int = 0
    batches_rejected_auc: int = 0
    final_accepted_count: int = 0
    status: str = "Filled"
    model: str = "global"
    batches: list[BatchRecord] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pattern"] = self.pattern.as_dict()
        return d


@dataclass(frozen=True)
class AcceptedRecord:
    record: tuple[str, ...]
    origin: Pattern
    synthetic: bool = True


@dataclass
class AugmentationResult:
    augmented: Dataset
    accepted: list[AcceptedRecord]
    logs: list[SubgroupLog]
    config: EqualizerConfig

    @property
    def partial(self) -> list[SubgroupLog]:
        return [lg for lg in self.logs if lg.status == "Partial"]

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "real_rows": len(self.augmented) - len(self.accepted),
            "accepted_rows": len(self.accepted),
            "augmented_rows": len(self.augmented),
            "subgroups": [lg.to_dict() for lg in self.logs],
            "partial": [lg.pattern.as_dict() for lg in self.partial],
        }


def augment_subgroup(
    d: Dataset,
    pattern: Pattern,
    g: Generator,
    ocsvm: OcsvmModel,
    cfg: EqualizerConfig,
    enc: Encoder | None = None,
) -> tuple[list[tuple[str, ...]], SubgroupLog]:
    """Generate-filter-accept loop for one subgroup.

    Stops when the accepted count reaches the gap or after
    ``cfg.max_attempts`` batches, in which case the status is ``Partial``.
    """
    enc = enc or fit_encoder(d.schema)
    real_sub = subset_by_pattern(d, pattern)
    gap = compute_gap(cfg.tau, len(real_sub))
    lg = SubgroupLog(pattern, len(real_sub), gap)
    accepted: list[tuple[str, ...]] = []
    sub_seed = subgroup_seed(cfg.master_seed, pattern)
    while len(accepted) < gap and lg.attempts < cfg.max_attempts:
        sample_seed, split_seed = batch_seeds(sub_seed, lg.attempts)
        try:
            batch = g.sample(cfg.batch_size, sample_seed, pattern)
            verdict = evaluate_batch(real_sub, batch, ocsvm, cfg.alpha, enc, split_seed)
        except Exception as exc:
            raise AugmentationError(pattern, exc) from exc
        rec = BatchRecord(lg.attempts, sample_seed, split_seed, len(batch),
                          len(verdict.s_valid), verdict.auc, "accepted")
        lg.attempts += 1
        if verdict.accepted:
            take = list(verdict.s_valid)
            if not cfg.overshoot:
                take = take[: gap - len(accepted)]
            accepted.extend(take)
            rec.n_added = len(take)
            lg.batches_accepted += 1
        elif not verdict.s_valid:
            rec.outcome = "rejected_distribution"
            lg.batches_rejected_distribution += 1
        else:
            rec.outcome = "rejected_auc"
            lg.batches_rejected_auc += 1
        log.debug("%s batch %d: %d/%d valid, auc=%s, %s", pattern.label(), rec.attempt,
                  rec.n_valid, rec.n_sampled, rec.auc, rec.outcome)
        lg.batches.append(rec)
    lg.final_accepted_count = len(accepted)
    lg.status = "Filled" if len(accepted) >= gap else "Partial"
    return accepted, lg


def run(
    d: Dataset,
    g: Generator,
    cfg: EqualizerConfig,
    jobs: int = 1,
    ocsvm: OcsvmModel | None = None,
) -> AugmentationResult:
    """Augment every under-covered subgroup of ``d`` and return ``d`` plus the accepted rows."""
    if len(d) == 0:
        raise ValueError("cannot augment an empty dataset")
    d.schema.require_protected()
    for k in cfg.subgroup_key:
        d.schema.column(k)
    enc = fit_encoder(d.schema)
    targets = [p for p, _ in uncovered_combinations(d, cfg.tau, cfg.subgroup_key)]
    log.info("%d subgroups below tau=%d", len(targets), cfg.tau)
    if not targets:
        return AugmentationResult(d, [], [], cfg)

    if ocsvm is None:
        ocsvm = train_ocsvm(d, enc, nu=cfg.nu, gamma=cfg.gamma)

    models: list[tuple[Generator, str]] = []
    fitted_global: Generator | None = None

    def global_model() -> Generator:
        nonlocal fitted_global
        if fitted_global is None:
            fitted_global = g.fit(d)
        return fitted_global

    for p in targets:
        if cfg.strategy is Strategy.PER_SUBGROUP:
            sub = subset_by_pattern(d, p)
            if len(sub) >= 2:
                models.append((g.clone().fit(sub), "subgroup"))
                continue
            models.append((global_model(), "global-fallback"))
        else:
            models.append((global_model(), "global"))

    def work(i: int):
        recs, lg = augment_subgroup(d, targets[i], models[i][0], ocsvm, cfg, enc)
        lg.model = models[i][1]
        return recs, lg

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(work, range(len(targets))))
    else:
        results = [work(i) for i in range(len(targets))]

    accepted = [AcceptedRecord(r, p) for p, (recs, _) in zip(targets, results) for r in recs]
    logs = [lg for _, lg in results]
    for lg in logs:
        log.info("%s: %s %d/%d after %d batches", lg.pattern.label(cfg.subgroup_key),
                 lg.status, lg.final_accepted_count, lg.gap, lg.attempts)
    augmented = d.concat(a.record for a in accepted)
    return AugmentationResult(augmented, accepted, logs, cfg)

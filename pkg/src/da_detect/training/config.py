"""Training hyper-parameters and the two built-in presets."""

from dataclasses import asdict, dataclass, field, fields, replace

from ..adaptation import DEFAULT_LAMBDA, AblationMask


@dataclass(frozen=True)
class TrainConfig:
    lam: float = DEFAULT_LAMBDA
    lr_initial: float = 0.01
    lr_reduced: float = 0.001
    lr_drop_iter: int = 1500
    total_iters: int = 2000
    momentum: float = 0.9
    weight_decay: float = 0.0005
    ablation: AblationMask = field(default_factory=AblationMask)
    seed: int = 0
    eval_every: int = 0  # 0 disables periodic evaluation
    clip_norm: float = 10.0
    reduction: str = "mean"
    stop_image_grad: bool = False
    target_rois: int = 16  # post-NMS proposals used as target instances

    def __post_init__(self):
        if self.ablation.use_cst and not (self.ablation.use_img and self.ablation.use_ins):
            raise ValueError("the consistency term needs both the img and ins heads")
        if not 0 <= self.lr_drop_iter <= self.total_iters:
            raise ValueError("lr_drop_iter must lie in [0, total_iters]")
        if self.total_iters < 0:
            raise ValueError("total_iters must be non-negative")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if self.reduction not in ("mean", "sum"):
            raise ValueError("reduction must be 'mean' or 'sum'")
        if self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive")

    def to_dict(self):
        d = asdict(self)
        d["ablation"] = self.ablation.as_text()
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown training key(s): {', '.join(sorted(unknown))}")
        if isinstance(d.get("ablation"), str):
            d["ablation"] = AblationMask.parse(d["ablation"])
        return cls(**d)

    def with_(self, **kw):
        return replace(self, **kw)


# Full-scale protocol: 50k iterations at 1e-3, then 20k at 1e-4.
FULL_PRESET = TrainConfig(lam=0.1, lr_initial=0.001, lr_reduced=0.0001, lr_drop_iter=50_000,
                           total_iters=70_000, momentum=0.9, weight_decay=0.0005)
TOY_PRESET = TrainConfig()

PRESETS = {"full": FULL_PRESET, "toy": TOY_PRESET}

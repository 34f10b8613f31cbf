import numpy as np

from xmodal.models.network import ModelParams
from xmodal.schemas.training import DecayMode, TrainConfig


class Adam:
    """Adam with bias correction, updating :class:`ModelParams` in place.

    The configured ``weight_decay`` is applied either to the learning rate
    (``lr_epoch = lr / (1 + decay · epoch)``) or as L2 decay added to the
    gradients of weight matrices, depending on ``decay_mode``.
    """

    def __init__(self, params: ModelParams, cfg: TrainConfig):
        self.cfg = cfg
        self.step_count = 0
        self.m = {name: np.zeros_like(t) for name, t in params.tensors.items()}
        self.v = {name: np.zeros_like(t) for name, t in params.tensors.items()}

    def learning_rate(self, epoch: int) -> float:
        if self.cfg.decay_mode == DecayMode.LR:
            return self.cfg.lr / (1.0 + self.cfg.weight_decay * epoch)
        return self.cfg.lr

    def step(self, params: ModelParams, grads: dict[str, np.ndarray], epoch: int) -> None:
        cfg = self.cfg
        lr = self.learning_rate(epoch)
        self.step_count += 1
        correction1 = 1.0 - cfg.beta1**self.step_count
        correction2 = 1.0 - cfg.beta2**self.step_count
        for name, tensor in params.tensors.items():
            grad = grads[name]
            if cfg.decay_mode == DecayMode.L2 and name.endswith(".W"):
                grad = grad + cfg.weight_decay * tensor
            self.m[name] = cfg.beta1 * self.m[name] + (1.0 - cfg.beta1) * grad
            self.v[name] = cfg.beta2 * self.v[name] + (1.0 - cfg.beta2) * grad * grad
            m_hat = self.m[name] / correction1
            v_hat = self.v[name] / correction2
            tensor -= lr * m_hat / (np.sqrt(v_hat) + cfg.eps)

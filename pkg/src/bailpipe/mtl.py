"""Multi-task bail model: a single post-norm transformer encoder layer over
sentence embeddings with a learned CLS vector, plus two MLP heads (document
bail decision, per-sentence salience) trained with equally weighted BCE.

Everything is plain numpy.  The backward pass is written out explicitly so it
can be checked element by element against central finite differences."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np


@dataclass(frozen=True)
class TrainConfig:
    dim: int = 64
    heads: int = 4
    epochs: int = 30
    learning_rate: float = 5e-5
    batch_size: int = 4
    max_sentences: int = 32
    seed: int | None = None
    ln_eps: float = 1e-9
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.dim <= 0 or self.heads <= 0:
            raise ValueError("dim and heads must be positive")
        if self.dim % self.heads != 0:
            raise ValueError(f"dim {self.dim} not divisible by heads {self.heads}")

    @property
    def effective_seed(self) -> int:
        return self.seed if self.seed is not None else 0


def _param_shapes(d: int) -> list[tuple[str, tuple[int, ...]]]:
    return [
        ("cls", (d,)),
        ("attn.wq", (d, d)),
        ("attn.wk", (d, d)),
        ("attn.wv", (d, d)),
        ("attn.wo", (d, d)),
        ("ln1.gain", (d,)),
        ("ln1.bias", (d,)),
        ("ffn.w1", (d, 4 * d)),
        ("ffn.b1", (4 * d,)),
        ("ffn.w2", (4 * d, d)),
        ("ffn.b2", (d,)),
        ("ln2.gain", (d,)),
        ("ln2.bias", (d,)),
        ("bail.w1", (d, d)),
        ("bail.b1", (d,)),
        ("bail.w2", (d,)),
        ("bail.b2", ()),
        ("salience.w1", (d, d)),
        ("salience.b1", (d,)),
        ("salience.w2", (d,)),
        ("salience.b2", ()),
    ]


class ModelParams:
    """Named parameter tensors with fixed iteration order."""

    def __init__(self, dim: int, heads: int, tensors: dict[str, np.ndarray]):
        expected = dict(_param_shapes(dim))
        if set(tensors) != set(expected):
            missing = set(expected) - set(tensors)
            extra = set(tensors) - set(expected)
            raise ValueError(f"bad parameter set: missing={missing} extra={extra}")
        for name, arr in tensors.items():
            if arr.shape != expected[name]:
                raise ValueError(
                    f"{name}: shape {arr.shape}, expected {expected[name]}"
                )
        self.dim = dim
        self.heads = heads
        self.tensors = {name: tensors[name] for name, _ in _param_shapes(dim)}

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def names(self) -> list[str]:
        return list(self.tensors)

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.dim, self.heads, {k: v.copy() for k, v in self.tensors.items()}
        )


def init_params(cfg: TrainConfig) -> ModelParams:
    """Xavier-uniform weights, zero biases, unit layer-norm gains."""
    rng = np.random.default_rng(cfg.effective_seed)
    d = cfg.dim
    tensors: dict[str, np.ndarray] = {}
    for name, shape in _param_shapes(d):
        if name.endswith(".gain"):
            tensors[name] = np.ones(shape)
        elif name.endswith((".bias", ".b1", ".b2")):
            tensors[name] = np.zeros(shape)
        else:
            if len(shape) == 2:
                fan_in, fan_out = shape
            else:
                # cls behaves as a 1 x d projection, head w2 as d x 1.
                fan_in, fan_out = (1, d) if name == "cls" else (d, 1)
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            tensors[name] = rng.uniform(-limit, limit, size=shape)
    return ModelParams(d, cfg.heads, tensors)


def _layer_norm(x: np.ndarray, gain: np.ndarray, bias: np.ndarray, eps: float):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv_std
    return xhat * gain + bias, (xhat, inv_std)


def _layer_norm_backward(dy, cache, gain):
    xhat, inv_std = cache
    d_gain = (dy * xhat).sum(axis=0)
    d_bias = dy.sum(axis=0)
    dxhat = dy * gain
    dx = inv_std * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, d_gain, d_bias


def _softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _sigmoid(x):
    return np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))


class Prediction(NamedTuple):
    bail_prob: float
    salience_probs: np.ndarray


class LossBreakdown(NamedTuple):
    total: float
    bail: float
    salience: float


class TrainSample(NamedTuple):
    embeddings: np.ndarray  # (k, dim) sentence vectors
    label: int  # 1 = granted
    salience: np.ndarray  # (k,) 0/1 targets


class EpochLoss(NamedTuple):
    epoch: int
    total: float
    bail: float
    salience: float


def _split_heads(x: np.ndarray, h: int) -> np.ndarray:
    n, d = x.shape
    return x.reshape(n, h, d // h).transpose(1, 0, 2)


def _merge_heads(x: np.ndarray) -> np.ndarray:
    h, n, dh = x.shape
    return x.transpose(1, 0, 2).reshape(n, h * dh)


def _forward(params: ModelParams, embeddings: np.ndarray, ln_eps: float):
    t = params.tensors
    if embeddings.ndim != 2 or embeddings.shape[1] != params.dim:
        raise ValueError(
            f"embeddings must be (k, {params.dim}), got {embeddings.shape}"
        )
    if embeddings.shape[0] == 0:
        raise ValueError("need at least one sentence embedding")
    h = params.heads
    dh = params.dim // h
    x = np.vstack([t["cls"][None, :], embeddings])
    q = x @ t["attn.wq"]
    k = x @ t["attn.wk"]
    v = x @ t["attn.wv"]
    qh, kh, vh = (_split_heads(m, h) for m in (q, k, v))
    scores = qh @ kh.transpose(0, 2, 1) / math.sqrt(dh)
    attn = _softmax(scores)
    ctx = _merge_heads(attn @ vh)
    r1 = x + ctx @ t["attn.wo"]
    h1, ln1_cache = _layer_norm(r1, t["ln1.gain"], t["ln1.bias"], ln_eps)
    f_pre = h1 @ t["ffn.w1"] + t["ffn.b1"]
    f_act = np.maximum(f_pre, 0.0)
    r2 = h1 + f_act @ t["ffn.w2"] + t["ffn.b2"]
    h2, ln2_cache = _layer_norm(r2, t["ln2.gain"], t["ln2.bias"], ln_eps)

    bail_pre = h2[0] @ t["bail.w1"] + t["bail.b1"]
    bail_act = np.maximum(bail_pre, 0.0)
    bail_logit = bail_act @ t["bail.w2"] + t["bail.b2"]
    sal_pre = h2[1:] @ t["salience.w1"] + t["salience.b1"]
    sal_act = np.maximum(sal_pre, 0.0)
    sal_logits = sal_act @ t["salience.w2"] + t["salience.b2"]

    cache = {
        "x": x,
        "qh": qh,
        "kh": kh,
        "vh": vh,
        "attn": attn,
        "ctx": ctx,
        "h1": h1,
        "ln1_cache": ln1_cache,
        "f_pre": f_pre,
        "f_act": f_act,
        "h2": h2,
        "ln2_cache": ln2_cache,
        "bail_pre": bail_pre,
        "bail_act": bail_act,
        "bail_logit": float(bail_logit),
        "sal_pre": sal_pre,
        "sal_act": sal_act,
        "sal_logits": sal_logits,
    }
    return cache


def forward(
    params: ModelParams, embeddings: np.ndarray, ln_eps: float = 1e-9
) -> Prediction:
    cache = _forward(params, embeddings, ln_eps)
    return Prediction(
        bail_prob=float(_sigmoid(np.asarray(cache["bail_logit"]))),
        salience_probs=_sigmoid(cache["sal_logits"]),
    )


_CLIP = 1e-12


def _bce(prob: np.ndarray, target: np.ndarray) -> np.ndarray:
    p = np.clip(prob, _CLIP, 1.0 - _CLIP)
    return -(target * np.log(p) + (1.0 - target) * np.log1p(-p))


def sample_loss(
    params: ModelParams, sample: TrainSample, ln_eps: float = 1e-9
) -> LossBreakdown:
    pred = forward(params, sample.embeddings, ln_eps)
    bail = float(_bce(np.asarray(pred.bail_prob), np.asarray(float(sample.label))))
    sal = float(_bce(pred.salience_probs, sample.salience).mean())
    return LossBreakdown(bail + sal, bail, sal)


def loss_and_grads(
    params: ModelParams, sample: TrainSample, ln_eps: float = 1e-9
) -> tuple[LossBreakdown, dict[str, np.ndarray]]:
    """Loss plus analytic gradients for every named tensor."""
    t = params.tensors
    h = params.heads
    dh = params.dim // h
    cache = _forward(params, sample.embeddings, ln_eps)
    k = sample.embeddings.shape[0]
    if sample.salience.shape != (k,):
        raise ValueError("salience targets must match sentence count")

    bail_prob = float(_sigmoid(np.asarray(cache["bail_logit"])))
    sal_probs = _sigmoid(cache["sal_logits"])
    y = float(sample.label)
    bail_loss = float(_bce(np.asarray(bail_prob), np.asarray(y)))
    sal_loss = float(_bce(sal_probs, sample.salience).mean())
    loss = LossBreakdown(bail_loss + sal_loss, bail_loss, sal_loss)

    g = {name: np.zeros_like(arr) for name, arr in t.items()}

    # Head gradients; BCE-through-sigmoid gives (p - y) at each logit.
    d_bail_logit = bail_prob - y
    d_sal_logits = (sal_probs - sample.salience) / k

    h2 = cache["h2"]
    d_h2 = np.zeros_like(h2)

    g["bail.w2"] += cache["bail_act"] * d_bail_logit
    g["bail.b2"] += np.asarray(d_bail_logit)
    d_bail_act = d_bail_logit * t["bail.w2"]
    d_bail_pre = d_bail_act * (cache["bail_pre"] > 0)
    g["bail.w1"] += np.outer(h2[0], d_bail_pre)
    g["bail.b1"] += d_bail_pre
    d_h2[0] += d_bail_pre @ t["bail.w1"].T

    g["salience.w2"] += cache["sal_act"].T @ d_sal_logits
    g["salience.b2"] += np.asarray(d_sal_logits.sum())
    d_sal_act = np.outer(d_sal_logits, t["salience.w2"])
    d_sal_pre = d_sal_act * (cache["sal_pre"] > 0)
    g["salience.w1"] += h2[1:].T @ d_sal_pre
    g["salience.b1"] += d_sal_pre.sum(axis=0)
    d_h2[1:] += d_sal_pre @ t["salience.w1"].T

    d_r2, d_g2, d_b2 = _layer_norm_backward(d_h2, cache["ln2_cache"], t["ln2.gain"])
    g["ln2.gain"] += d_g2
    g["ln2.bias"] += d_b2

    d_h1 = d_r2.copy()
    g["ffn.w2"] += cache["f_act"].T @ d_r2
    g["ffn.b2"] += d_r2.sum(axis=0)
    d_f_act = d_r2 @ t["ffn.w2"].T
    d_f_pre = d_f_act * (cache["f_pre"] > 0)
    g["ffn.w1"] += cache["h1"].T @ d_f_pre
    g["ffn.b1"] += d_f_pre.sum(axis=0)
    d_h1 += d_f_pre @ t["ffn.w1"].T

    d_r1, d_g1, d_b1 = _layer_norm_backward(d_h1, cache["ln1_cache"], t["ln1.gain"])
    g["ln1.gain"] += d_g1
    g["ln1.bias"] += d_b1

    d_x = d_r1.copy()
    d_ctx = d_r1 @ t["attn.wo"].T
    g["attn.wo"] += cache["ctx"].T @ d_r1

    d_ctx_h = _split_heads(d_ctx, h)
    attn = cache["attn"]
    d_attn = d_ctx_h @ cache["vh"].transpose(0, 2, 1)
    d_vh = attn.transpose(0, 2, 1) @ d_ctx_h
    d_scores = attn * (d_attn - (d_attn * attn).sum(axis=-1, keepdims=True))
    d_scores /= math.sqrt(dh)
    d_qh = d_scores @ cache["kh"]
    d_kh = d_scores.transpose(0, 2, 1) @ cache["qh"]
    d_q = _merge_heads(d_qh)
    d_k = _merge_heads(d_kh)
    d_v = _merge_heads(d_vh)
    x = cache["x"]
    g["attn.wq"] += x.T @ d_q
    g["attn.wk"] += x.T @ d_k
    g["attn.wv"] += x.T @ d_v
    d_x += d_q @ t["attn.wq"].T + d_k @ t["attn.wk"].T + d_v @ t["attn.wv"].T

    g["cls"] += d_x[0]
    return loss, g


def analytic_grads(
    params: ModelParams, sample: TrainSample, ln_eps: float = 1e-9
) -> dict[str, np.ndarray]:
    return loss_and_grads(params, sample, ln_eps)[1]


def numeric_grads(
    params: ModelParams,
    sample: TrainSample,
    eps: float = 1e-5,
    ln_eps: float = 1e-9,
) -> dict[str, np.ndarray]:
    """Central finite differences of the total loss, element by element."""
    out: dict[str, np.ndarray] = {}
    for name in params.names():
        arr = params.tensors[name]
        grad = np.zeros_like(arr)
        flat = arr.reshape(-1) if arr.ndim else arr.reshape(1)
        gflat = grad.reshape(-1) if arr.ndim else grad.reshape(1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = sample_loss(params, sample, ln_eps).total
            flat[i] = orig - eps
            lo = sample_loss(params, sample, ln_eps).total
            flat[i] = orig
            gflat[i] = (hi - lo) / (2 * eps)
        out[name] = grad
    return out


class GradCheckReport(NamedTuple):
    per_tensor: dict[str, float]
    max_rel_error: float

    @property
    def worst_tensor(self) -> str:
        return max(self.per_tensor, key=self.per_tensor.get)


def compare_grads(
    analytic: dict[str, np.ndarray], numeric: dict[str, np.ndarray]
) -> GradCheckReport:
    """Per-tensor max of |a - n| / max(|a|, |n|, 1e-8)."""
    per_tensor = {}
    for name, a in analytic.items():
        n = numeric[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)
        rel = np.abs(a - n) / denom
        per_tensor[name] = float(rel.max()) if rel.size else 0.0
    return GradCheckReport(per_tensor, max(per_tensor.values()))


def grad_check(
    params: ModelParams,
    sample: TrainSample,
    eps: float = 1e-5,
    ln_eps: float = 1e-9,
) -> GradCheckReport:
    return compare_grads(
        analytic_grads(params, sample, ln_eps),
        numeric_grads(params, sample, eps, ln_eps),
    )


def _clip_sentences(sample: TrainSample, max_sentences: int) -> TrainSample:
    if sample.embeddings.shape[0] <= max_sentences:
        return sample
    return TrainSample(
        sample.embeddings[:max_sentences],
        sample.label,
        sample.salience[:max_sentences],
    )


def train(
    corpus: Sequence[TrainSample], cfg: TrainConfig
) -> tuple[ModelParams, list[EpochLoss]]:
    """Adam over per-document gradients, seeded shuffle each epoch.

    The trace records the mean batch loss of each epoch, measured before that
    batch's update, so trace[0] reflects the freshly initialized model."""
    if not corpus:
        raise ValueError("cannot train on an empty corpus")
    samples = [_clip_sentences(s, cfg.max_sentences) for s in corpus]
    params = init_params(cfg)
    m = {k: np.zeros_like(v) for k, v in params.tensors.items()}
    v = {k: np.zeros_like(val) for k, val in params.tensors.items()}
    rng = np.random.default_rng(cfg.effective_seed)
    step = 0
    trace: list[EpochLoss] = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(samples))
        tot = bail = sal = 0.0
        for start in range(0, len(samples), cfg.batch_size):
            batch = [samples[i] for i in order[start : start + cfg.batch_size]]
            grads = {k: np.zeros_like(val) for k, val in params.tensors.items()}
            for sample in batch:
                loss, g = loss_and_grads(params, sample, cfg.ln_eps)
                if not math.isfinite(loss.total):
                    raise RuntimeError(
                        f"non-finite loss at epoch {epoch}, step {step}"
                    )
                tot += loss.total
                bail += loss.bail
                sal += loss.salience
                for k in grads:
                    grads[k] += g[k]
            step += 1
            for k in grads:
                gk = grads[k] / len(batch)
                m[k] = cfg.adam_beta1 * m[k] + (1 - cfg.adam_beta1) * gk
                v[k] = cfg.adam_beta2 * v[k] + (1 - cfg.adam_beta2) * gk * gk
                mhat = m[k] / (1 - cfg.adam_beta1**step)
                vhat = v[k] / (1 - cfg.adam_beta2**step)
                params.tensors[k] -= (
                    cfg.learning_rate * mhat / (np.sqrt(vhat) + cfg.adam_eps)
                )
        n = len(samples)
        trace.append(EpochLoss(epoch, tot / n, bail / n, sal / n))
    return params, trace


def predict(
    params: ModelParams, embeddings: np.ndarray, ln_eps: float = 1e-9
) -> Prediction:
    return forward(params, embeddings, ln_eps)


CHECKPOINT_FORMAT = 1


def params_to_bytes(params: ModelParams) -> bytes:
    """JSON header line (format, dims, tensor shapes) + raw float64 arrays.

    Byte-deterministic for identical params, unlike zip-based containers."""
    header = {
        "format": CHECKPOINT_FORMAT,
        "dim": params.dim,
        "heads": params.heads,
        "tensors": {k: list(v.shape) for k, v in params.tensors.items()},
    }
    parts = [json.dumps(header, sort_keys=True).encode("utf-8"), b"\n"]
    # Buffers follow in header key order (sorted), which the reader walks.
    for name in sorted(params.names()):
        arr = np.ascontiguousarray(params.tensors[name], dtype="<f8")
        parts.append(arr.tobytes())
    return b"".join(parts)


def params_from_bytes(data: bytes) -> ModelParams:
    newline = data.index(b"\n")
    header = json.loads(data[:newline].decode("utf-8"))
    if header.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"unsupported checkpoint format {header.get('format')}")
    tensors = {}
    offset = newline + 1
    for name, shape in header["tensors"].items():
        count = int(np.prod(shape)) if shape else 1
        buf = data[offset : offset + count * 8]
        if len(buf) != count * 8:
            raise ValueError(f"checkpoint truncated at tensor {name}")
        tensors[name] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
        offset += count * 8
    return ModelParams(int(header["dim"]), int(header["heads"]), tensors)


def save_params(params: ModelParams, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_bytes(params_to_bytes(params))


def load_params(path) -> ModelParams:
    return params_from_bytes(Path(path).read_bytes())


def loss_trace_rows(trace: Iterable[EpochLoss]) -> list[dict[str, float]]:
    return [
        {"epoch": e.epoch, "total": e.total, "bail": e.bail, "salience": e.salience}
        for e in trace
    ]

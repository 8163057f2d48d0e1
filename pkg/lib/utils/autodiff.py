"""
Minimal dense tensor engine with reverse-mode automatic differentiation.

Every op computes its forward value with numpy (float64, row-major) and,
when any input requires a gradient, appends a record to the thread-local
tape. ``backward(loss)`` walks the tape once in reverse, accumulates
d loss / d tensor into ``.grad`` of every reachable tensor that requires
it, then clears the tape.

    >>> x = Parameter(np.ones(3))
    >>> backward(sum(x))
    >>> x.grad
    array([1., 1., 1.])
"""
import contextlib
import threading
import zlib
from collections import OrderedDict

import numpy as np

from .errors import ContractError, DimensionError

_state = threading.local()


class Record(object):
    __slots__ = ('out', 'inputs', 'backward_fn')

    def __init__(self, out, inputs, backward_fn):
        self.out = out
        self.inputs = inputs
        self.backward_fn = backward_fn


class Tape(object):
    """Ordered record of the ops executed with gradient tracking."""

    def __init__(self):
        self.records = []

    def append(self, out, inputs, backward_fn):
        self.records.append(Record(out, inputs, backward_fn))

    def clear(self):
        self.records = []

    def __len__(self):
        return len(self.records)


def get_tape():
    if not hasattr(_state, 'tape'):
        _state.tape = Tape()
    return _state.tape


def grad_enabled():
    return getattr(_state, 'grad_enabled', True)


@contextlib.contextmanager
def no_grad():
    prev = grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = prev


@contextlib.contextmanager
def enable_grad():
    prev = grad_enabled()
    _state.grad_enabled = True
    try:
        yield
    finally:
        _state.grad_enabled = prev


class Tensor(object):
    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data.copy()

    def item(self):
        return float(self.data.reshape(-1)[0])

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        flag = ', requires_grad=True' if self.requires_grad else ''
        return f'Tensor(shape={self.shape}{flag})'

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise ContractError('division is only defined by a constant')
        return mul(self, 1.0 / float(other))

    def __matmul__(self, other):
        return matmul(self, other)


class Parameter(Tensor):
    """A trainable tensor; registered automatically on a Module."""

    def __init__(self, data, name=None):
        super(Parameter, self).__init__(data, requires_grad=True, name=name)


def as_tensor(x):
    if isinstance(x, Tensor):
        return x
    return Tensor(x)


def _result(data, inputs, backward_fn):
    out = Tensor.__new__(Tensor)
    out.data = np.asarray(data, dtype=np.float64)
    out.grad = None
    out.name = None
    out.requires_grad = grad_enabled() and any(t.requires_grad for t in inputs)
    if out.requires_grad:
        get_tape().append(out, inputs, backward_fn)
    return out


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_check(op, a, b):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(op, a.shape, b.shape)


# ---------------------------------------------------------------------------- #
# elementwise
# ---------------------------------------------------------------------------- #
def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check('add', a, b)
    return _result(a.data + b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check('sub', a, b)
    return _result(a.data - b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)))


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_check('mul', a, b)
    return _result(a.data * b.data, (a, b),
                   lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def relu(x):
    # subgradient at 0 is 0
    mask = x.data > 0
    return _result(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


# ---------------------------------------------------------------------------- #
# linear algebra and shape
# ---------------------------------------------------------------------------- #
def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError('matmul', a.shape, b.shape)
    if b.ndim > 2 and a.shape[:-2] != b.shape[:-2]:
        raise DimensionError('matmul', a.shape, b.shape)

    def backward_fn(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _result(np.matmul(a.data, b.data), (a, b), backward_fn)


def reshape(x, shape):
    try:
        data = x.data.reshape(shape)
    except ValueError:
        raise DimensionError('reshape', x.shape, shape)
    return _result(data, (x,), lambda g: (g.reshape(x.shape),))


def transpose(x, axes=None):
    axes = tuple(reversed(range(x.ndim))) if axes is None else tuple(axes)
    inverse = np.argsort(axes)
    return _result(np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inverse),))


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise DimensionError('concat', *[t.shape for t in tensors])
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return _result(data, tuple(tensors), lambda g: tuple(np.split(g, bounds, axis=axis)))


def sum(x, axis=None, keepdims=False):
    def backward_fn(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _result(x.data.sum(axis=axis, keepdims=keepdims), (x,), backward_fn)


def mean(x, axis=None, keepdims=False):
    count = x.size if axis is None else x.shape[axis]
    return mul(sum(x, axis=axis, keepdims=keepdims), 1.0 / count)


def embedding_lookup(table, ids):
    """Gather rows ``ids`` of ``table`` [V x d] -> [len x d]."""
    ids = np.asarray(ids, dtype=np.int64).reshape(-1)
    if table.ndim != 2:
        raise DimensionError('embedding_lookup', table.shape, ids.shape)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ContractError(f'embedding_lookup: id out of range [0, {table.shape[0]}): '
                            f'min={ids.min()}, max={ids.max()}')

    def backward_fn(g):
        grad = np.zeros_like(table.data)
        np.add.at(grad, ids, g)
        return (grad,)

    return _result(table.data[ids], (table,), backward_fn)


# ---------------------------------------------------------------------------- #
# fused nn ops
# ---------------------------------------------------------------------------- #
def softmax(x, axis=-1):
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=axis, keepdims=True)
    return _result(p, (x,), lambda g: (p * (g - (g * p).sum(axis=axis, keepdims=True)),))


def layer_norm(x, gain, bias, eps=1e-12):
    if eps <= 0:
        raise ContractError(f'layer_norm eps must be > 0, got {eps}')
    if gain.shape != (x.shape[-1],) or bias.shape != (x.shape[-1],):
        raise DimensionError('layer_norm', x.shape, gain.shape, bias.shape)
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered ** 2).mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std

    def backward_fn(g):
        lead = tuple(range(g.ndim - 1))
        g_gain = (g * xhat).sum(axis=lead)
        g_bias = g.sum(axis=lead)
        gx_hat = g * gain.data
        gx = inv_std * (gx_hat - gx_hat.mean(axis=-1, keepdims=True)
                        - xhat * (gx_hat * xhat).mean(axis=-1, keepdims=True))
        return gx, g_gain, g_bias

    return _result(xhat * gain.data + bias.data, (x, gain, bias), backward_fn)


def dropout(x, rate, training, rng=None):
    if not 0.0 <= rate < 1.0:
        raise ContractError(f'dropout rate must lie in [0, 1), got {rate}')
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ContractError('dropout at training time needs an rng')
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return _result(x.data * keep, (x,), lambda g: (g * keep,))


def cross_entropy(logits, labels):
    """Mean negative log-likelihood of ``labels`` under softmax(logits) [B x C]."""
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if logits.ndim != 2 or logits.shape[0] != labels.shape[0]:
        raise DimensionError('cross_entropy', logits.shape, labels.shape)
    batch = logits.shape[0]
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_p = shifted - log_z
    loss = -log_p[np.arange(batch), labels].mean()

    def backward_fn(g):
        grad = np.exp(log_p)
        grad[np.arange(batch), labels] -= 1.0
        return (grad * (g / batch),)

    return _result(loss, (logits,), backward_fn)


# ---------------------------------------------------------------------------- #
# reverse pass
# ---------------------------------------------------------------------------- #
def backward(loss):
    if loss.size != 1:
        raise ContractError(f'backward needs a scalar loss, got shape {loss.shape}')
    tape = get_tape()
    records = tape.records
    tape.clear()
    if not loss.requires_grad:
        return
    pending = {id(loss): (loss, np.ones_like(loss.data))}
    for record in reversed(records):
        item = pending.pop(id(record.out), None)
        if item is None:
            continue
        out, g = item
        out.grad = g if out.grad is None else out.grad + g
        for t, gi in zip(record.inputs, record.backward_fn(g)):
            if gi is None or not t.requires_grad:
                continue
            if id(t) in pending:
                pending[id(t)] = (t, pending[id(t)][1] + gi)
            else:
                pending[id(t)] = (t, gi)
    # what is left are leaves
    for t, g in pending.values():
        t.grad = g if t.grad is None else t.grad + g


def finite_diff_check(f, x, eps=1e-5, max_coords=None, rng=None):
    """Max relative error between backward() and central differences of f at x.

    The error of one coordinate is |g_ad - g_fd| / max(1, |g_ad|, |g_fd|).
    With ``max_coords`` only that many coordinates (drawn with ``rng``) are
    checked.
    """
    prev_flag = x.requires_grad
    x.requires_grad = True
    get_tape().clear()
    x.grad = None
    try:
        with enable_grad():
            backward(f(x))
        g_ad = np.zeros_like(x.data) if x.grad is None else x.grad.copy()

        coords = np.arange(x.size)
        if max_coords is not None and max_coords < x.size:
            rng = np.random.default_rng(0) if rng is None else rng
            coords = np.sort(rng.choice(x.size, size=max_coords, replace=False))

        flat = x.data.reshape(-1)
        worst = 0.0
        with no_grad():
            for idx in coords:
                orig = flat[idx]
                flat[idx] = orig + eps
                f_plus = f(x).item()
                flat[idx] = orig - eps
                f_minus = f(x).item()
                flat[idx] = orig
                g_fd = (f_plus - f_minus) / (2.0 * eps)
                g = g_ad.reshape(-1)[idx]
                worst = max(worst, abs(g - g_fd) / max(1.0, abs(g), abs(g_fd)))
    finally:
        x.requires_grad = prev_flag
        x.grad = None
    return worst


# ---------------------------------------------------------------------------- #
# counter-based randomness
# ---------------------------------------------------------------------------- #
def counter_rng(seed, *keys):
    """Generator fully determined by (seed, *keys); strings are hashed with crc32."""
    words = [int(seed)] + [k if isinstance(k, int) else zlib.crc32(str(k).encode('utf-8')) for k in keys]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))


class DropoutContext(object):
    """Reproducible dropout masks given (seed, step, sample, layer id)."""

    def __init__(self, seed, step=0, sample=0):
        self.seed = seed
        self.step = step
        self.sample = sample

    def rng(self, layer_id):
        return counter_rng(self.seed, self.step, self.sample, layer_id)


# ---------------------------------------------------------------------------- #
# modules
# ---------------------------------------------------------------------------- #
class Module(object):
    """Container of Parameters and sub-Modules, registered on assignment."""

    def __init__(self):
        object.__setattr__(self, '_parameters', OrderedDict())
        object.__setattr__(self, '_modules', OrderedDict())
        object.__setattr__(self, 'training', True)

    def __setattr__(self, name, value):
        if isinstance(value, Parameter):
            self._parameters[name] = value
        elif isinstance(value, Module):
            self._modules[name] = value
        object.__setattr__(self, name, value)

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def named_parameters(self, prefix=''):
        for name, p in self._parameters.items():
            yield prefix + name, p
        for name, m in self._modules.items():
            for item in m.named_parameters(prefix=f'{prefix}{name}.'):
                yield item

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def train(self, mode=True):
        object.__setattr__(self, 'training', mode)
        for m in self._modules.values():
            m.train(mode)
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def state_dict(self):
        return OrderedDict((name, p.data.copy()) for name, p in self.named_parameters())

    def load_state_dict(self, state_dict, strict=True):
        own = OrderedDict(self.named_parameters())
        if strict:
            missing = [k for k in own if k not in state_dict]
            unexpected = [k for k in state_dict if k not in own]
            if missing or unexpected:
                raise ContractError(f'state dict mismatch: missing={missing} unexpected={unexpected}')
        for name, p in own.items():
            if name not in state_dict:
                continue
            value = np.asarray(state_dict[name], dtype=np.float64)
            if value.shape != p.shape:
                raise DimensionError(f'load_state_dict[{name}]', p.shape, value.shape)
            p.data[...] = value


class ModuleList(Module):
    def __init__(self, modules=()):
        super(ModuleList, self).__init__()
        object.__setattr__(self, '_items', [])
        for m in modules:
            self.append(m)

    def append(self, module):
        self._modules[str(len(self._items))] = module
        self._items.append(module)

    def __iter__(self):
        return iter(self._items)

    def __len__(self):
        return len(self._items)

    def __getitem__(self, idx):
        return self._items[idx]

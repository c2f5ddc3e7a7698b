"""Dense float64 tensors with tape-based reverse-mode automatic differentiation.

Shapes are explicit and checked: elementwise operations require identical
shapes, matmul requires 2-D operands with agreeing inner dimensions, and the
only broadcast is adding a bias vector over the rows of a matrix. Keeping the
rules this narrow makes shape bugs loud.

Recording happens inside a ``Graph`` context; outside of one, every operation
is a plain forward evaluation (used for inference and for computing soft
labels without tracking). A graph is a tape: operations append in execution
order and ``backward`` replays it in reverse, so each forward pass rebuilds a
fresh graph::

    w = parameter([1.0, 2.0])
    with Graph():
        loss = mul(w, w).sum()
        backward(loss)      # w.grad == [2.0, 4.0]

Gradients of leaf tensors accumulate additively across ``backward`` calls
until ``zero_grad`` resets them. Graphs are single-threaded; independent
graphs may live on different threads (the active-graph stack is thread-local).
"""

import threading

import numpy as np

from . import kernels

MIN_NORM = 1e-12


class DimensionError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class DegenerateVectorError(ValueError):
    """A vector with near-zero L2 norm reached a normalizing operation."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class GraphError(RuntimeError):
    """A backward() contract violation (non-scalar loss, wrong graph, ...)."""


class Tensor:
    """A dense float64 value, optionally tracked on the active graph.

    ``data`` is a C-contiguous (row-major) numpy array, so its raveled view is
    the flat value buffer. ``grad``, once populated by backward(), has the
    same shape. Leaf tensors created with requires_grad=True accumulate
    gradients until zero_grad().
    """

    __slots__ = ("data", "grad", "requires_grad", "node_id", "_graph")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64, order="C")
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.node_id = None
        self._graph = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        backward(self)

    def sum(self):
        return tensor_sum(self)

    def mean(self):
        return tensor_mean(self)

    def __add__(self, other):
        if isinstance(other, Tensor):
            return add(self, other)
        return add_scalar(self, float(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Tensor):
            return sub(self, other)
        return add_scalar(self, -float(other))

    def __rsub__(self, other):
        return add_scalar(mul_scalar(self, -1.0), float(other))

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return mul_scalar(self, float(other))

    __rmul__ = __mul__

    def __neg__(self):
        return mul_scalar(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data):
    """A leaf tensor that participates in gradient descent."""
    return Tensor(data, requires_grad=True)


class _Node:
    __slots__ = ("out", "inputs", "backward", "op")

    def __init__(self, out, inputs, backward, op):
        self.out = out
        self.inputs = inputs
        self.backward = backward
        self.op = op


_STACK = threading.local()


def _graph_stack():
    stack = getattr(_STACK, "stack", None)
    if stack is None:
        stack = []
        _STACK.stack = stack
    return stack


def active_graph():
    stack = _graph_stack()
    return stack[-1] if stack else None


class Graph:
    """Tape of recorded operations, replayed in reverse by backward()."""

    def __init__(self):
        self.nodes = []

    def __enter__(self):
        _graph_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _graph_stack().pop()
        return False

    def _record(self, out, inputs, backward_fn, op):
        out.requires_grad = True
        out.node_id = len(self.nodes)
        out._graph = self
        self.nodes.append(_Node(out, inputs, backward_fn, op))


def _track(out, inputs, backward_fn, op):
    graph = active_graph()
    if graph is not None and any(t.requires_grad for t in inputs):
        graph._record(out, inputs, backward_fn, op)
    return out


def _accumulate(t, contribution):
    if t.grad is None:
        t.grad = np.array(contribution, dtype=np.float64)
    else:
        t.grad += contribution


def backward(loss):
    """Populate grads of every requires_grad tensor reachable from ``loss``.

    The loss must be a scalar recorded on the active graph. Repeated calls
    accumulate into leaf gradients (tape-node gradients are consumed and
    cleared as the tape unwinds).
    """
    graph = active_graph()
    if graph is None:
        raise GraphError("backward() requires an active Graph context")
    if loss._graph is not graph:
        raise GraphError("loss is not on the active graph")
    if loss.shape != ():
        raise GraphError(f"backward() requires a scalar loss, got shape {loss.shape}")
    loss.grad = np.ones((), dtype=np.float64)
    for node in reversed(graph.nodes[: loss.node_id + 1]):
        out_grad = node.out.grad
        if out_grad is None:
            continue
        node.backward(out_grad)
        node.out.grad = None


def _require_same_shape(a, b, op):
    if a.shape != b.shape:
        raise DimensionError(f"{op}: operand shapes {a.shape} and {b.shape} differ")


# ---------------------------------------------------------------------------
# elementwise and scalar ops


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _require_same_shape(a, b, "add")
    K = kernels.active
    out = Tensor(K.add(a.data.ravel(), b.data.ravel()).reshape(a.shape))

    def bw(g):
        if a.requires_grad:
            _accumulate(a, g)
        if b.requires_grad:
            _accumulate(b, g)

    return _track(out, (a, b), bw, "add")


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _require_same_shape(a, b, "sub")
    K = kernels.active
    out = Tensor(K.sub(a.data.ravel(), b.data.ravel()).reshape(a.shape))

    def bw(g):
        if a.requires_grad:
            _accumulate(a, g)
        if b.requires_grad:
            _accumulate(b, kernels.active.mul_scalar(g.ravel(), -1.0).reshape(g.shape))

    return _track(out, (a, b), bw, "sub")


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _require_same_shape(a, b, "mul")
    K = kernels.active
    out = Tensor(K.mul(a.data.ravel(), b.data.ravel()).reshape(a.shape))

    def bw(g):
        K = kernels.active
        if a.requires_grad:
            _accumulate(a, K.mul(g.ravel(), b.data.ravel()).reshape(g.shape))
        if b.requires_grad:
            _accumulate(b, K.mul(g.ravel(), a.data.ravel()).reshape(g.shape))

    return _track(out, (a, b), bw, "mul")


def add_scalar(a, c):
    a, c = as_tensor(a), float(c)
    out = Tensor(kernels.active.add_scalar(a.data.ravel(), c).reshape(a.shape))

    def bw(g):
        if a.requires_grad:
            _accumulate(a, g)

    return _track(out, (a,), bw, "add_scalar")


def mul_scalar(a, c):
    a, c = as_tensor(a), float(c)
    out = Tensor(kernels.active.mul_scalar(a.data.ravel(), c).reshape(a.shape))

    def bw(g):
        if a.requires_grad:
            _accumulate(a, kernels.active.mul_scalar(g.ravel(), c).reshape(g.shape))

    return _track(out, (a,), bw, "mul_scalar")


def relu(a):
    """Elementwise max(x, 0); the subgradient at 0 is taken as 0."""
    a = as_tensor(a)
    out = Tensor(kernels.active.relu(a.data.ravel()).reshape(a.shape))

    def bw(g):
        if a.requires_grad:
            _accumulate(a, kernels.active.relu_backward(g.ravel(), a.data.ravel()).reshape(g.shape))

    return _track(out, (a,), bw, "relu")


def exp(a):
    a = as_tensor(a)
    out = Tensor(kernels.active.exp(a.data.ravel()).reshape(a.shape))

    def bw(g):
        if a.requires_grad:
            _accumulate(a, kernels.active.mul(g.ravel(), out.data.ravel()).reshape(g.shape))

    return _track(out, (a,), bw, "exp")


def log(a):
    """Natural log; defined for positive entries."""
    a = as_tensor(a)
    out = Tensor(kernels.active.log(a.data.ravel()).reshape(a.shape))

    def bw(g):
        if a.requires_grad:
            _accumulate(a, kernels.active.log_backward(g.ravel(), a.data.ravel()).reshape(g.shape))

    return _track(out, (a,), bw, "log")


def clamp_min(a, c):
    """Elementwise max(x, c); gradient passes only where x > c."""
    a, c = as_tensor(a), float(c)
    out = Tensor(kernels.active.clamp_min(a.data.ravel(), c).reshape(a.shape))

    def bw(g):
        if a.requires_grad:
            _accumulate(
                a, kernels.active.clamp_min_backward(g.ravel(), a.data.ravel(), c).reshape(g.shape)
            )

    return _track(out, (a,), bw, "clamp_min")


# ---------------------------------------------------------------------------
# reductions


def tensor_sum(a):
    a = as_tensor(a)
    out = Tensor(kernels.active.total_sum(a.data.ravel()))

    def bw(g):
        if a.requires_grad:
            _accumulate(a, np.full(a.shape, float(g)))

    return _track(out, (a,), bw, "sum")


def tensor_mean(a):
    a = as_tensor(a)
    n = a.size
    out = Tensor(kernels.active.total_sum(a.data.ravel()) / n)

    def bw(g):
        if a.requires_grad:
            _accumulate(a, np.full(a.shape, float(g) / n))

    return _track(out, (a,), bw, "mean")


# ---------------------------------------------------------------------------
# matrix ops


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"matmul: expected 2-D operands, got shapes {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: inner dimensions disagree for shapes {a.shape} and {b.shape}")
    out = Tensor(kernels.active.matmul_nn(a.data, b.data))

    def bw(g):
        K = kernels.active
        if a.requires_grad:
            _accumulate(a, K.matmul_nt(g, b.data))
        if b.requires_grad:
            _accumulate(b, K.matmul_tn(a.data, g))

    return _track(out, (a, b), bw, "matmul")


def transpose(a):
    a = as_tensor(a)
    if a.ndim != 2:
        raise DimensionError(f"transpose: expected a 2-D operand, got shape {a.shape}")
    out = Tensor(kernels.active.transpose(a.data))

    def bw(g):
        if a.requires_grad:
            _accumulate(a, kernels.active.transpose(g))

    return _track(out, (a,), bw, "transpose")


def add_rowvec(a, v):
    """Add a length-n vector to every row of an (m, n) matrix (bias add)."""
    a, v = as_tensor(a), as_tensor(v)
    if a.ndim != 2 or v.ndim != 1 or a.shape[1] != v.shape[0]:
        raise DimensionError(f"add_rowvec: incompatible shapes {a.shape} and {v.shape}")
    out = Tensor(kernels.active.add_rowvec(a.data, v.data))

    def bw(g):
        if a.requires_grad:
            _accumulate(a, g)
        if v.requires_grad:
            _accumulate(v, kernels.active.col_sums(g))

    return _track(out, (a, v), bw, "add_rowvec")


def reshape(a, shape):
    a = as_tensor(a)
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape, dtype=np.int64)) != a.size:
        raise DimensionError(f"reshape: cannot view shape {a.shape} as {shape}")
    out = Tensor(a.data.reshape(shape))

    def bw(g):
        if a.requires_grad:
            _accumulate(a, g.reshape(a.shape))

    return _track(out, (a,), bw, "reshape")


# ---------------------------------------------------------------------------
# normalization and softmax


def softmax(a):
    """Stable softmax over the last axis of a 1-D or 2-D tensor."""
    a = as_tensor(a)
    if a.ndim not in (1, 2):
        raise DimensionError(f"softmax: expected a 1-D or 2-D operand, got shape {a.shape}")
    out = Tensor(kernels.active.softmax(a.data))

    def bw(g):
        if a.requires_grad:
            _accumulate(a, kernels.active.softmax_backward(g, out.data))

    return _track(out, (a,), bw, "softmax")


def l2_normalize(v):
    """Scale a 1-D vector to unit L2 norm; errors on near-zero input."""
    v = as_tensor(v)
    if v.ndim != 1:
        raise DimensionError(f"l2_normalize: expected a 1-D operand, got shape {v.shape}")
    normalized, norm = kernels.active.normalize(v.data)
    if norm < MIN_NORM:
        raise DegenerateVectorError(
            f"cannot normalize a vector with L2 norm {norm:.3e} (< {MIN_NORM:g})"
        )
    out = Tensor(normalized)

    def bw(g):
        if v.requires_grad:
            _accumulate(v, kernels.active.normalize_backward(g, out.data, norm))

    return _track(out, (v,), bw, "l2_normalize")


def normalize_rows(a):
    """L2-normalize every row of a 2-D tensor; errors on near-zero rows."""
    a = as_tensor(a)
    if a.ndim != 2:
        raise DimensionError(f"normalize_rows: expected a 2-D operand, got shape {a.shape}")
    normalized, norms = kernels.active.normalize(a.data)
    bad = norms < MIN_NORM
    if bad.any():
        row = int(np.argmax(bad))
        raise DegenerateVectorError(
            f"row {row} has L2 norm {norms[row]:.3e} (< {MIN_NORM:g})", index=row
        )
    out = Tensor(normalized)

    def bw(g):
        if a.requires_grad:
            _accumulate(a, kernels.active.normalize_backward(g, out.data, norms))

    return _track(out, (a,), bw, "normalize_rows")

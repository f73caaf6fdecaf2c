from . import tensor as ops
from .tensor import (
    AutodiffError,
    ShapeError,
    Tape,
    Tensor,
    add,
    backward,
    concat_cols,
    concat_rows,
    dropout,
    gather_rows,
    interleave_rows,
    log_softmax_rows,
    logsumexp,
    matmul,
    mul,
    neg,
    pick,
    pow_const,
    precision,
    relu,
    reshape,
    sigmoid,
    slice_cols,
    softmax_rows,
    sub,
    sum_axis,
    tanh,
    total,
    transpose,
    zeros,
)

# NB: the tensor-factory function stays at ops.tensor; re-exporting it here
# would shadow the submodule binding this package relies on.
from .nn import (
    LSTM,
    LSTMCell,
    LayerNorm,
    Linear,
    Module,
    MultiHeadAttention,
    PositionWiseFFN,
    glorot_uniform,
    lstm_sequence,
    scaled_dot_attention,
    sinusoidal_positions,
)
from .optim import Adam

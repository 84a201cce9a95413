"""From-scratch numerical kernel: dense layers, stacked LSTM, weighted
cross-entropy, Adam, truncated BPTT and finite-difference verification.
"""

from .adam import Adam, AdamState, adam_step, init_adam
from .feedforward import fnn_loss_and_grads, fnn_scores
from .gradcheck import (finite_diff_gradcheck, fnn_param_dict, gradcheck_fnn,
                        gradcheck_lstm, lstm_param_dict)
from .layers import (ACTIVATIONS, DenseParams, dense_apply, dense_forward,
                     dropout, dropout_mask, init_dense, relu, sigmoid)
from .loss import softmax, weighted_ce_batch, weighted_cross_entropy
from .lstm import (LstmCellParams, LstmState, backward_through_chunk,
                   init_lstm_cell, lstm_cell_step, stacked_forward,
                   stacked_lstm_forward, zero_state)
from .train import (TrainConfig, chunk_bounds, class_weights_from_labels,
                    fnn_train_epoch, tbptt_train_sequence)

__all__ = [
    "ACTIVATIONS", "Adam", "AdamState", "DenseParams", "LstmCellParams",
    "LstmState", "TrainConfig", "adam_step", "backward_through_chunk",
    "chunk_bounds", "class_weights_from_labels", "dense_apply",
    "dense_forward", "dropout", "dropout_mask", "finite_diff_gradcheck",
    "fnn_loss_and_grads", "fnn_param_dict", "fnn_scores", "fnn_train_epoch",
    "gradcheck_fnn", "gradcheck_lstm", "init_adam", "init_dense",
    "init_lstm_cell", "lstm_cell_step", "lstm_param_dict", "relu", "sigmoid",
    "softmax", "stacked_forward", "stacked_lstm_forward",
    "tbptt_train_sequence", "weighted_ce_batch", "weighted_cross_entropy",
    "zero_state",
]

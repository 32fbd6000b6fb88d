//! Parametric cells: LSTM, multi-modal LSTM, word embedding, softmax head and
//! dropout, each with a forward pass and a hand-derived backward pass.

mod layers;
mod lstm;

pub use layers::{
    dropout, dropout_backward, embed, embed_backward, output_backward, project_logits,
    project_softmax, EmbeddingParams, Mode, OutputParams,
};
pub use lstm::{
    lstm_backward, lstm_backward_with, lstm_forward, mlstm_backward, mlstm_backward_with,
    mlstm_forward, BackwardFault, CellCache, CellGrads, LstmParams, LstmState, MlstmParams,
    GATE_NAMES,
};
pub(crate) use lstm::fill_uniform;

/// Flat, named views of every tensor in a parameter container.
///
/// Both methods must yield tensors in the same order; optimizers, clipping,
/// checkpoints and the gradient check all rely on it.
pub trait ParamSet {
    fn named_tensors(&self) -> Vec<(String, &[f64])>;
    fn named_tensors_mut(&mut self) -> Vec<(String, &mut [f64])>;

    fn num_params(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }
}

pub(crate) fn named(kind: &str, gate: &str) -> String {
    format!("{kind}_{gate}")
}

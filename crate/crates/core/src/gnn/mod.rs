//! Heterogeneous SAGE-style message passing and an edge-decoder MLP for
//! drug–disease link prediction.

mod conv;
mod model;
mod train;

pub use conv::{mean_aggregate, sage_conv, sage_conv_backward, MessageGraph, SageConv, SageGrads};
pub use model::{decode_edges, edge_logits, hetero_forward, loss_and_grads, GnnModel, HeteroLayer};
pub use train::{evaluate_edges, predict_links, save_history_csv, train_gnn, EpochRecord, GnnRun, GnnTrainConfig};

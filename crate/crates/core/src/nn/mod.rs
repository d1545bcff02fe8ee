//! Graph network layers and the full two-person model.
//!
//! Every layer stores [`ParamId`](crate::autodiff::ParamId)s into a shared
//! [`ParamStore`] and runs its forward pass through a [`Ctx`], which bundles
//! the tape, the store and the train/eval switch. Batch-norm layers in
//! training mode queue their batch statistics on the context;
//! [`apply_stat_updates`] folds them into the running buffers after the step.

mod attention;
mod block;
mod check;
mod layers;
mod model;
mod sgc;
mod tcn;

pub use attention::{part_membership, StPartAtt};
pub use block::{Block, BlockSpec, TemporalKind};
pub use check::{check_component, GradComponent};
pub use layers::{BatchNorm, Conv, Linear, BN_EPS, BN_MOMENTUM};
pub use model::{count_params, AdjacencyInput, GeometricScope, Model, ModelConfig, ModelInput};
pub use sgc::{oracle_equivalence, random_graph, sgc_reference, stack_partition, SgcLayer};
pub use tcn::MsTcn;

use std::cell::RefCell;

use thiserror::Error;

use crate::autodiff::{BatchStats, BufferId, ParamId, ParamStore, Real, Tape, TensorError, Var};

#[derive(Debug, Error, PartialEq)]
pub enum NnError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("part map leaves vertex {0} unassigned or a part empty")]
    PartMapIncomplete(usize),
    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),
}

/// Forward-pass context.
pub struct Ctx<'a, T: Real> {
    pub tape: &'a Tape<T>,
    pub store: &'a ParamStore<T>,
    pub training: bool,
    stats: RefCell<Vec<StatUpdate<T>>>,
}

/// Batch statistics observed by one batch-norm layer during a training forward.
pub struct StatUpdate<T> {
    pub mean: BufferId,
    pub var: BufferId,
    pub stats: BatchStats<T>,
}

impl<'a, T: Real> Ctx<'a, T> {
    pub fn new(tape: &'a Tape<T>, store: &'a ParamStore<T>, training: bool) -> Self {
        Self {
            tape,
            store,
            training,
            stats: RefCell::new(Vec::new()),
        }
    }

    pub fn param(&self, id: ParamId) -> Var {
        self.tape.param(self.store, id)
    }

    pub(crate) fn record_stats(&self, mean: BufferId, var: BufferId, stats: BatchStats<T>) {
        self.stats.borrow_mut().push(StatUpdate { mean, var, stats });
    }

    pub fn into_stat_updates(self) -> Vec<StatUpdate<T>> {
        self.stats.into_inner()
    }
}

/// `running = (1 - m) * running + m * batch` with `m =` [`BN_MOMENTUM`].
pub fn apply_stat_updates<T: Real>(store: &mut ParamStore<T>, updates: Vec<StatUpdate<T>>) {
    let m = T::lit(BN_MOMENTUM);
    let keep = T::one() - m;
    for u in updates {
        for (buf, fresh) in [(u.mean, &u.stats.mean), (u.var, &u.stats.var)] {
            let mut value = store.buffer(buf).clone();
            for (r, &b) in value.data_mut().iter_mut().zip(fresh.iter()) {
                *r = keep * *r + m * b;
            }
            store.set_buffer(buf, value);
        }
    }
}

//! Label-free pretraining of both encoders and supervised fine-tuning of a
//! classifier head on the frozen representations.

pub mod backward;
pub mod finetune;
pub mod loss;
pub mod optim;
pub mod pretrain;

use ndarray::Array1;

pub use backward::{backward, forward, subject_loss, EncoderParams, ForwardCache, PreparedSubject};
pub use finetune::{finetune, stack_features, ClassifierHead, FinetuneConfig};
pub use loss::{
    consistency_loss, standardize_backward, standardize_columns, ActiveEncoders, LossConfig, LossTerms, Objective,
};
pub use optim::{optimizer_step, OptimConfig, OptimState};
pub use pretrain::{prepare_subjects, pretrain, pretrain_prepared, EpochRecord, PretrainConfig, PretrainOutput, TrainTrace};

use crate::encoders::{fuse, Domain, Representation};
use crate::error::Result;

/// The node embedding read out for classification: the fused representation
/// when both encoders are active, otherwise the active encoder's output.
pub fn readout(subject: &PreparedSubject, params: &EncoderParams, active: ActiveEncoders) -> Result<Representation> {
    let cache = forward(subject, params)?;
    let zt = Representation {
        z: cache.zt,
        domain: Domain::Time,
    };
    let zf = Representation {
        z: cache.zf,
        domain: Domain::Frequency,
    };
    Ok(match active {
        ActiveEncoders::Both => fuse(&zt, &zf)?,
        ActiveEncoders::TimeOnly => zt,
        ActiveEncoders::FreqOnly => zf,
    })
}

/// Mean-pooled readout for every subject, in order.
pub fn pooled_readouts(
    subjects: &[PreparedSubject],
    params: &EncoderParams,
    active: ActiveEncoders,
) -> Result<Vec<Array1<f64>>> {
    subjects
        .iter()
        .map(|s| readout(s, params, active).map(|r| r.mean_pool()))
        .collect()
}

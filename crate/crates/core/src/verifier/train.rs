use std::io::Write;
use std::path::Path;

use log::{debug, info};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::eval::metrics::{accuracy, average_precision, Scored, DEFAULT_THRESHOLD};
use crate::label::Label;
use crate::rng;
use crate::sequence::FeatureSequence;

use super::{
    init_params, predict, sgd_momentum_step, smoothed_cross_entropy, verifier_backward,
    verifier_forward, TrainConfig, VerifierConfig, VerifierParams,
};

/// A training or validation example.
#[derive(Debug, Clone)]
pub struct Example {
    pub seq: FeatureSequence,
    pub label: Label,
}

impl Example {
    pub fn new(seq: FeatureSequence, label: Label) -> Self {
        Example { seq, label }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_acc: f64,
    pub val_ap: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best validation accuracy.
    pub params: VerifierParams<f32>,
    pub curves: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
}

fn check_examples(set: &[Example], cfg: &VerifierConfig, what: &str) -> Result<()> {
    for ex in set {
        if ex.seq.len() != cfg.seq_len || ex.seq.dim() != cfg.width {
            return Err(Error::Dimension(format!(
                "{what} sequence '{}' is {}×{}, verifier expects {}×{}",
                ex.seq.video_id,
                ex.seq.len(),
                ex.seq.dim(),
                cfg.seq_len,
                cfg.width
            )));
        }
    }
    Ok(())
}

/// Scores a set of examples in eval mode.
pub fn score_examples(set: &[Example], params: &VerifierParams<f32>) -> Result<Vec<Scored>> {
    set.iter()
        .map(|ex| {
            Ok(Scored::new(
                predict(&ex.seq, params)? as f64,
                ex.label,
                ex.seq.video_id.clone(),
            ))
        })
        .collect()
}

/// Mini-batch momentum-SGD training with best-validation-accuracy selection
/// and early stopping. Single-threaded and bitwise deterministic for a fixed
/// `tcfg.seed`.
pub fn train_verifier(
    train: &[Example],
    val: &[Example],
    vcfg: &VerifierConfig,
    tcfg: &TrainConfig,
) -> Result<TrainOutcome> {
    vcfg.validate()?;
    tcfg.validate()?;
    check_examples(train, vcfg, "training")?;
    check_examples(val, vcfg, "validation")?;
    let has = |l: Label| train.iter().any(|e| e.label == l);
    if !(has(Label::Real) && has(Label::Generated)) {
        return Err(Error::Data("training set must contain both real and generated examples".into()));
    }
    if let Some(first) = train.first() {
        let id = &first.seq.encoder_id;
        if let Some(bad) = train.iter().chain(val).find(|e| &e.seq.encoder_id != id) {
            return Err(Error::Contract(format!(
                "mixed encoder ids in one run: '{id}' and '{}' (video '{}')",
                bad.seq.encoder_id, bad.seq.video_id
            )));
        }
    }

    let mut params = init_params(vcfg, tcfg.seed)?;
    let mut curves = Vec::new();
    if tcfg.max_epochs == 0 {
        return Ok(TrainOutcome { params, curves, best_epoch: None });
    }
    if val.is_empty() || !val.iter().any(|e| e.label.is_generated()) {
        return Err(Error::Data("validation set needs at least one generated example".into()));
    }

    let mut velocity = params.zeros_like();
    let mut best: Option<(f64, usize, VerifierParams<f32>)> = None;
    let mut stale = 0usize;
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 0..tcfg.max_epochs {
        let mut shuffle_rng = rng::rng(rng::derive(tcfg.seed, &[0x5eed, epoch as u64]));
        order.shuffle(&mut shuffle_rng);

        let mut loss_sum = 0.0f64;
        for (batch_idx, batch) in order.chunks(tcfg.batch_size).enumerate() {
            let mut grads = params.zeros_like();
            let mut batch_loss = 0.0f64;
            for &i in batch {
                let ex = &train[i];
                let dropout_seed = rng::derive(tcfg.seed, &[0xd0, epoch as u64, i as u64]);
                let trace = verifier_forward(&ex.seq, &params, true, dropout_seed)?;
                let (loss, dlogits) =
                    smoothed_cross_entropy(&trace.logits, ex.label, tcfg.label_smoothing)?;
                if !loss.is_finite() {
                    return Err(Error::Divergence { epoch, batch: batch_idx, loss: loss as f64 });
                }
                batch_loss += loss as f64;
                let g = verifier_backward(&trace, &dlogits, &params)?;
                for (acc, (_, gi)) in grads.tensors_mut().into_iter().zip(g.named()) {
                    crate::tensor::add_assign(acc.data_mut(), gi.data());
                }
            }
            let scale = 1.0f32 / batch.len() as f32;
            for t in grads.tensors_mut() {
                t.data_mut().iter_mut().for_each(|v| *v *= scale);
            }
            if !grads.is_finite() || !batch_loss.is_finite() {
                return Err(Error::Divergence { epoch, batch: batch_idx, loss: batch_loss });
            }
            sgd_momentum_step(&mut params, &grads, &mut velocity, tcfg.lr, tcfg.momentum).map_err(
                |_| Error::Divergence { epoch, batch: batch_idx, loss: batch_loss },
            )?;
            loss_sum += batch_loss;
        }

        let scored = score_examples(val, &params)?;
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            val_acc: accuracy(&scored, DEFAULT_THRESHOLD)?,
            val_ap: average_precision(&scored)?,
        };
        debug!(
            "epoch {epoch}: loss {:.6} val acc {:.4} ap {:.4}",
            record.train_loss, record.val_acc, record.val_ap
        );
        let improved = best.as_ref().is_none_or(|(acc, _, _)| record.val_acc > *acc);
        if improved {
            best = Some((record.val_acc, epoch, params.clone()));
            stale = 0;
        } else {
            stale += 1;
        }
        curves.push(record);
        if stale >= tcfg.early_stop_patience {
            info!("early stop after epoch {epoch}: {stale} epochs without improvement");
            break;
        }
    }

    let (_, best_epoch, best_params) = best.expect("at least one epoch ran");
    Ok(TrainOutcome { params: best_params, curves, best_epoch: Some(best_epoch) })
}

/// Writes `epoch,train_loss,val_acc,val_ap` rows.
pub fn write_curves_csv(curves: &[EpochRecord], path: &Path) -> Result<()> {
    let mut out = Vec::new();
    writeln!(out, "epoch,train_loss,val_acc,val_ap")?;
    for r in curves {
        writeln!(out, "{},{},{},{}", r.epoch, r.train_loss, r.val_acc, r.val_ap)?;
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::exec::Exec;
use crate::features::EncodedGraph;

use super::hyper::Hyperparams;
use super::network::{argmax, loss, Network};
use super::params::Params;
use super::{ModelError, TrainError};

/// An encoded graph with its class label.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub graph: EncodedGraph,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_loss: f64,
    /// Accuracy of the predictions made just before each update.
    pub train_accuracy: f64,
    pub validation_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept.
    pub best_epoch: Option<usize>,
    pub best_validation_accuracy: Option<f64>,
    pub stopped_early: bool,
}

impl TrainingLog {
    /// CSV with header `epoch,learning_rate,train_loss,train_accuracy,validation_accuracy`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,learning_rate,train_loss,train_accuracy,validation_accuracy\n");
        for r in &self.epochs {
            let val = r.validation_accuracy.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.epoch, r.learning_rate, r.train_loss, r.train_accuracy, val
            ));
        }
        out
    }
}

fn shuffle_seed(seed: u64) -> u64 {
    seed ^ 0x5348_5546_464c_4521
}

/// Fraction of `examples` whose argmax prediction equals the label.
pub fn evaluate_accuracy(net: &Network<'_>, examples: &[Example]) -> Result<f64, ModelError> {
    if examples.is_empty() {
        return Ok(0.0);
    }
    let hits = net
        .exec
        .map(examples, |ex| net.forward(&ex.graph).map(|p| argmax(&p) == ex.label))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .filter(|&h| h)
        .count();
    Ok(hits as f64 / examples.len() as f64)
}

/// Seeded SGD over shuffled epochs, keeping the parameters with the best
/// validation accuracy.
///
/// With `batch_size == 1` every example updates the parameters in turn.
/// Larger batches average per-example gradients, computed concurrently
/// under [`Exec::Parallel`] and summed in batch order.
pub fn train_params(
    params: &mut Params,
    hyper: &Hyperparams,
    train: &[Example],
    validation: &[Example],
    exec: Exec,
) -> Result<TrainingLog, TrainError> {
    hyper.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    if let Some(ex) = train.iter().chain(validation).find(|ex| ex.label >= hyper.classes) {
        return Err(TrainError::Model(ModelError::Config(format!(
            "label {} outside 0..{}",
            ex.label, hyper.classes
        ))));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed(hyper.seed));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = TrainingLog::default();
    let mut best: Option<(f64, Params)> = None;
    let mut since_best = 0usize;
    let mut grads = params.zeros_like();

    for epoch in 0..hyper.epochs {
        let lr = hyper.learning_rate_at(epoch);
        order.shuffle(&mut rng);
        let mut total_loss = 0.0;
        let mut hits = 0usize;

        for batch in order.chunks(hyper.batch_size) {
            let net = Network::new(params, hyper.aggregation).with_exec(exec);
            grads.fill_zero();
            if batch.len() == 1 {
                let ex = &train[batch[0]];
                let pass = net.forward_pass(&ex.graph)?;
                total_loss += loss(&pass.probs, ex.label);
                hits += usize::from(argmax(&pass.probs) == ex.label);
                let mut upstream = pass.probs.clone();
                upstream[ex.label] -= 1.0;
                net.accumulate_gradients(&ex.graph, &pass, &upstream, &mut grads);
            } else {
                let serial = Network { exec: Exec::Sequential, ..net };
                let per_example = exec.map(batch, |&i| {
                    let ex = &train[i];
                    let pass = serial.forward_pass(&ex.graph)?;
                    let l = loss(&pass.probs, ex.label);
                    let hit = argmax(&pass.probs) == ex.label;
                    Ok::<_, ModelError>((l, hit, serial.backward(&ex.graph, &pass, ex.label)))
                });
                let scale = 1.0 / batch.len() as f64;
                for result in per_example {
                    let (l, hit, g) = result?;
                    total_loss += l;
                    hits += usize::from(hit);
                    grads.add_scaled(scale, &g, true);
                }
            }
            if lr != 0.0 {
                params.add_scaled(-lr, &grads, hyper.train_embeddings);
            }
        }

        let train_loss = total_loss / train.len() as f64;
        if !train_loss.is_finite() || !params.is_finite() {
            return Err(TrainError::Diverged { epoch });
        }
        let net = Network::new(params, hyper.aggregation).with_exec(exec);
        let validation_accuracy = if validation.is_empty() {
            None
        } else {
            Some(evaluate_accuracy(&net, validation)?)
        };
        log.epochs.push(EpochRecord {
            epoch,
            learning_rate: lr,
            train_loss,
            train_accuracy: hits as f64 / train.len() as f64,
            validation_accuracy,
        });
        log::debug!(
            "epoch {epoch}: loss {train_loss:.5} train acc {:.4} val acc {:?}",
            hits as f64 / train.len() as f64,
            validation_accuracy
        );

        match validation_accuracy {
            None => log.best_epoch = Some(epoch),
            Some(acc) => {
                if best.as_ref().is_none_or(|(b, _)| acc > *b) {
                    best = Some((acc, params.clone()));
                    log.best_epoch = Some(epoch);
                    log.best_validation_accuracy = Some(acc);
                    since_best = 0;
                } else {
                    since_best += 1;
                    if hyper.patience > 0 && since_best >= hyper.patience {
                        log.stopped_early = true;
                        break;
                    }
                }
            }
        }
    }

    if let Some((_, kept)) = best {
        *params = kept;
    }
    Ok(log)
}

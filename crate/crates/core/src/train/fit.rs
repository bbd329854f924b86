use rand::seq::SliceRandom;
use rand::SeedableRng;

use super::{Sample, TrainError};
use crate::models::BuiltModel;
use crate::rng::{stable_hash, substream, substream_seed, Rng};
use crate::tensor::{Adam, ForwardCtx, Gradients, Graph};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: BuiltModel,
    pub adam: Adam<f32>,
    /// Mean training loss of each completed epoch.
    pub loss_history: Vec<f64>,
}

/// Minibatch Adam on cross-entropy for the epochs, batch size, patience and
/// optimizer settings of the model's config. Batches are reshuffled every
/// epoch from the `shuffle` substream of `seed`; dropout masks come from
/// the `dropout` substream, keyed by epoch and sample so they do not
/// depend on batch composition.
pub fn train(model: BuiltModel, samples: &[Sample<'_>], seed: u64) -> Result<TrainOutcome, TrainError> {
    let config = model.config().clone();
    let adam = Adam::new(config.adam, model.params());
    if config.epochs == 0 {
        return Ok(TrainOutcome { model, adam, loss_history: Vec::new() });
    }
    if samples.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    let mut model = model;
    let mut adam = adam;
    let mut shuffle = substream(seed, "shuffle");
    let dropout_seed = substream_seed(seed, "dropout");
    let mut grads = Gradients::zeros_like(model.params());
    let mut history = Vec::with_capacity(config.epochs);
    let mut best = f64::INFINITY;
    let mut stale = 0;
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            grads.zero();
            let scale = 1.0 / batch.len() as f32;
            for &i in batch {
                let s = &samples[i];
                let mut rng = Rng::seed_from_u64(stable_hash(&[
                    &dropout_seed.to_le_bytes(),
                    &(epoch as u64).to_le_bytes(),
                    &(i as u64).to_le_bytes(),
                ]));
                let mut g = Graph::new(model.params());
                let loss = model.loss(&mut g, &s.input(), s.label, &mut ForwardCtx::train(&mut rng))?;
                total += f64::from(g.value(loss).data()[0]);
                g.backward(loss, &mut grads, scale)?;
            }
            adam.step(model.params_mut(), &grads)?;
        }
        let mean = total / samples.len() as f64;
        history.push(mean);
        if let Some(patience) = config.patience {
            if mean < best {
                best = mean;
                stale = 0;
            } else {
                stale += 1;
                if stale >= patience {
                    break;
                }
            }
        }
    }
    Ok(TrainOutcome { model, adam, loss_history: history })
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Predicted class of every sample, in order.
pub fn predict_classes(model: &BuiltModel, samples: &[Sample<'_>]) -> Result<Vec<usize>, TrainError> {
    samples.iter().map(|s| Ok(argmax(&model.predict(&s.input())?))).collect()
}

/// Fraction of samples whose argmax matches the label.
pub fn evaluate(model: &BuiltModel, samples: &[Sample<'_>]) -> Result<f64, TrainError> {
    if samples.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    let predicted = predict_classes(model, samples)?;
    Ok(accuracy(&predicted, samples.iter().map(|s| s.label)))
}

pub fn accuracy(predicted: &[usize], labels: impl IntoIterator<Item = usize>) -> f64 {
    let correct = predicted.iter().zip(labels).filter(|(p, l)| **p == *l).count();
    correct as f64 / predicted.len().max(1) as f64
}

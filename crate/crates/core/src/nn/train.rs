use super::adam::{AdamConfig, AdamState};
use super::models::{mse, predict_chunked, Trainable};
use crate::error::{Error, Result};
use crate::rng::SimRng;
use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
}

/// One row of the training log. Epoch 0 is the untrained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<M> {
    pub final_model: M,
    /// Weights with the lowest validation loss.
    pub best_model: M,
    pub best_epoch: usize,
    pub log: Vec<EpochLog>,
}

const EVAL_CHUNK: usize = 2048;

pub fn evaluate<M: Trainable>(model: &M, x: ArrayView2<f64>, y: ArrayView2<f64>) -> f64 {
    mse(&predict_chunked(model, x, EVAL_CHUNK), y)
}

fn check_shapes<M: Trainable>(model: &M, x: ArrayView2<f64>, y: ArrayView2<f64>, what: &str) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    if x.ncols() != model.input_len() || y.ncols() != model.output_len() || x.nrows() != y.nrows() {
        return Err(Error::Shape {
            what: format!("{} {what} set", model.name()),
            expected: vec![x.nrows(), model.input_len(), model.output_len()],
            found: vec![y.nrows(), x.ncols(), y.ncols()],
        });
    }
    Ok(())
}

/// Mini-batch Adam on the MSE loss with per-epoch shuffling.
pub fn train<M: Trainable>(
    model: M,
    train: (ArrayView2<f64>, ArrayView2<f64>),
    val: (ArrayView2<f64>, ArrayView2<f64>),
    cfg: &TrainConfig,
    rng: &mut SimRng,
) -> Result<TrainOutcome<M>> {
    check_shapes(&model, train.0, train.1, "training")?;
    check_shapes(&model, val.0, val.1, "validation")?;
    let start = Instant::now();
    let mut model = model;
    let sizes: Vec<usize> = model.params().iter().map(|p| p.len()).collect();
    let mut adam = AdamState::new(cfg.adam, &sizes);
    let mut log = vec![EpochLog {
        epoch: 0,
        train_mse: evaluate(&model, train.0, train.1),
        val_mse: evaluate(&model, val.0, val.1),
        wall_seconds: start.elapsed().as_secs_f64(),
    }];
    let mut best = (log[0].val_mse, 0usize, model.clone());
    let mut order: Vec<usize> = (0..train.0.nrows()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(rng);
        let mut total = 0.0;
        for (bi, idx) in order.chunks(cfg.batch_size.max(1)).enumerate() {
            let xb = train.0.select(Axis(0), idx);
            let yb = train.1.select(Axis(0), idx);
            let (loss, grads) = model.loss_grad(xb.view(), yb.view());
            if !loss.is_finite() || grads.iter().flatten().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss { network: model.name().into(), epoch, batch: bi });
            }
            total += loss * idx.len() as f64;
            adam.update(model.params_mut(), &grads);
        }
        let val_mse = evaluate(&model, val.0, val.1);
        if !val_mse.is_finite() {
            return Err(Error::NonFiniteLoss { network: model.name().into(), epoch, batch: usize::MAX });
        }
        log.push(EpochLog {
            epoch,
            train_mse: total / order.len() as f64,
            val_mse,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
        if val_mse < best.0 {
            best = (val_mse, epoch, model.clone());
        }
    }
    Ok(TrainOutcome { final_model: model, best_model: best.2, best_epoch: best.1, log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::models::{Mlp, SenNet};
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};

    fn cfg(epochs: usize) -> TrainConfig {
        TrainConfig { epochs, batch_size: 128, adam: AdamConfig::default() }
    }

    #[test]
    fn memorizes_single_sample() {
        let mut rng = SimRng::seed_from_u64(1);
        let net = Mlp::aidnet(4, &mut rng);
        let x = Array2::from_shape_simple_fn((1, 8), || rng.random_range(-1.0..1.0));
        let y = Array2::from_shape_simple_fn((1, 8), || rng.random_range(-1.0..1.0));
        let out = train(net, (x.view(), y.view()), (x.view(), y.view()), &cfg(3000), &mut rng).unwrap();
        assert!(evaluate(&out.final_model, x.view(), y.view()) < 1e-6);
        assert!(out.log.last().unwrap().val_mse < out.log[0].val_mse);
        assert_eq!(out.log.len(), 3001);
    }

    #[test]
    fn empty_and_mismatched_sets_are_rejected() {
        let mut rng = SimRng::seed_from_u64(2);
        let net = Mlp::aidnet(2, &mut rng);
        let e = Array2::<f64>::zeros((0, 4));
        assert!(matches!(
            train(net.clone(), (e.view(), e.view()), (e.view(), e.view()), &cfg(1), &mut rng),
            Err(Error::EmptyDataset)
        ));
        let x = Array2::<f64>::zeros((3, 5));
        assert!(matches!(
            train(net, (x.view(), x.view()), (x.view(), x.view()), &cfg(1), &mut rng),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn nan_loss_aborts() {
        let mut rng = SimRng::seed_from_u64(3);
        let net = Mlp::aidnet(2, &mut rng);
        let mut x = Array2::<f64>::zeros((4, 4));
        x[[2, 1]] = f64::NAN;
        let y = Array2::<f64>::zeros((4, 4));
        let err = train(net, (x.view(), y.view()), (y.view(), y.view()), &cfg(2), &mut rng).unwrap_err();
        assert!(matches!(err, Error::NonFiniteLoss { epoch: 1, .. }), "{err}");
    }

    #[test]
    fn training_is_deterministic() {
        let run = || {
            let mut rng = SimRng::seed_from_u64(4);
            let net = SenNet::init(3, 6, &mut rng).unwrap();
            let x = Array2::from_shape_simple_fn((50, 36), || rng.random_range(-1.0..1.0));
            let y = Array2::from_shape_fn((50, 1), |(i, _)| (i % 2) as f64);
            train(net, (x.view(), y.view()), (x.view(), y.view()), &cfg(3), &mut rng).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.final_model, b.final_model);
        assert_eq!(a.best_epoch, b.best_epoch);
    }
}

//! Attention-based multiple-instance learning.

mod io;
mod model;
mod train;

use ndarray::Array1;

pub use io::{decode_model, encode_model, read_model, write_model, PFM_MAGIC, PFM_VERSION};
pub use model::{
    compute_loss, output_dim, AttentionRecord, Forward, Gradients, LossTarget, MilModel, TaskOutput, DEFAULT_DROPOUT,
    DEFAULT_HIDDEN,
};
pub use train::{
    mean_loss, numeric_gradient, predict_set, survival_bin_edges, train, EarlyStopping, StopReason, TrainConfig,
    TrainReport,
};

use crate::data::FeatureBag;
use crate::error::{Error, Result};

/// `z = sum_i a_i h_i`.
pub fn aggregate(bag: &FeatureBag, a: &[f64]) -> Result<Array1<f64>> {
    if a.len() != bag.n_patches() {
        return Err(Error::DimMismatch { expected: bag.n_patches(), got: a.len() });
    }
    let mut z = Array1::zeros(bag.dim());
    for (row, &w) in bag.features.rows().into_iter().zip(a) {
        z.zip_mut_with(&row, |acc, &h| *acc += w * f64::from(h));
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::TaskKind;
    use crate::rng::CounterRng;
    use ndarray::Array2;
    use proptest::prelude::*;

    fn random_bag(seed: u64, n: usize, d: usize, scale: f64) -> FeatureBag {
        let mut rng = CounterRng::new(seed, 77);
        FeatureBag::new("r", Array2::from_shape_fn((n, d), |_| (scale * rng.normal()) as f32)).unwrap()
    }

    #[test]
    fn aggregate_examples() {
        let b = random_bag(1, 3, 4, 1.0);
        let z = aggregate(&b, &[0.0, 1.0, 0.0]).unwrap();
        for j in 0..4 {
            assert_eq!(z[j], b.features[[1, j]] as f64);
        }
        let h = Array2::from_shape_vec((2, 2), vec![0.5f32, -2.0, -0.5, 2.0]).unwrap();
        let z = aggregate(&FeatureBag::new("s", h).unwrap(), &[0.5, 0.5]).unwrap();
        assert_eq!(z.to_vec(), vec![0.0, 0.0]);
        assert!(aggregate(&b, &[1.0]).is_err());

        let a = [0.2, 0.3, 0.5];
        let z = aggregate(&b, &a).unwrap();
        for j in 0..4 {
            let brute: f64 = (0..3).map(|i| a[i] * b.features[[i, j]] as f64).sum();
            assert!((z[j] - brute).abs() < 1e-12);
        }
    }

    fn max_rel_err(a: &Gradients, n: &Gradients) -> f64 {
        let pairs = a
            .attn_v
            .iter()
            .zip(n.attn_v.iter())
            .chain(a.attn_w.iter().zip(n.attn_w.iter()))
            .chain(a.head_w.iter().zip(n.head_w.iter()))
            .chain(a.head_b.iter().zip(n.head_b.iter()));
        pairs.map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-6)).fold(0.0, f64::max)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let tasks = [TaskKind::Binary, TaskKind::Multiclass { classes: 3 }, TaskKind::Survival { bins: 4 }];
        for inst in 0..24u64 {
            let task = tasks[inst as usize % 3];
            let model = MilModel::new(task, 5, 4, 100 + inst).unwrap();
            let bag = random_bag(inst, 2 + inst as usize % 4, 5, 1.0);
            let target = match task {
                TaskKind::Survival { .. } => LossTarget::Survival { bin: inst as usize % 4, event: inst % 2 == 0 },
                TaskKind::Binary => LossTarget::Class(inst as usize % 2),
                TaskKind::Multiclass { .. } => LossTarget::Class(inst as usize % 3),
            };
            let (_, analytic) = model.backward(&bag, target, None).unwrap();
            let numeric = numeric_gradient(&model, &bag, target, 1e-5).unwrap();
            let err = max_rel_err(&analytic, &numeric);
            assert!(err < 1e-5, "instance {inst}: relative error {err}");
        }
    }

    #[test]
    fn gradient_with_dropout_mask_matches_scaled_forward() {
        let model = MilModel::new(TaskKind::Binary, 4, 3, 5).unwrap();
        let bag = random_bag(9, 3, 4, 1.0);
        let mask = Array1::from(vec![0.0, 1.0 / 0.75, 1.0 / 0.75, 0.0]);
        let (_, g) = model.backward(&bag, LossTarget::Class(1), Some(mask)).unwrap();
        assert_eq!(g.head_w[[0, 0]], 0.0);
        assert_eq!(g.head_w[[0, 3]], 0.0);
    }

    proptest! {
        #[test]
        fn attention_sums_to_one(seed in 0u64..1000, n in 1usize..30, scale in 0.01f64..20.0) {
            let model = MilModel::new(TaskKind::Binary, 6, 5, seed).unwrap();
            let a = model.attention_weights(&random_bag(seed, n, 6, scale)).unwrap();
            prop_assert!((a.sum() - 1.0).abs() < 1e-12);
            prop_assert!(a.iter().all(|&v| v > 0.0));
        }

        #[test]
        fn attention_shift_invariance(seed in 0u64..1000, n in 1usize..20, shift in -50.0f64..50.0) {
            let model = MilModel::new(TaskKind::Binary, 4, 3, seed).unwrap();
            let s = model.attention_scores(&random_bag(seed, n, 4, 1.0)).unwrap();
            let softmax = |x: &[f64]| {
                let m = x.iter().cloned().fold(f64::MIN, f64::max);
                let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
                let t: f64 = e.iter().sum();
                e.into_iter().map(|v| v / t).collect::<Vec<_>>()
            };
            let a = softmax(s.as_slice().unwrap());
            let shifted: Vec<f64> = s.iter().map(|v| v + shift).collect();
            let b = softmax(&shifted);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn survival_is_non_increasing(seed in 0u64..1000, n in 1usize..10, bins in 2usize..8) {
            let mut model = MilModel::new(TaskKind::Survival { bins }, 4, 3, seed).unwrap();
            let mut rng = CounterRng::new(seed, 5);
            model.head_b.mapv_inplace(|_| 4.0 * rng.normal());
            let out = model.predict(&random_bag(seed, n, 4, 3.0), false, None).unwrap();
            let s = out.scores();
            prop_assert!(s.windows(2).all(|w| w[0] >= w[1]));
            prop_assert!(s.iter().all(|v| (0.0..=1.0).contains(v)));
        }

        #[test]
        fn patch_permutation_invariance(seed in 0u64..1000, n in 2usize..12) {
            let model = MilModel::new(TaskKind::Multiclass { classes: 3 }, 5, 4, seed).unwrap();
            let bag = random_bag(seed, n, 5, 1.0);
            let mut perm: Vec<usize> = (0..n).collect();
            CounterRng::new(seed, 9).shuffle(&mut perm);
            let permuted = FeatureBag::new("p", bag.features.select(ndarray::Axis(0), &perm)).unwrap();
            let a = model.attention_weights(&bag).unwrap();
            let ap = model.attention_weights(&permuted).unwrap();
            for (k, &i) in perm.iter().enumerate() {
                prop_assert!((ap[k] - a[i]).abs() < 1e-10);
            }
            let z = aggregate(&bag, a.as_slice().unwrap()).unwrap();
            let zp = aggregate(&permuted, ap.as_slice().unwrap()).unwrap();
            prop_assert!(z.iter().zip(zp.iter()).all(|(x, y)| (x - y).abs() < 1e-10));
            let p = model.predict(&bag, false, None).unwrap();
            let pp = model.predict(&permuted, false, None).unwrap();
            prop_assert!(p.scores().iter().zip(pp.scores()).all(|(x, y)| (x - y).abs() < 1e-10));
            let l = compute_loss(&p, LossTarget::Class(1)).unwrap();
            let lp = compute_loss(&pp, LossTarget::Class(1)).unwrap();
            prop_assert!((l - lp).abs() < 1e-10);
        }
    }
}

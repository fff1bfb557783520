//! Per-feature standardization and input-tensor shaping.
//!
//! Standardization maps each feature to `z = (x - mean) / std`, with the
//! statistics fitted on the training split only. `ScalerParams` is
//! immutable after the fit and travels inside the model file, so
//! inference never needs the training data (and can never re-fit).

use serde::{Deserialize, Serialize};

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::nn::scalar::Scalar;
use crate::nn::tensor::Mat;

/// Standard deviations below this are treated as zero-variance and
/// replaced by 1.0, so constant features standardize to 0 instead of NaN.
pub const STD_EPSILON: f64 = 1e-12;

/// Per-feature mean and standard deviation fitted on training data.
///
/// `std` is the population standard deviation (divide by N), guarded so
/// every entry is strictly positive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ScalerParams {
    pub fn num_features(&self) -> usize {
        self.mean.len()
    }

    /// Identity scaler (mean 0, std 1) for synthetic or pre-scaled data.
    pub fn identity(num_features: usize) -> Self {
        ScalerParams {
            mean: vec![0.0; num_features],
            std: vec![1.0; num_features],
        }
    }
}

/// Fit mean and population standard deviation per feature over the
/// training samples. Features with variance below [`STD_EPSILON`] get
/// their std replaced by 1.0.
pub fn fit_scaler(train: &[Sample]) -> Result<ScalerParams> {
    let first = train
        .first()
        .ok_or_else(|| Error::Config("cannot fit scaler on an empty training set".into()))?;
    let dim = first.features.len();
    let n = train.len() as f64;

    let mut mean = vec![0.0f64; dim];
    for s in train {
        if s.features.len() != dim {
            return Err(Error::Shape(format!(
                "sample has {} features, expected {dim}",
                s.features.len()
            )));
        }
        for (m, &x) in mean.iter_mut().zip(&s.features) {
            *m += x as f64;
        }
    }
    for m in &mut mean {
        *m /= n;
    }

    let mut var = vec![0.0f64; dim];
    for s in train {
        for ((v, &m), &x) in var.iter_mut().zip(&mean).zip(&s.features) {
            let d = x as f64 - m;
            *v += d * d;
        }
    }
    let std = var
        .iter()
        .map(|&v| {
            let s = (v / n).sqrt();
            if s < STD_EPSILON {
                1.0
            } else {
                s
            }
        })
        .collect();

    Ok(ScalerParams { mean, std })
}

/// Standardize one feature vector: `z[j] = (x[j] - mean[j]) / std[j]`.
pub fn transform(scaler: &ScalerParams, features: &[f32]) -> Result<Vec<f64>> {
    if features.len() != scaler.num_features() {
        return Err(Error::Shape(format!(
            "sample has {} features, scaler was fitted on {}",
            features.len(),
            scaler.num_features()
        )));
    }
    Ok(features
        .iter()
        .zip(scaler.mean.iter().zip(&scaler.std))
        .map(|(&x, (&m, &s))| (x as f64 - m) / s)
        .collect())
}

/// Shape a standardized feature vector into the model input tensor of
/// shape `(len, 1)`: one channel, feature order preserved.
pub fn to_input_tensor<T: Scalar>(standardized: &[f64]) -> Mat<T> {
    let mut t = Mat::zeros(standardized.len(), 1);
    for (i, &z) in standardized.iter().enumerate() {
        t[(i, 0)] = T::from_f64(z);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(features: Vec<f32>) -> Sample {
        Sample { features, label: 0 }
    }

    #[test]
    fn fit_matches_hand_oracle() {
        // column [1, 2, 3]: mean 2, population std sqrt(2/3)
        let train = vec![sample(vec![1.0]), sample(vec![2.0]), sample(vec![3.0])];
        let sc = fit_scaler(&train).unwrap();
        assert!((sc.mean[0] - 2.0).abs() < 1e-15);
        assert!((sc.std[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((sc.std[0] - 0.816497).abs() < 1e-6);
    }

    #[test]
    fn constant_feature_guarded() {
        let train = vec![sample(vec![5.0]), sample(vec![5.0]), sample(vec![5.0])];
        let sc = fit_scaler(&train).unwrap();
        assert_eq!(sc.mean[0], 5.0);
        assert_eq!(sc.std[0], 1.0);
        assert_eq!(transform(&sc, &[5.0]).unwrap()[0], 0.0);
    }

    #[test]
    fn single_sample_guards_all() {
        let train = vec![sample(vec![3.0, -1.0])];
        let sc = fit_scaler(&train).unwrap();
        assert_eq!(sc.mean, vec![3.0, -1.0]);
        assert_eq!(sc.std, vec![1.0, 1.0]);
    }

    #[test]
    fn empty_train_rejected() {
        assert!(fit_scaler(&[]).is_err());
    }

    #[test]
    fn transform_at_mean_is_zero() {
        let sc = ScalerParams {
            mean: vec![1.0, -2.0, 7.5],
            std: vec![0.5, 3.0, 1.0],
        };
        let z = transform(&sc, &[1.0, -2.0, 7.5]).unwrap();
        assert_eq!(z, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn three_sigma_maps_to_three() {
        let sc = ScalerParams {
            mean: vec![10.0],
            std: vec![2.5],
        };
        let z = transform(&sc, &[10.0 + 3.0 * 2.5]).unwrap();
        assert!((z[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_arithmetic_case() {
        let sc = ScalerParams {
            mean: vec![2.0],
            std: vec![(2.0f64 / 3.0).sqrt()],
        };
        let z = transform(&sc, &[1.0]).unwrap();
        assert!((z[0] - (-1.224745)).abs() < 1e-6);
    }

    #[test]
    fn length_mismatch_rejected() {
        let sc = ScalerParams::identity(3);
        assert!(transform(&sc, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn standardized_train_has_zero_mean_unit_std() {
        let mut rng = crate::rng::SplitMix64::new(77);
        let dim = 9;
        let train: Vec<Sample> = (0..400)
            .map(|_| {
                sample(
                    (0..dim)
                        .map(|j| (rng.uniform(-3.0, 3.0) * (j as f64 + 1.0)) as f32)
                        .collect(),
                )
            })
            .collect();
        let sc = fit_scaler(&train).unwrap();
        let zs: Vec<Vec<f64>> = train
            .iter()
            .map(|s| transform(&sc, &s.features).unwrap())
            .collect();
        for j in 0..dim {
            let n = zs.len() as f64;
            let mean: f64 = zs.iter().map(|z| z[j]).sum::<f64>() / n;
            let var: f64 = zs.iter().map(|z| (z[j] - mean).powi(2)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-9, "feature {j} mean {mean}");
            assert!((var.sqrt() - 1.0).abs() < 1e-9, "feature {j} std {}", var.sqrt());
        }
    }

    #[test]
    fn transform_is_affine() {
        let sc = ScalerParams {
            mean: vec![1.0, 2.0],
            std: vec![0.5, 4.0],
        };
        let x = [3.0f32, -1.0];
        let y = [0.25f32, 9.0];
        let a = 0.3f64;
        let zx = transform(&sc, &x).unwrap();
        let zy = transform(&sc, &y).unwrap();
        let blend: Vec<f32> = x
            .iter()
            .zip(&y)
            .map(|(&xi, &yi)| (a * xi as f64 + (1.0 - a) * yi as f64) as f32)
            .collect();
        let zb = transform(&sc, &blend).unwrap();
        for i in 0..2 {
            let expect = a * zx[i] + (1.0 - a) * zy[i];
            assert!((zb[i] - expect).abs() < 1e-6);
        }
    }

    #[test]
    fn input_tensor_layout() {
        let z = vec![0.5, -1.0, 2.0];
        let t = to_input_tensor::<f64>(&z);
        assert_eq!(t.rows(), 3);
        assert_eq!(t.cols(), 1);
        for (i, &v) in z.iter().enumerate() {
            assert_eq!(t[(i, 0)], v);
        }
        // flatten round-trip: row-major data of an (n, 1) tensor is the vector
        assert_eq!(t.data(), z.as_slice());
    }
}

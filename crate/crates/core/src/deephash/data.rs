//! Synthetic clustered toy data: one Gaussian cluster per class in each
//! modality space, seed-pinned so training runs are reproducible.

use super::DeepHashError;
use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

#[derive(Debug, Clone)]
pub struct ToyDataset {
    /// One row per sample.
    pub face: Array2<f64>,
    pub iris: Array2<f64>,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl ToyDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Class centers are unit Gaussians; samples scatter around them with
/// the given spread. Small spreads give linearly separable clusters.
pub fn toy_dataset(
    classes: usize,
    per_class: usize,
    d_face: usize,
    d_iris: usize,
    spread: f64,
    seed: u64,
) -> Result<ToyDataset, DeepHashError> {
    if classes < 2 || per_class == 0 || d_face == 0 || d_iris == 0 {
        return Err(DeepHashError::Config(format!(
            "degenerate dataset request: {classes} classes x {per_class}, dims ({d_face}, {d_iris})"
        )));
    }
    if !(spread >= 0.0) || !spread.is_finite() {
        return Err(DeepHashError::Config(format!("bad spread {spread}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("valid sigma");
    let noise = Normal::new(0.0, spread).expect("spread validated above");
    let face_centers = Array2::from_shape_fn((classes, d_face), |_| unit.sample(&mut rng));
    let iris_centers = Array2::from_shape_fn((classes, d_iris), |_| unit.sample(&mut rng));

    let total = classes * per_class;
    let mut face = Array2::zeros((total, d_face));
    let mut iris = Array2::zeros((total, d_iris));
    let mut labels = Vec::with_capacity(total);
    for class in 0..classes {
        for s in 0..per_class {
            let row = class * per_class + s;
            for d in 0..d_face {
                face[(row, d)] = face_centers[(class, d)] + noise.sample(&mut rng);
            }
            for d in 0..d_iris {
                iris[(row, d)] = iris_centers[(class, d)] + noise.sample(&mut rng);
            }
            labels.push(class);
        }
    }
    Ok(ToyDataset {
        face,
        iris,
        labels,
        classes,
    })
}

//! Desk-scale stand-in for the deep feature hashing network: two linear
//! modality encoders, a fusion stage (concatenation or outer product), a
//! tanh joint layer, a tanh hashing layer with a continuation bandwidth,
//! and a softmax classifier. The training objective combines
//! classification, binarization, and bit-balance terms; gradients are
//! analytic and checked against central finite differences.

pub mod data;
pub mod grid;
pub mod train;

pub use data::{toy_dataset, ToyDataset};
pub use grid::{default_candidates, grid_search, GridSearchResult};
pub use train::{history_to_csv, train_two_step, EpochRecord, TrainConfig, TrainReport};

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

#[derive(Debug, thiserror::Error)]
pub enum DeepHashError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("training diverged at step {step}, bandwidth {beta_bw}, epoch {epoch}")]
    Diverged { step: u8, beta_bw: f64, epoch: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionMode {
    /// Concatenate the two modality vectors.
    Fca,
    /// Flattened outer product, row-major over (face, iris).
    Bla,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetShape {
    pub d_in_face: usize,
    pub d_in_iris: usize,
    pub d_face: usize,
    pub d_iris: usize,
    pub d_joint: usize,
    pub hash_bits: usize,
    pub classes: usize,
    pub fusion: FusionMode,
}

impl NetShape {
    pub fn fused_len(&self) -> usize {
        match self.fusion {
            FusionMode::Fca => self.d_face + self.d_iris,
            FusionMode::Bla => self.d_face * self.d_iris,
        }
    }
}

/// Loss weights: alpha scales classification, beta the binarization
/// pull, gamma the bit balance; lambda is the classifier weight decay
/// inside the classification term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub lambda: f64,
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), DeepHashError> {
        let vals = [self.alpha, self.beta, self.gamma, self.lambda];
        if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(DeepHashError::Config(format!(
                "loss weights must be non-negative and finite, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// The toy network. The hashing bandwidth is named `beta_bw` to keep it
/// apart from the loss weight `beta`; the two share a symbol upstream
/// but nothing else.
#[derive(Debug, Clone)]
pub struct ToyNetwork {
    pub shape: NetShape,
    pub w_face: Array2<f64>,
    pub w_iris: Array2<f64>,
    pub w_joint: Array2<f64>,
    pub w_hash: Array2<f64>,
    pub w_class: Array2<f64>,
    pub beta_bw: f64,
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    // Fan-in scaling keeps tanh pre-activations in the responsive range.
    let normal = Normal::new(0.0, 1.0 / (cols as f64).sqrt()).expect("valid sigma");
    Array2::from_shape_fn((rows, cols), |_| normal.sample(rng))
}

impl ToyNetwork {
    pub fn init(shape: NetShape, seed: u64) -> Result<Self, DeepHashError> {
        for (name, dim) in [
            ("d_in_face", shape.d_in_face),
            ("d_in_iris", shape.d_in_iris),
            ("d_face", shape.d_face),
            ("d_iris", shape.d_iris),
            ("d_joint", shape.d_joint),
            ("hash_bits", shape.hash_bits),
            ("classes", shape.classes),
        ] {
            if dim == 0 {
                return Err(DeepHashError::Config(format!("{name} must be positive")));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(ToyNetwork {
            w_face: gaussian_matrix(&mut rng, shape.d_face, shape.d_in_face),
            w_iris: gaussian_matrix(&mut rng, shape.d_iris, shape.d_in_iris),
            w_joint: gaussian_matrix(&mut rng, shape.d_joint, shape.fused_len()),
            w_hash: gaussian_matrix(&mut rng, shape.hash_bits, shape.d_joint),
            w_class: gaussian_matrix(&mut rng, shape.classes, shape.hash_bits),
            beta_bw: 1.0,
            shape,
        })
    }

    pub fn forward(&self, face: ArrayView1<f64>, iris: ArrayView1<f64>) -> Result<Forward, DeepHashError> {
        if face.len() != self.shape.d_in_face || iris.len() != self.shape.d_in_iris {
            return Err(DeepHashError::Shape(format!(
                "inputs ({}, {}) do not match shape ({}, {})",
                face.len(),
                iris.len(),
                self.shape.d_in_face,
                self.shape.d_in_iris
            )));
        }
        let z_face = self.w_face.dot(&face);
        let z_iris = self.w_iris.dot(&iris);
        let fused = fuse(z_face.view(), z_iris.view(), self.shape.fusion);
        let u = self.w_joint.dot(&fused);
        let v = u.mapv(f64::tanh);
        let h = self.w_hash.dot(&v);
        let o = h.mapv(|x| (self.beta_bw * x).tanh());
        let logits = self.w_class.dot(&o);
        let p = softmax(logits.view());
        Ok(Forward {
            z_face,
            z_iris,
            fused,
            v,
            o,
            p,
        })
    }

    /// Hashing-layer activations for a whole dataset, one row per sample.
    pub fn hash_activations(&self, data: &ToyDataset) -> Result<Array2<f64>, DeepHashError> {
        let mut out = Array2::zeros((data.len(), self.shape.hash_bits));
        for (i, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
            let f = self.forward(data.face.row(i), data.iris.row(i))?;
            row.assign(&f.o);
        }
        Ok(out)
    }

    /// Binary readout: bit = 1 where the activation is non-negative
    /// (exact zeros land on +1; the tie has measure zero).
    pub fn codes(&self, data: &ToyDataset) -> Result<Vec<Vec<u8>>, DeepHashError> {
        let acts = self.hash_activations(data)?;
        Ok(acts
            .axis_iter(Axis(0))
            .map(|row| row.iter().map(|&a| u8::from(a >= 0.0)).collect())
            .collect())
    }
}

/// One sample's forward state, kept for the backward pass.
pub struct Forward {
    pub z_face: Array1<f64>,
    pub z_iris: Array1<f64>,
    pub fused: Array1<f64>,
    pub v: Array1<f64>,
    pub o: Array1<f64>,
    pub p: Array1<f64>,
}

pub fn fuse(face: ArrayView1<f64>, iris: ArrayView1<f64>, mode: FusionMode) -> Array1<f64> {
    match mode {
        FusionMode::Fca => {
            let mut out = Array1::zeros(face.len() + iris.len());
            out.slice_mut(ndarray::s![..face.len()]).assign(&face);
            out.slice_mut(ndarray::s![face.len()..]).assign(&iris);
            out
        }
        FusionMode::Bla => {
            let mut out = Array1::zeros(face.len() * iris.len());
            for (a, &fa) in face.iter().enumerate() {
                for (b, &ib) in iris.iter().enumerate() {
                    out[a * iris.len() + b] = fa * ib;
                }
            }
            out
        }
    }
}

fn softmax(logits: ArrayView1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let exp = logits.mapv(|v| (v - max).exp());
    let sum = exp.sum();
    exp / sum
}

/// Mean cross-entropy over the batch plus lambda times the squared
/// Frobenius norm of the classifier weights. Rows must already be valid
/// softmax outputs.
pub fn loss_classification(
    predictions: &Array2<f64>,
    labels: &[usize],
    classifier_weights: &Array2<f64>,
    lambda: f64,
) -> Result<f64, DeepHashError> {
    if predictions.nrows() != labels.len() {
        return Err(DeepHashError::Shape(format!(
            "{} prediction rows for {} labels",
            predictions.nrows(),
            labels.len()
        )));
    }
    if predictions.nrows() == 0 {
        return Err(DeepHashError::Shape("empty batch".into()));
    }
    let classes = predictions.ncols();
    let mut ce = 0.0;
    for (row, &label) in predictions.axis_iter(Axis(0)).zip(labels) {
        let sum: f64 = row.sum();
        if (sum - 1.0).abs() > 1e-6 || row.iter().any(|&p| p < 0.0) {
            return Err(DeepHashError::Contract(format!(
                "prediction row is not a distribution (sum {sum})"
            )));
        }
        if label >= classes {
            return Err(DeepHashError::Shape(format!(
                "label {label} out of range for {classes} classes"
            )));
        }
        ce -= row[label].max(f64::MIN_POSITIVE).ln();
    }
    let reg: f64 = classifier_weights.iter().map(|w| w * w).sum();
    Ok(ce / labels.len() as f64 + lambda * reg)
}

/// Binarization pull: -(1/hash_bits) * sum of squared activation norms.
/// Minimized when every activation sits at +-1.
pub fn loss_binarization(activations: &Array2<f64>) -> f64 {
    let j = activations.ncols() as f64;
    -activations.iter().map(|a| a * a).sum::<f64>() / j
}

/// Bit balance: sum over samples of the squared mean activation. Zero
/// when each vector splits evenly between the two signs.
pub fn loss_balance(activations: &Array2<f64>) -> f64 {
    activations
        .axis_iter(Axis(0))
        .map(|row| {
            let m = row.sum() / row.len() as f64;
            m * m
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct Gradients {
    pub w_face: Array2<f64>,
    pub w_iris: Array2<f64>,
    pub w_joint: Array2<f64>,
    pub w_hash: Array2<f64>,
    pub w_class: Array2<f64>,
}

impl Gradients {
    fn zeros(net: &ToyNetwork) -> Self {
        Gradients {
            w_face: Array2::zeros(net.w_face.raw_dim()),
            w_iris: Array2::zeros(net.w_iris.raw_dim()),
            w_joint: Array2::zeros(net.w_joint.raw_dim()),
            w_hash: Array2::zeros(net.w_hash.raw_dim()),
            w_class: Array2::zeros(net.w_class.raw_dim()),
        }
    }
}

fn outer(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Array2<f64> {
    let a2 = a.insert_axis(Axis(1));
    let b2 = b.insert_axis(Axis(0));
    a2.dot(&b2)
}

/// Loss value with its decomposition and the exact gradient of
/// alpha*E1 + beta*E2 + gamma*E3 with respect to every weight matrix.
pub fn total_loss(
    net: &ToyNetwork,
    data: &ToyDataset,
    weights: &LossWeights,
) -> Result<(LossBreakdown, Gradients), DeepHashError> {
    weights.validate()?;
    let b = data.len();
    if b == 0 {
        return Err(DeepHashError::Shape("empty batch".into()));
    }
    let j_dim = net.shape.hash_bits as f64;
    let mut grads = Gradients::zeros(net);
    let mut e1_ce = 0.0;
    let mut e2 = 0.0;
    let mut e3 = 0.0;

    for i in 0..b {
        let label = data.labels[i];
        if label >= net.shape.classes {
            return Err(DeepHashError::Shape(format!(
                "label {label} out of range for {} classes",
                net.shape.classes
            )));
        }
        let f = net.forward(data.face.row(i), data.iris.row(i))?;

        e1_ce -= f.p[label].max(f64::MIN_POSITIVE).ln();
        e2 -= f.o.iter().map(|a| a * a).sum::<f64>() / j_dim;
        let o_mean = f.o.sum() / j_dim;
        e3 += o_mean * o_mean;

        // d(alpha*E1)/dlogits for the softmax cross-entropy mean.
        let mut dlogits = f.p.clone() * (weights.alpha / b as f64);
        dlogits[label] -= weights.alpha / b as f64;
        grads.w_class += &outer(dlogits.view(), f.o.view());

        let mut d_o = net.w_class.t().dot(&dlogits);
        d_o += &f.o.mapv(|a| -2.0 * weights.beta * a / j_dim);
        let balance_pull = 2.0 * weights.gamma * o_mean / j_dim;
        d_o += balance_pull;

        // o = tanh(beta_bw * h)
        let d_h = &d_o * &f.o.mapv(|a| net.beta_bw * (1.0 - a * a));
        grads.w_hash += &outer(d_h.view(), f.v.view());

        let d_v = net.w_hash.t().dot(&d_h);
        let d_u = &d_v * &f.v.mapv(|a| 1.0 - a * a);
        grads.w_joint += &outer(d_u.view(), f.fused.view());

        let d_fused = net.w_joint.t().dot(&d_u);
        let (d_zf, d_zi) = match net.shape.fusion {
            FusionMode::Fca => {
                let d_zf = d_fused.slice(ndarray::s![..f.z_face.len()]).to_owned();
                let d_zi = d_fused.slice(ndarray::s![f.z_face.len()..]).to_owned();
                (d_zf, d_zi)
            }
            FusionMode::Bla => {
                let d_i = f.z_iris.len();
                let grid = d_fused
                    .into_shape_with_order((f.z_face.len(), d_i))
                    .expect("fused length is the product");
                let d_zf = grid.dot(&f.z_iris);
                let d_zi = grid.t().dot(&f.z_face);
                (d_zf, d_zi)
            }
        };
        grads.w_face += &outer(d_zf.view(), data.face.row(i));
        grads.w_iris += &outer(d_zi.view(), data.iris.row(i));
    }

    let reg: f64 = net.w_class.iter().map(|w| w * w).sum();
    let e1 = e1_ce / b as f64 + weights.lambda * reg;
    grads.w_class += &net.w_class.mapv(|w| 2.0 * weights.alpha * weights.lambda * w);

    let breakdown = LossBreakdown {
        e1,
        e2,
        e3,
        total: weights.alpha * e1 + weights.beta * e2 + weights.gamma * e3,
    };
    Ok((breakdown, grads))
}

/// Largest relative disagreement between the analytic gradient and a
/// central finite difference over every trainable parameter.
pub fn gradient_check(
    net: &ToyNetwork,
    data: &ToyDataset,
    weights: &LossWeights,
    h: f64,
) -> Result<f64, DeepHashError> {
    let (_, analytic) = total_loss(net, data, weights)?;
    let mut worst: f64 = 0.0;
    let fields: [(fn(&ToyNetwork) -> &Array2<f64>, fn(&mut ToyNetwork) -> &mut Array2<f64>, &Array2<f64>); 5] = [
        (|n| &n.w_face, |n| &mut n.w_face, &analytic.w_face),
        (|n| &n.w_iris, |n| &mut n.w_iris, &analytic.w_iris),
        (|n| &n.w_joint, |n| &mut n.w_joint, &analytic.w_joint),
        (|n| &n.w_hash, |n| &mut n.w_hash, &analytic.w_hash),
        (|n| &n.w_class, |n| &mut n.w_class, &analytic.w_class),
    ];
    for (getter, setter, grad) in fields {
        let dim = getter(net).raw_dim();
        for r in 0..dim[0] {
            for c in 0..dim[1] {
                let mut probe = net.clone();
                let original = getter(&probe)[(r, c)];
                setter(&mut probe)[(r, c)] = original + h;
                let plus = total_loss(&probe, data, weights)?.0.total;
                setter(&mut probe)[(r, c)] = original - h;
                let minus = total_loss(&probe, data, weights)?.0.total;
                let numeric = (plus - minus) / (2.0 * h);
                let a = grad[(r, c)];
                // Central differences carry cancellation noise of roughly
                // eps*|loss|/(2h) ~ 1e-9, so entries below the 1e-5 floor
                // are noise-dominated and only checked absolutely: with the
                // 1e-4 tolerance the floor admits exactly that noise level.
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-5);
                worst = worst.max(rel);
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn shape(fusion: FusionMode) -> NetShape {
        NetShape {
            d_in_face: 5,
            d_in_iris: 4,
            d_face: 6,
            d_iris: 3,
            d_joint: 7,
            hash_bits: 8,
            classes: 4,
            fusion,
        }
    }

    fn tiny_dataset(shape: &NetShape, samples: usize, seed: u64) -> ToyDataset {
        toy_dataset(
            shape.classes,
            samples.div_ceil(shape.classes),
            shape.d_in_face,
            shape.d_in_iris,
            0.3,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn fca_concatenates_verbatim() {
        let face = Array1::from_iter((0..8).map(|i| i as f64));
        let iris = Array1::from_iter((8..16).map(|i| i as f64));
        let fused = fuse(face.view(), iris.view(), FusionMode::Fca);
        assert_eq!(fused.len(), 16);
        assert_eq!(fused.to_vec(), (0..16).map(|i| i as f64).collect::<Vec<_>>());
    }

    #[test]
    fn bla_outer_product_dimensions_and_zeros() {
        let face = Array1::from_elem(64, 1.0);
        let iris = Array1::from_elem(64, 2.0);
        let fused = fuse(face.view(), iris.view(), FusionMode::Bla);
        assert_eq!(fused.len(), 4096);
        assert!(fused.iter().all(|&x| x == 2.0));
        let zero = Array1::zeros(64);
        let fused = fuse(face.view(), zero.view(), FusionMode::Bla);
        assert!(fused.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn bla_is_bilinear_in_each_argument() {
        let face = array![1.5, -2.0, 0.25];
        let iris = array![0.5, 3.0];
        // Power-of-two scalar keeps float scaling exact.
        let scaled = fuse(face.view(), (&iris * 2.0).view(), FusionMode::Bla);
        let base = fuse(face.view(), iris.view(), FusionMode::Bla);
        assert_eq!(scaled, &base * 2.0);
    }

    #[test]
    fn classification_loss_matches_hand_values() {
        let w = Array2::<f64>::zeros((2, 2));
        // Perfect one-hot predictions, no regularization.
        let perfect = array![[1.0, 0.0], [0.0, 1.0]];
        assert_eq!(loss_classification(&perfect, &[0, 1], &w, 0.0).unwrap(), 0.0);
        // Uniform over four classes.
        let uniform = Array2::from_elem((3, 4), 0.25);
        let w4 = Array2::<f64>::zeros((4, 4));
        let got = loss_classification(&uniform, &[0, 1, 2], &w4, 0.0).unwrap();
        assert!((got - 4f64.ln()).abs() < 1e-12);
        // Pure regularizer: single weight 2.0 at lambda 1.
        let w1 = array![[2.0]];
        let sure = array![[1.0]];
        assert_eq!(loss_classification(&sure, &[0], &w1, 1.0).unwrap(), 4.0);
    }

    #[test]
    fn classification_loss_rejects_non_distributions() {
        let w = Array2::<f64>::zeros((2, 2));
        let bad = array![[0.7, 0.7]];
        assert!(matches!(
            loss_classification(&bad, &[0], &w, 0.0),
            Err(DeepHashError::Contract(_))
        ));
        let ok = array![[0.5, 0.5]];
        assert!(loss_classification(&ok, &[2], &w, 0.0).is_err());
        assert!(loss_classification(&ok, &[0, 1], &w, 0.0).is_err());
    }

    #[test]
    fn binarization_loss_matches_hand_values() {
        let saturated = Array2::from_elem((5, 8), -1.0);
        assert_eq!(loss_binarization(&saturated), -5.0);
        let zeros = Array2::<f64>::zeros((5, 8));
        assert_eq!(loss_binarization(&zeros), 0.0);
        let single = array![[0.5, -0.5]];
        assert_eq!(loss_binarization(&single), -0.25);
    }

    #[test]
    fn balance_loss_matches_hand_values() {
        let balanced = array![[1.0, -1.0, 1.0, -1.0]];
        assert_eq!(loss_balance(&balanced), 0.0);
        let ones = Array2::from_elem((1, 6), 1.0);
        assert_eq!(loss_balance(&ones), 1.0);
        let mixed = array![[1.0, 0.0, -1.0, 1.0]];
        assert_eq!(loss_balance(&mixed), 0.0625);
    }

    #[test]
    fn total_recombines_components_exactly() {
        let net = ToyNetwork::init(shape(FusionMode::Fca), 70).unwrap();
        let data = tiny_dataset(&net.shape, 8, 71);
        let weights = LossWeights {
            alpha: 8.0,
            beta: 2.0,
            gamma: 2.0,
            lambda: 0.01,
        };
        let (loss, _) = total_loss(&net, &data, &weights).unwrap();
        assert_eq!(
            loss.total,
            weights.alpha * loss.e1 + weights.beta * loss.e2 + weights.gamma * loss.e3
        );
        // (1, 0, 0) reduces the objective to E1 alone.
        let only_e1 = LossWeights {
            alpha: 1.0,
            beta: 0.0,
            gamma: 0.0,
            lambda: 0.01,
        };
        let (loss, _) = total_loss(&net, &data, &only_e1).unwrap();
        assert_eq!(loss.total, loss.e1);
    }

    #[test]
    fn component_values_match_standalone_losses() {
        let net = ToyNetwork::init(shape(FusionMode::Bla), 72).unwrap();
        let data = tiny_dataset(&net.shape, 8, 73);
        let weights = LossWeights {
            alpha: 6.0,
            beta: 4.0,
            gamma: 2.0,
            lambda: 0.05,
        };
        let (loss, _) = total_loss(&net, &data, &weights).unwrap();
        let acts = net.hash_activations(&data).unwrap();
        assert!((loss.e2 - loss_binarization(&acts)).abs() < 1e-12);
        assert!((loss.e3 - loss_balance(&acts)).abs() < 1e-12);
        let mut predictions = Array2::zeros((data.len(), net.shape.classes));
        for i in 0..data.len() {
            let f = net.forward(data.face.row(i), data.iris.row(i)).unwrap();
            predictions.row_mut(i).assign(&f.p);
        }
        let e1 =
            loss_classification(&predictions, &data.labels, &net.w_class, weights.lambda).unwrap();
        assert!((loss.e1 - e1).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences_on_random_nets() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(74);
        for case in 0..10 {
            let fusion = if case % 2 == 0 { FusionMode::Fca } else { FusionMode::Bla };
            let shape = NetShape {
                d_in_face: rng.gen_range(2..5),
                d_in_iris: rng.gen_range(2..5),
                d_face: rng.gen_range(2..5),
                d_iris: rng.gen_range(2..5),
                d_joint: rng.gen_range(2..6),
                hash_bits: rng.gen_range(2..6),
                classes: rng.gen_range(2..5),
                fusion,
            };
            let mut net = ToyNetwork::init(shape, rng.gen()).unwrap();
            net.beta_bw = *[1.0, 4.0, 16.0].choose(&mut rng).unwrap();
            let data = toy_dataset(
                shape.classes,
                2,
                shape.d_in_face,
                shape.d_in_iris,
                0.4,
                rng.gen(),
            )
            .unwrap();
            let weights = LossWeights {
                alpha: rng.gen_range(0.5..8.0),
                beta: rng.gen_range(0.0..4.0),
                gamma: rng.gen_range(0.0..4.0),
                lambda: rng.gen_range(0.0..0.1),
            };
            let worst = gradient_check(&net, &data, &weights, 1e-5).unwrap();
            assert!(worst <= 1e-4, "case {case}: relative error {worst}");
        }
    }

    #[test]
    fn continuation_sharpens_toward_sign() {
        let mut worst: f64 = 0.0;
        let mut x: f64 = 0.1;
        while x <= 2.0 {
            for s in [x, -x] {
                let diff = ((64.0 * s).tanh() - s.signum()).abs();
                worst = worst.max(diff);
            }
            x += 0.01;
        }
        assert!(worst < 1e-3, "worst {worst}");
    }

    #[test]
    fn codes_follow_activation_signs() {
        let net = ToyNetwork::init(shape(FusionMode::Fca), 75).unwrap();
        let data = tiny_dataset(&net.shape, 6, 76);
        let acts = net.hash_activations(&data).unwrap();
        let codes = net.codes(&data).unwrap();
        for (row, code) in acts.axis_iter(Axis(0)).zip(&codes) {
            for (&a, &bit) in row.iter().zip(code) {
                assert_eq!(bit, u8::from(a >= 0.0));
            }
        }
    }

    #[test]
    fn forward_rejects_mismatched_inputs() {
        let net = ToyNetwork::init(shape(FusionMode::Fca), 77).unwrap();
        let face = Array1::zeros(3);
        let iris = Array1::zeros(4);
        assert!(matches!(
            net.forward(face.view(), iris.view()),
            Err(DeepHashError::Shape(_))
        ));
    }

    #[test]
    fn invalid_weights_and_shapes_are_config_errors() {
        let bad = LossWeights {
            alpha: -1.0,
            beta: 0.0,
            gamma: 0.0,
            lambda: 0.0,
        };
        assert!(bad.validate().is_err());
        let mut s = shape(FusionMode::Fca);
        s.hash_bits = 0;
        assert!(ToyNetwork::init(s, 0).is_err());
    }
}

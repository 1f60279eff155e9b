//! Two-dense-layer autoencoder with a 2-D linear bottleneck, trained by
//! full-batch gradient descent on mean squared reconstruction error.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BOTTLENECK: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    /// `out x in`.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    fn random<R: Rng>(input: usize, output: usize, rng: &mut R) -> Self {
        let r = 1.0 / (input as f64).sqrt();
        Dense {
            w: Array2::from_shape_fn((output, input), |_| rng.random_range(-r..r)),
            b: Array1::from_shape_fn(output, |_| rng.random_range(-r..r)),
        }
    }

    fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.w.t()) + &self.b
    }

    /// Returns the input gradient and the parameter gradients.
    fn backward(&self, x: ArrayView2<f64>, dy: ArrayView2<f64>) -> (Array2<f64>, Array2<f64>, Array1<f64>) {
        (dy.dot(&self.w), dy.t().dot(&x), dy.sum_axis(Axis(0)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AeConfig {
    /// Width of the tanh layers on both sides of the bottleneck.
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl AeConfig {
    pub fn new(hidden: usize, epochs: usize, learning_rate: f64, seed: u64) -> Self {
        AeConfig {
            hidden,
            epochs,
            learning_rate,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Autoencoder {
    pub config: AeConfig,
    pub input: usize,
    pub encoder: [Dense; 2],
    pub decoder: [Dense; 2],
    /// Reconstruction MSE before training and after every epoch.
    pub curve: Vec<f64>,
    pub final_mse: f64,
    pub flag: Option<String>,
}

struct Pass {
    h1: Array2<f64>,
    z: Array2<f64>,
    h2: Array2<f64>,
    out: Array2<f64>,
}

fn mse(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    let n = a.len().max(1) as f64;
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / n
}

impl Autoencoder {
    pub fn new(input: usize, config: AeConfig) -> Result<Self> {
        if config.hidden < 2 {
            return Err(Error::InvalidArgument(format!("hidden width must be >= 2, got {}", config.hidden)));
        }
        if input == 0 {
            return Err(Error::InvalidArgument("autoencoder input must be non-empty".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let h = config.hidden;
        Ok(Autoencoder {
            config,
            input,
            encoder: [Dense::random(input, h, &mut rng), Dense::random(h, BOTTLENECK, &mut rng)],
            decoder: [Dense::random(BOTTLENECK, h, &mut rng), Dense::random(h, input, &mut rng)],
            curve: Vec::new(),
            final_mse: f64::NAN,
            flag: None,
        })
    }

    fn check(&self, x: ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input {
            return Err(Error::shape(format!("{} columns", self.input), x.ncols()));
        }
        Ok(())
    }

    fn pass(&self, x: ArrayView2<f64>) -> Pass {
        let h1 = self.encoder[0].forward(x).mapv(f64::tanh);
        let z = self.encoder[1].forward(h1.view());
        let h2 = self.decoder[0].forward(z.view()).mapv(f64::tanh);
        let out = self.decoder[1].forward(h2.view());
        Pass { h1, z, h2, out }
    }

    /// Bottleneck coordinates.
    pub fn encode(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check(x)?;
        let h1 = self.encoder[0].forward(x).mapv(f64::tanh);
        Ok(self.encoder[1].forward(h1.view()))
    }

    pub fn reconstruct(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check(x)?;
        Ok(self.pass(x).out)
    }

    pub fn reconstruction_error(&self, x: ArrayView2<f64>) -> Result<f64> {
        Ok(mse(self.reconstruct(x)?.view(), x))
    }

    fn step(&mut self, x: ArrayView2<f64>) -> f64 {
        let p = self.pass(x);
        let loss = mse(p.out.view(), x);
        let scale = 2.0 / x.len() as f64;
        let dout = (&p.out - &x) * scale;
        let (dh2, gw4, gb4) = self.decoder[1].backward(p.h2.view(), dout.view());
        let dpre2 = dh2 * p.h2.mapv(|v| 1.0 - v * v);
        let (dz, gw3, gb3) = self.decoder[0].backward(p.z.view(), dpre2.view());
        let (dh1, gw2, gb2) = self.encoder[1].backward(p.h1.view(), dz.view());
        let dpre1 = dh1 * p.h1.mapv(|v| 1.0 - v * v);
        let (_, gw1, gb1) = self.encoder[0].backward(x, dpre1.view());
        let lr = self.config.learning_rate;
        let [enc0, enc1] = &mut self.encoder;
        let [dec0, dec1] = &mut self.decoder;
        for (layer, gw, gb) in [(dec1, gw4, gb4), (dec0, gw3, gb3), (enc1, gw2, gb2), (enc0, gw1, gb1)] {
            layer.w.scaled_add(-lr, &gw);
            layer.b.scaled_add(-lr, &gb);
        }
        loss
    }
}

/// Trains an autoencoder on the rows of `x`.
pub fn fit_autoencoder(x: ArrayView2<f64>, config: AeConfig) -> Result<Autoencoder> {
    if x.nrows() == 0 {
        return Err(Error::InvalidArgument("no activations to fit".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("activation matrix".into()));
    }
    let mut ae = Autoencoder::new(x.ncols(), config)?;
    let mut curve = Vec::with_capacity(config.epochs + 1);
    for epoch in 0..config.epochs {
        let loss = ae.step(x);
        if !loss.is_finite() || curve.first().is_some_and(|&l0: &f64| loss > 1e6 * l0.max(1e-12)) {
            return Err(Error::Diverged {
                epoch,
                last_good: epoch.checked_sub(1),
            });
        }
        curve.push(loss);
    }
    let last = ae.reconstruction_error(x)?;
    if !last.is_finite() {
        return Err(Error::Diverged {
            epoch: config.epochs,
            last_good: config.epochs.checked_sub(1),
        });
    }
    curve.push(last);
    if config.learning_rate > 0.0 && config.epochs > 0 && last >= curve[0] {
        ae.flag = Some(format!("reconstruction error did not decrease ({} -> {last})", curve[0]));
    }
    ae.final_mse = last;
    ae.curve = curve;
    Ok(ae)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    pub(crate) fn two_factor_data(n: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 0.3).unwrap();
        let a = Array2::from_shape_fn((2, d), |_| normal.sample(&mut rng));
        let f = Array2::from_shape_fn((n, 2), |_| rng.random_range(-1.0..1.0));
        f.dot(&a)
    }

    #[test]
    fn linear_subspace_is_reconstructed() {
        let x = two_factor_data(200, 10, 1);
        let ae = fit_autoencoder(x.view(), AeConfig::new(8, 3000, 0.1, 3)).unwrap();
        assert!(ae.final_mse < 1e-3, "{}", ae.final_mse);
        assert!(ae.flag.is_none());
        // descent with a fixed step: no more than a 5% transient increase
        assert!(ae.curve.windows(2).all(|w| w[1] <= w[0] * 1.05));
    }

    #[test]
    fn zero_learning_rate_keeps_error_constant() {
        let x = two_factor_data(30, 5, 2);
        let ae = fit_autoencoder(x.view(), AeConfig::new(4, 20, 0.0, 1)).unwrap();
        assert!(ae.curve.iter().all(|&l| l == ae.curve[0]));
    }

    #[test]
    fn deterministic_and_validated() {
        let x = two_factor_data(30, 5, 2);
        let a = fit_autoencoder(x.view(), AeConfig::new(4, 50, 0.05, 9)).unwrap();
        let b = fit_autoencoder(x.view(), AeConfig::new(4, 50, 0.05, 9)).unwrap();
        assert_eq!(a, b);
        assert!(fit_autoencoder(x.view(), AeConfig::new(1, 5, 0.1, 0)).is_err());
        assert!(a.encode(Array2::zeros((2, 4)).view()).is_err());
    }

    #[test]
    fn huge_step_diverges_with_report() {
        let x = two_factor_data(30, 5, 2) * 50.0;
        let err = fit_autoencoder(x.view(), AeConfig::new(4, 200, 50.0, 1)).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }));
    }

    fn weights(m: &mut Autoencoder, layer: usize) -> &mut [f64] {
        let l = match layer {
            0 => &mut m.encoder[0],
            1 => &mut m.encoder[1],
            2 => &mut m.decoder[0],
            _ => &mut m.decoder[1],
        };
        l.w.as_slice_mut().unwrap()
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        // With lr = 1 one step subtracts exactly the gradient.
        let x = two_factor_data(6, 3, 4);
        let base = Autoencoder::new(3, AeConfig::new(3, 1, 1.0, 5)).unwrap();
        let mut stepped = base.clone();
        stepped.step(x.view());
        let eps = 1e-6;
        for (layer, j) in [(0, 0), (0, 4), (1, 2), (2, 1), (3, 5)] {
            let mut plus = base.clone();
            let mut minus = base.clone();
            weights(&mut plus, layer)[j] += eps;
            weights(&mut minus, layer)[j] -= eps;
            let numeric = (plus.reconstruction_error(x.view()).unwrap()
                - minus.reconstruction_error(x.view()).unwrap())
                / (2.0 * eps);
            let analytic = weights(&mut base.clone(), layer)[j] - weights(&mut stepped, layer)[j];
            assert!(
                (numeric - analytic).abs() < 1e-7 * numeric.abs().max(1.0),
                "{layer}/{j}: {numeric} vs {analytic}"
            );
        }
    }
}

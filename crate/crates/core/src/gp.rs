//! Exact zero-mean Gaussian-process regression with one-point updates.
//!
//! The posterior keeps a lower-triangular Cholesky factor of `K + s^2 I`. A new
//! observation borders the factor with one row (O(n^2)), so a streaming learner
//! never refactorizes unless the bordered pivot collapses.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{distance, KernelSpec};

/// Squared pivots below this are treated as numerically singular.
pub const MIN_PIVOT: f64 = 1e-12;
/// Diagonal jitter used when the plain factorization fails.
pub const JITTER: f64 = 1e-10;
/// Floor applied to the posterior variance before taking the square root.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Packed lower-triangular factor; row `i` holds `L[i][0..=i]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct Cholesky {
    rows: Vec<Vec<f64>>,
}

impl Cholesky {
    fn len(&self) -> usize {
        self.rows.len()
    }

    /// Factorizes a dense symmetric matrix; `None` if a pivot drops below [`MIN_PIVOT`].
    fn decompose(a: &[Vec<f64>]) -> Option<Self> {
        let mut chol = Cholesky::default();
        for row in a {
            let n = chol.len();
            let l = chol.forward_solve(&row[..n]);
            let pivot = row[n] - dot(&l, &l);
            chol.push(l, pivot).ok()?;
        }
        Some(chol)
    }

    fn push(&mut self, mut l: Vec<f64>, pivot: f64) -> std::result::Result<(), f64> {
        if !(pivot >= MIN_PIVOT) {
            return Err(pivot);
        }
        l.push(pivot.sqrt());
        self.rows.push(l);
        Ok(())
    }

    /// Solves `L z = b`.
    fn forward_solve(&self, b: &[f64]) -> Vec<f64> {
        let mut z = Vec::with_capacity(b.len());
        for (i, row) in self.rows.iter().enumerate() {
            let s = b[i] - dot(&row[..i], &z);
            z.push(s / row[i]);
        }
        z
    }

    /// Solves `L^T x = z`.
    fn backward_solve(&self, z: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut x = z.to_vec();
        for i in (0..n).rev() {
            x[i] /= self.rows[i][i];
            let xi = x[i];
            for (j, lij) in self.rows[i][..i].iter().enumerate() {
                x[j] -= lij * xi;
            }
        }
        x
    }

    fn log_det(&self) -> f64 {
        2.0 * self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| r[i].ln())
            .sum::<f64>()
    }

    fn reconstruct(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let v = dot(&self.rows[i][..=j], &self.rows[j][..=j]);
                a[i][j] = v;
                a[j][i] = v;
            }
        }
        a
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpPosterior {
    kernel: KernelSpec,
    noise_variance: f64,
    jitter: f64,
    inputs: Vec<Vec<f64>>,
    labels: Vec<f64>,
    factor: Cholesky,
    /// `(K + s^2 I)^-1 Y`
    alpha: Vec<f64>,
}

impl GpPosterior {
    /// The prior: no observations.
    pub fn new(kernel: KernelSpec, noise_variance: f64) -> Result<Self> {
        if !(noise_variance > 0.0 && noise_variance.is_finite()) {
            return Err(Error::invalid(format!(
                "noise variance must be finite and > 0, got {noise_variance}"
            )));
        }
        Ok(GpPosterior {
            kernel,
            noise_variance,
            jitter: 0.0,
            inputs: Vec::new(),
            labels: Vec::new(),
            factor: Cholesky::default(),
            alpha: Vec::new(),
        })
    }

    /// Conditions on a whole data set with one batch factorization.
    pub fn fit(
        kernel: KernelSpec,
        noise_variance: f64,
        inputs: Vec<Vec<f64>>,
        labels: Vec<f64>,
    ) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(Error::invalid(format!(
                "{} inputs but {} labels",
                inputs.len(),
                labels.len()
            )));
        }
        for x in &inputs {
            kernel.check_dim(x)?;
        }
        let mut gp = GpPosterior::new(kernel, noise_variance)?;
        gp.inputs = inputs;
        gp.labels = labels;
        gp.refactor()?;
        Ok(gp)
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Diagonal jitter currently in effect (zero unless a refactorization needed it).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    fn diagonal(&self) -> f64 {
        1.0 + self.noise_variance + self.jitter
    }

    fn regularized_gram(&self) -> Vec<Vec<f64>> {
        let n = self.inputs.len();
        let diag = self.diagonal();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            a[i][i] = diag;
            for j in 0..i {
                let v = self
                    .kernel
                    .eval_distance(distance(&self.inputs[i], &self.inputs[j]));
                a[i][j] = v;
                a[j][i] = v;
            }
        }
        a
    }

    /// Full factorization, retrying once with jitter.
    fn refactor(&mut self) -> Result<()> {
        let factor = match Cholesky::decompose(&self.regularized_gram()) {
            Some(f) => f,
            None => {
                self.jitter = self.jitter.max(JITTER);
                Cholesky::decompose(&self.regularized_gram()).ok_or_else(|| {
                    Error::NumericalSingularity(format!(
                        "factorization failed for n = {} even with jitter {}",
                        self.inputs.len(),
                        self.jitter
                    ))
                })?
            }
        };
        self.factor = factor;
        self.alpha = self
            .factor
            .backward_solve(&self.factor.forward_solve(&self.labels));
        Ok(())
    }

    fn cross_covariance(&self, x: &[f64]) -> Vec<f64> {
        self.inputs
            .iter()
            .map(|xi| self.kernel.eval_distance(distance(x, xi)))
            .collect()
    }

    /// Posterior mean and standard deviation at `x`.
    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        self.kernel.check_dim(x)?;
        if self.inputs.is_empty() {
            return Ok(Prediction {
                mean: 0.0,
                std: 1.0,
            });
        }
        let k = self.cross_covariance(x);
        let mean = dot(&k, &self.alpha);
        let v = self.factor.forward_solve(&k);
        let var = (1.0 - dot(&v, &v)).max(VARIANCE_FLOOR);
        Ok(Prediction {
            mean,
            std: var.sqrt(),
        })
    }

    /// Appends one observation by bordering the factor.
    ///
    /// If the new pivot is numerically singular the whole factor is rebuilt
    /// with jitter; if that fails too the posterior is left unchanged.
    pub fn update(&mut self, x: &[f64], y: f64) -> Result<()> {
        self.kernel.check_dim(x)?;
        if !y.is_finite() {
            return Err(Error::invalid(format!("non-finite label {y}")));
        }
        let k = self.cross_covariance(x);
        let l = self.factor.forward_solve(&k);
        let pivot = self.diagonal() - dot(&l, &l);
        self.inputs.push(x.to_vec());
        self.labels.push(y);
        if self.factor.push(l, pivot).is_err() {
            let saved_jitter = self.jitter;
            if let Err(e) = self.refactor() {
                self.inputs.pop();
                self.labels.pop();
                self.jitter = saved_jitter;
                return Err(e);
            }
            return Ok(());
        }
        self.alpha = self
            .factor
            .backward_solve(&self.factor.forward_solve(&self.labels));
        Ok(())
    }

    /// `L L^T`, for checking the factor against the Gram matrix.
    pub fn reconstructed_gram(&self) -> Vec<Vec<f64>> {
        self.factor.reconstruct()
    }

    /// `K + (s^2 + jitter) I` computed directly from the inputs.
    pub fn gram_with_noise(&self) -> Vec<Vec<f64>> {
        self.regularized_gram()
    }

    /// Log marginal likelihood of the stored data under the current kernel.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.labels.len() as f64;
        -0.5 * dot(&self.labels, &self.alpha)
            - 0.5 * self.factor.log_det()
            - 0.5 * n * (2.0 * PI).ln()
    }
}

/// `-1/2 Y^T (K + s^2 I)^-1 Y - 1/2 log det(K + s^2 I) - n/2 log 2 pi`.
pub fn log_marginal_likelihood(
    inputs: &[Vec<f64>],
    labels: &[f64],
    kernel: &KernelSpec,
    noise_variance: f64,
) -> Result<f64> {
    let gp = GpPosterior::fit(*kernel, noise_variance, inputs.to_vec(), labels.to_vec())?;
    Ok(gp.log_marginal_likelihood())
}

/// Picks the lengthscale from `grid` with the largest log marginal
/// likelihood; ties go to the smaller lengthscale.
pub fn tune_hyperparams(
    inputs: &[Vec<f64>],
    labels: &[f64],
    noise_variance: f64,
    template: &KernelSpec,
    grid: &[f64],
) -> Result<KernelSpec> {
    if grid.is_empty() {
        return Err(Error::invalid("lengthscale grid is empty"));
    }
    if let Some(bad) = grid.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::invalid(format!(
            "lengthscale grid entry {bad} is not > 0"
        )));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best: Option<(f64, KernelSpec)> = None;
    for l in sorted {
        let spec = template.with_lengthscale(l)?;
        let lml = log_marginal_likelihood(inputs, labels, &spec, noise_variance)?;
        if best.as_ref().is_none_or(|(b, _)| lml > *b) {
            best = Some((lml, spec));
        }
    }
    Ok(best.expect("grid is non-empty").1)
}

/// Upper bound on the posterior variance at a point of a cell with L2
/// diameter `cell_diameter` that contains `points_in_cell` observations:
/// `D^2 / l^2 + s^2 / n` for the squared exponential and
/// `2 L_M D + s^2 / n` for Matérn kernels.
pub fn cell_variance_bound(
    kernel: &KernelSpec,
    noise_variance: f64,
    cell_diameter: f64,
    points_in_cell: usize,
) -> f64 {
    if points_in_cell == 0 {
        return f64::INFINITY;
    }
    let averaging = noise_variance / points_in_cell as f64;
    let spread = if kernel.family().is_matern() {
        2.0 * kernel.lipschitz_constant() * cell_diameter
    } else {
        let l = kernel.lengthscale();
        cell_diameter * cell_diameter / (l * l)
    };
    spread + averaging
}

/// Whether the posterior variance at `probe` respects [`cell_variance_bound`]
/// (with slack `1e-8`).
pub fn variance_bound_check(
    gp: &GpPosterior,
    cell_diameter: f64,
    points_in_cell: usize,
    probe: &[f64],
) -> Result<bool> {
    let p = gp.predict(probe)?;
    let bound = cell_variance_bound(
        gp.kernel(),
        gp.noise_variance(),
        cell_diameter,
        points_in_cell,
    );
    Ok(p.std * p.std <= bound + 1e-8)
}

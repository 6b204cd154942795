//! Stationary kernels with unit prior variance.
//!
//! Matérn kernels are restricted to the half-integer smoothness values that
//! have closed forms. For all three the scaled distance is
//! `r = sqrt(2 nu) * ||x - x'|| / l`, i.e. `r/l`, `sqrt(3) r/l` and `sqrt(5) r/l`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    SquaredExponential,
    /// Matérn, nu = 1/2.
    Matern12,
    /// Matérn, nu = 3/2.
    Matern32,
    /// Matérn, nu = 5/2.
    Matern52,
}

impl KernelFamily {
    pub fn is_matern(self) -> bool {
        !matches!(self, KernelFamily::SquaredExponential)
    }

    /// Smoothness parameter nu; `None` for the squared exponential.
    pub fn nu(self) -> Option<f64> {
        match self {
            KernelFamily::SquaredExponential => None,
            KernelFamily::Matern12 => Some(0.5),
            KernelFamily::Matern32 => Some(1.5),
            KernelFamily::Matern52 => Some(2.5),
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            KernelFamily::SquaredExponential => "squared_exponential",
            KernelFamily::Matern12 => "matern12",
            KernelFamily::Matern32 => "matern32",
            KernelFamily::Matern52 => "matern52",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    family: KernelFamily,
    lengthscale: f64,
    dimension: usize,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, lengthscale: f64, dimension: usize) -> Result<Self> {
        if !(lengthscale > 0.0 && lengthscale.is_finite()) {
            return Err(Error::invalid(format!(
                "lengthscale must be finite and > 0, got {lengthscale}"
            )));
        }
        if dimension == 0 {
            return Err(Error::invalid("kernel dimension must be >= 1"));
        }
        Ok(KernelSpec {
            family,
            lengthscale,
            dimension,
        })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Same family and dimension with another lengthscale.
    pub fn with_lengthscale(&self, lengthscale: f64) -> Result<Self> {
        KernelSpec::new(self.family, lengthscale, self.dimension)
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        self.check_dim(y)?;
        Ok(self.eval_distance(distance(x, y)))
    }

    pub(crate) fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.dimension {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "point has dimension {}, kernel expects {}",
                x.len(),
                self.dimension
            )))
        }
    }

    /// Kernel value as a function of Euclidean distance.
    pub fn eval_distance(&self, dist: f64) -> f64 {
        let l = self.lengthscale;
        match self.family {
            KernelFamily::SquaredExponential => (-dist * dist / (2.0 * l * l)).exp(),
            KernelFamily::Matern12 => (-dist / l).exp(),
            KernelFamily::Matern32 => {
                let r = 3f64.sqrt() * dist / l;
                (1.0 + r) * (-r).exp()
            }
            KernelFamily::Matern52 => {
                let r = 5f64.sqrt() * dist / l;
                (1.0 + r + r * r / 3.0) * (-r).exp()
            }
        }
    }

    /// Lipschitz constant of the kernel as a function of distance,
    /// `sup_r |d k / d r|`. For the squared exponential this is
    /// `exp(-1/2) / l`; for Matérn it is the `L_M` of the variance bound.
    pub fn lipschitz_constant(&self) -> f64 {
        let l = self.lengthscale;
        match self.family {
            KernelFamily::SquaredExponential => (-0.5f64).exp() / l,
            KernelFamily::Matern12 => 1.0 / l,
            // d/da (1+a)e^-a = -a e^-a, maximal at a = 1
            KernelFamily::Matern32 => 3f64.sqrt() * (-1.0f64).exp() / l,
            // d/da (1+a+a^2/3)e^-a = -a(1+a)e^-a/3, maximal at the golden ratio
            KernelFamily::Matern52 => {
                let phi = (1.0 + 5f64.sqrt()) / 2.0;
                5f64.sqrt() * phi.powi(3) * (-phi).exp() / (3.0 * l)
            }
        }
    }
}

pub(crate) fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Dense Gram matrix `K_ij = k(x_i, x_j)`, row-major.
pub fn gram_matrix(spec: &KernelSpec, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    for p in points {
        spec.check_dim(p)?;
    }
    let n = points.len();
    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        k[i][i] = 1.0;
        for j in 0..i {
            let v = spec.eval_distance(distance(&points[i], &points[j]));
            k[i][j] = v;
            k[j][i] = v;
        }
    }
    Ok(k)
}

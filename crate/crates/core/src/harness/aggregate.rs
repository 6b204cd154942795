use crate::error::{Error, Result};

use super::runner::TrialResult;

/// Pointwise mean with the 95% band `mean +- 1.96 * s / sqrt(n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub mean: Vec<f64>,
    pub half_width: Vec<f64>,
}

impl Band {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn lower(&self) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.half_width)
            .map(|(m, h)| m - h)
            .collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.half_width)
            .map(|(m, h)| m + h)
            .collect()
    }
}

const Z_95: f64 = 1.96;

/// Aggregates equal-length curves; `n = 1` gives a zero-width band.
pub fn aggregate(curves: &[Vec<f64>]) -> Result<Band> {
    let first = curves
        .first()
        .ok_or_else(|| Error::invalid("cannot aggregate zero trials"))?;
    let len = first.len();
    if let Some(bad) = curves.iter().find(|c| c.len() != len) {
        return Err(Error::invalid(format!(
            "curve lengths differ: {len} vs {}",
            bad.len()
        )));
    }
    let n = curves.len() as f64;
    let mut mean = Vec::with_capacity(len);
    let mut half_width = Vec::with_capacity(len);
    for t in 0..len {
        let m = curves.iter().map(|c| c[t]).sum::<f64>() / n;
        let hw = if curves.len() > 1 {
            let var = curves.iter().map(|c| (c[t] - m).powi(2)).sum::<f64>() / (n - 1.0);
            Z_95 * var.sqrt() / n.sqrt()
        } else {
            0.0
        };
        mean.push(m);
        half_width.push(hw);
    }
    Ok(Band { mean, half_width })
}

/// The three aggregated series written to `summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub average_loss: Band,
    pub average_error: Band,
    pub mean_labels: Vec<f64>,
}

pub fn summarize(trials: &[TrialResult]) -> Result<Summary> {
    let losses: Vec<_> = trials.iter().map(TrialResult::average_loss).collect();
    let errors: Vec<_> = trials.iter().map(TrialResult::average_error).collect();
    let labels: Vec<_> = trials.iter().map(TrialResult::label_counts).collect();
    Ok(Summary {
        average_loss: aggregate(&losses)?,
        average_error: aggregate(&errors)?,
        mean_labels: aggregate(&labels)?.mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_trials_zero_width() {
        let c = vec![1.0, 2.5, 3.0];
        let b = aggregate(&[c.clone(), c.clone(), c.clone()]).unwrap();
        assert_eq!(b.mean, c);
        assert!(b.half_width.iter().all(|&h| h == 0.0));
    }

    #[test]
    fn two_constant_curves() {
        let b = aggregate(&[vec![0.0; 4], vec![2.0; 4]]).unwrap();
        for (m, h) in b.mean.iter().zip(&b.half_width) {
            assert_eq!(*m, 1.0);
            assert!((h - 1.96).abs() < 1e-12);
        }
    }

    #[test]
    fn single_trial() {
        let b = aggregate(&[vec![3.0, 4.0]]).unwrap();
        assert_eq!(b.half_width, vec![0.0, 0.0]);
    }

    #[test]
    fn errors() {
        assert!(aggregate(&[]).is_err());
        assert!(matches!(
            aggregate(&[vec![1.0], vec![1.0, 2.0]]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn permutation_invariant() {
        let curves = vec![
            vec![0.1, 5.0],
            vec![0.7, -1.0],
            vec![0.3, 2.0],
            vec![0.9, 0.0],
        ];
        let a = aggregate(&curves).unwrap();
        let mut rev = curves.clone();
        rev.reverse();
        let b = aggregate(&rev).unwrap();
        for (x, y) in a
            .mean
            .iter()
            .zip(&b.mean)
            .chain(a.half_width.iter().zip(&b.half_width))
        {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

//! Input streams and ground truth.
//!
//! An [`ArrivalPattern`] produces the inputs `x_t`; a [`GroundTruthTask`] knows
//! the noiseless value at each input and produces noisy labels on request.

mod csv_source;
pub mod functions;

use std::fmt;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub use csv_source::load_csv_stream;

/// One input drawn from an arrival pattern.
#[derive(Debug, Clone, PartialEq)]
pub enum Arrival {
    /// A discrete type index in `0..K`.
    Type(usize),
    /// A point in the task's input domain.
    Point(Vec<f64>),
    /// A stored data row, identified by its index in the source file.
    Row { index: usize, point: Vec<f64> },
}

impl Arrival {
    pub fn point(&self) -> Option<&[f64]> {
        match self {
            Arrival::Type(_) => None,
            Arrival::Point(p) | Arrival::Row { point: p, .. } => Some(p),
        }
    }
}

impl fmt::Display for Arrival {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arrival::Type(k) => write!(f, "{k}"),
            Arrival::Point(p) | Arrival::Row { point: p, .. } => {
                for (i, v) in p.iter().enumerate() {
                    if i > 0 {
                        f.write_str(";")?;
                    }
                    write!(f, "{v}")?;
                }
                Ok(())
            }
        }
    }
}

pub type Bounds = Vec<(f64, f64)>;

fn validate_bounds(bounds: &[(f64, f64)]) -> Result<()> {
    if bounds.is_empty() {
        return Err(Error::invalid(
            "box bounds must have at least one dimension",
        ));
    }
    for (i, &(lo, hi)) in bounds.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid(format!(
                "bounds for dimension {i} must satisfy lo < hi, got ({lo}, {hi})"
            )));
        }
    }
    Ok(())
}

fn sample_box<R: Rng + ?Sized>(bounds: &[(f64, f64)], rng: &mut R) -> Vec<f64> {
    bounds
        .iter()
        .map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
        .collect()
}

fn inside(point: &[f64], region: &[(f64, f64)]) -> bool {
    point
        .iter()
        .zip(region)
        .all(|(&v, &(lo, hi))| v >= lo && v <= hi)
}

#[derive(Debug, Clone)]
pub enum ArrivalPattern {
    UniformDiscrete {
        num_types: usize,
    },
    /// The first `ceil(heavy_fraction * K)` types share `heavy_mass` of the
    /// arrivals; the rest share the remainder.
    LopsidedDiscrete {
        num_types: usize,
        heavy_fraction: f64,
        heavy_mass: f64,
    },
    CustomDiscrete {
        weights: Vec<f64>,
        sampler: WeightedIndex<f64>,
    },
    UniformBox {
        bounds: Bounds,
    },
    /// `heavy_mass` of the points come uniformly from `heavy_region`, the rest
    /// uniformly from `bounds` outside of it.
    LopsidedBox {
        bounds: Bounds,
        heavy_region: Bounds,
        heavy_mass: f64,
    },
    Replay {
        rows: Vec<(usize, Vec<f64>)>,
        cursor: usize,
    },
}

impl ArrivalPattern {
    pub fn uniform_discrete(num_types: usize) -> Result<Self> {
        if num_types == 0 {
            return Err(Error::invalid("number of types must be >= 1"));
        }
        Ok(ArrivalPattern::UniformDiscrete { num_types })
    }

    pub fn lopsided_discrete(
        num_types: usize,
        heavy_fraction: f64,
        heavy_mass: f64,
    ) -> Result<Self> {
        if num_types == 0 {
            return Err(Error::invalid("number of types must be >= 1"));
        }
        if !(0.0..=1.0).contains(&heavy_fraction) || !(0.0..=1.0).contains(&heavy_mass) {
            return Err(Error::invalid(format!(
                "heavy fraction and mass must lie in [0, 1], got {heavy_fraction} and {heavy_mass}"
            )));
        }
        Ok(ArrivalPattern::LopsidedDiscrete {
            num_types,
            heavy_fraction,
            heavy_mass,
        })
    }

    pub fn custom_discrete(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("custom arrival weights are empty"));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::invalid(
                "custom arrival weights must be finite and >= 0",
            ));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "custom arrival weights must sum to 1, got {total}"
            )));
        }
        let sampler = WeightedIndex::new(&weights)
            .map_err(|e| Error::invalid(format!("custom arrival weights: {e}")))?;
        Ok(ArrivalPattern::CustomDiscrete { weights, sampler })
    }

    pub fn uniform_box(bounds: Bounds) -> Result<Self> {
        validate_bounds(&bounds)?;
        Ok(ArrivalPattern::UniformBox { bounds })
    }

    pub fn lopsided_box(bounds: Bounds, heavy_region: Bounds, heavy_mass: f64) -> Result<Self> {
        validate_bounds(&bounds)?;
        validate_bounds(&heavy_region)?;
        if heavy_region.len() != bounds.len() {
            return Err(Error::invalid(
                "heavy region dimension differs from the bounds",
            ));
        }
        let contained = heavy_region
            .iter()
            .zip(&bounds)
            .all(|(h, b)| h.0 >= b.0 && h.1 <= b.1);
        if !contained {
            return Err(Error::invalid("heavy region must lie inside the bounds"));
        }
        if heavy_region == bounds && heavy_mass < 1.0 {
            return Err(Error::invalid(
                "heavy region covers the whole box, nothing left for the light arrivals",
            ));
        }
        if !(0.0..=1.0).contains(&heavy_mass) {
            return Err(Error::invalid(format!(
                "heavy mass must lie in [0, 1], got {heavy_mass}"
            )));
        }
        Ok(ArrivalPattern::LopsidedBox {
            bounds,
            heavy_region,
            heavy_mass,
        })
    }

    /// Replays points in order; each arrival carries its position in `points`.
    pub fn replay(points: Vec<Vec<f64>>) -> Self {
        ArrivalPattern::Replay {
            rows: points.into_iter().enumerate().collect(),
            cursor: 0,
        }
    }

    pub(crate) fn replay_rows(rows: Vec<(usize, Vec<f64>)>) -> Self {
        ArrivalPattern::Replay { rows, cursor: 0 }
    }

    /// Number of heavy types in a lopsided discrete pattern.
    pub fn heavy_type_count(num_types: usize, heavy_fraction: f64) -> usize {
        // tolerate representation error such as 0.2 * 100 = 20.000000000000004
        ((heavy_fraction * num_types as f64 - 1e-9).ceil().max(0.0) as usize).min(num_types)
    }

    pub fn is_discrete(&self) -> bool {
        matches!(
            self,
            ArrivalPattern::UniformDiscrete { .. }
                | ArrivalPattern::LopsidedDiscrete { .. }
                | ArrivalPattern::CustomDiscrete { .. }
        )
    }

    /// Remaining arrivals for a replay; `None` for unbounded patterns.
    pub fn remaining(&self) -> Option<usize> {
        match self {
            ArrivalPattern::Replay { rows, cursor } => Some(rows.len() - cursor),
            _ => None,
        }
    }

    pub fn next_arrival<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Arrival> {
        match self {
            ArrivalPattern::UniformDiscrete { num_types } => {
                Ok(Arrival::Type(rng.random_range(0..*num_types)))
            }
            ArrivalPattern::LopsidedDiscrete {
                num_types,
                heavy_fraction,
                heavy_mass,
            } => {
                let k = *num_types;
                let heavy = Self::heavy_type_count(k, *heavy_fraction);
                let ty = if heavy == 0 || heavy == k {
                    rng.random_range(0..k)
                } else if rng.random::<f64>() < *heavy_mass {
                    rng.random_range(0..heavy)
                } else {
                    rng.random_range(heavy..k)
                };
                Ok(Arrival::Type(ty))
            }
            ArrivalPattern::CustomDiscrete { sampler, .. } => {
                Ok(Arrival::Type(sampler.sample(rng)))
            }
            ArrivalPattern::UniformBox { bounds } => Ok(Arrival::Point(sample_box(bounds, rng))),
            ArrivalPattern::LopsidedBox {
                bounds,
                heavy_region,
                heavy_mass,
            } => {
                if rng.random::<f64>() < *heavy_mass {
                    return Ok(Arrival::Point(sample_box(heavy_region, rng)));
                }
                loop {
                    let p = sample_box(bounds, rng);
                    if !inside(&p, heavy_region) {
                        return Ok(Arrival::Point(p));
                    }
                }
            }
            ArrivalPattern::Replay { rows, cursor } => {
                let (index, point) = rows.get(*cursor).ok_or(Error::EndOfStream)?.clone();
                *cursor += 1;
                Ok(Arrival::Row { index, point })
            }
        }
    }
}

pub type SharedFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A deterministic function used as ground truth.
#[derive(Clone)]
pub enum TestFunction {
    Branin,
    Hartmann6,
    Custom {
        name: String,
        dimension: usize,
        f: SharedFn,
    },
}

impl TestFunction {
    pub fn custom(
        name: impl Into<String>,
        dimension: usize,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        TestFunction::Custom {
            name: name.into(),
            dimension,
            f: Arc::new(f),
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            TestFunction::Branin => 2,
            TestFunction::Hartmann6 => 6,
            TestFunction::Custom { dimension, .. } => *dimension,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Branin => functions::branin(x),
            TestFunction::Hartmann6 => functions::hartmann6(x),
            TestFunction::Custom { f, .. } => f(x),
        }
    }

    /// The function's customary domain.
    pub fn default_bounds(&self) -> Bounds {
        match self {
            TestFunction::Branin => functions::BRANIN_BOUNDS.to_vec(),
            TestFunction::Hartmann6 => functions::HARTMANN6_BOUNDS.to_vec(),
            TestFunction::Custom { dimension, .. } => vec![(0.0, 1.0); *dimension],
        }
    }
}

impl fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::Branin => f.write_str("Branin"),
            TestFunction::Hartmann6 => f.write_str("Hartmann6"),
            TestFunction::Custom {
                name, dimension, ..
            } => {
                write!(f, "Custom({name}, d = {dimension})")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum GroundTruthTask {
    DiscreteGaussian {
        means: Vec<f64>,
        noise_sigma: f64,
    },
    ContinuousFunction {
        function: TestFunction,
        noise_sigma: f64,
        bounds: Bounds,
    },
    CsvReplay {
        points: Vec<Vec<f64>>,
        labels: Vec<f64>,
        noise_sigma: f64,
    },
}

fn check_noise(noise_sigma: f64) -> Result<()> {
    if noise_sigma >= 0.0 && noise_sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "noise sigma must be finite and >= 0, got {noise_sigma}"
        )))
    }
}

impl GroundTruthTask {
    /// `K` means drawn uniformly from `[0, 1]`.
    pub fn random_discrete<R: Rng + ?Sized>(
        num_types: usize,
        noise_sigma: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if num_types == 0 {
            return Err(Error::invalid("number of types must be >= 1"));
        }
        check_noise(noise_sigma)?;
        let means = (0..num_types).map(|_| rng.random::<f64>()).collect();
        Ok(GroundTruthTask::DiscreteGaussian { means, noise_sigma })
    }

    pub fn discrete(means: Vec<f64>, noise_sigma: f64) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::invalid("at least one type mean is required"));
        }
        if means.iter().any(|m| !(0.0..=1.0).contains(m)) {
            return Err(Error::invalid("type means must lie in [0, 1]"));
        }
        check_noise(noise_sigma)?;
        Ok(GroundTruthTask::DiscreteGaussian { means, noise_sigma })
    }

    pub fn continuous(function: TestFunction, noise_sigma: f64) -> Result<Self> {
        check_noise(noise_sigma)?;
        let bounds = function.default_bounds();
        Ok(GroundTruthTask::ContinuousFunction {
            function,
            noise_sigma,
            bounds,
        })
    }

    pub fn noise_sigma(&self) -> f64 {
        match self {
            GroundTruthTask::DiscreteGaussian { noise_sigma, .. }
            | GroundTruthTask::ContinuousFunction { noise_sigma, .. }
            | GroundTruthTask::CsvReplay { noise_sigma, .. } => *noise_sigma,
        }
    }

    /// Number of types (discrete) or input dimension (continuous).
    pub fn size(&self) -> usize {
        match self {
            GroundTruthTask::DiscreteGaussian { means, .. } => means.len(),
            GroundTruthTask::ContinuousFunction { function, .. } => function.dimension(),
            GroundTruthTask::CsvReplay { points, .. } => points.first().map_or(0, Vec::len),
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, GroundTruthTask::DiscreteGaussian { .. })
    }

    /// Box the task's inputs live in, used to rescale inputs to the unit box.
    pub fn input_bounds(&self) -> Option<&[(f64, f64)]> {
        match self {
            GroundTruthTask::ContinuousFunction { bounds, .. } => Some(bounds),
            _ => None,
        }
    }

    /// Noiseless value at the arrival.
    pub fn true_value(&self, arrival: &Arrival) -> Result<f64> {
        match (self, arrival) {
            (GroundTruthTask::DiscreteGaussian { means, .. }, Arrival::Type(k)) => {
                means.get(*k).copied().ok_or_else(|| {
                    Error::invalid(format!("type {k} out of range for K = {}", means.len()))
                })
            }
            (
                GroundTruthTask::ContinuousFunction { function, .. },
                a @ (Arrival::Point(_) | Arrival::Row { .. }),
            ) => {
                let p = a.point().expect("point arrival");
                if p.len() != function.dimension() {
                    return Err(Error::invalid(format!(
                        "point has dimension {}, task expects {}",
                        p.len(),
                        function.dimension()
                    )));
                }
                Ok(function.eval(p))
            }
            (GroundTruthTask::CsvReplay { labels, .. }, Arrival::Row { index, .. }) => labels
                .get(*index)
                .copied()
                .ok_or_else(|| Error::invalid(format!("row {index} out of range"))),
            (task, arrival) => Err(Error::invalid(format!(
                "arrival {arrival:?} does not fit task {}",
                task.kind()
            ))),
        }
    }

    /// Noisy label: the true value plus Gaussian noise.
    pub fn query_label<R: Rng + ?Sized>(&self, arrival: &Arrival, rng: &mut R) -> Result<f64> {
        let truth = self.true_value(arrival)?;
        let z: f64 = rng.sample(StandardNormal);
        Ok(truth + self.noise_sigma() * z)
    }

    fn kind(&self) -> &'static str {
        match self {
            GroundTruthTask::DiscreteGaussian { .. } => "discrete_gaussian",
            GroundTruthTask::ContinuousFunction { .. } => "continuous_function",
            GroundTruthTask::CsvReplay { .. } => "csv_replay",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(2024)
    }

    #[test]
    fn point_mass() {
        let mut p = ArrivalPattern::custom_discrete(vec![0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        let mut r = rng();
        for _ in 0..1000 {
            assert_eq!(p.next_arrival(&mut r).unwrap(), Arrival::Type(3));
        }
    }

    #[test]
    fn custom_weights_validated() {
        assert!(ArrivalPattern::custom_discrete(vec![0.5, 0.4]).is_err());
        assert!(ArrivalPattern::custom_discrete(vec![1.5, -0.5]).is_err());
        assert!(ArrivalPattern::custom_discrete(vec![]).is_err());
    }

    #[test]
    fn uniform_discrete_frequencies() {
        let mut p = ArrivalPattern::uniform_discrete(10).unwrap();
        let mut r = rng();
        let n = 100_000;
        let mut counts = [0usize; 10];
        for _ in 0..n {
            let Arrival::Type(k) = p.next_arrival(&mut r).unwrap() else {
                panic!()
            };
            counts[k] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 0.1).abs() <= 0.01);
        }
    }

    #[test]
    fn heavy_type_count_rounding() {
        assert_eq!(ArrivalPattern::heavy_type_count(10, 0.2), 2);
        assert_eq!(ArrivalPattern::heavy_type_count(100, 0.2), 20);
        assert_eq!(ArrivalPattern::heavy_type_count(7, 0.2), 2);
        assert_eq!(ArrivalPattern::heavy_type_count(3, 0.0), 0);
        assert_eq!(ArrivalPattern::heavy_type_count(3, 1.0), 3);
    }

    #[test]
    fn lopsided_box_split() {
        let bounds = vec![(0.0, 1.0); 6];
        let mut heavy = bounds.clone();
        heavy[0] = (0.0, 0.2);
        let mut p = ArrivalPattern::lopsided_box(bounds, heavy, 0.8).unwrap();
        let mut r = rng();
        let n = 50_000;
        let mut in_heavy = 0;
        for _ in 0..n {
            let a = p.next_arrival(&mut r).unwrap();
            let x = a.point().unwrap();
            assert!(x.iter().all(|v| (0.0..=1.0).contains(v)));
            in_heavy += usize::from(x[0] <= 0.2);
        }
        let frac = in_heavy as f64 / n as f64;
        assert!((frac - 0.8).abs() < 0.01, "{frac}");
    }

    #[test]
    fn lopsided_box_validation() {
        let b = vec![(0.0, 1.0)];
        assert!(ArrivalPattern::lopsided_box(b.clone(), vec![(0.5, 1.5)], 0.8).is_err());
        assert!(ArrivalPattern::lopsided_box(b.clone(), b.clone(), 0.8).is_err());
        assert!(ArrivalPattern::lopsided_box(b.clone(), vec![(0.0, 0.2)], 1.2).is_err());
    }

    #[test]
    fn replay_exhausts() {
        let mut p = ArrivalPattern::replay(vec![vec![1.0], vec![2.0]]);
        let mut r = rng();
        assert_eq!(p.remaining(), Some(2));
        assert_eq!(
            p.next_arrival(&mut r).unwrap(),
            Arrival::Row {
                index: 0,
                point: vec![1.0]
            }
        );
        p.next_arrival(&mut r).unwrap();
        assert!(matches!(p.next_arrival(&mut r), Err(Error::EndOfStream)));
    }

    #[test]
    fn zero_noise_labels_are_exact() {
        let task = GroundTruthTask::discrete(vec![0.25, 0.75], 0.0).unwrap();
        let mut r = rng();
        for _ in 0..100 {
            assert_eq!(task.query_label(&Arrival::Type(1), &mut r).unwrap(), 0.75);
        }
        let branin = GroundTruthTask::continuous(TestFunction::Branin, 0.0).unwrap();
        let a = Arrival::Point(vec![std::f64::consts::PI, 2.275]);
        assert!((branin.query_label(&a, &mut r).unwrap() - 0.397_887).abs() < 1e-4);
        let hart = GroundTruthTask::continuous(TestFunction::Hartmann6, 0.0).unwrap();
        let a = Arrival::Point(vec![
            0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573,
        ]);
        assert!((hart.query_label(&a, &mut r).unwrap() + 3.32237).abs() < 1e-4);
    }

    #[test]
    fn true_value_is_label_mean() {
        let task = GroundTruthTask::continuous(TestFunction::Branin, 5.0).unwrap();
        let a = Arrival::Point(vec![1.0, 4.0]);
        let truth = task.true_value(&a).unwrap();
        let mut r = rng();
        let n = 100_000;
        let mean = (0..n)
            .map(|_| task.query_label(&a, &mut r).unwrap())
            .sum::<f64>()
            / n as f64;
        let se = 5.0 / (n as f64).sqrt();
        assert!((mean - truth).abs() <= 3.0 * se, "{mean} vs {truth}");
    }

    #[test]
    fn mismatched_arrival() {
        let task = GroundTruthTask::discrete(vec![0.5], 0.1).unwrap();
        assert!(task.true_value(&Arrival::Point(vec![0.1])).is_err());
        assert!(task.true_value(&Arrival::Type(1)).is_err());
    }

    #[test]
    fn random_means_in_unit_interval() {
        let mut r = rng();
        let GroundTruthTask::DiscreteGaussian { means, .. } =
            GroundTruthTask::random_discrete(100, 0.1, &mut r).unwrap()
        else {
            panic!()
        };
        assert!(means.iter().all(|m| (0.0..1.0).contains(m)));
    }

    #[test]
    fn display_repr() {
        assert_eq!(Arrival::Type(4).to_string(), "4");
        assert_eq!(Arrival::Point(vec![0.5, -1.25]).to_string(), "0.5;-1.25");
    }
}

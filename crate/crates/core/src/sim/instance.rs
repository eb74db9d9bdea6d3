use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;

use crate::construction::{normalize_design, DesignMatrix};
use crate::error::{Error, Result};
use crate::filter::GapChoice;
use crate::lasso::GridSpec;
use crate::rng::{gaussian_matrix, seeded, standard_normal};
use crate::statistics::StatisticKind;

use super::trial::Method;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DesignKind {
    /// i.i.d. `N(0, 1)` entries.
    GaussianIid,
    /// Rows with unit variances and pairwise correlation `ρ`; columns are
    /// centered before normalization.
    EqualCorrelation(f64),
    /// Rows with `Cov(X_j, X_k) = ρ^|j-k|`.
    TaperedCorrelation(f64),
    /// Orthonormal columns.
    Orthogonal,
}

impl fmt::Display for DesignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DesignKind::GaussianIid => f.write_str("gaussian"),
            DesignKind::EqualCorrelation(r) => write!(f, "equal-correlation({r})"),
            DesignKind::TaperedCorrelation(r) => write!(f, "tapered-correlation({r})"),
            DesignKind::Orthogonal => f.write_str("orthogonal"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalLayout {
    /// `k` uniformly drawn positions with independent fair-coin signs.
    RandomSigned,
    /// The first `k` features, all positive.
    LeadingPositive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub amplitude: f64,
    pub design: DesignKind,
    pub layout: SignalLayout,
    /// Noise standard deviation, known to the BHq baselines.
    pub sigma: f64,
    pub q: f64,
    pub trials: usize,
    pub methods: Vec<Method>,
    pub statistic: StatisticKind,
    pub gap: GapChoice,
    pub grid: GridSpec,
    pub seed: u64,
    /// Share one instance per trial across all methods.
    pub paired: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            n: 3000,
            p: 1000,
            k: 30,
            amplitude: 3.5,
            design: DesignKind::GaussianIid,
            layout: SignalLayout::RandomSigned,
            sigma: 1.0,
            q: 0.2,
            trials: 600,
            methods: vec![
                Method::Knockoff,
                Method::KnockoffPlus,
                Method::Bhq,
                Method::BhqLog,
                Method::BhqWhite,
            ],
            statistic: StatisticKind::LassoSignedMax,
            gap: GapChoice::Sdp,
            grid: GridSpec::default(),
            seed: 1,
            paired: false,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        crate::error::check_level(self.q)?;
        if self.p == 0 || self.n < self.p {
            return Err(Error::DimensionError(format!(
                "need n >= p >= 1, got n = {}, p = {}",
                self.n, self.p
            )));
        }
        if self.k > self.p {
            return Err(Error::InvalidArgument(format!("k = {} exceeds p = {}", self.k, self.p)));
        }
        if !(self.amplitude.is_finite() && self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::InvalidArgument(
                "amplitude and sigma must be finite, sigma > 0".into(),
            ));
        }
        match self.design {
            DesignKind::EqualCorrelation(r) if !(0.0..1.0).contains(&r) => Err(Error::InvalidArgument(format!(
                "equal correlation must lie in [0, 1), got {r}"
            ))),
            DesignKind::TaperedCorrelation(r) if !(r > -1.0 && r < 1.0) => Err(Error::InvalidArgument(format!(
                "tapered correlation must lie in (-1, 1), got {r}"
            ))),
            _ => Ok(()),
        }
    }
}

/// One simulated regression problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub design: DesignMatrix,
    pub beta: DVector<f64>,
    pub y: DVector<f64>,
    /// Indices with nonzero coefficient, ascending.
    pub support: Vec<usize>,
}

impl Instance {
    pub fn is_signal(&self, j: usize) -> bool {
        self.support.binary_search(&j).is_ok()
    }
}

fn raw_design(spec: &ExperimentSpec, rng: &mut crate::rng::SeededRng) -> DMatrix<f64> {
    let (n, p) = (spec.n, spec.p);
    match spec.design {
        DesignKind::GaussianIid => gaussian_matrix(rng, n, p),
        DesignKind::EqualCorrelation(rho) => {
            let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
            let mut x = DMatrix::zeros(n, p);
            for i in 0..n {
                let shared = standard_normal(rng);
                for j in 0..p {
                    x[(i, j)] = a * shared + b * standard_normal(rng);
                }
            }
            for mut col in x.column_iter_mut() {
                let mean = col.mean();
                col.add_scalar_mut(-mean);
            }
            x
        }
        DesignKind::TaperedCorrelation(rho) => {
            let b = (1.0 - rho * rho).sqrt();
            let mut x = DMatrix::zeros(n, p);
            for i in 0..n {
                let mut prev = standard_normal(rng);
                x[(i, 0)] = prev;
                for j in 1..p {
                    prev = rho * prev + b * standard_normal(rng);
                    x[(i, j)] = prev;
                }
            }
            x
        }
        DesignKind::Orthogonal => gaussian_matrix(rng, n, p).qr().q(),
    }
}

/// Draws a design, a coefficient vector with `k` nonzeros of magnitude
/// `amplitude`, and `y = Xβ + σ z`.
pub fn generate_instance(spec: &ExperimentSpec, seed: u64) -> Result<Instance> {
    spec.validate()?;
    let mut rng = seeded(seed);
    let design = normalize_design(&raw_design(spec, &mut rng))?;
    let mut beta = DVector::zeros(spec.p);
    let support: Vec<usize> = match spec.layout {
        SignalLayout::LeadingPositive => {
            for j in 0..spec.k {
                beta[j] = spec.amplitude;
            }
            (0..spec.k).collect()
        }
        SignalLayout::RandomSigned => {
            let mut idx = sample(&mut rng, spec.p, spec.k).into_vec();
            idx.sort_unstable();
            for &j in &idx {
                beta[j] = if rng.random::<bool>() {
                    spec.amplitude
                } else {
                    -spec.amplitude
                };
            }
            idx
        }
    };
    let mut y = design.values() * &beta;
    for v in y.iter_mut() {
        *v += spec.sigma * standard_normal(&mut rng);
    }
    Ok(Instance {
        design,
        beta,
        y,
        support,
    })
}

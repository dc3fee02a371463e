//! Offline, seeded stand-in for the LLM generator: a multivariate Gaussian
//! with the profile's means, SDs and (repaired) correlations, truncated to
//! the observed ranges.
//!
//! A continuous value that lands outside its range is redrawn from its
//! Gaussian conditional given the rest of the row, which keeps the row's
//! correlation structure intact. Whole-row rejection would instead thin out
//! the tails of every column at once and visibly weaken the correlations on
//! tightly bounded data.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{Dataset, TableSchema};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_lower, nearest_pd, PD_EPS};
use crate::profile::DatasetProfile;

/// Redraw rounds allowed per row before out-of-range values are clamped.
pub const MAX_ROW_ATTEMPTS: usize = 100;

struct ColumnPlan {
    mean: f64,
    sd: f64,
    lo: f64,
    hi: f64,
    /// Snap targets for ordinal columns; empty for continuous ones.
    levels: Vec<f64>,
}

fn plan_columns(p: &DatasetProfile, schema: &TableSchema) -> Result<Vec<ColumnPlan>> {
    if p.stats.len() != schema.len() || p.names().zip(schema.names()).any(|(a, b)| a != b) {
        return Err(Error::InvalidProfile(
            "profile columns do not match the schema".into(),
        ));
    }
    p.stats
        .iter()
        .zip(schema.columns())
        .map(|(s, col)| {
            if ![s.mean, s.sd, s.min, s.max].iter().all(|v| v.is_finite())
                || s.sd < 0.0
                || s.min > s.max
            {
                return Err(Error::InvalidProfile(format!(
                    "column `{}` has invalid statistics",
                    s.name
                )));
            }
            let lo = col.hard_min.map_or(s.min, |h| s.min.max(h));
            let hi = col.hard_max.map_or(s.max, |h| s.max.min(h));
            let levels = if col.is_ordinal() {
                let observed: Vec<f64> = s
                    .observed_levels()
                    .into_iter()
                    .filter(|l| col.admits_level(*l))
                    .collect();
                if observed.is_empty() {
                    col.levels().to_vec()
                } else {
                    observed
                }
            } else {
                Vec::new()
            };
            Ok(ColumnPlan {
                mean: s.mean,
                sd: s.sd,
                lo: lo.min(hi),
                hi,
                levels,
            })
        })
        .collect()
}

fn correlation_matrix(p: &DatasetProfile, plans: &[ColumnPlan]) -> DMatrix<f64> {
    let k = plans.len();
    let names: Vec<&str> = p.names().collect();
    DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            1.0
        } else if plans[i].sd == 0.0 || plans[j].sd == 0.0 {
            0.0
        } else {
            p.r(names[i], names[j]).unwrap_or(0.0)
        }
    })
}

/// Regression of each latent coordinate on the others: coefficients and
/// residual SD, read off the precision matrix.
struct Conditionals {
    coef: DMatrix<f64>,
    sd: Vec<f64>,
}

impl Conditionals {
    fn new(corr: &DMatrix<f64>) -> Result<Self> {
        let precision = nalgebra::Cholesky::new(corr.clone())
            .ok_or_else(|| Error::NotRepairable("correlation matrix is not invertible".into()))?
            .inverse();
        let k = corr.nrows();
        let coef = DMatrix::from_fn(k, k, |j, i| {
            if i == j {
                0.0
            } else {
                -precision[(j, i)] / precision[(j, j)]
            }
        });
        let sd = (0..k).map(|j| precision[(j, j)].recip().sqrt()).collect();
        Ok(Conditionals { coef, sd })
    }

    fn redraw(&self, z: &mut DVector<f64>, j: usize, rng: &mut ChaCha8Rng) {
        let mean = self.coef.row(j).dot(&z.transpose());
        let noise: f64 = StandardNormal.sample(rng);
        z[j] = mean + self.sd[j] * noise;
    }
}

fn snap(value: f64, levels: &[f64]) -> f64 {
    levels
        .iter()
        .copied()
        .min_by(|a, b| (a - value).abs().total_cmp(&(b - value).abs()))
        .expect("ordinal columns have at least one level")
}

/// Draws `n` rows. Identical `(profile, schema, n, seed)` gives an identical
/// dataset.
pub fn local_sample(
    p: &DatasetProfile,
    schema: &TableSchema,
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidSpec("row count must be at least 1".into()));
    }
    let plans = plan_columns(p, schema)?;
    let corr = nearest_pd(&correlation_matrix(p, &plans), PD_EPS)?;
    let chol = cholesky_lower(&corr)?;
    let k = plans.len();

    let conditionals = Conditionals::new(&corr)?;
    // Latent bounds; zero-SD and ordinal columns are never redrawn.
    let bounds: Vec<Option<(f64, f64)>> = plans
        .iter()
        .map(|plan| {
            (plan.levels.is_empty() && plan.sd > 0.0).then(|| {
                (
                    (plan.lo - plan.mean) / plan.sd,
                    (plan.hi - plan.mean) / plan.sd,
                )
            })
        })
        .collect();
    let out_of_range =
        |z: &DVector<f64>, j: usize| bounds[j].is_some_and(|(lo, hi)| !(lo..=hi).contains(&z[j]));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns = vec![Vec::with_capacity(n); k];
    for _ in 0..n {
        let mut z = &chol * DVector::from_fn(k, |_, _| StandardNormal.sample(&mut rng));
        for _ in 1..MAX_ROW_ATTEMPTS {
            if !(0..k).any(|j| out_of_range(&z, j)) {
                break;
            }
            for j in 0..k {
                if out_of_range(&z, j) {
                    conditionals.redraw(&mut z, j, &mut rng);
                }
            }
        }
        for (j, (plan, col)) in plans.iter().zip(&mut columns).enumerate() {
            let v = plan.mean + plan.sd * z[j];
            let v = if plan.levels.is_empty() {
                v.clamp(plan.lo, plan.hi)
            } else {
                snap(v, &plan.levels)
            };
            col.push(v);
        }
    }
    Dataset::from_columns(schema.clone(), columns)
}

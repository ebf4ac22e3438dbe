use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::Categorical;
use crate::error::{Error, Result};

/// Minimum expected count per (pooled) cell.
pub const MIN_EXPECTED: f64 = 5.0;

/// Pearson chi-square statistic with its upper-tail p-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    pub statistic: f64,
    pub p_value: f64,
    pub dof: usize,
    /// Cells remaining after pooling.
    pub cells: usize,
}

/// Groups cell indices so each group has an expected count of at least
/// [`MIN_EXPECTED`]. Small cells are merged into one pool; an undersized pool
/// absorbs the smallest regular cell.
fn pool_cells(expected: &[f64]) -> Result<Vec<Vec<usize>>> {
    let (mut pool, mut groups): (Vec<usize>, Vec<usize>) =
        (0..expected.len()).partition(|&i| expected[i] < MIN_EXPECTED);
    let pool_mass = |pool: &[usize]| pool.iter().map(|&i| expected[i]).sum::<f64>();
    if !pool.is_empty() && pool_mass(&pool) < MIN_EXPECTED {
        let smallest = groups
            .iter()
            .enumerate()
            .min_by(|a, b| expected[*a.1].total_cmp(&expected[*b.1]))
            .map(|(pos, _)| pos)
            .ok_or_else(|| {
                Error::InsufficientSamples(format!(
                    "total expected count {:.3} is below {MIN_EXPECTED}",
                    pool_mass(&pool)
                ))
            })?;
        pool.push(groups.remove(smallest));
    }
    let mut cells: Vec<Vec<usize>> = groups.into_iter().map(|i| vec![i]).collect();
    if !pool.is_empty() {
        cells.push(pool);
    }
    if cells.len() < 2 {
        return Err(Error::InsufficientSamples(format!(
            "only {} cell(s) remain after pooling",
            cells.len()
        )));
    }
    Ok(cells)
}

fn upper_tail(statistic: f64, dof: usize) -> f64 {
    if statistic <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(dof as f64)
        .map(|d| d.sf(statistic))
        .unwrap_or(f64::NAN)
}

/// Pearson goodness-of-fit of `counts` against `expected` at sample size `n`.
pub fn chi_square_gof(counts: &[u64], expected: &Categorical, n: u64) -> Result<GofResult> {
    if counts.len() != expected.vocab_size() {
        return Err(Error::DimensionMismatch(counts.len(), expected.vocab_size()));
    }
    let total: u64 = counts.iter().sum();
    if total != n {
        return Err(Error::InvalidDistribution(format!("counts sum to {total} but n = {n}")));
    }
    let nf = n as f64;
    let exp_counts: Vec<f64> = expected.probs().iter().map(|e| e * nf).collect();
    let cells = pool_cells(&exp_counts)?;
    let statistic = cells
        .iter()
        .map(|cell| {
            let obs: f64 = cell.iter().map(|&i| counts[i] as f64).sum();
            let exp: f64 = cell.iter().map(|&i| exp_counts[i]).sum();
            (obs - exp).powi(2) / exp
        })
        .sum::<f64>();
    let dof = cells.len() - 1;
    Ok(GofResult { statistic, p_value: upper_tail(statistic, dof), dof, cells: cells.len() })
}

/// Two-sample chi-square test of homogeneity: were `a` and `b` drawn from the
/// same categorical law?
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> Result<GofResult> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(a.len(), b.len()));
    }
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    if na == 0 || nb == 0 {
        return Err(Error::InsufficientSamples("empty sample".into()));
    }
    let (na, nb) = (na as f64, nb as f64);
    let n = na + nb;
    let col: Vec<f64> = a.iter().zip(b).map(|(&x, &y)| (x + y) as f64).collect();
    // The binding expected count of a column is the one in the smaller sample.
    let binding: Vec<f64> = col.iter().map(|c| c * na.min(nb) / n).collect();
    let cells = pool_cells(&binding)?;
    let mut statistic = 0.0;
    for cell in &cells {
        let c: f64 = cell.iter().map(|&i| col[i]).sum();
        let oa: f64 = cell.iter().map(|&i| a[i] as f64).sum();
        let ob: f64 = cell.iter().map(|&i| b[i] as f64).sum();
        let ea = c * na / n;
        let eb = c * nb / n;
        statistic += (oa - ea).powi(2) / ea + (ob - eb).powi(2) / eb;
    }
    let dof = cells.len() - 1;
    Ok(GofResult { statistic, p_value: upper_tail(statistic, dof), dof, cells: cells.len() })
}

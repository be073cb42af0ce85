use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Bumped whenever a CSV layout changes.
pub const SCHEMA_VERSION: u32 = 1;

/// Named real-valued columns with rectangular rows.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTable {
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl MetricTable {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn columns_mut(&mut self) -> &mut [String] {
        &mut self.columns
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Shape {
                expected: self.columns.len(),
                got: row.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Header line, then one line per row with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    s.push(',');
                }
                let _ = write!(s, "{v:.16e}");
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Fraction of `values` at or below each grid point.
pub fn empirical_cdf(values: &[f64], grid: &[f64]) -> Result<MetricTable> {
    if values.is_empty() {
        return Err(Error::EmptyInput("empirical_cdf values"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::NonFinite("empirical_cdf values"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut t = MetricTable::new(&["x", "cdf"]);
    for &x in grid {
        let below = sorted.partition_point(|v| *v <= x);
        t.push(vec![x, below as f64 / n])?;
    }
    Ok(t)
}

/// Normalized histogram of integer values over `0..=max`, where `max` is the
/// larger of `at_least` and the largest sample.
pub fn integer_pdf(values: &[usize], at_least: usize) -> Result<MetricTable> {
    if values.is_empty() {
        return Err(Error::EmptyInput("integer_pdf values"));
    }
    let max = values.iter().copied().max().unwrap_or(0).max(at_least);
    let mut counts = vec![0usize; max + 1];
    for &v in values {
        counts[v] += 1;
    }
    let n = values.len() as f64;
    let mut t = MetricTable::new(&["value", "probability"]);
    for (v, c) in counts.into_iter().enumerate() {
        t.push(vec![v as f64, c as f64 / n])?;
    }
    Ok(t)
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn csv_layout() {
        let mut t = MetricTable::new(&["a", "b"]);
        t.push(vec![1.0, 0.1]).unwrap();
        assert!(t.push(vec![1.0]).is_err());
        assert_eq!(t.to_csv(), "a,b\n1.0000000000000000e0,1.0000000000000001e-1\n");
    }

    #[test]
    fn constant_sample_steps_at_the_value() {
        let t = empirical_cdf(&[2.5; 10], &[2.0, 2.4999, 2.5, 3.0]).unwrap();
        assert_eq!(t.column("cdf").unwrap(), vec![0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn empty_inputs_error() {
        assert!(matches!(empirical_cdf(&[], &[0.0]), Err(Error::EmptyInput(_))));
        assert!(matches!(integer_pdf(&[], 3), Err(Error::EmptyInput(_))));
        assert!(empirical_cdf(&[f64::NAN], &[0.0]).is_err());
    }

    #[test]
    fn uniform_cdf_within_dkw_band() {
        // DKW: P(sup |F_n - F| > 0.01) <= 2 exp(-2 n 1e-4) ~ 4e-9 at n = 1e5.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>()).collect();
        let grid = linear_grid(0.0, 1.0, 1001);
        let t = empirical_cdf(&v, &grid).unwrap();
        for r in t.rows() {
            assert!((r[1] - r[0]).abs() <= 0.01, "{r:?}");
        }
    }

    #[test]
    fn pdf_sums_to_one() {
        let t = integer_pdf(&[1, 1, 2, 5], 6).unwrap();
        assert_eq!(t.len(), 7);
        let p = t.column("probability").unwrap();
        assert_eq!(p[1], 0.5);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn cdf_is_nondecreasing_and_reaches_one(
            v in prop::collection::vec(-1e3f64..1e3, 1..200),
        ) {
            let mut grid = linear_grid(-1e3, 1e3, 257);
            grid.sort_by(f64::total_cmp);
            let c = empirical_cdf(&v, &grid).unwrap().column("cdf").unwrap();
            for w in c.windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
            prop_assert_eq!(*c.last().unwrap(), 1.0);
        }
    }
}

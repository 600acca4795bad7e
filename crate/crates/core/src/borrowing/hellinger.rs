//! Hellinger distance between posterior densities.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Result};
use crate::inference::PosteriorSummary;

/// Closed-form Hellinger distance between `N(m1, s1²)` and `N(m2, s2²)`:
///
/// ```text
/// d² = 1 - sqrt(2 s1 s2 / (s1² + s2²)) exp(-(m1 - m2)² / (4 (s1² + s2²)))
/// ```
///
/// Evaluated as `-expm1(log BC)` so that nearly identical inputs keep full
/// relative precision; the result is exactly symmetric in its arguments.
pub fn hellinger_normal(m1: f64, s1: f64, m2: f64, s2: f64) -> Result<f64> {
    if !(s1 > 0.0 && s2 > 0.0 && s1.is_finite() && s2.is_finite()) || !m1.is_finite() || !m2.is_finite() {
        return invalid_arg(format!("normal moments must be finite with sd > 0: ({m1}, {s1}), ({m2}, {s2})"));
    }
    let sum_sq = s1 * s1 + s2 * s2;
    let ln_bc = -0.5 * ((s1 - s2).powi(2) / (2.0 * s1 * s2)).ln_1p() - (m1 - m2).powi(2) / (4.0 * sum_sq);
    Ok((-ln_bc.exp_m1()).clamp(0.0, 1.0).sqrt())
}

/// A density tabulated on increasing support points.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub points: Vec<f64>,
    pub density: Vec<f64>,
}

/// Tolerance on the trapezoid mass of a density grid.
pub const NORMALISATION_TOLERANCE: f64 = 1e-6;

pub fn trapezoid(points: &[f64], values: &[f64]) -> f64 {
    points
        .windows(2)
        .zip(values.windows(2))
        .map(|(x, f)| 0.5 * (x[1] - x[0]) * (f[0] + f[1]))
        .sum()
}

impl DensityGrid {
    pub fn new(points: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if points.len() < 2 || points.len() != density.len() {
            return invalid_arg("a density grid needs at least two points and one value per point");
        }
        if points.windows(2).any(|w| !(w[1] > w[0])) || points.iter().any(|x| !x.is_finite()) {
            return invalid_arg("grid points must be finite and strictly increasing");
        }
        if density.iter().any(|&f| !(f >= 0.0 && f.is_finite())) {
            return invalid_arg("densities must be finite and non-negative");
        }
        let mass = trapezoid(&points, &density);
        if (mass - 1.0).abs() > NORMALISATION_TOLERANCE {
            return invalid_arg(format!("density integrates to {mass}, not 1"));
        }
        Ok(DensityGrid { points, density })
    }

    /// Evenly spaced points covering `[lo, hi]`.
    pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        let step = (hi - lo) / (n - 1) as f64;
        (0..n).map(|i| lo + step * i as f64).collect()
    }

    /// `N(mean, sd²)` evaluated on `points`, renormalised by the trapezoid
    /// rule.
    pub fn normal(mean: f64, sd: f64, points: Vec<f64>) -> Result<Self> {
        let c = 1.0 / (sd * (2.0 * std::f64::consts::PI).sqrt());
        let density: Vec<f64> = points.iter().map(|x| c * (-0.5 * ((x - mean) / sd).powi(2)).exp()).collect();
        Self::renormalised(points, density)
    }

    /// Gaussian kernel density estimate of `draws` with Silverman's
    /// bandwidth, renormalised on `points`.
    pub fn kde(draws: &[f64], points: Vec<f64>) -> Result<Self> {
        let summary = PosteriorSummary::from_draws(draws.to_vec(), 1, 0.5);
        let iqr = summary.upper - summary.lower;
        let spread = summary.sd.min(iqr / 1.349);
        let spread = if spread > 0.0 { spread } else { summary.sd };
        if !(spread > 0.0) {
            return invalid_arg("kernel density estimate needs draws with positive spread");
        }
        let h = 0.9 * spread * (draws.len() as f64).powf(-0.2);
        let c = 1.0 / (draws.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
        let density: Vec<f64> = points
            .iter()
            .map(|x| c * draws.iter().map(|d| (-0.5 * ((x - d) / h).powi(2)).exp()).sum::<f64>())
            .collect();
        Self::renormalised(points, density)
    }

    fn renormalised(points: Vec<f64>, mut density: Vec<f64>) -> Result<Self> {
        let mass = trapezoid(&points, &density);
        if !(mass > 0.0) {
            return invalid_arg("density has no mass on the grid");
        }
        density.iter_mut().for_each(|f| *f /= mass);
        DensityGrid::new(points, density)
    }
}

/// Hellinger distance by trapezoid quadrature of
/// `sqrt(½ ∫ (sqrt(f) - sqrt(g))²)`. Both grids must share support points.
pub fn hellinger_numeric(a: &DensityGrid, b: &DensityGrid) -> Result<f64> {
    if a.points != b.points {
        return invalid_arg("density grids have different support points");
    }
    let integrand: Vec<f64> = a
        .density
        .iter()
        .zip(&b.density)
        .map(|(f, g)| (f.sqrt() - g.sqrt()).powi(2))
        .collect();
    Ok((0.5 * trapezoid(&a.points, &integrand)).clamp(0.0, 1.0).sqrt())
}

/// Symmetric `K × K` matrix of pairwise distances with a zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HellingerMatrix {
    pub d: Vec<Vec<f64>>,
}

impl HellingerMatrix {
    pub fn new(d: Vec<Vec<f64>>) -> Result<Self> {
        let k = d.len();
        for (i, row) in d.iter().enumerate() {
            if row.len() != k {
                return invalid_arg("distance matrix is not square");
            }
            if row[i] != 0.0 {
                return invalid_arg("distance matrix diagonal must be zero");
            }
            for (j, &v) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) || v != d[j][i] {
                    return invalid_arg(format!("entry ({i}, {j}) = {v} breaks symmetry or the [0, 1] range"));
                }
            }
        }
        Ok(HellingerMatrix { d })
    }

    pub fn zeros(k: usize) -> Self {
        HellingerMatrix { d: vec![vec![0.0; k]; k] }
    }

    /// Distances between normal approximations (moment matched) of the
    /// given posteriors.
    pub fn from_summaries(summaries: &[PosteriorSummary]) -> Result<Self> {
        let k = summaries.len();
        let mut d = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in i + 1..k {
                let (a, b) = (&summaries[i], &summaries[j]);
                let v = hellinger_normal(a.mean, a.sd, b.mean, b.sd)?;
                d[i][j] = v;
                d[j][i] = v;
            }
        }
        Ok(HellingerMatrix { d })
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i][j]
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_square_csv(&self.d, writer)
    }
}

pub(crate) fn write_square_csv<W: Write>(m: &[Vec<f64>], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["subtrial".to_string()];
    header.extend((1..=m.len()).map(|j| j.to_string()));
    wtr.write_record(&header)?;
    for (i, row) in m.iter().enumerate() {
        let mut rec = vec![(i + 1).to_string()];
        rec.extend(row.iter().map(f64::to_string));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn closed_form_examples() {
        assert_eq!(hellinger_normal(0.0, 1.0, 0.0, 1.0).unwrap(), 0.0);
        // d² = 1 - exp(-1/8)
        let d = hellinger_normal(0.0, 1.0, 1.0, 1.0).unwrap();
        assert!((d - 0.342_79).abs() < 1e-5, "{d}");
        // d² = 1 - sqrt(4/5)
        let d = hellinger_normal(0.0, 1.0, 0.0, 2.0).unwrap();
        assert!((d - 0.324_92).abs() < 1e-5, "{d}");
    }

    #[test]
    fn rejects_non_positive_sd() {
        assert!(hellinger_normal(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(hellinger_normal(0.0, 1.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn numeric_examples() {
        let grid = DensityGrid::linspace(-12.0, 13.0, 20_001);
        let a = DensityGrid::normal(0.0, 1.0, grid.clone()).unwrap();
        let b = DensityGrid::normal(1.0, 1.0, grid).unwrap();
        assert_eq!(hellinger_numeric(&a, &a).unwrap(), 0.0);
        let d = hellinger_numeric(&a, &b).unwrap();
        assert!((d - 0.342_79).abs() < 1e-5, "{d}");
    }

    #[test]
    fn disjoint_supports_are_at_distance_one() {
        let points = DensityGrid::linspace(0.0, 4.0, 401);
        let box_density = |lo: f64, hi: f64| {
            let raw: Vec<f64> = points.iter().map(|&x| if x >= lo && x <= hi { 1.0 } else { 0.0 }).collect();
            let mass = trapezoid(&points, &raw);
            DensityGrid::new(points.clone(), raw.iter().map(|v| v / mass).collect()).unwrap()
        };
        let d = hellinger_numeric(&box_density(0.0, 1.5), &box_density(2.5, 4.0)).unwrap();
        assert!((d - 1.0).abs() < 1e-12, "{d}");
    }

    #[test]
    fn grid_validation() {
        let pts = DensityGrid::linspace(0.0, 1.0, 11);
        assert!(DensityGrid::new(pts.clone(), vec![2.0; 11]).is_err());
        assert!(DensityGrid::new(pts.clone(), vec![1.0; 10]).is_err());
        let a = DensityGrid::new(pts.clone(), vec![1.0; 11]).unwrap();
        let b = DensityGrid::new(DensityGrid::linspace(0.0, 1.0, 21), vec![1.0; 21]).unwrap();
        assert!(hellinger_numeric(&a, &b).is_err());
        let mut neg = vec![1.0; 11];
        neg[3] = -0.1;
        neg[4] = 1.1;
        assert!(DensityGrid::new(pts, neg).is_err());
    }

    #[test]
    fn matrix_validation() {
        assert!(HellingerMatrix::new(vec![vec![0.0, 0.2], vec![0.2, 0.0]]).is_ok());
        assert!(HellingerMatrix::new(vec![vec![0.0, 0.2], vec![0.3, 0.0]]).is_err());
        assert!(HellingerMatrix::new(vec![vec![0.1, 0.2], vec![0.2, 0.0]]).is_err());
        assert!(HellingerMatrix::new(vec![vec![0.0, 1.2], vec![1.2, 0.0]]).is_err());
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(m1 in -5.0f64..5.0, s1 in 0.01f64..5.0, m2 in -5.0f64..5.0, s2 in 0.01f64..5.0) {
            let d = hellinger_normal(m1, s1, m2, s2).unwrap();
            prop_assert_eq!(d, hellinger_normal(m2, s2, m1, s1).unwrap());
            prop_assert!((0.0..=1.0).contains(&d));
            if (m1, s1) != (m2, s2) {
                prop_assert!(d > 0.0);
            }
        }
    }
}

//! Small least-squares helpers (f64 only; they post-process simulation output).

use nalgebra::{DMatrix, DVector};

/// Ordinary least-squares line `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Coefficient of determination.
    pub r_squared: f64,
}

pub fn line_fit(points: &[(f64, f64)]) -> LineFit {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let r = sxy / sxx.sqrt() / syy.sqrt();
    let r_squared = if syy > 0.0 { r * r } else { 1.0 };
    LineFit { slope, intercept: my - slope * mx, r_squared }
}

/// Solution of an overdetermined system with its 2-norm condition number.
#[derive(Debug, Clone)]
pub struct LstsqSolution {
    pub coeffs: Vec<f64>,
    pub condition: f64,
}

/// Least squares for the design matrix `rows x cols` given row-major.
pub fn lstsq(design: &[f64], rows: usize, cols: usize, rhs: &[f64]) -> LstsqSolution {
    let a = DMatrix::from_row_slice(rows, cols, design);
    let b = DVector::from_column_slice(rhs);
    let svd = a.svd(true, true);
    let s = &svd.singular_values;
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let smin = s.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let x = svd.solve(&b, 0.0).expect("svd computed with both factors");
    LstsqSolution { coeffs: x.iter().cloned().collect(), condition }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_fit_recovers_exact_line() {
        let pts: Vec<_> = (0..10).map(|i| (i as f64, 3.0 - 0.5 * i as f64)).collect();
        let fit = line_fit(&pts);
        assert!((fit.slope + 0.5).abs() < 1e-14);
        assert!((fit.intercept - 3.0).abs() < 1e-13);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lstsq_solves_square_system() {
        let sol = lstsq(&[2.0, 0.0, 0.0, 4.0], 2, 2, &[2.0, 2.0]);
        assert!((sol.coeffs[0] - 1.0).abs() < 1e-14 && (sol.coeffs[1] - 0.5).abs() < 1e-14);
        assert!((sol.condition - 2.0).abs() < 1e-12);
    }
}

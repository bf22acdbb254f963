use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{dispersion_at_rate, max_diff, CellMesh, EffectiveTensor};
use crate::error::{Error, Result};
use crate::fem::{CoefficientField, Mat2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableOptions {
    /// Target for the midpoint interpolation error (max entry).
    pub tol: f64,
    /// Maximum number of grid bisection rounds.
    pub max_rounds: usize,
}

impl Default for TableOptions {
    fn default() -> Self {
        TableOptions { tol: 1e-3, max_rounds: 3 }
    }
}

/// Sampled map `s ↦ B(s)` with piecewise-linear interpolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BTable {
    pub interpolation: String,
    pub entries: Vec<EffectiveTensor>,
    /// Last measured `max_mid ‖B_interp(s_mid) − B(s_mid)‖_max`.
    pub interp_error: f64,
    pub tol: f64,
    pub rounds: usize,
}

fn lerp(a: &Mat2, b: &Mat2, w: f64) -> Mat2 {
    let mut m = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = (1.0 - w) * a[i][j] + w * b[i][j];
        }
    }
    m
}

impl BTable {
    pub fn samples(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.s.unwrap_or(0.0)).collect()
    }

    pub fn s_range(&self) -> (f64, f64) {
        let s = self.samples();
        (s[0], s[s.len() - 1])
    }

    /// Interpolated `B(s)`; `TableRange` outside the sampled interval.
    pub fn eval(&self, s: f64) -> Result<Mat2> {
        let (lo, hi) = self.s_range();
        if !(s >= lo && s <= hi) {
            return Err(Error::TableRange { s, lo, hi });
        }
        let samples = self.samples();
        let k = samples.partition_point(|&x| x <= s).clamp(1, samples.len() - 1);
        let (s0, s1) = (samples[k - 1], samples[k]);
        let w = if s1 > s0 { (s - s0) / (s1 - s0) } else { 0.0 };
        Ok(lerp(&self.entries[k - 1].matrix, &self.entries[k].matrix, w))
    }
}

/// Tabulates `B(H(s))` on `s_grid`, bisecting the grid until the midpoint interpolation
/// error drops below `opts.tol` or `opts.max_rounds` is reached.
pub fn tabulate_b(
    cell: &CellMesh,
    d1: &CoefficientField,
    d2: &CoefficientField,
    exchange: &(dyn Fn(f64) -> f64 + Sync),
    s_grid: &[f64],
    opts: &TableOptions,
) -> Result<BTable> {
    if s_grid.len() < 2 || s_grid[0] != 0.0 || s_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidConfig("s grid must start at 0, be strictly increasing and have ≥ 2 points".into()));
    }
    let compute = |ss: &[f64]| -> Result<Vec<EffectiveTensor>> {
        ss.par_iter()
            .map(|&s| {
                let mut t = dispersion_at_rate(cell, d1, d2, exchange(s))?;
                t.s = Some(s);
                Ok(t)
            })
            .collect()
    };
    let mut entries = compute(s_grid)?;
    let mut round = 0;
    loop {
        let mids: Vec<f64> = entries.windows(2).map(|w| 0.5 * (w[0].s.unwrap() + w[1].s.unwrap())).collect();
        let direct = compute(&mids)?;
        let err = entries
            .windows(2)
            .zip(&direct)
            .map(|(w, d)| max_diff(&lerp(&w[0].matrix, &w[1].matrix, 0.5), &d.matrix))
            .fold(0.0, f64::max);
        if err <= opts.tol || round >= opts.max_rounds {
            return Ok(BTable {
                interpolation: "piecewise_linear_clamped".into(),
                entries,
                interp_error: err,
                tol: opts.tol,
                rounds: round,
            });
        }
        let mut merged = Vec::with_capacity(entries.len() + direct.len());
        let mut it = direct.into_iter();
        for e in entries.into_iter() {
            merged.push(e);
            if let Some(m) = it.next() {
                merged.push(m);
            }
        }
        entries = merged;
        round += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::sym_eigenvalues;
    use crate::geometry::InclusionSpec;

    fn cell() -> CellMesh {
        CellMesh::build(&InclusionSpec::disc([0.5, 0.5], 0.25), 0.1).unwrap()
    }

    fn langmuir(s: f64) -> f64 {
        s.max(0.0) / (1.0 + s.max(0.0))
    }

    #[test]
    fn zero_exchange_gives_constant_table() {
        let c = cell();
        let (d1, d2) = (CoefficientField::identity(), CoefficientField::constant([[2.0, 0.0], [0.0, 1.0]]).unwrap());
        let t = tabulate_b(&c, &d1, &d2, &|_| 0.0, &[0.0, 1.0, 2.0], &TableOptions::default()).unwrap();
        assert_eq!(t.rounds, 0);
        for e in &t.entries {
            assert_eq!(e.matrix, t.entries[0].matrix);
        }
    }

    #[test]
    fn langmuir_table_trend_and_interpolation() {
        let c = cell();
        let (d1, d2) = (CoefficientField::identity(), CoefficientField::constant([[2.0, 0.0], [0.0, 1.0]]).unwrap());
        let opts = TableOptions { tol: 1e-4, max_rounds: 2 };
        let t = tabulate_b(&c, &d1, &d2, &langmuir, &[0.0, 0.5, 1.0, 2.0, 4.0], &opts).unwrap();
        assert!(t.interp_error <= opts.tol, "{}", t.interp_error);
        let diag: Vec<f64> = t.entries.iter().map(|e| e.matrix[0][0]).collect();
        let increasing = diag.windows(2).all(|w| w[1] >= w[0]);
        let decreasing = diag.windows(2).all(|w| w[1] <= w[0]);
        assert!(increasing || decreasing, "{diag:?}");
        // interpolated matrices stay symmetric and no less coercive than their neighbors
        let s = t.samples();
        for w in s.windows(2) {
            let m = t.eval(0.37 * w[0] + 0.63 * w[1]).unwrap();
            assert_eq!(m[0][1], m[1][0]);
            let lo = t.eval(w[0]).unwrap();
            let hi = t.eval(w[1]).unwrap();
            let bound = sym_eigenvalues(&lo).0.min(sym_eigenvalues(&hi).0);
            assert!(sym_eigenvalues(&m).0 >= (1.0 - 1e-6) * bound);
        }
        assert!(matches!(t.eval(4.5), Err(Error::TableRange { .. })));
        assert!(matches!(t.eval(-0.1), Err(Error::TableRange { .. })));
    }

    #[test]
    fn saturation_limit() {
        let c = cell();
        let (d1, d2) = (CoefficientField::identity(), CoefficientField::constant([[2.0, 0.0], [0.0, 1.0]]).unwrap());
        let limit = dispersion_at_rate(&c, &d1, &d2, 1.0).unwrap();
        let far = dispersion_at_rate(&c, &d1, &d2, langmuir(100.0)).unwrap();
        for i in 0..2 {
            assert!((far.matrix[i][i] - limit.matrix[i][i]).abs() <= 0.02 * limit.matrix[i][i]);
        }
        let near0 = dispersion_at_rate(&c, &d1, &d2, langmuir(0.0)).unwrap();
        assert!(max_diff(&near0.matrix, &limit.matrix) > max_diff(&far.matrix, &limit.matrix));
    }

    #[test]
    fn continuity_in_exchange_rate() {
        let c = cell();
        let (d1, d2) = (CoefficientField::identity(), CoefficientField::constant([[2.0, 0.0], [0.0, 1.0]]).unwrap());
        for rate in [0.0, 1.0, 5.0] {
            let a = dispersion_at_rate(&c, &d1, &d2, rate).unwrap();
            let b = dispersion_at_rate(&c, &d1, &d2, rate + 1e-4).unwrap();
            assert!(max_diff(&a.matrix, &b.matrix) <= 10.0 * 1e-4);
        }
    }

    #[test]
    fn bad_grids_rejected() {
        let c = cell();
        let d = CoefficientField::identity();
        for g in [vec![0.0], vec![0.5, 1.0], vec![0.0, 1.0, 1.0]] {
            assert!(matches!(tabulate_b(&c, &d, &d, &|_| 0.0, &g, &TableOptions::default()), Err(Error::InvalidConfig(_))));
        }
    }
}

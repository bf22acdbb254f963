use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;

/// Dense 2×2 matrix, row-major.
pub type Mat2 = [[f64; 2]; 2];

/// Eigenvalues `(min, max)` of the symmetric part of `m`.
pub fn sym_eigenvalues(m: &Mat2) -> (f64, f64) {
    let a = m[0][0];
    let d = m[1][1];
    let b = 0.5 * (m[0][1] + m[1][0]);
    let mean = 0.5 * (a + d);
    let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    (mean - rad, mean + rad)
}

/// Closed-form coefficient fields available by name from configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientDescriptor {
    Constant { matrix: Mat2 },
    /// `(1 + amplitude·cos(2π y₁))·matrix`.
    Modulated { matrix: Mat2, amplitude: f64 },
    /// `inner` for `y₁ < 1/2`, `outer` otherwise.
    Laminate { inner: Mat2, outer: Mat2 },
    /// User closure supplied through the library API.
    Custom { id: String },
}

/// Y-periodic symmetric matrix field with ellipticity bounds `alpha ≤ λ(D(y)) ≤ beta`.
#[derive(Clone)]
pub struct CoefficientField {
    eval: Arc<dyn Fn(Point) -> Mat2 + Send + Sync>,
    pub alpha: f64,
    pub beta: f64,
    pub descriptor: CoefficientDescriptor,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .field("descriptor", &self.descriptor)
            .finish()
    }
}

fn scale(m: &Mat2, s: f64) -> Mat2 {
    [[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]]
}

fn check_spd(m: &Mat2) -> Result<(f64, f64)> {
    if !m.iter().flatten().all(|v| v.is_finite()) {
        return Err(Error::InvalidConfig(format!("non-finite coefficient matrix {m:?}")));
    }
    if (m[0][1] - m[1][0]).abs() > 1e-12 * m.iter().flatten().fold(1.0f64, |a, v| a.max(v.abs())) {
        return Err(Error::InvalidConfig(format!("coefficient matrix {m:?} is not symmetric")));
    }
    let (lo, hi) = sym_eigenvalues(m);
    if lo <= 0.0 {
        return Err(Error::InvalidConfig(format!("coefficient matrix {m:?} is not positive definite")));
    }
    Ok((lo, hi))
}

impl CoefficientField {
    pub fn constant(matrix: Mat2) -> Result<Self> {
        Self::from_descriptor(&CoefficientDescriptor::Constant { matrix })
    }

    pub fn identity() -> Self {
        Self::scalar(1.0)
    }

    /// `value · I`; panics if `value` is not positive.
    pub fn scalar(value: f64) -> Self {
        Self::constant([[value, 0.0], [0.0, value]]).expect("positive scalar coefficient")
    }

    pub fn from_descriptor(desc: &CoefficientDescriptor) -> Result<Self> {
        match desc.clone() {
            CoefficientDescriptor::Constant { matrix } => {
                let (alpha, beta) = check_spd(&matrix)?;
                Ok(CoefficientField { eval: Arc::new(move |_| matrix), alpha, beta, descriptor: desc.clone() })
            }
            CoefficientDescriptor::Modulated { matrix, amplitude } => {
                let (lo, hi) = check_spd(&matrix)?;
                if !(amplitude.abs() < 1.0) {
                    return Err(Error::InvalidConfig(format!("modulation amplitude {amplitude} must be in (-1, 1)")));
                }
                let a = amplitude.abs();
                Ok(CoefficientField {
                    eval: Arc::new(move |y: Point| scale(&matrix, 1.0 + amplitude * (2.0 * PI * y[0]).cos())),
                    alpha: lo * (1.0 - a),
                    beta: hi * (1.0 + a),
                    descriptor: desc.clone(),
                })
            }
            CoefficientDescriptor::Laminate { inner, outer } => {
                let (l1, h1) = check_spd(&inner)?;
                let (l2, h2) = check_spd(&outer)?;
                Ok(CoefficientField {
                    eval: Arc::new(move |y: Point| if y[0] < 0.5 { inner } else { outer }),
                    alpha: l1.min(l2),
                    beta: h1.max(h2),
                    descriptor: desc.clone(),
                })
            }
            CoefficientDescriptor::Custom { id } => {
                Err(Error::UnknownName(format!("custom coefficient '{id}' must be built through the library API")))
            }
        }
    }

    /// Wraps a user closure; `f` must be Y-periodic and pure. Bounds are checked by
    /// [`validate`](Self::validate).
    pub fn custom(
        id: impl Into<String>,
        f: impl Fn(Point) -> Mat2 + Send + Sync + 'static,
        alpha: f64,
        beta: f64,
    ) -> Self {
        CoefficientField { eval: Arc::new(f), alpha, beta, descriptor: CoefficientDescriptor::Custom { id: id.into() } }
    }

    /// Value at a cell point `y`, reduced to the reference cell first.
    pub fn eval(&self, y: Point) -> Mat2 {
        (self.eval)([y[0] - y[0].floor(), y[1] - y[1].floor()])
    }

    /// Value of the ε-scaled field `D(x/ε)`.
    pub fn eval_scaled(&self, x: Point, epsilon: f64) -> Mat2 {
        self.eval([x[0] / epsilon, x[1] / epsilon])
    }

    /// Constant matrix if the field is constant.
    pub fn as_constant(&self) -> Option<Mat2> {
        match &self.descriptor {
            CoefficientDescriptor::Constant { matrix } => Some(*matrix),
            _ => None,
        }
    }

    /// Samples the field on an `n × n` grid of the cell and checks symmetry and the
    /// ellipticity bounds.
    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.alpha > 0.0 && self.beta >= self.alpha) {
            return Err(Error::InvalidConfig(format!("bad ellipticity bounds [{}, {}]", self.alpha, self.beta)));
        }
        for i in 0..n {
            for j in 0..n {
                let y = [(i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64];
                let m = self.eval(y);
                if (m[0][1] - m[1][0]).abs() > 1e-12 {
                    return Err(Error::InvalidConfig(format!("D({}, {}) is not symmetric", y[0], y[1])));
                }
                let (lo, hi) = sym_eigenvalues(&m);
                let slack = 1e-12 * self.beta;
                if lo < self.alpha - slack || hi > self.beta + slack {
                    return Err(Error::InvalidConfig(format!(
                        "eigenvalues [{lo}, {hi}] of D({}, {}) outside [{}, {}]",
                        y[0], y[1], self.alpha, self.beta
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_of_diagonal() {
        assert_eq!(sym_eigenvalues(&[[2.0, 0.0], [0.0, 1.0]]), (1.0, 2.0));
    }

    #[test]
    fn descriptors_validate() {
        let m = CoefficientField::from_descriptor(&CoefficientDescriptor::Modulated {
            matrix: [[1.0, 0.0], [0.0, 1.0]],
            amplitude: 0.5,
        })
        .unwrap();
        m.validate(16).unwrap();
        assert!((m.eval([0.0, 0.3])[0][0] - 1.5).abs() < 1e-14);
        assert!((m.eval([1.0, 0.3])[0][0] - 1.5).abs() < 1e-14);
        let l = CoefficientField::from_descriptor(&CoefficientDescriptor::Laminate {
            inner: [[1.0, 0.0], [0.0, 1.0]],
            outer: [[3.0, 0.5], [0.5, 2.0]],
        })
        .unwrap();
        l.validate(16).unwrap();
    }

    #[test]
    fn rejects_indefinite_and_asymmetric() {
        assert!(CoefficientField::constant([[1.0, 0.0], [0.0, -1.0]]).is_err());
        assert!(CoefficientField::constant([[1.0, 0.3], [0.0, 1.0]]).is_err());
    }

    #[test]
    fn custom_field_with_wrong_bounds_fails_validation() {
        let f = CoefficientField::custom("wobbly", |y| [[2.0 + y[0], 0.0], [0.0, 2.0]], 1.0, 2.5);
        assert!(f.validate(8).is_err());
        let f = CoefficientField::custom("wobbly", |y| [[2.0 + y[0], 0.0], [0.0, 2.0]], 1.0, 3.0);
        f.validate(8).unwrap();
    }
}

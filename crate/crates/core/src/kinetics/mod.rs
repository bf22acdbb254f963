//! Reaction, surface and exchange kinetics with sampled hypothesis checks.

mod builtin;
mod validate;

pub use builtin::{builtin, parse_kinetics};
pub use validate::{validate, CheckResult, ValidationGrid, ValidationReport};

use std::fmt;
use std::sync::Arc;

use crate::cell_problems::CellMesh;
use crate::error::{Error, Result};
use crate::geometry::{EdgeMarker, Point};

/// `(y, s) ↦ value` for volume and surface reactions.
pub type ReactionFn = Arc<dyn Fn(Point, [f64; 3]) -> f64 + Send + Sync>;
/// `s ↦ H(s)`.
pub type ExchangeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Constants attached to a kinetics set.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KineticsConstants {
    /// Upper bound of the exchange rate.
    pub exchange_bound: f64,
    /// Lipschitz bound of the exchange rate.
    pub exchange_lipschitz: f64,
    /// Invariant-region bound for data and solutions.
    pub lambda: f64,
    /// Growth constant above `lambda`.
    pub growth: f64,
}

/// Volume rates `F₁, F₂, F₃`, slow surface rate `G₃` and exchange rate `H`.
#[derive(Clone)]
pub struct KineticsSet {
    pub name: String,
    pub volume: [ReactionFn; 3],
    pub surface: ReactionFn,
    pub exchange: ExchangeFn,
    pub constants: KineticsConstants,
    /// Whether `F₁, F₂, F₃, G₃` depend on the cell variable.
    pub y_dependent: [bool; 4],
}

impl fmt::Debug for KineticsSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KineticsSet")
            .field("name", &self.name)
            .field("constants", &self.constants)
            .field("y_dependent", &self.y_dependent)
            .finish()
    }
}

fn zero_reaction() -> ReactionFn {
    Arc::new(|_, _| 0.0)
}

impl KineticsSet {
    pub fn zero() -> Self {
        KineticsSet {
            name: "zero".into(),
            volume: [zero_reaction(), zero_reaction(), zero_reaction()],
            surface: zero_reaction(),
            exchange: Arc::new(|_| 0.0),
            constants: KineticsConstants { exchange_bound: 0.0, exchange_lipschitz: 0.0, lambda: 1.0, growth: 1.0 },
            y_dependent: [false; 4],
        }
    }

    /// Replaces the exchange rate and its bounds.
    pub fn with_exchange(mut self, h: ExchangeFn, bound: f64, lipschitz: f64) -> Self {
        self.exchange = h;
        self.constants.exchange_bound = bound;
        self.constants.exchange_lipschitz = lipschitz;
        self
    }

    pub fn f(&self, i: usize, y: Point, s: [f64; 3]) -> f64 {
        (self.volume[i])(y, s)
    }

    pub fn g3(&self, y: Point, s: [f64; 3]) -> f64 {
        (self.surface)(y, s)
    }

    pub fn h(&self, s: f64) -> f64 {
        (self.exchange)(s)
    }

    /// `M_{Y*}(F_i(·, s))`.
    pub fn cell_average_f(&self, i: usize, s: [f64; 3], cell: Option<&CellAverager>) -> Result<f64> {
        if !self.y_dependent[i] {
            return Ok(self.f(i, [0.0, 0.0], s));
        }
        let c = cell.ok_or(Error::MeshRequired)?;
        Ok(c.volume.iter().map(|(y, w)| w * self.f(i, *y, s)).sum())
    }

    /// `M_Γ(G₃(·, s))`.
    pub fn surface_average_g3(&self, s: [f64; 3], cell: Option<&CellAverager>) -> Result<f64> {
        if !self.y_dependent[3] {
            return Ok(self.g3([0.0, 0.0], s));
        }
        let c = cell.ok_or(Error::MeshRequired)?;
        if c.surface.is_empty() {
            return Ok(0.0);
        }
        Ok(c.surface.iter().map(|(y, w)| w * self.g3(*y, s)).sum())
    }

    /// Homogenized sources `(M(F₁) + M(F₂), M(F₃) + κ·M_Γ(G₃))` at `(c, c, c₃)`, where
    /// `κ = |Γ|/|Y*|`.
    pub fn macro_sources(&self, c: f64, c3: f64, kappa: f64, cell: Option<&CellAverager>) -> Result<(f64, f64)> {
        let s = [c, c, c3];
        let fc = self.cell_average_f(0, s, cell)? + self.cell_average_f(1, s, cell)?;
        let f3 = self.cell_average_f(2, s, cell)? + kappa * self.surface_average_g3(s, cell)?;
        Ok((fc, f3))
    }
}

/// Normalized quadrature on the reference cell: centroid rule over `Y*` and midpoint rule
/// over `Γ`, weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct CellAverager {
    pub volume: Vec<(Point, f64)>,
    pub surface: Vec<(Point, f64)>,
}

impl CellAverager {
    pub fn new(cell: &CellMesh) -> Self {
        let m = &cell.mesh;
        let volume = (0..m.n_triangles()).map(|t| (m.centroid(t), m.area(t) / cell.volume)).collect();
        let surface = if cell.gamma_length > 0.0 {
            m.edges_with(EdgeMarker::Gamma)
                .map(|e| {
                    let [a, b] = e.nodes.map(|k| m.nodes[k]);
                    ([(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0], m.edge_length(e) / cell.gamma_length)
                })
                .collect()
        } else {
            Vec::new()
        };
        CellAverager { volume, surface }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::InclusionSpec;

    #[test]
    fn y_independent_average_is_pointwise() {
        let k = builtin("mm_triple").unwrap();
        let s = [0.3, 0.7, 1.1];
        assert_eq!(k.cell_average_f(0, s, None).unwrap(), k.f(0, [0.2, 0.9], s));
        assert_eq!(KineticsSet::zero().cell_average_f(2, s, None).unwrap(), 0.0);
    }

    #[test]
    fn modulated_average_factorizes() {
        let k = parse_kinetics("mm_triple:a0=1,a0_amp=0.5").unwrap();
        let cell = CellMesh::build(&InclusionSpec::disc([0.5, 0.5], 0.25), 0.02).unwrap();
        assert!(matches!(k.cell_average_f(0, [1.0; 3], None), Err(Error::MeshRequired)));
        let avg = CellAverager::new(&cell);
        let got = k.cell_average_f(0, [1.0; 3], Some(&avg)).unwrap();
        // oracle: M_{Y*}(1 + 0.5 cos 2πy₁) by fine tensor-product midpoint quadrature on Y*
        let n = 2000;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let y = [(i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64];
                if (y[0] - 0.5).hypot(y[1] - 0.5) > 0.25 {
                    num += 1.0 + 0.5 * (2.0 * std::f64::consts::PI * y[0]).cos();
                    den += 1.0;
                }
            }
        }
        let expected = num / den / 8.0;
        assert!((got - expected).abs() < 2e-4, "{got} vs {expected}");
    }

    #[test]
    fn averages_are_linear() {
        let cell = CellMesh::build(&InclusionSpec::disc([0.5, 0.5], 0.25), 0.1).unwrap();
        let avg = CellAverager::new(&cell);
        let k = parse_kinetics("mm_mixed:a0=1,a0_amp=0.3,a=2,a_amp=0.4").unwrap();
        let k2 = parse_kinetics("mm_mixed:a0=2,a0_amp=0.3,a=4,a_amp=0.4").unwrap();
        let s = [0.4, 0.9, 1.3];
        // F₂ and the trailing linear terms do not scale with the amplitudes
        let g1 = k.surface_average_g3(s, Some(&avg)).unwrap() - s[2];
        let g2 = k2.surface_average_g3(s, Some(&avg)).unwrap() - s[2];
        assert!((g2 - 2.0 * g1).abs() < 1e-12);
        let f1 = k.cell_average_f(0, s, Some(&avg)).unwrap() - s[0];
        let f2 = k2.cell_average_f(0, s, Some(&avg)).unwrap() - s[0];
        assert!((f2 - 2.0 * f1).abs() < 1e-12);
    }
}

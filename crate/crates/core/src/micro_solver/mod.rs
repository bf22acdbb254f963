//! Direct simulation of the ε-periodic system on the perforated domain.
//!
//! Fields `c₁, c₂, c₃` diffuse with `Dᵢ(x/ε)` and react with `Fᵢ(x/ε, c)`. On the inclusion
//! boundaries `c₁, c₂` exchange at rate `H(c₃)` and `c₃` sees the surface reaction `G₃`.
//! Under [`Scaling::FastExchange`] the exchange carries a factor `1/ε` and the surface
//! reaction `ε`; under [`Scaling::AllEps`] both carry `ε`.

mod restrict;

pub use restrict::{cell_average_unfold, restrict_macro_to_micro, Restriction};

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{enforce_positivity, FieldStats, MonitorEvent, PositivityPolicy, Trajectory};
use crate::error::{Error, Result};
use crate::fem::{
    assemble_boundary_mass_with, assemble_mass, assemble_stiffness_with, h1_seminorm, solve_cg, solve_exchange_pair,
    CoefficientField, CsrMatrix, DofMap, Mat2,
};
use crate::geometry::{EdgeMarker, EpsilonMesh, Point};
use crate::kinetics::KineticsSet;
use crate::macro_solver::time_steps;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Scaling {
    /// Exchange scaled by `1/ε`, surface reaction by `ε`.
    #[default]
    FastExchange,
    /// Every boundary term scaled by `ε`.
    AllEps,
}

impl Scaling {
    fn exchange_factor(self, eps: f64) -> f64 {
        match self {
            Scaling::FastExchange => 1.0 / eps,
            Scaling::AllEps => eps,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MicroConfig {
    pub dt: f64,
    pub t_end: f64,
    pub theta: f64,
    pub scaling: Scaling,
    /// Cell-periodic diffusion fields `D₁, D₂, D₃`.
    pub diffusion: [CoefficientField; 3],
    pub kinetics: KineticsSet,
    pub positivity: PositivityPolicy,
    pub pos_tol: f64,
    pub solver_tol: f64,
    pub max_iter: usize,
}

impl MicroConfig {
    pub fn new(dt: f64, t_end: f64, scaling: Scaling, diffusion: [CoefficientField; 3], kinetics: KineticsSet) -> Self {
        MicroConfig {
            dt,
            t_end,
            theta: 1.0,
            scaling,
            diffusion,
            kinetics,
            positivity: PositivityPolicy::Monitor,
            pos_tol: 1e-10,
            solver_tol: 1e-10,
            max_iter: 20_000,
        }
    }

    /// `dt·l·(exchange factor)`: the size of the exchange block relative to the mass.
    /// The exchange is implicit, so this is reported, not limited.
    pub fn exchange_stiffness(&self, eps: f64) -> f64 {
        self.dt * self.kinetics.constants.exchange_bound * self.scaling.exchange_factor(eps)
    }

    pub fn validate(&self) -> Result<()> {
        time_steps(self.dt, self.t_end)?;
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::InvalidConfig(format!("theta must lie in [0, 1], got {}", self.theta)));
        }
        for d in &self.diffusion {
            d.validate(8)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MicroState {
    pub step: usize,
    pub t: f64,
    pub epsilon: f64,
    pub c: [Vec<f64>; 3],
}

#[derive(Debug, Clone)]
pub struct MicroRun {
    pub trajectory: Trajectory,
    pub events: Vec<MonitorEvent>,
    pub final_state: MicroState,
    /// `‖c₁ − c₂‖_{L²(Γε)}` at every recorded time.
    pub gamma_gap: Vec<f64>,
    /// Trapezoid-rule `∫₀ᵀ ‖c₁ − c₂‖²_{L²(Γε)} dt`.
    pub gamma_gap_sq_integral: f64,
    /// Trapezoid-rule `∫₀ᵀ |cᵢ|²_{H¹} dt`.
    pub h1_sq_integral: [f64; 3],
}

impl MicroRun {
    pub fn gamma_gap_csv(&self) -> String {
        let mut s = String::from("t,norm_c1_minus_c2_on_gamma\n");
        for (t, g) in self.trajectory.times.iter().zip(&self.gamma_gap) {
            let _ = writeln!(s, "{t},{g}");
        }
        s
    }
}

/// Matrices fixed over a run on one ε-mesh.
pub struct MicroSolver<'a> {
    pub emesh: &'a EpsilonMesh,
    pub cfg: &'a MicroConfig,
    mass: CsrMatrix,
    gamma_mass: CsrMatrix,
    map: DofMap,
    a: [CsrMatrix; 3],
    a3: CsrMatrix,
    k: [CsrMatrix; 3],
    cell_y: Vec<Point>,
    gamma_edges: Vec<[usize; 2]>,
}

impl<'a> MicroSolver<'a> {
    pub fn new(emesh: &'a EpsilonMesh, cfg: &'a MicroConfig) -> Result<Self> {
        cfg.validate()?;
        let mesh = &emesh.mesh;
        let eps = emesh.epsilon;
        let outer = mesh.marker_nodes(EdgeMarker::Outer);
        if outer.is_empty() {
            return Err(Error::NoMarkedBoundary(EdgeMarker::Outer.label().into()));
        }
        let map = DofMap::dirichlet_zero(mesh.n_nodes(), &outer);
        let mass = assemble_mass(mesh);
        let gamma_edges: Vec<[usize; 2]> = mesh.edges_with(EdgeMarker::Gamma).map(|e| e.nodes).collect();
        let gamma_mass = if gamma_edges.is_empty() {
            CsrMatrix::zeros(mesh.n_nodes(), mesh.n_nodes())
        } else {
            assemble_boundary_mass_with(mesh, EdgeMarker::Gamma, &vec![1.0; gamma_edges.len()])?
        };
        let k: [CsrMatrix; 3] = std::array::from_fn(|i| {
            let coeff: Vec<Mat2> = (0..mesh.n_triangles())
                .into_par_iter()
                .map(|t| cfg.diffusion[i].eval_scaled(mesh.centroid(t), eps))
                .collect();
            assemble_stiffness_with(mesh, &coeff)
        });
        let a: [CsrMatrix; 3] = std::array::from_fn(|i| mass.linear_combination(1.0, &k[i], cfg.theta * cfg.dt));
        let a3 = map.restrict_matrix(&a[2]);
        let cell_y = mesh
            .nodes
            .iter()
            .map(|p| {
                let y = [p[0] / eps, p[1] / eps];
                [y[0] - y[0].floor(), y[1] - y[1].floor()]
            })
            .collect();
        Ok(MicroSolver { emesh, cfg, mass, gamma_mass, map, a, a3, k, cell_y, gamma_edges })
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    pub fn gamma_mass(&self) -> &CsrMatrix {
        &self.gamma_mass
    }

    pub fn initial_state(&self, init: [&dyn Fn(Point) -> f64; 3]) -> MicroState {
        let nodes = &self.emesh.mesh.nodes;
        let c = init.map(|f| {
            nodes.iter().enumerate().map(|(k, &p)| if self.map.dof_of_node[k].is_some() { f(p) } else { 0.0 }).collect()
        });
        MicroState { step: 0, t: 0.0, epsilon: self.emesh.epsilon, c }
    }

    pub fn gamma_gap(&self, st: &MicroState) -> f64 {
        let d: Vec<f64> = st.c[0].iter().zip(&st.c[1]).map(|(a, b)| a - b).collect();
        self.gamma_mass.quad_form(&d).max(0.0).sqrt()
    }

    fn stats(&self, st: &MicroState) -> Vec<FieldStats> {
        st.c.iter().map(|u| FieldStats::of(&self.mass, u)).collect()
    }

    /// One IMEX step: implicit diffusion and exchange (with `H` at edge-averaged `c₃ⁿ`),
    /// explicit volume and surface reactions.
    pub fn step(&self, st: &MicroState) -> Result<(MicroState, Vec<MonitorEvent>)> {
        let (dt, theta, eps) = (self.cfg.dt, self.cfg.theta, self.emesh.epsilon);
        let kin = &self.cfg.kinetics;
        let n = st.c[0].len();
        let src: Vec<[f64; 4]> = (0..n)
            .into_par_iter()
            .map(|a| {
                let s = [st.c[0][a], st.c[1][a], st.c[2][a]];
                let y = self.cell_y[a];
                [kin.f(0, y, s), kin.f(1, y, s), kin.f(2, y, s), kin.g3(y, s)]
            })
            .collect();
        let field = |i: usize| src.iter().map(|v| v[i]).collect::<Vec<_>>();

        let mut rhs: Vec<Vec<f64>> = (0..3)
            .map(|i| {
                let mut r = self.mass.mul_vec(&st.c[i]);
                crate::macro_solver::add_scaled(&mut r, &self.mass.mul_vec(&field(i)), dt);
                if theta < 1.0 {
                    crate::macro_solver::add_scaled(&mut r, &self.k[i].mul_vec(&st.c[i]), -(1.0 - theta) * dt);
                }
                r
            })
            .collect();
        crate::macro_solver::add_scaled(&mut rhs[2], &self.gamma_mass.mul_vec(&field(3)), dt * eps);

        let exchange = if self.gamma_edges.is_empty() {
            CsrMatrix::zeros(n, n)
        } else {
            let w: Vec<f64> = self.gamma_edges.iter().map(|&[a, b]| kin.h(0.5 * (st.c[2][a] + st.c[2][b]))).collect();
            assemble_boundary_mass_with(&self.emesh.mesh, EdgeMarker::Gamma, &w)?
                .scaled(dt * self.cfg.scaling.exchange_factor(eps))
        };
        let [c1, c2] = solve_exchange_pair(
            &self.a[0],
            &self.a[1],
            &exchange,
            [&rhs[0], &rhs[1]],
            [&st.c[0], &st.c[1]],
            &self.map,
            self.cfg.solver_tol,
            self.cfg.max_iter,
        )?;
        let (x3, _) = solve_cg(
            &self.a3,
            &self.map.restrict_vec(&rhs[2]),
            self.cfg.solver_tol,
            self.cfg.max_iter,
            Some(&self.map.gather(&st.c[2])),
        )?;

        let step = st.step + 1;
        let t = step as f64 * dt;
        let mut c = [c1, c2, self.map.expand(&x3)];
        if c.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem(format!("non-finite state at t = {t}")));
        }
        let mut events = Vec::new();
        for (u, name) in c.iter_mut().zip(["c1", "c2", "c3"]) {
            if let Some(e) = enforce_positivity(u, name, t, self.cfg.positivity, self.cfg.pos_tol)? {
                events.push(e);
            }
        }
        Ok((MicroState { step, t, epsilon: eps, c }, events))
    }

    pub fn run(&self, init: MicroState, observer: &mut dyn FnMut(&MicroState) -> Result<()>) -> Result<MicroRun> {
        let n = time_steps(self.cfg.dt, self.cfg.t_end)?;
        let mesh = &self.emesh.mesh;
        let h1 = |st: &MicroState| -> [f64; 3] { std::array::from_fn(|i| h1_seminorm(mesh, &st.c[i]).powi(2)) };
        let mut trajectory = Trajectory::new(&["c1", "c2", "c3"]);
        let mut events = Vec::new();
        let mut gamma_gap = Vec::with_capacity(n + 1);
        let mut gap_int = 0.0;
        let mut h1_int = [0.0; 3];
        let mut st = init;
        trajectory.push(st.t, self.stats(&st));
        gamma_gap.push(self.gamma_gap(&st));
        let mut h1_prev = h1(&st);
        observer(&st)?;
        for _ in 0..n {
            let (next, ev) = self.step(&st)?;
            events.extend(ev);
            st = next;
            trajectory.push(st.t, self.stats(&st));
            let g = self.gamma_gap(&st);
            let g_prev = *gamma_gap.last().unwrap();
            gap_int += 0.5 * self.cfg.dt * (g_prev * g_prev + g * g);
            gamma_gap.push(g);
            let h1_now = h1(&st);
            for i in 0..3 {
                h1_int[i] += 0.5 * self.cfg.dt * (h1_prev[i] + h1_now[i]);
            }
            h1_prev = h1_now;
            observer(&st)?;
        }
        Ok(MicroRun {
            trajectory,
            events,
            final_state: st,
            gamma_gap,
            gamma_gap_sq_integral: gap_int,
            h1_sq_integral: h1_int,
        })
    }
}

pub fn micro_step(emesh: &EpsilonMesh, cfg: &MicroConfig, st: &MicroState) -> Result<(MicroState, Vec<MonitorEvent>)> {
    MicroSolver::new(emesh, cfg)?.step(st)
}

pub fn micro_run(emesh: &EpsilonMesh, cfg: &MicroConfig, init: MicroState) -> Result<MicroRun> {
    MicroSolver::new(emesh, cfg)?.run(init, &mut |_| Ok(()))
}

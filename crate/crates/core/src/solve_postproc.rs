//! Direct solution of the reduced system, evaluation of the discrete
//! solution, L2 errors and condition numbers.

use nalgebra::{DMatrix, DVector};

use crate::assembly::{
    apply_dirichlet, assemble, expand_dirichlet, Discretization, DofMap, HistorySource, ReducedSystem, Variant,
};
use crate::error::{domain, Error, Result};
use crate::forcing::Force;
use crate::fractional_core::modal_values;
use crate::grids::Grid;
use crate::history::FadingPolicy;
use crate::special_functions::QuadratureRule;

/// Solution of a reduced system with its relative residual.
#[derive(Debug, Clone)]
pub struct LinearSolution {
    pub u: DVector<f64>,
    /// ‖Mu − F‖∞ / ‖F‖∞ (absolute when F = 0).
    pub residual: f64,
}

/// Dense LU with partial pivoting.
pub fn solve(system: &ReducedSystem) -> Result<LinearSolution> {
    let n = system.matrix.nrows();
    if n != system.matrix.ncols() || n != system.rhs.len() {
        return domain("system must be square with a matching right-hand side");
    }
    if n == 0 {
        return Ok(LinearSolution { u: DVector::zeros(0), residual: 0.0 });
    }
    let lu = system.matrix.clone().lu();
    let u_diag = lu.u().diagonal();
    let (imin, umin) =
        u_diag
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, v)| if v.abs() < acc.1 { (i, v.abs()) } else { acc });
    let umax = u_diag.amax();
    if !(umin > umax * n as f64 * f64::EPSILON) {
        return Err(Error::Numeric(format!(
            "matrix is singular to working precision: pivot {imin} has |u| = {umin:e} against max {umax:e}"
        )));
    }
    let u = lu.solve(&system.rhs).ok_or_else(|| Error::Numeric("LU solve failed".into()))?;
    let r = &system.matrix * &u - &system.rhs;
    let fnorm = system.rhs.amax();
    let residual = if fnorm > 0.0 { r.amax() / fnorm } else { r.amax() };
    if !residual.is_finite() {
        return Err(Error::Numeric("non-finite residual".into()));
    }
    Ok(LinearSolution { u, residual })
}

/// Matrix norm used for condition numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Norm {
    /// Max absolute row sum.
    #[default]
    Infinity,
    /// Spectral norm.
    Two,
}

/// κ(A) = ‖A‖·‖A⁻¹‖.
pub fn condition_number(a: &DMatrix<f64>, norm: Norm) -> Result<f64> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return domain("condition numbers need a non-empty square matrix");
    }
    match norm {
        Norm::Two => {
            let sv = a.singular_values();
            let smin = sv.min();
            if smin == 0.0 {
                return Ok(f64::INFINITY);
            }
            Ok(sv.max() / smin)
        }
        Norm::Infinity => {
            let inv = a.clone().try_inverse().ok_or_else(|| Error::Numeric("matrix is singular".into()))?;
            let row_sum =
                |m: &DMatrix<f64>| m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
            Ok(row_sum(a) * row_sum(&inv))
        }
    }
}

/// Discrete solution u^δ(x) = Σ_e Σ_p û^e_p ψ_p(x).
#[derive(Debug, Clone)]
pub struct SolutionField {
    grid: Grid,
    dofs: DofMap,
    coeffs: Vec<Vec<f64>>,
}

impl SolutionField {
    /// From a full global coefficient vector (boundary values included).
    pub fn from_global(grid: Grid, dofs: DofMap, u: &[f64]) -> Result<Self> {
        if dofs.nel() != grid.nel() {
            return domain("dof map and grid disagree on the element count");
        }
        let coeffs = dofs.scatter(u)?;
        Ok(Self { grid, dofs, coeffs })
    }

    /// From per-element coefficient lists (C⁰-consistent).
    pub fn from_elements(grid: Grid, coeffs: Vec<Vec<f64>>) -> Result<Self> {
        let dofs = DofMap::new(coeffs.iter().map(|c| c.len().saturating_sub(1)).collect())?;
        let u = dofs.gather(&coeffs)?;
        Self::from_global(grid, dofs, &u)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    /// Modal coefficients of element e.
    pub fn element_coeffs(&self, e: usize) -> &[f64] {
        &self.coeffs[e]
    }

    fn eval_in(&self, e: usize, zeta: f64, buf: &mut Vec<f64>) -> f64 {
        let p = self.dofs.order(e);
        buf.resize(p + 1, 0.0);
        modal_values(p, zeta, buf);
        buf.iter().zip(&self.coeffs[e]).map(|(a, b)| a * b).sum()
    }

    /// u^δ(x) for x in [0, L]; breakpoints belong to the left element.
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        let e = self.grid.locate(x)?;
        let (a, b) = self.grid.element(e);
        let zeta = 2.0 * (x - a) / (b - a) - 1.0;
        Ok(self.eval_in(e, zeta, &mut Vec::new()))
    }

    /// Per-element ‖u^δ − u‖_{L2(Ω_e)} by `q`-point Gauss-Legendre rules.
    pub fn l2_error_per_element(&self, exact: impl Fn(f64) -> f64, q: usize) -> Result<Vec<f64>> {
        let pmax = self.dofs.orders().iter().copied().max().unwrap_or(1);
        if q < 2 * pmax {
            return domain(format!("error quadrature needs Q >= 2P = {}", 2 * pmax));
        }
        let rule = QuadratureRule::gauss_legendre(q)?;
        let mut buf = Vec::new();
        Ok((0..self.grid.nel())
            .map(|e| {
                let (a, b) = self.grid.element(e);
                let h = 0.5 * (b - a);
                let s: f64 = rule
                    .iter()
                    .map(|(z, w)| {
                        let d = self.eval_in(e, z, &mut buf) - exact(a + h * (1.0 + z));
                        w * d * d
                    })
                    .sum();
                (h * s).sqrt()
            })
            .collect())
    }

    /// ‖u^δ − u‖_{L2(0, L)}.
    pub fn l2_error(&self, exact: impl Fn(f64) -> f64, q: usize) -> Result<f64> {
        Ok(self.l2_error_per_element(exact, q)?.iter().map(|v| v * v).sum::<f64>().sqrt())
    }
}

/// Options for [`run`].
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub variant: Variant,
    pub fading: FadingPolicy,
    /// Base quadrature order for history blocks.
    pub history_q: usize,
    /// Also report the ∞-norm condition number of the reduced matrix.
    pub condition: Option<Norm>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { variant: Variant::LocalTests, fading: FadingPolicy::none(), history_q: 20, condition: None }
    }
}

/// Result of a full assemble-reduce-solve pass.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub field: SolutionField,
    pub residual: f64,
    pub condition: Option<f64>,
    pub stats: crate::assembly::AssemblyStats,
}

/// Assemble, reduce, solve and wrap the solution.
pub fn run(disc: &Discretization, force: &Force, history: HistorySource<'_>, opts: RunOptions) -> Result<RunResult> {
    let sys = assemble(disc, force, opts.variant, history, opts.fading, opts.history_q)?;
    let reduced = apply_dirichlet(&sys);
    let condition = opts.condition.map(|n| condition_number(&reduced.matrix, n)).transpose()?;
    let sol = solve(&reduced)?;
    let u = expand_dirichlet(&sol.u);
    let field = SolutionField::from_global(disc.grid.clone(), sys.dofs.clone(), &u)?;
    Ok(RunResult { field, residual: sol.residual, condition, stats: sys.stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractional_core::rl_left_deriv_power;
    use crate::grids::uniform_grid;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn identity_and_diagonal() {
        let sys = ReducedSystem { matrix: DMatrix::identity(4, 4), rhs: DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]) };
        let s = solve(&sys).unwrap();
        assert_eq!(s.u, sys.rhs);
        assert_eq!(s.residual, 0.0);
        assert_eq!(condition_number(&DMatrix::identity(3, 3), Norm::Two).unwrap(), 1.0);
        assert_eq!(condition_number(&DMatrix::identity(3, 3), Norm::Infinity).unwrap(), 1.0);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 10.0]));
        assert_relative_eq!(condition_number(&d, Norm::Two).unwrap(), 10.0, max_relative = 1e-14);
        assert_relative_eq!(condition_number(&d, Norm::Infinity).unwrap(), 10.0, max_relative = 1e-14);
    }

    #[test]
    fn singular_system_is_reported() {
        let sys = ReducedSystem {
            matrix: DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]),
            rhs: DVector::from_vec(vec![1.0, 1.0]),
        };
        assert!(matches!(solve(&sys), Err(Error::Numeric(_))));
    }

    /// Gaussian elimination without pivoting on a diagonally dominant matrix.
    fn eliminate(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for i in 0..n {
            for r in i + 1..n {
                let f = a[r][i] / a[i][i];
                for c in i..n {
                    a[r][c] -= f * a[i][c];
                }
                b[r] -= f * b[i];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            x[i] = (b[i] - (i + 1..n).map(|c| a[i][c] * x[c]).sum::<f64>()) / a[i][i];
        }
        x
    }

    proptest! {
        #[test]
        fn solve_matches_elimination(n in 1usize..8, seed in 0u64..500) {
            let v = |i: usize, j: usize| (seed as f64 + 1.7 * i as f64 + 0.31 * (j * j) as f64).sin();
            let a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 2.0 * n as f64 + v(i, j) } else { v(i, j) }).collect()).collect();
            let b: Vec<f64> = (0..n).map(|i| v(i, 99)).collect();
            let sys = ReducedSystem {
                matrix: DMatrix::from_fn(n, n, |i, j| a[i][j]),
                rhs: DVector::from_vec(b.clone()),
            };
            let s = solve(&sys).unwrap();
            let o = eliminate(a, b);
            for i in 0..n {
                prop_assert!((s.u[i] - o[i]).abs() < 1e-12);
            }
            prop_assert!(s.residual < 1e-14);
        }

        #[test]
        fn l2_error_is_homogeneous(c in -5.0f64..5.0) {
            let g = uniform_grid(3, 1.0).unwrap();
            let f = SolutionField::from_elements(g, vec![vec![0.0, 1.0, 0.5], vec![0.5, -1.0, 0.2], vec![0.2, 0.3, 0.0]]).unwrap();
            let base = f.l2_error(|_| 0.0, 8).unwrap();
            let scaled = SolutionField::from_elements(f.grid().clone(), (0..3).map(|e| f.element_coeffs(e).iter().map(|v| v * c).collect()).collect()).unwrap();
            prop_assert!((scaled.l2_error(|_| 0.0, 8).unwrap() - c.abs() * base).abs() < 1e-13);
        }
    }

    #[test]
    fn evaluation_is_continuous_and_linear_for_vertex_modes() {
        let g = uniform_grid(2, 1.0).unwrap();
        let f = SolutionField::from_elements(g, vec![vec![0.0, 0.7, 2.0], vec![2.0, -0.3, 1.0]]).unwrap();
        assert_relative_eq!(f.evaluate(0.5).unwrap(), 2.0, max_relative = 1e-15);
        assert_relative_eq!(f.evaluate(0.5 + 1e-13).unwrap(), 2.0, max_relative = 1e-10);
        assert!(f.evaluate(1.5).is_err());
        let lin = SolutionField::from_elements(uniform_grid(1, 2.0).unwrap(), vec![vec![1.0, 3.0]]).unwrap();
        assert_relative_eq!(lin.evaluate(0.5).unwrap(), 1.5, max_relative = 1e-15);
        assert_relative_eq!(lin.l2_error(|x| 1.0 + x, 4).unwrap(), 0.0, epsilon = 1e-15);
        assert_relative_eq!(lin.l2_error(|x| 1.0 + x + 0.25, 4).unwrap(), 0.25 * 2f64.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn random_coefficients_match_direct_sum() {
        let g = uniform_grid(1, 1.0).unwrap();
        let c = vec![0.3, -1.2, 0.8, 0.1, 2.0];
        let f = SolutionField::from_elements(g, vec![c.clone()]).unwrap();
        for &x in &[0.0, 0.13, 0.5, 0.77, 1.0] {
            let z = 2.0 * x - 1.0;
            let o: f64 = (0..5).map(|p| c[p] * crate::fractional_core::modal_basis(p, 4, z).unwrap()).sum();
            assert_relative_eq!(f.evaluate(x).unwrap(), o, epsilon = 1e-15);
        }
    }

    #[test]
    fn polynomial_solution_is_reproduced_on_one_element() {
        // u = x²(1 − x) lies in the P = 3 trial space; f = x^{1/2}·g(x) with g smooth.
        let mu = 0.5;
        let alpha = 1.0 + mu;
        let g = move |x: f64| {
            rl_left_deriv_power(2.0, alpha, 1.0).unwrap() - rl_left_deriv_power(3.0, alpha, 1.0).unwrap() * x
        };
        let force = Force::new(vec![crate::forcing::ForcePart::Singular {
            at: 0.0,
            exponent: 1.0 - mu,
            g: std::sync::Arc::new(g),
        }]);
        let disc = Discretization::new(uniform_grid(1, 1.0).unwrap(), 3, mu, 0.0, 20).unwrap();
        let r = run(&disc, &force, HistorySource::Compute, RunOptions::default()).unwrap();
        assert!(r.field.l2_error(|x| x * x * (1.0 - x), 20).unwrap() < 1e-12);
        assert!(r.residual < 1e-12);
    }

    #[test]
    fn singular_exact_error_is_stable_in_q() {
        let mu = 0.5;
        let alpha = 1.0 + mu;
        let force = Force::smooth(move |x| {
            rl_left_deriv_power(2.0 + mu, alpha, x).unwrap() - rl_left_deriv_power(3.0 + mu, alpha, x).unwrap()
        });
        let disc = Discretization::new(uniform_grid(4, 1.0).unwrap(), 4, mu, 0.0, 20).unwrap();
        let r = run(&disc, &force, HistorySource::Compute, RunOptions::default()).unwrap();
        let exact = |x: f64| (1.0 - x) * x.powf(2.0 + mu);
        let a = r.field.l2_error(exact, 2 * 4 + 16).unwrap();
        let b = r.field.l2_error(exact, 2 * 4 + 40).unwrap();
        assert!((a - b).abs() < 1e-3 * b);
    }
}

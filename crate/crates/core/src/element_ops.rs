//! Elemental stiffness, mass and load for the local-test scheme, and the
//! element blocks of the global-test scheme.

use nalgebra::{DMatrix, DVector};

use crate::error::{domain, Error, Result};
use crate::forcing::{Force, ForcePart};
use crate::fractional_core::{modal_derivatives, modal_values, polyfrac2_deriv_factor};
use crate::grids::Grid;
use crate::special_functions::{gamma_ratio, jacobi, jacobi_fill, jacobi_orthogonality_constant, QuadratureRule};

/// Stiffness, mass and load of one element in the local-test scheme.
#[derive(Debug, Clone)]
pub struct ElementMatrices {
    pub s: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub f: DVector<f64>,
    pub element_index: usize,
    /// (2/Δx)^μ.
    pub jacobian_mu: f64,
}

fn check_interval(a: f64, b: f64) -> Result<f64> {
    let w = b - a;
    if !(w > 0.0) || !w.is_finite() {
        return domain(format!("degenerate element [{a}, {b}]"));
    }
    Ok(w)
}

/// Analytic local stiffness S_kp = (ψ'_p, ₓD^μ v_k) on [a, b].
///
/// Only (0,0), (0,P) and the interior diagonal are non-zero; row P vanishes.
pub fn local_stiffness(a: f64, b: f64, p_order: usize, mu: f64) -> Result<DMatrix<f64>> {
    let w = check_interval(a, b)?;
    if p_order == 0 {
        return domain("polynomial order must be at least 1");
    }
    let jac = (2.0 / w).powf(mu);
    let mut s = DMatrix::zeros(p_order + 1, p_order + 1);
    let g0 = jac * gamma_ratio(1.0 + mu, 1.0);
    s[(0, 0)] = -g0;
    s[(0, p_order)] = g0;
    for k in 1..p_order {
        let kf = k as f64;
        s[(k, k)] =
            -jac * polyfrac2_deriv_factor(k, mu) * (kf + 1.0) / 8.0 * jacobi_orthogonality_constant(k - 1, 1.0, 1.0);
    }
    Ok(s)
}

/// Local mass M_kp = (ψ_p, v_k) on [a, b] by Gauss-Jacobi quadrature.
pub fn local_mass(a: f64, b: f64, p_order: usize, mu: f64, q: usize) -> Result<DMatrix<f64>> {
    let w = check_interval(a, b)?;
    if q < p_order + 2 {
        return domain(format!("mass quadrature needs Q >= P + 2, got Q = {q}"));
    }
    let mut m = DMatrix::zeros(p_order + 1, p_order + 1);
    let r0 = QuadratureRule::gauss_jacobi(q, 1.0 + mu, 0.0)?;
    let rp = QuadratureRule::gauss_jacobi(q, mu, 1.0)?;
    let ri = QuadratureRule::gauss_jacobi(q, 1.0 + mu, 1.0)?;
    let mut pk = Vec::new();
    for (z, wq) in r0.iter() {
        jacobi_fill(p_order, mu, -mu, z, &mut pk);
        for k in 0..=p_order {
            m[(k, 0)] += 0.25 * w * wq * pk[k];
        }
    }
    for (z, wq) in rp.iter() {
        jacobi_fill(p_order, mu, -mu, z, &mut pk);
        for k in 0..=p_order {
            m[(k, p_order)] += 0.25 * w * wq * pk[k];
        }
    }
    for (z, wq) in ri.iter() {
        jacobi_fill(p_order, mu, -mu, z, &mut pk);
        for p in 1..p_order {
            let j = jacobi(p - 1, 1.0, 1.0, z);
            for k in 0..=p_order {
                m[(k, p)] += 0.125 * w * wq * j * pk[k];
            }
        }
    }
    Ok(m)
}

/// ∫_a^b f(x) (1−η)^μ P_k^{μ,−μ}(η) dx for k = 0..=k_max, where η maps the
/// test support [ta, tb] ⊇ [a, b] onto [−1, 1].
///
/// The (1−η)^μ factor is a quadrature weight on the sub-interval touching tb;
/// declared singular parts of `f` receive a matching left weight.
pub fn test_moments(
    force: &Force,
    (a, b): (f64, f64),
    (ta, tb): (f64, f64),
    k_max: usize,
    mu: f64,
    q: usize,
) -> Result<DVector<f64>> {
    check_interval(a, b)?;
    let tw = check_interval(ta, tb)?;
    let touches_right = b == tb;
    let alpha = if touches_right { mu } else { 0.0 };
    let mut out = DVector::zeros(k_max + 1);
    let mut pk = Vec::new();
    let mut accumulate = |lo: f64, beta: f64, value: &dyn Fn(f64, f64) -> f64| -> Result<()> {
        let rule = QuadratureRule::gauss_jacobi(q, alpha, beta)?;
        let h = 0.5 * (b - lo);
        let wscale = if touches_right { ((b - lo) / tw).powf(mu) } else { 1.0 };
        for (z, wq) in rule.iter() {
            let x = lo + h * (1.0 + z);
            let eta = 2.0 * (x - ta) / tw - 1.0;
            let fx = value(x, z);
            if !fx.is_finite() {
                return Err(Error::Numeric(format!("force is not finite at x = {x}")));
            }
            let tw_explicit = if touches_right { 1.0 } else { (1.0 - eta).powf(mu) };
            jacobi_fill(k_max, mu, -mu, eta, &mut pk);
            let c = h * wq * wscale * tw_explicit * fx;
            for k in 0..=k_max {
                out[k] += c * pk[k];
            }
        }
        Ok(())
    };
    for part in force.parts() {
        match part {
            ForcePart::Smooth(f) => accumulate(a, 0.0, &|x, _| f(x))?,
            ForcePart::Singular { at, exponent, g } => {
                let c = *at;
                let tol = 1e-14 * (b - a).max(c.abs());
                if c >= b - tol {
                    continue;
                }
                if c <= a - tol {
                    accumulate(a, 0.0, &|x, _| (x - c).powf(*exponent) * g(x))?;
                } else {
                    let lo = c.max(a);
                    let h = 0.5 * (b - lo);
                    let scale = h.powf(*exponent);
                    accumulate(lo, *exponent, &|x, _| scale * g(x))?;
                }
            }
        }
    }
    Ok(out)
}

/// Local load f_k = (f, v_k) on [a, b].
pub fn local_load(a: f64, b: f64, p_order: usize, mu: f64, force: &Force, q: usize) -> Result<DVector<f64>> {
    test_moments(force, (a, b), (a, b), p_order, mu, q)
}

/// All local objects for element `e` of `grid`.
pub fn element_matrices(
    grid: &Grid,
    e: usize,
    p_order: usize,
    mu: f64,
    force: &Force,
    q: usize,
) -> Result<ElementMatrices> {
    let (a, b) = grid.element(e);
    Ok(ElementMatrices {
        s: local_stiffness(a, b, p_order, mu)?,
        m: local_mass(a, b, p_order, mu, q)?,
        f: local_load(a, b, p_order, mu, force, q)?,
        element_index: e,
        jacobian_mu: (2.0 / (b - a)).powf(mu),
    })
}

/// Global-test blocks between test functions supported on [0, x_ε] and the
/// basis of element `e ≤ ε`: (Ŝ, M̂). The mass block is only formed when
/// `with_mass` is set.
#[allow(clippy::too_many_arguments)]
pub fn global_test_blocks(
    grid: &Grid,
    eps: usize,
    e: usize,
    p_test: usize,
    p_basis: usize,
    mu: f64,
    q: usize,
    with_mass: bool,
) -> Result<(DMatrix<f64>, Option<DMatrix<f64>>)> {
    if e > eps {
        return domain(format!("global test of element {eps} does not reach element {e}"));
    }
    let x_eps = grid.element(eps).1;
    let (a, b) = grid.element(e);
    let w = b - a;
    let qs = q.max((p_test + p_basis) / 2 + 2);
    let rule = QuadratureRule::gauss_legendre(qs)?;
    let mut s = DMatrix::zeros(p_test + 1, p_basis + 1);
    let mut dpsi = vec![0.0; p_basis + 1];
    let mut pk = Vec::new();
    let scale = (2.0 / x_eps).powf(mu);
    let factors: Vec<f64> = (0..=p_test).map(|k| polyfrac2_deriv_factor(k, mu) * scale).collect();
    for (xi, wq) in rule.iter() {
        let x = a + 0.5 * w * (1.0 + xi);
        let eta = 2.0 * x / x_eps - 1.0;
        modal_derivatives(p_basis, xi, &mut dpsi);
        jacobi_fill(p_test, 0.0, 0.0, eta, &mut pk);
        for k in 0..=p_test {
            for p in 0..=p_basis {
                s[(k, p)] += wq * factors[k] * pk[k] * dpsi[p];
            }
        }
    }
    let m = if with_mass {
        let mut m = DMatrix::zeros(p_test + 1, p_basis + 1);
        let last = e == eps;
        let qm = q.max(p_test + p_basis + 2);
        let rule = QuadratureRule::gauss_jacobi(qm, if last { mu } else { 0.0 }, 0.0)?;
        let mut psi = vec![0.0; p_basis + 1];
        for (xi, wq) in rule.iter() {
            let x = a + 0.5 * w * (1.0 + xi);
            let eta = 2.0 * x / x_eps - 1.0;
            let weight = if last { (w / x_eps).powf(mu) } else { (1.0 - eta).powf(mu) };
            modal_values(p_basis, xi, &mut psi);
            jacobi_fill(p_test, mu, -mu, eta, &mut pk);
            for k in 0..=p_test {
                for p in 0..=p_basis {
                    m[(k, p)] += 0.5 * w * wq * weight * pk[k] * psi[p];
                }
            }
        }
        Some(m)
    } else {
        None
    };
    Ok((s, m))
}

/// Load against the global test functions of element ε: composite quadrature
/// over every element of [0, x_ε].
pub fn global_test_load(
    grid: &Grid,
    eps: usize,
    p_order: usize,
    mu: f64,
    force: &Force,
    q: usize,
) -> Result<DVector<f64>> {
    let x_eps = grid.element(eps).1;
    let mut out = DVector::zeros(p_order + 1);
    for e in 0..=eps {
        out += test_moments(force, grid.element(e), (0.0, x_eps), p_order, mu, q)?;
    }
    Ok(out)
}

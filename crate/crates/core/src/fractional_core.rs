//! Poly-fractonomial test functions, the hierarchic modal basis and the
//! fractional-derivative identities that connect them.

use crate::error::{domain, Result};
use crate::special_functions::{binomial, gamma_ratio, jacobi, jacobi_all, jacobi_deriv, rgamma};

/// Fractional order α = 1 + μ with μ ∈ (0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FracOrder {
    mu: f64,
}

impl FracOrder {
    pub fn new(mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu <= 1.0) {
            return domain(format!("fractional part mu must lie in (0, 1], got {mu}"));
        }
        Ok(Self { mu })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn alpha(&self) -> f64 {
        1.0 + self.mu
    }
}

/// Test function (1−ξ)^μ P_k^{μ,−μ}(ξ).
pub fn polyfrac2(k: usize, mu: f64, xi: f64) -> f64 {
    let w = 1.0 - xi;
    if w <= 0.0 {
        return 0.0;
    }
    w.powf(mu) * jacobi(k, mu, -mu, xi)
}

/// Γ(1+k+μ)/Γ(1+k), the factor in the right RL derivative of [`polyfrac2`].
pub fn polyfrac2_deriv_factor(k: usize, mu: f64) -> f64 {
    gamma_ratio(1.0 + k as f64 + mu, 1.0 + k as f64)
}

/// Right Riemann-Liouville derivative ₓD₁^μ of [`polyfrac2`]: Γ(1+k+μ)/Γ(1+k)·P_k(ξ).
pub fn rl_right_deriv_polyfrac(k: usize, mu: f64, xi: f64) -> f64 {
    polyfrac2_deriv_factor(k, mu) * jacobi(k, 0.0, 0.0, xi)
}

/// Hierarchic C⁰ modal basis of order `p_order` on [−1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModalBasisSet {
    p_order: usize,
}

impl ModalBasisSet {
    pub fn new(p_order: usize) -> Result<Self> {
        if p_order == 0 {
            return domain("polynomial order must be at least 1");
        }
        Ok(Self { p_order })
    }

    pub fn order(&self) -> usize {
        self.p_order
    }

    /// ψ_0(ζ), …, ψ_P(ζ).
    pub fn values(&self, zeta: f64, out: &mut [f64]) {
        modal_values(self.p_order, zeta, out)
    }

    /// ψ'_0(ζ), …, ψ'_P(ζ).
    pub fn derivatives(&self, zeta: f64, out: &mut [f64]) {
        modal_derivatives(self.p_order, zeta, out)
    }
}

fn check_mode(p: usize, p_order: usize) -> Result<()> {
    if p_order == 0 || p > p_order {
        return domain(format!("mode {p} outside 0..={p_order}"));
    }
    Ok(())
}

/// ψ_p(ζ): vertex modes (1∓ζ)/2 and interior bubbles ((1−ζ)/2)((1+ζ)/2)P^{1,1}_{p−1}(ζ).
pub fn modal_basis(p: usize, p_order: usize, zeta: f64) -> Result<f64> {
    check_mode(p, p_order)?;
    Ok(if p == 0 {
        0.5 * (1.0 - zeta)
    } else if p == p_order {
        0.5 * (1.0 + zeta)
    } else {
        0.25 * (1.0 - zeta) * (1.0 + zeta) * jacobi(p - 1, 1.0, 1.0, zeta)
    })
}

/// dψ_p/dζ.
pub fn modal_basis_deriv(p: usize, p_order: usize, zeta: f64) -> Result<f64> {
    check_mode(p, p_order)?;
    Ok(if p == 0 {
        -0.5
    } else if p == p_order {
        0.5
    } else {
        let n = p - 1;
        -0.5 * zeta * jacobi(n, 1.0, 1.0, zeta) + 0.25 * (1.0 - zeta * zeta) * jacobi_deriv(n, 1.0, 1.0, zeta)
    })
}

/// All modal values at ζ into `out[0..=P]`.
pub fn modal_values(p_order: usize, zeta: f64, out: &mut [f64]) {
    out[0] = 0.5 * (1.0 - zeta);
    out[p_order] = 0.5 * (1.0 + zeta);
    if p_order >= 2 {
        let j = jacobi_all(p_order - 2, 1.0, 1.0, zeta);
        let bubble = 0.25 * (1.0 - zeta) * (1.0 + zeta);
        for p in 1..p_order {
            out[p] = bubble * j[p - 1];
        }
    }
}

/// All modal derivatives at ζ into `out[0..=P]`.
pub fn modal_derivatives(p_order: usize, zeta: f64, out: &mut [f64]) {
    out[0] = -0.5;
    out[p_order] = 0.5;
    if p_order >= 2 {
        let j = jacobi_all(p_order - 2, 1.0, 1.0, zeta);
        // d/dζ P^{1,1}_n = ((n+3)/2) P^{2,2}_{n−1}
        let j2 = if p_order >= 3 { jacobi_all(p_order - 3, 2.0, 2.0, zeta) } else { Vec::new() };
        let bubble = 0.25 * (1.0 - zeta) * (1.0 + zeta);
        for p in 1..p_order {
            let n = p - 1;
            let dj = if n == 0 { 0.0 } else { 0.5 * (n as f64 + 3.0) * j2[n - 1] };
            out[p] = -0.5 * zeta * j[n] + bubble * dj;
        }
    }
}

/// Coefficients C_{k,m} with (1−ζ)^μ P_k^{μ,−μ}(ζ) = Σ_m C_{k,m} (1−ζ)^{μ+m}.
pub fn fractonomial_expansion_coeffs(k: usize, mu: f64) -> Vec<f64> {
    (0..=k).map(|m| binomial((k + m) as f64, m) * binomial(k as f64 + mu, k - m) * (-0.5f64).powi(m as i32)).collect()
}

/// Left RL derivative ₀D_x^α of x^p: Γ(p+1)/Γ(p+1−α)·x^{p−α}.
pub fn rl_left_deriv_power(p: f64, alpha: f64, x: f64) -> Result<f64> {
    if p <= -1.0 {
        return domain(format!("power {p} must exceed -1"));
    }
    if x < 0.0 {
        return domain(format!("x = {x} must be non-negative"));
    }
    let c = rl_power_factor(p, alpha);
    if c == 0.0 {
        return Ok(0.0);
    }
    Ok(c * x.powf(p - alpha))
}

/// Γ(p+1)/Γ(p+1−α); zero when p+1−α is a pole of Γ.
pub fn rl_power_factor(p: f64, alpha: f64) -> f64 {
    libm::tgamma(p + 1.0) * rgamma(p + 1.0 - alpha)
}

/// Left RL derivative (from 0) of the truncated power (x−c)₊^p.
pub fn rl_left_deriv_shifted_power(p: f64, alpha: f64, c: f64, x: f64) -> Result<f64> {
    if x <= c {
        if p <= -1.0 {
            return domain(format!("power {p} must exceed -1"));
        }
        return Ok(0.0);
    }
    rl_left_deriv_power(p, alpha, x - c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special_functions::{gamma, QuadratureRule};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn frac_order_range() {
        assert!(FracOrder::new(0.0).is_err());
        assert!(FracOrder::new(1.2).is_err());
        assert_eq!(FracOrder::new(0.5).unwrap().alpha(), 1.5);
    }

    #[test]
    fn polyfrac_endpoints() {
        assert_eq!(polyfrac2(3, 0.4, 1.0), 0.0);
        assert_relative_eq!(polyfrac2(0, 0.7, -1.0), 2f64.powf(0.7), max_relative = 1e-15);
        let v = polyfrac2(2, 0.5, 0.3);
        assert_relative_eq!(v, 0.7f64.sqrt() * jacobi(2, 0.5, -0.5, 0.3), max_relative = 1e-15);
    }

    #[test]
    fn rl_right_values() {
        assert_relative_eq!(rl_right_deriv_polyfrac(0, 0.5, 0.2), gamma(1.5).unwrap(), max_relative = 1e-14);
        assert!(rl_right_deriv_polyfrac(1, 0.3, 0.0).abs() < 1e-16);
    }

    /// Right RL derivative by quadrature: −d/dξ [1/Γ(1−μ) ∫_ξ^1 v(s)(s−ξ)^{−μ} ds],
    /// the derivative taken by central differences.
    fn rl_right_oracle(k: usize, mu: f64, xi: f64) -> f64 {
        let rule = QuadratureRule::gauss_jacobi(60, mu, -mu).unwrap();
        let integral = |x: f64| {
            // s = x + h(1+t): (1−s)^μ (s−x)^{−μ} ds = h (1−t)^μ (1+t)^{−μ} dt
            let h = 0.5 * (1.0 - x);
            h * rule.integrate(|t| jacobi(k, mu, -mu, x + h * (1.0 + t))) * rgamma(1.0 - mu)
        };
        let h = 1e-5;
        -(integral(xi + h) - integral(xi - h)) / (2.0 * h)
    }

    #[test]
    fn rl_right_identity_matches_oracle() {
        let got = rl_right_deriv_polyfrac(3, 0.3, 0.4);
        assert!((got - rl_right_oracle(3, 0.3, 0.4)).abs() < 1e-6);
    }

    #[test]
    fn modal_basis_vertex_values() {
        assert_eq!(modal_basis(0, 4, -1.0).unwrap(), 1.0);
        assert_eq!(modal_basis(4, 4, 1.0).unwrap(), 1.0);
        assert_eq!(modal_basis(4, 4, -1.0).unwrap(), 0.0);
        assert_eq!(modal_basis_deriv(5, 5, 0.3).unwrap(), 0.5);
        assert!(modal_basis(6, 5, 0.0).is_err());
        for p in 1..5 {
            assert!(modal_basis(p, 5, 1.0).unwrap().abs() < 1e-15);
            assert!(modal_basis(p, 5, -1.0).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn modal_derivative_finite_difference() {
        let h = 1e-6;
        let fd = (modal_basis(2, 5, 0.1 + h).unwrap() - modal_basis(2, 5, 0.1 - h).unwrap()) / (2.0 * h);
        assert!((modal_basis_deriv(2, 5, 0.1).unwrap() - fd).abs() < 1e-8);
    }

    #[test]
    fn bulk_evaluation_matches_pointwise() {
        let p_order = 8;
        let mut v = vec![0.0; p_order + 1];
        let mut d = vec![0.0; p_order + 1];
        for &z in &[-0.9, -0.2, 0.35, 0.99] {
            modal_values(p_order, z, &mut v);
            modal_derivatives(p_order, z, &mut d);
            for p in 0..=p_order {
                assert_relative_eq!(v[p], modal_basis(p, p_order, z).unwrap(), epsilon = 1e-15);
                assert_relative_eq!(d[p], modal_basis_deriv(p, p_order, z).unwrap(), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn expansion_k0() {
        assert_eq!(fractonomial_expansion_coeffs(0, 0.3), vec![1.0]);
    }

    #[test]
    fn power_derivative() {
        assert_relative_eq!(rl_left_deriv_power(1.0, 1.0, 0.37).unwrap(), 1.0, max_relative = 1e-15);
        let mu = 0.4;
        let x = 0.6;
        assert_relative_eq!(
            rl_left_deriv_power(2.0 + mu, 1.0 + mu, x).unwrap(),
            gamma(3.0 + mu).unwrap() * x,
            max_relative = 1e-13
        );
        assert!(rl_left_deriv_power(-1.0, 0.5, 0.2).is_err());
        assert_eq!(rl_left_deriv_shifted_power(2.0, 1.5, 0.5, 0.3).unwrap(), 0.0);
        // p = 1, α = 2: the derivative of a linear function vanishes.
        assert_eq!(rl_left_deriv_power(1.0, 2.0, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn left_power_rule_matches_quadrature() {
        // ₀D_x^α x^p = d²/dx² [1/Γ(2−α) ∫_0^x s^p (x−s)^{1−α} ds]; the inner integral is
        // B(p+1, 2−α) x^{p+2−α}/Γ(2−α), whose second derivative is checked against the rule.
        let (p, alpha, x) = (7.0, 1.5, 0.5);
        let rule = QuadratureRule::gauss_jacobi(40, 1.0 - alpha, 0.0).unwrap();
        let inner = |y: f64| {
            // s = y(1+t)/2: s^p (y−s)^{1−α} ds = (y/2)^{p+2−α} (1+t)^p (1−t)^{1−α} dt
            rule.integrate(|t| (1.0 + t).powf(p)) * (y / 2.0).powf(p + 2.0 - alpha) * rgamma(2.0 - alpha)
        };
        let h = 1e-4;
        let fd = (inner(x + h) - 2.0 * inner(x) + inner(x - h)) / (h * h);
        assert!((fd - rl_left_deriv_power(p, alpha, x).unwrap()).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn expansion_reconstructs_polyfrac(k in 0usize..=10, mu in 0.05f64..1.0, z in -1.0f64..1.0) {
            let c = fractonomial_expansion_coeffs(k, mu);
            let w = 1.0 - z;
            let recon: f64 = c.iter().enumerate().map(|(m, cm)| cm * w.powf(mu + m as f64)).sum();
            let scale: f64 = c.iter().enumerate().map(|(m, cm)| (cm * w.powf(mu + m as f64)).abs()).sum::<f64>().max(1.0);
            prop_assert!((recon - polyfrac2(k, mu, z)).abs() <= 1e-12 * scale);
        }

        #[test]
        fn vertex_partition_of_unity(z in -1.0f64..1.0) {
            let s = modal_basis(0, 1, z).unwrap() + modal_basis(1, 1, z).unwrap();
            prop_assert!((s - 1.0).abs() < 1e-15);
        }
    }
}

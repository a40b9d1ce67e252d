//! Gamma function, Jacobi polynomials, Gauss(-Lobatto)-Jacobi quadrature and
//! the Gauss hypergeometric function ₂F₁ on the real line.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use crate::error::{domain, Error, Result};

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.round()
}

/// Γ(x) for real `x` that is not a pole.
pub fn gamma(x: f64) -> Result<f64> {
    if !x.is_finite() || is_nonpositive_integer(x) {
        return domain(format!("gamma pole or non-finite argument {x}"));
    }
    Ok(libm::tgamma(x))
}

/// 1/Γ(x), entire in `x`; zero at the poles of Γ.
pub fn rgamma(x: f64) -> f64 {
    if is_nonpositive_integer(x) {
        0.0
    } else {
        1.0 / libm::tgamma(x)
    }
}

/// Γ(a)/Γ(b) for positive arguments, robust against overflow of either factor.
pub fn gamma_ratio(a: f64, b: f64) -> f64 {
    debug_assert!(a > 0.0 && b > 0.0);
    if a < 150.0 && b < 150.0 {
        libm::tgamma(a) / libm::tgamma(b)
    } else {
        (libm::lgamma(a) - libm::lgamma(b)).exp()
    }
}

/// Generalised binomial coefficient C(x, n) = x(x−1)…(x−n+1)/n! for integer `n ≥ 0`.
pub fn binomial(x: f64, n: usize) -> f64 {
    (0..n).fold(1.0, |acc, j| acc * (x - j as f64) / (j as f64 + 1.0))
}

/// Jacobi polynomial P_n^{a,b}(x) by the three-term recurrence.
pub fn jacobi(n: usize, a: f64, b: f64, x: f64) -> f64 {
    let mut p0 = 1.0;
    if n == 0 {
        return p0;
    }
    let mut p1 = 0.5 * ((a + b + 2.0) * x + (a - b));
    for k in 1..n {
        let p2 = jacobi_step(k, a, b, x, p1, p0);
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// P_0^{a,b}(x), …, P_n^{a,b}(x) in one pass.
pub fn jacobi_all(n: usize, a: f64, b: f64, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    jacobi_fill(n, a, b, x, &mut out);
    out
}

/// As [`jacobi_all`] but writing into a reusable buffer.
pub fn jacobi_fill(n: usize, a: f64, b: f64, x: f64, out: &mut Vec<f64>) {
    out.clear();
    out.push(1.0);
    if n == 0 {
        return;
    }
    out.push(0.5 * ((a + b + 2.0) * x + (a - b)));
    for k in 1..n {
        let next = jacobi_step(k, a, b, x, out[k], out[k - 1]);
        out.push(next);
    }
}

#[inline]
fn jacobi_step(k: usize, a: f64, b: f64, x: f64, pk: f64, pkm1: f64) -> f64 {
    let k = k as f64;
    let s = 2.0 * k + a + b;
    let a1 = 2.0 * (k + 1.0) * (k + a + b + 1.0) * s;
    let a2 = (s + 1.0) * (a * a - b * b);
    let a3 = s * (s + 1.0) * (s + 2.0);
    let a4 = 2.0 * (k + a) * (k + b) * (s + 2.0);
    ((a2 + a3 * x) * pk - a4 * pkm1) / a1
}

/// d/dx P_n^{a,b}(x) = ((n+a+b+1)/2) P_{n−1}^{a+1,b+1}(x).
pub fn jacobi_deriv(n: usize, a: f64, b: f64, x: f64) -> f64 {
    if n == 0 {
        0.0
    } else {
        0.5 * (n as f64 + a + b + 1.0) * jacobi(n - 1, a + 1.0, b + 1.0, x)
    }
}

/// ∫₋₁¹ (1−x)^a (1+x)^b [P_n^{a,b}(x)]² dx.
pub fn jacobi_orthogonality_constant(n: usize, a: f64, b: f64) -> f64 {
    let nf = n as f64;
    let lg = libm::lgamma(nf + a + 1.0) + libm::lgamma(nf + b + 1.0)
        - libm::lgamma(nf + a + b + 1.0)
        - libm::lgamma(nf + 1.0);
    if n == 0 {
        // (2n+a+b+1)·Γ(n+a+b+1) collapses to Γ(a+b+2); avoids the a+b = −1 singularity.
        2f64.powf(a + b + 1.0) * (libm::lgamma(a + 1.0) + libm::lgamma(b + 1.0) - libm::lgamma(a + b + 2.0)).exp()
    } else {
        2f64.powf(a + b + 1.0) / (2.0 * nf + a + b + 1.0) * lg.exp()
    }
}

type RuleMemo = HashMap<(usize, u64, u64), QuadratureRule>;

/// Family of quadrature rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureKind {
    /// Interior Gauss-Jacobi nodes.
    GaussJacobi,
    /// Gauss-Lobatto-Jacobi nodes including both endpoints.
    GaussLobattoJacobi,
}

/// Nodes and weights for ∫₋₁¹ (1−x)^α (1+x)^β f(x) dx.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub kind: QuadratureKind,
    pub alpha: f64,
    pub beta: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Gauss-Jacobi rule with `q` points, memoised per (q, α, β).
    pub fn gauss_jacobi(q: usize, alpha: f64, beta: f64) -> Result<Self> {
        static RULES: OnceLock<Mutex<RuleMemo>> = OnceLock::new();
        let key = (q, alpha.to_bits(), beta.to_bits());
        let rules = RULES.get_or_init(Default::default);
        if let Some(r) = rules.lock().unwrap_or_else(|e| e.into_inner()).get(&key) {
            return Ok(r.clone());
        }
        let rule = quadrature_rule(QuadratureKind::GaussJacobi, q, alpha, beta)?;
        rules.lock().unwrap_or_else(|e| e.into_inner()).insert(key, rule.clone());
        Ok(rule)
    }

    /// Gauss-Legendre rule with `q` points.
    pub fn gauss_legendre(q: usize) -> Result<Self> {
        Self::gauss_jacobi(q, 0.0, 0.0)
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// True when the rule has no points.
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Σ w_q f(z_q).
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// Iterator over (node, weight) pairs.
    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Build a quadrature rule of the requested family.
///
/// Nodes are found by Newton iteration with polynomial deflation from
/// Chebyshev initial guesses; weights follow from the derivative formula.
pub fn quadrature_rule(kind: QuadratureKind, q: usize, alpha: f64, beta: f64) -> Result<QuadratureRule> {
    if alpha <= -1.0 || beta <= -1.0 || !alpha.is_finite() || !beta.is_finite() {
        return domain(format!("quadrature weight exponents must exceed -1, got ({alpha}, {beta})"));
    }
    let (nodes, weights) = match kind {
        QuadratureKind::GaussJacobi => {
            if q == 0 {
                return domain("Gauss-Jacobi rule needs at least one point");
            }
            let nodes = jacobi_zeros(q, alpha, beta)?;
            let n = q as f64;
            let lc = libm::lgamma(n + alpha + 1.0) + libm::lgamma(n + beta + 1.0)
                - libm::lgamma(n + alpha + beta + 1.0)
                - libm::lgamma(n + 1.0);
            let c = 2f64.powf(alpha + beta + 1.0) * lc.exp();
            let weights = nodes
                .iter()
                .map(|&x| {
                    let d = jacobi_deriv(q, alpha, beta, x);
                    c / ((1.0 - x * x) * d * d)
                })
                .collect();
            (nodes, weights)
        }
        QuadratureKind::GaussLobattoJacobi => {
            if q < 2 {
                return domain("Gauss-Lobatto-Jacobi rule needs at least two points");
            }
            let mut nodes = Vec::with_capacity(q);
            nodes.push(-1.0);
            nodes.extend(jacobi_zeros(q - 2, alpha + 1.0, beta + 1.0)?);
            nodes.push(1.0);
            let n = q as f64;
            let lc = libm::lgamma(alpha + n) + libm::lgamma(beta + n)
                - libm::lgamma(n)
                - libm::lgamma(alpha + beta + n + 1.0);
            let c = 2f64.powf(alpha + beta + 1.0) * lc.exp() / (n - 1.0);
            let mut weights: Vec<f64> = nodes
                .iter()
                .map(|&x| {
                    let p = jacobi(q - 1, alpha, beta, x);
                    c / (p * p)
                })
                .collect();
            weights[0] *= beta + 1.0;
            weights[q - 1] *= alpha + 1.0;
            (nodes, weights)
        }
    };
    Ok(QuadratureRule { kind, alpha, beta, nodes, weights })
}

/// Zeros of P_n^{a,b} in increasing order.
fn jacobi_zeros(n: usize, a: f64, b: f64) -> Result<Vec<f64>> {
    let mut z: Vec<f64> = Vec::with_capacity(n);
    for k in 0..n {
        let mut r = -((2 * k + 1) as f64 * std::f64::consts::PI / (2 * n) as f64).cos();
        if k > 0 {
            r = 0.5 * (r + z[k - 1]);
        }
        let mut converged = false;
        for _ in 0..200 {
            let s: f64 = z.iter().map(|&zi| 1.0 / (r - zi)).sum();
            let p = jacobi(n, a, b, r);
            let dp = jacobi_deriv(n, a, b, r);
            let delta = -p / (dp - s * p);
            r += delta;
            if delta.abs() <= 1e-15 * r.abs().max(1e-3) {
                converged = true;
                break;
            }
        }
        if !converged || !r.is_finite() {
            return Err(Error::Numeric(format!("Jacobi root iteration stalled (n={n}, a={a}, b={b}, k={k})")));
        }
        z.push(r);
    }
    Ok(z)
}

const SERIES_TOL: f64 = 1e-17;
const SERIES_MAX_TERMS: usize = 50_000;

fn hyp2f1_series(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 0..SERIES_MAX_TERMS {
        let nf = n as f64;
        term *= (a + nf) * (b + nf) / ((c + nf) * (nf + 1.0)) * z;
        sum += term;
        if term == 0.0 {
            return Ok(sum);
        }
        if term.abs() <= SERIES_TOL * sum.abs() && n > 2 {
            return Ok(sum);
        }
    }
    Err(Error::Numeric(format!("2F1({a},{b};{c};{z}) series did not converge")))
}

/// Gauss hypergeometric function ₂F₁(a, b; c; z) for real arguments, z ≤ 1.
///
/// Power series for |z| ≤ 1/2, the Pfaff transformation for z < −1/2 and
/// the z → 1−z connection formula on (1/2, 1). At z = 1 the Gauss sum is
/// used, which requires c − a − b > 0. When c − a − b is an integer the
/// connection formula degenerates and the series is summed directly.
pub fn hyp2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite() && c.is_finite() && z.is_finite()) {
        return domain("2F1 arguments must be finite");
    }
    let poly = is_nonpositive_integer(a) || is_nonpositive_integer(b);
    if is_nonpositive_integer(c) {
        let ok = [a, b].iter().any(|&t| is_nonpositive_integer(t) && t > c);
        if !ok {
            return domain(format!("2F1 undefined for c = {c}"));
        }
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    if poly {
        // Terminating series; exact for any z.
        let n = (-(if is_nonpositive_integer(a) { a } else { b })) as usize;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 0..n {
            let kf = k as f64;
            term *= (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * z;
            sum += term;
        }
        return Ok(sum);
    }
    if z > 1.0 {
        return domain(format!("2F1 requires z <= 1, got {z}"));
    }
    let s = c - a - b;
    if z == 1.0 {
        if s <= 0.0 {
            return domain(format!("2F1 diverges at z = 1 when c-a-b = {s} <= 0"));
        }
        return Ok(libm::tgamma(c) * libm::tgamma(s) * rgamma(c - a) * rgamma(c - b));
    }
    if z.abs() <= 0.5 {
        return hyp2f1_series(a, b, c, z);
    }
    if z < -0.5 {
        let w = z / (z - 1.0);
        return Ok((1.0 - z).powf(-a) * hyp2f1(a, c - b, c, w)?);
    }
    // 1/2 < z < 1
    if (s - s.round()).abs() < 1e-12 {
        return hyp2f1_series(a, b, c, z);
    }
    let w = 1.0 - z;
    let t1 = libm::tgamma(c) * libm::tgamma(s) * rgamma(c - a) * rgamma(c - b);
    let t2 = libm::tgamma(c) * libm::tgamma(-s) * rgamma(a) * rgamma(b);
    let f1 = if t1 != 0.0 { hyp2f1_series(a, b, 1.0 - s, w)? } else { 0.0 };
    let f2 = if t2 != 0.0 { hyp2f1_series(c - a, c - b, s + 1.0, w)? } else { 0.0 };
    Ok(t1 * f1 + t2 * w.powf(s) * f2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_values() {
        assert_relative_eq!(gamma(1.0).unwrap(), 1.0, max_relative = 1e-15);
        assert_relative_eq!(gamma(0.5).unwrap(), std::f64::consts::PI.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(gamma(2.5).unwrap(), 1.5 * 0.5 * std::f64::consts::PI.sqrt(), max_relative = 1e-14);
        assert!(gamma(0.0).is_err());
        assert!(gamma(-3.0).is_err());
        assert_eq!(rgamma(-2.0), 0.0);
    }

    #[test]
    fn gamma_matches_factorials() {
        let mut f = 1.0f64;
        for n in 1..40 {
            assert_relative_eq!(gamma(n as f64).unwrap(), f, max_relative = 1e-13);
            f *= n as f64;
        }
    }

    #[test]
    fn jacobi_low_order() {
        assert_eq!(jacobi(0, 0.5, -0.5, 0.3), 1.0);
        assert_relative_eq!(jacobi(1, 1.0, 1.0, 0.5), 1.0, max_relative = 1e-15);
        assert_relative_eq!(jacobi_deriv(1, 1.0, 1.0, -0.3), 2.0, max_relative = 1e-15);
        assert_eq!(jacobi_deriv(0, 0.3, 0.2, 0.1), 0.0);
    }

    #[test]
    fn jacobi_against_explicit_sum() {
        // P_n^{a,b}(x) = Σ_s C(n+a, n−s) C(n+b, s) ((x−1)/2)^s ((x+1)/2)^{n−s}
        for &(n, a, b, x) in &[(5usize, 0.5, -0.5, 0.7), (7, 1.0, 1.0, -0.2), (9, 0.3, -0.3, 0.95)] {
            let oracle: f64 = (0..=n)
                .map(|s| {
                    binomial(n as f64 + a, n - s)
                        * binomial(n as f64 + b, s)
                        * ((x - 1.0) / 2.0f64).powi(s as i32)
                        * ((x + 1.0) / 2.0f64).powi((n - s) as i32)
                })
                .sum();
            assert_relative_eq!(jacobi(n, a, b, x), oracle, max_relative = 1e-12);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let h = 1e-6;
        let fd = (jacobi(4, 0.0, 0.0, 0.2 + h) - jacobi(4, 0.0, 0.0, 0.2 - h)) / (2.0 * h);
        assert!((jacobi_deriv(4, 0.0, 0.0, 0.2) - fd).abs() < 1e-8);
    }

    #[test]
    fn orthogonality_constants() {
        assert_relative_eq!(jacobi_orthogonality_constant(0, 0.0, 0.0), 2.0, max_relative = 1e-14);
        for k in 1..8usize {
            let kf = k as f64;
            assert_relative_eq!(
                jacobi_orthogonality_constant(k - 1, 1.0, 1.0),
                8.0 * kf / ((2.0 * kf + 1.0) * (kf + 1.0)),
                max_relative = 1e-13
            );
        }
        let rule = QuadratureRule::gauss_jacobi(64, 0.5, -0.5).unwrap();
        let q = rule.integrate(|x| jacobi(2, 0.5, -0.5, x).powi(2));
        assert_relative_eq!(jacobi_orthogonality_constant(2, 0.5, -0.5), q, max_relative = 1e-12);
    }

    #[test]
    fn single_point_rule() {
        let r = QuadratureRule::gauss_legendre(1).unwrap();
        assert_eq!(r.nodes.len(), 1);
        assert!(r.nodes[0].abs() < 1e-15);
        assert_relative_eq!(r.weights[0], 2.0, max_relative = 1e-15);
    }

    #[test]
    fn lobatto_endpoints_and_exactness() {
        let r = quadrature_rule(QuadratureKind::GaussLobattoJacobi, 7, 0.5, 0.0).unwrap();
        assert_eq!(r.nodes[0], -1.0);
        assert_eq!(r.nodes[6], 1.0);
        // exact through degree 2Q−3 = 11 against (1−x)^{1/2}
        let rg = QuadratureRule::gauss_jacobi(30, 0.5, 0.0).unwrap();
        for k in 0..=11 {
            let a = r.integrate(|x| x.powi(k));
            let b = rg.integrate(|x| x.powi(k));
            assert!((a - b).abs() < 1e-13, "k={k}: {a} vs {b}");
        }
    }

    #[test]
    fn weight_sums() {
        for &(a, b) in &[(0.0, 0.0), (0.5, 0.0), (0.9, -0.9), (-0.5, 2.5), (1.5, 1.0), (0.1, 6.5)] {
            let exact = 2f64.powf(a + b + 1.0)
                * (libm::lgamma(a + 1.0) + libm::lgamma(b + 1.0) - libm::lgamma(a + b + 2.0)).exp();
            for q in [2usize, 5, 17, 64] {
                let r = QuadratureRule::gauss_jacobi(q, a, b).unwrap();
                let s: f64 = r.weights.iter().sum();
                assert_relative_eq!(s, exact, max_relative = 1e-12);
                assert!(r.weights.iter().all(|&w| w > 0.0));
                assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn large_rule_converges() {
        let r = QuadratureRule::gauss_jacobi(256, 0.3, -0.4).unwrap();
        assert_eq!(r.len(), 256);
    }

    #[test]
    fn hyp2f1_closed_forms() {
        assert_eq!(hyp2f1(0.3, 0.7, 1.1, 0.0).unwrap(), 1.0);
        assert_relative_eq!(hyp2f1(1.0, 1.0, 2.0, 0.5).unwrap(), 2.0 * 2f64.ln(), max_relative = 1e-14);
        let g = |x: f64| gamma(x).unwrap();
        assert_relative_eq!(
            hyp2f1(1.0, 1.0, 2.5, 1.0).unwrap(),
            g(2.5) * g(0.5) / (g(1.5) * g(1.5)),
            max_relative = 1e-14
        );
        // −ln(1−z)/z on each branch
        for &z in &[-3.0, -0.7, -0.2, 0.3, 0.75, 0.99] {
            let v = hyp2f1(1.0, 1.0, 2.0, z).unwrap();
            assert_relative_eq!(v, -(1.0 - z).ln() / z, max_relative = 1e-11);
        }
        // (1−z)^{−a}
        for &z in &[-5.0, -0.6, 0.4, 0.6, 0.95] {
            assert_relative_eq!(hyp2f1(0.3, 1.7, 1.7, z).unwrap(), (1.0 - z).powf(-0.3), max_relative = 1e-11);
        }
        assert!(hyp2f1(1.0, 1.0, 1.5, 1.0).is_err());
        assert!(hyp2f1(1.0, 1.0, 2.0, 1.5).is_err());
        assert!(hyp2f1(1.0, 1.0, -2.0, 0.2).is_err());
    }

    #[test]
    fn hyp2f1_terminating() {
        // ₂F₁(−2, b; c; z) = 1 − 2bz/c + b(b+1)z²/(c(c+1))
        let (b, c, z) = (1.3, 0.7, 0.9);
        let exact = 1.0 - 2.0 * b * z / c + b * (b + 1.0) * z * z / (c * (c + 1.0));
        assert_relative_eq!(hyp2f1(-2.0, b, c, z).unwrap(), exact, max_relative = 1e-14);
    }
}

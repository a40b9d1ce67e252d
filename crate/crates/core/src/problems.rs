//! Manufactured exact solutions and their analytic forces
//! f = ₀D_x^{1+μ} u − λu.
//!
//! Every exact solution is a sum of terms of two shapes: truncated power
//! series (x − c)₊^β Σ_j a_j (x − c)^j, differentiated term by term with the
//! power rule, and x^a (1−x)^b, whose derivative is a ₂F₁. Forces keep the
//! (x − c)₊^{β−α} factor explicit so element loads can integrate it exactly.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::forcing::{Force, ForcePart};
use crate::special_functions::{gamma_ratio, hyp2f1};

/// One additive piece of an exact solution.
#[derive(Debug, Clone, PartialEq)]
pub enum SolutionTerm {
    /// (x − shift)₊^base · Σ_j coeffs[j] (x − shift)^j.
    ShiftedPowerSeries { shift: f64, base: f64, coeffs: Vec<f64> },
    /// scale · x^a (1 − x)^b.
    BetaPower { scale: f64, a: f64, b: f64 },
}

fn horner(coeffs: &[f64], y: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * y + c)
}

impl SolutionTerm {
    /// Series term with leading zero coefficients folded into the base power.
    pub fn series(shift: f64, base: f64, coeffs: Vec<f64>) -> Self {
        let lead = coeffs.iter().position(|c| *c != 0.0).unwrap_or(0);
        Self::ShiftedPowerSeries { shift, base: base + lead as f64, coeffs: coeffs[lead..].to_vec() }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::ShiftedPowerSeries { shift, base, coeffs } => {
                let y = x - shift;
                if y < 0.0 || (y == 0.0 && *base > 0.0) {
                    return 0.0;
                }
                y.powf(*base) * horner(coeffs, y)
            }
            Self::BetaPower { scale, a, b } => scale * x.powf(*a) * (1.0 - x).max(0.0).powf(*b),
        }
    }

    /// Force parts of ₀D_x^α applied to this term.
    fn derivative_part(&self, alpha: f64) -> Result<ForcePart> {
        match self {
            Self::ShiftedPowerSeries { shift, base, coeffs } => {
                if base - alpha <= -1.0 {
                    return Err(Error::Domain(format!("(x − {shift})^{base} is too singular for order {alpha}")));
                }
                let shift = *shift;
                let d: Vec<f64> = coeffs
                    .iter()
                    .enumerate()
                    .map(|(j, c)| c * gamma_ratio(base + j as f64 + 1.0, base + j as f64 + 1.0 - alpha))
                    .collect();
                Ok(ForcePart::Singular {
                    at: shift,
                    exponent: base - alpha,
                    g: Arc::new(move |x| horner(&d, x - shift)),
                })
            }
            Self::BetaPower { scale, a, b } => {
                if a - alpha <= -1.0 {
                    return Err(Error::Domain(format!("x^{a} is too singular for order {alpha}")));
                }
                let c = scale * gamma_ratio(a + 1.0, a + 1.0 - alpha);
                let (a, b) = (*a, *b);
                // check the hypergeometric evaluates on the whole closed interval
                hyp2f1(-b, a + 1.0, a + 1.0 - alpha, 1.0)?;
                Ok(ForcePart::Singular {
                    at: 0.0,
                    exponent: a - alpha,
                    g: Arc::new(move |x| c * hyp2f1(-b, a + 1.0, a + 1.0 - alpha, x.min(1.0)).unwrap_or(f64::NAN)),
                })
            }
        }
    }

    /// −λ times this term, as a force part.
    fn mass_part(&self, lambda: f64) -> ForcePart {
        match self.clone() {
            Self::ShiftedPowerSeries { shift, base, coeffs } => ForcePart::Singular {
                at: shift,
                exponent: base,
                g: Arc::new(move |x| -lambda * horner(&coeffs, x - shift)),
            },
            Self::BetaPower { scale, a, b } => ForcePart::Singular {
                at: 0.0,
                exponent: a,
                g: Arc::new(move |x| -lambda * scale * (1.0 - x).max(0.0).powf(b)),
            },
        }
    }
}

/// An exact solution on [0, 1] with its parameters.
#[derive(Debug, Clone)]
pub struct ManufacturedProblem {
    pub name: &'static str,
    pub description: &'static str,
    pub mu: f64,
    pub lambda: f64,
    pub terms: Vec<SolutionTerm>,
    /// Points where the exact solution or its force is not smooth.
    pub singular_points: Vec<f64>,
    /// Suggested interior breakpoints (e.g. at an interior singularity or the
    /// edge of a boundary layer).
    pub partition_hint: Vec<f64>,
}

impl ManufacturedProblem {
    /// u(x).
    pub fn exact(&self, x: f64) -> f64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    /// f = ₀D_x^{1+μ} u − λu with declared singular factors.
    pub fn force(&self) -> Result<Force> {
        let alpha = 1.0 + self.mu;
        let mut parts = Vec::with_capacity(2 * self.terms.len());
        for t in &self.terms {
            parts.push(t.derivative_part(alpha)?);
            if self.lambda != 0.0 {
                parts.push(t.mass_part(self.lambda));
            }
        }
        Ok(Force::new(parts))
    }
}

/// Names accepted by [`problem`].
pub const PROBLEM_NAMES: [&str; 8] =
    ["poly7", "sin6", "boundary2", "boundary5", "boundary-both", "interior-poly", "interior-sin", "boundary1"];

/// Series coefficients (in powers of y) of sin(ωy)/y, truncated where the
/// remainder on |y| ≤ `r` drops below 1e-17.
fn sinc_series(omega: f64, r: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut term = omega; // ω^{n+1}/(n+1)! for n = 0
    let mut n = 0usize;
    loop {
        if n.is_multiple_of(2) {
            out.push(if (n / 2).is_multiple_of(2) { term } else { -term });
        } else {
            out.push(0.0);
        }
        if n > 4 && term * r.powi(n as i32) < 1e-17 {
            break;
        }
        n += 1;
        term *= omega / (n as f64 + 1.0);
    }
    out
}

/// cos(ωy) coefficients, truncated as in [`sinc_series`].
fn cos_series(omega: f64, r: f64) -> Vec<f64> {
    let mut out = vec![1.0];
    let mut term = 1.0;
    let mut n = 0usize;
    loop {
        n += 1;
        term *= omega / n as f64;
        if n.is_multiple_of(2) {
            out.push(if (n / 2).is_multiple_of(2) { term } else { -term });
        } else {
            out.push(0.0);
        }
        if n > 4 && term * r.powi(n as i32) < 1e-17 {
            break;
        }
    }
    out
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Build a catalog problem for operator order 1 + μ.
pub fn problem(name: &str, mu: f64, lambda: f64) -> Result<ManufacturedProblem> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::Config(format!("μ must lie in (0, 1), got {mu}")));
    }
    let mk = |name, description, terms, singular_points, partition_hint| ManufacturedProblem {
        name,
        description,
        mu,
        lambda,
        terms,
        singular_points,
        partition_hint,
    };
    Ok(match name {
        "poly7" => mk("poly7", "x^7 - x^6", vec![SolutionTerm::series(0.0, 6.0, vec![-1.0, 1.0])], vec![], vec![]),
        "sin6" => {
            // x⁶ sin(2πx) = x⁷ · sin(2πx)/x
            let c = sinc_series(2.0 * PI, 1.0);
            mk("sin6", "x^6 sin(2 pi x)", vec![SolutionTerm::series(0.0, 7.0, c)], vec![], vec![])
        }
        "boundary2" => mk(
            "boundary2",
            "(1-x) x^(2+mu)",
            vec![SolutionTerm::series(0.0, 2.0 + mu, vec![1.0, -1.0])],
            vec![0.0],
            vec![1e-2],
        ),
        "boundary5" => mk(
            "boundary5",
            "(1-x) x^(5+mu)",
            vec![SolutionTerm::series(0.0, 5.0 + mu, vec![1.0, -1.0])],
            vec![0.0],
            vec![1e-2],
        ),
        "boundary-both" => mk(
            "boundary-both",
            "(1-x)^(3+1/4) x^(3+2/3)",
            vec![SolutionTerm::BetaPower { scale: 1.0, a: 3.0 + 2.0 / 3.0, b: 3.25 }],
            vec![0.0, 1.0],
            vec![1e-2, 1.0 - 1e-2],
        ),
        "interior-poly" => {
            // |x − ½| = 2(x − ½)₊ − (x − ½); with y = x − ½, x²(1−x)² = (¼ − y²)².
            let a = SolutionTerm::series(0.5, 1.0, vec![2.0 / 16.0, 0.0, -1.0, 0.0, 2.0]);
            let b = SolutionTerm::series(0.0, 0.0, vec![0.0, 0.0, 0.5, -2.0, 2.5, -1.0]);
            mk("interior-poly", "x^2 (1-x)^2 |x-1/2|", vec![a, b], vec![0.5], vec![0.5])
        }
        "interior-sin" => {
            // 2(x−½)₊ sin(3πx) x(1−x) with sin(3π(y+½)) = −cos(3πy), x(1−x) = ¼ − y²
            let cy = cos_series(3.0 * PI, 0.5);
            let qa: Vec<f64> = poly_mul(&cy, &[-0.5, 0.0, 2.0]);
            let a = SolutionTerm::series(0.5, 1.0, qa);
            // −(x − ½) x (1 − x) sin(3πx) = (x³ − 1.5x² + 0.5x)·x·sinc(3πx)
            let s = sinc_series(3.0 * PI, 1.0);
            let qb = poly_mul(&[0.0, 0.5, -1.5, 1.0], &s);
            let b = SolutionTerm::series(0.0, 1.0, qb);
            mk("interior-sin", "sin(3 pi x) x (1-x) |x-1/2|", vec![a, b], vec![0.5], vec![0.5])
        }
        "boundary1" => mk(
            "boundary1",
            "(1-x) x^(1+mu)",
            vec![SolutionTerm::series(0.0, 1.0 + mu, vec![1.0, -1.0])],
            vec![0.0],
            vec![],
        ),
        other => {
            return Err(Error::Config(format!("unknown problem '{other}'; known: {}", PROBLEM_NAMES.join(", "))));
        }
    })
}

/// Default operator exponent μ for each catalog problem.
pub fn default_mu(name: &str) -> f64 {
    match name {
        "boundary1" => 0.1,
        _ => 0.5,
    }
}

/// Every catalog problem at its default μ with λ = 0.
pub fn catalog() -> Vec<ManufacturedProblem> {
    PROBLEM_NAMES.iter().map(|n| problem(n, default_mu(n), 0.0).expect("catalog entries are valid")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special_functions::gamma;
    use crate::test_oracle::adaptive1;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// ₀D_x^α u = d²/dx² [1/Γ(2−α) ∫₀ˣ u(s)(x−s)^{1−α} ds]; the integral with
    /// t = (x−s)^{2−α} (smooth integrand), the derivative by a 5-point stencil.
    fn rl_oracle(u: &dyn Fn(f64) -> f64, alpha: f64, x: f64) -> f64 {
        let beta = 2.0 - alpha;
        let integral = |x: f64| {
            let top = x.powf(beta);
            let kink = if x > 0.5 { Some((x - 0.5).powf(beta)) } else { None };
            let f = |t: f64| u(x - t.powf(1.0 / beta));
            let v = match kink {
                Some(k) => adaptive1(f, 0.0, k, 1e-15) + adaptive1(f, k, top, 1e-15),
                None => adaptive1(f, 0.0, top, 1e-15),
            };
            v / (beta * gamma(beta).unwrap())
        };
        // the stencil error grows like (h/d)⁴ near the kink at distance d
        let h = 2.5e-3f64.min((x - 0.5).abs() / 60.0);
        (-integral(x + 2.0 * h) + 16.0 * integral(x + h) - 30.0 * integral(x) + 16.0 * integral(x - h)
            - integral(x - 2.0 * h))
            / (12.0 * h * h)
    }

    #[test]
    fn poly7_force_matches_power_rule() {
        let p = problem("poly7", 0.5, 0.0).unwrap();
        let f = p.force().unwrap();
        for &x in &[0.1f64, 0.5, 0.9] {
            let o = gamma(8.0).unwrap() / gamma(6.5).unwrap() * x.powf(5.5)
                - gamma(7.0).unwrap() / gamma(5.5).unwrap() * x.powf(4.5);
            assert_relative_eq!(f.eval(x), o, max_relative = 1e-13);
        }
    }

    #[test]
    fn exact_solutions_match_closed_forms() {
        let mu = 0.3;
        type Closed = Box<dyn Fn(f64) -> f64>;
        let checks: Vec<(&str, Closed)> = vec![
            ("poly7", Box::new(|x: f64| x.powi(7) - x.powi(6))),
            ("sin6", Box::new(|x: f64| x.powi(6) * (2.0 * PI * x).sin())),
            ("boundary2", Box::new(move |x: f64| (1.0 - x) * x.powf(2.0 + mu))),
            ("boundary5", Box::new(move |x: f64| (1.0 - x) * x.powf(5.0 + mu))),
            ("boundary-both", Box::new(|x: f64| (1.0 - x).powf(3.25) * x.powf(3.0 + 2.0 / 3.0))),
            ("interior-poly", Box::new(|x: f64| x * x * (1.0 - x) * (1.0 - x) * (x - 0.5).abs())),
            ("interior-sin", Box::new(|x: f64| (3.0 * PI * x).sin() * x * (1.0 - x) * (x - 0.5).abs())),
            ("boundary1", Box::new(move |x: f64| (1.0 - x) * x.powf(1.0 + mu))),
        ];
        for (name, u) in checks {
            let p = problem(name, mu, 0.0).unwrap();
            // power series of sin(3πx) lose ~e^{3π}·ε to cancellation
            let tol = if name == "interior-sin" { 2e-12 } else { 1e-13 };
            assert_eq!(p.exact(0.0), 0.0, "{name}");
            assert!(p.exact(1.0).abs() < tol, "{name}: {}", p.exact(1.0));
            for i in 0..=20 {
                let x = i as f64 / 20.0;
                assert!((p.exact(x) - u(x)).abs() < tol, "{name} at {x}: {} vs {}", p.exact(x), u(x));
            }
        }
        assert_eq!(catalog().len(), 8);
        assert!(problem("nope", 0.5, 0.0).is_err());
    }

    #[test]
    fn interior_force_is_singular_at_the_kink() {
        let p = problem("interior-poly", 0.5, 0.0).unwrap();
        let f = p.force().unwrap();
        assert!(f.eval(0.5 + 1e-10).abs() > 1e3 * f.eval(0.5 - 1e-10).abs());
        assert!(f.singular_points().contains(&0.5));
    }

    #[test]
    fn lambda_enters_the_force() {
        let p0 = problem("boundary2", 0.5, 0.0).unwrap();
        let p1 = problem("boundary2", 0.5, 2.5).unwrap();
        let (f0, f1) = (p0.force().unwrap(), p1.force().unwrap());
        for &x in &[0.2, 0.7] {
            assert_relative_eq!(f1.eval(x), f0.eval(x) - 2.5 * p0.exact(x), max_relative = 1e-14);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10))]

        #[test]
        fn forces_match_numerical_derivative(idx in 0usize..8, x in 0.06f64..0.94, mu in 0.1f64..0.9) {
            prop_assume!((x - 0.5).abs() > 0.03);
            let p = problem(PROBLEM_NAMES[idx], mu, 0.0).unwrap();
            let f = p.force().unwrap().eval(x);
            let o = rl_oracle(&|s| p.exact(s), 1.0 + mu, x);
            prop_assert!((f - o).abs() < 1e-6 * f.abs().max(1.0), "{}: {} vs {}", p.name, f, o);
        }
    }
}

//! Right-hand-side functions with explicitly declared endpoint singularities.
//!
//! Manufactured forces of singular solutions behave like (x − c)₊^γ near a
//! point c with non-integer γ. Declaring the exponent lets the element load
//! use a Gauss-Jacobi weight that absorbs the singularity exactly.

use std::fmt;
use std::sync::Arc;

/// Shared scalar function of one variable.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// One additive part of a [`Force`].
#[derive(Clone)]
pub enum ForcePart {
    /// Smooth on the whole domain.
    Smooth(ScalarFn),
    /// (x − at)₊^exponent · g(x) with g smooth on [at, ∞); zero for x < at.
    Singular { at: f64, exponent: f64, g: ScalarFn },
}

impl ForcePart {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ForcePart::Smooth(f) => f(x),
            ForcePart::Singular { at, exponent, g } => {
                if x <= *at {
                    if x == *at && *exponent == 0.0 {
                        g(x)
                    } else {
                        0.0
                    }
                } else {
                    (x - at).powf(*exponent) * g(x)
                }
            }
        }
    }
}

impl fmt::Debug for ForcePart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ForcePart::Smooth(_) => write!(f, "Smooth"),
            ForcePart::Singular { at, exponent, .. } => write!(f, "Singular {{ at: {at}, exponent: {exponent} }}"),
        }
    }
}

/// Sum of force parts.
#[derive(Clone, Debug, Default)]
pub struct Force {
    parts: Vec<ForcePart>,
}

impl Force {
    pub fn new(parts: Vec<ForcePart>) -> Self {
        Self { parts }
    }

    /// The zero function.
    pub fn zero() -> Self {
        Self::default()
    }

    /// A single smooth function.
    pub fn smooth(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { parts: vec![ForcePart::Smooth(Arc::new(f))] }
    }

    pub fn parts(&self) -> &[ForcePart] {
        &self.parts
    }

    pub fn push(&mut self, part: ForcePart) {
        self.parts.push(part);
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.parts.iter().map(|p| p.eval(x)).sum()
    }

    /// Locations of declared singular behaviour.
    pub fn singular_points(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .parts
            .iter()
            .filter_map(|p| match p {
                ForcePart::Singular { at, exponent, .. } if exponent.fract() != 0.0 => Some(*at),
                _ => None,
            })
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }
}

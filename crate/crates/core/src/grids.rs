//! Partitions of [0, L]: uniform, kernel-based, geometrically graded and
//! composite (graded boundary layer plus uniform interior).
//!
//! Elements are indexed from 0 internally; element `e` spans
//! `[breakpoints[e], breakpoints[e + 1]]`.

use crate::error::{domain, Result};

/// How a grid was generated.
#[derive(Debug, Clone, PartialEq)]
pub enum GridKind {
    /// Equal widths L/Nel.
    Uniform,
    /// User-supplied breakpoints.
    Custom,
    /// x_e = δ e^{1/(1−σ)}, equidistributing ∫ x^{−σ} dx over the layer.
    KernelBased { lb: f64, nb: usize, sigma: f64 },
    /// Widths δ r^{e−1}.
    Geometric { lb: f64, nb: usize, r: f64 },
    /// Graded layer at x = 0, uniform interior and, optionally, the layer
    /// mirrored at x = L.
    Composite { boundary: Box<Grid>, interior_nel: usize, mirrored: bool },
}

/// Ordered breakpoints 0 = x₀ < x₁ < … < x_Nel = L.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    breakpoints: Vec<f64>,
    kind: GridKind,
}

impl Grid {
    /// Build a grid from arbitrary strictly increasing breakpoints starting at 0.
    pub fn from_breakpoints(breakpoints: Vec<f64>, kind: GridKind) -> Result<Self> {
        if breakpoints.len() < 2 {
            return domain("a grid needs at least two breakpoints");
        }
        if breakpoints[0] != 0.0 {
            return domain("grids start at x = 0");
        }
        if breakpoints.iter().any(|x| !x.is_finite()) || breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return domain("breakpoints must be finite and strictly increasing");
        }
        Ok(Self { breakpoints, kind })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn kind(&self) -> &GridKind {
        &self.kind
    }

    /// Number of elements.
    pub fn nel(&self) -> usize {
        self.breakpoints.len() - 1
    }

    /// Domain length L.
    pub fn length(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    /// End points of element `e`.
    pub fn element(&self, e: usize) -> (f64, f64) {
        (self.breakpoints[e], self.breakpoints[e + 1])
    }

    /// Width of element `e`.
    pub fn width(&self, e: usize) -> f64 {
        self.breakpoints[e + 1] - self.breakpoints[e]
    }

    /// True when every element has the same width (to rounding).
    pub fn is_uniform(&self) -> bool {
        let w0 = self.width(0);
        (0..self.nel()).all(|e| (self.width(e) - w0).abs() <= 1e-12 * w0)
    }

    /// Element containing `x`; ties at interior breakpoints go to the left element.
    pub fn locate(&self, x: f64) -> Result<usize> {
        let l = self.length();
        if !(0.0..=l).contains(&x) {
            return domain(format!("x = {x} outside [0, {l}]"));
        }
        let idx = self.breakpoints.partition_point(|&b| b < x);
        Ok(idx.saturating_sub(1).min(self.nel() - 1))
    }
}

/// `nel` equal elements on [0, L].
pub fn uniform_grid(nel: usize, length: f64) -> Result<Grid> {
    if nel == 0 || !(length > 0.0) {
        return domain("uniform grid needs nel >= 1 and L > 0");
    }
    let mut b: Vec<f64> = (0..=nel).map(|e| length * e as f64 / nel as f64).collect();
    b[nel] = length;
    Grid::from_breakpoints(b, GridKind::Uniform)
}

/// Kernel-based layer on [0, Lb]: x_e = Lb (e/Nb)^{1/(1−σ)}.
///
/// This is δ e^{1/(1−σ)} with the normalisation δ = Lb·𝒞^{1/(1−σ)}, whose
/// telescoping sum gives 𝒞 = Nb^{σ−1}.
pub fn kernel_grid(nb: usize, lb: f64, sigma: f64) -> Result<Grid> {
    if !(0.0..1.0).contains(&sigma) {
        return domain(format!("kernel exponent sigma must lie in [0, 1), got {sigma}"));
    }
    if nb == 0 || !(lb > 0.0) {
        return domain("kernel grid needs nb >= 1 and Lb > 0");
    }
    let p = 1.0 / (1.0 - sigma);
    let mut b: Vec<f64> = (0..=nb).map(|e| lb * (e as f64 / nb as f64).powf(p)).collect();
    b[nb] = lb;
    Grid::from_breakpoints(b, GridKind::KernelBased { lb, nb, sigma })
}

/// Geometric layer on [0, Lb]: x_e = δ (r^e − 1)/(r − 1), δ = Lb (r−1)/(r^Nb − 1).
pub fn geometric_grid(nb: usize, lb: f64, r: f64) -> Result<Grid> {
    if !(r > 0.0) || r == 1.0 {
        return domain(format!("geometric ratio must be positive and != 1 (use a uniform grid), got {r}"));
    }
    if nb == 0 || !(lb > 0.0) {
        return domain("geometric grid needs nb >= 1 and Lb > 0");
    }
    // r^e − 1 via expm1/ln_1p keeps ratios near 1 accurate.
    let lr = (r - 1.0).ln_1p();
    let denom = (nb as f64 * lr).exp_m1();
    let mut b: Vec<f64> = (0..=nb).map(|e| lb * (e as f64 * lr).exp_m1() / denom).collect();
    b[nb] = lb;
    Grid::from_breakpoints(b, GridKind::Geometric { lb, nb, r })
}

/// Boundary layer at x = 0 followed by `interior_nel` uniform elements on [Lb, L].
pub fn composite_grid(boundary: &Grid, interior_nel: usize, length: f64) -> Result<Grid> {
    let lb = boundary.length();
    if !(lb < length) || interior_nel == 0 {
        return domain(format!("boundary layer [0, {lb}] must leave room for an interior on [.., {length}]"));
    }
    let mut b = boundary.breakpoints.clone();
    for e in 1..=interior_nel {
        b.push(lb + (length - lb) * e as f64 / interior_nel as f64);
    }
    b[boundary.nel() + interior_nel] = length;
    Grid::from_breakpoints(
        b,
        GridKind::Composite { boundary: Box::new(boundary.clone()), interior_nel, mirrored: false },
    )
}

/// As [`composite_grid`] with the boundary layer reflected onto [L − Lb, L].
pub fn composite_grid_mirrored(boundary: &Grid, interior_nel: usize, length: f64) -> Result<Grid> {
    let lb = boundary.length();
    if !(2.0 * lb < length) || interior_nel == 0 {
        return domain(format!("two layers of width {lb} overlap on [0, {length}]"));
    }
    let mut b = boundary.breakpoints.clone();
    let right = length - lb;
    for e in 1..=interior_nel {
        b.push(lb + (right - lb) * e as f64 / interior_nel as f64);
    }
    let nb = boundary.nel();
    *b.last_mut().unwrap() = right;
    for j in (0..nb).rev() {
        b.push(length - boundary.breakpoints[j]);
    }
    *b.last_mut().unwrap() = length;
    Grid::from_breakpoints(
        b,
        GridKind::Composite { boundary: Box::new(boundary.clone()), interior_nel, mirrored: true },
    )
}

//! History (non-local) stiffness blocks, their off-line cache and memory
//! fading.
//!
//! A history block couples the fractional test functions of element ε to the
//! basis derivatives of an earlier element e < ε:
//!
//! ```text
//! B_kp = −μ/Γ(1−μ) ∫_{Ω_e} ψ'_p(x) ∫_{Ω_ε} v_k(s) (s − x)^{−1−μ} ds dx.
//! ```
//!
//! On uniform grids the block depends on Δε = ε − e only. For Δε ≥ 2 the inner
//! integral is the memory-mode expansion in ₂F₁; for the touching pair Δε = 1,
//! and for every pair of a non-uniform grid, a graded panel integrator with a
//! Duffy split at the shared vertex is used. Blocks scale as (width)^{−μ}, so
//! everything is computed for a basis element of width 2 and rescaled.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::fractional_core::{fractonomial_expansion_coeffs, modal_derivatives};
use crate::grids::{Grid, GridKind};
use crate::special_functions::{hyp2f1, jacobi_fill, rgamma, QuadratureRule};

/// Largest test mode for which the C_km memory-mode expansion is used; beyond
/// it the alternating expansion loses digits and inner Gauss-Jacobi takes over.
const CLOSED_FORM_MAX_K: usize = 8;

/// Identifies which pair of elements a block couples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockKey {
    /// Uniform grid: depends on the element difference only.
    Uniform { delta_eps: usize },
    /// General grid: test element ε, basis element e (0-based).
    Pair { eps: usize, e: usize },
}

/// A history block together with its key.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryBlock {
    pub data: DMatrix<f64>,
    pub key: BlockKey,
    pub mu: f64,
}

impl HistoryBlock {
    /// Test order P_t (rows − 1).
    pub fn p_test(&self) -> usize {
        self.data.nrows() - 1
    }

    /// Basis order P_e (columns − 1).
    pub fn p_basis(&self) -> usize {
        self.data.ncols() - 1
    }
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu > 0.0 && mu < 1.0) {
        return domain(format!("μ must lie in (0, 1), got {mu}"));
    }
    Ok(())
}

fn kernel_constant(mu: f64) -> f64 {
    -mu * rgamma(1.0 - mu)
}

/// h_m(A) = ∫₋₁¹ (1−ζ)^{μ+m} (A + ζ)^{−1−μ} dζ for A > 1, in closed form:
/// 2^{μ+m+1}/(μ+m+1) · (A+1)^{−1} (A−1)^{−μ} ₂F₁(1, 1+m; 2+m+μ; 2/(A+1)).
fn memory_mode_at(m: usize, mu: f64, a: f64) -> Result<f64> {
    if a == 1.0 {
        return Ok(f64::INFINITY);
    }
    let mf = m as f64;
    let k = (mu + mf + 1.0).exp2() / (mu + mf + 1.0);
    let f = hyp2f1(1.0, 1.0 + mf, 2.0 + mf + mu, 2.0 / (a + 1.0))?;
    Ok(k / (a + 1.0) * (a - 1.0).powf(-mu) * f)
}

/// Memory mode h_m(ξ) = ∫₋₁¹ (1−ζ)^{μ+m} / [2Δε + ζ − ξ]^{1+μ} dζ.
///
/// At Δε = 1, ξ = 1 the integrand behaves like (1+ζ)^{−1−μ} and the integral
/// diverges; +∞ is returned there.
pub fn memory_mode(m: usize, mu: f64, delta_eps: usize, xi: f64) -> Result<f64> {
    check_mu(mu)?;
    if delta_eps < 1 {
        return domain("memory modes need Δε >= 1");
    }
    if !(-1.0..=1.0).contains(&xi) {
        return domain(format!("ξ = {xi} outside [-1, 1]"));
    }
    memory_mode_at(m, mu, 2.0 * delta_eps as f64 - xi)
}

/// I_k(A) = ∫₋₁¹ (1−ζ)^μ P_k^{μ,−μ}(ζ) (A + ζ)^{−1−μ} dζ for k = 0..=p, A ≥ 3.
struct FarField {
    mu: f64,
    coeffs: Vec<Vec<f64>>,
    inner: Option<QuadratureRule>,
    scratch: Vec<f64>,
}

impl FarField {
    fn new(p: usize, mu: f64) -> Result<Self> {
        let coeffs = (0..=p.min(CLOSED_FORM_MAX_K)).map(|k| fractonomial_expansion_coeffs(k, mu)).collect();
        let inner = if p > CLOSED_FORM_MAX_K { Some(QuadratureRule::gauss_jacobi(p + 24, mu, 0.0)?) } else { None };
        Ok(Self { mu, coeffs, inner, scratch: Vec::new() })
    }

    fn eval(&mut self, a: f64, p: usize, out: &mut [f64]) -> Result<()> {
        let kc = p.min(CLOSED_FORM_MAX_K);
        let modes = (0..=kc).map(|m| memory_mode_at(m, self.mu, a)).collect::<Result<Vec<_>>>()?;
        for k in 0..=kc {
            out[k] = self.coeffs[k].iter().zip(&modes).map(|(c, h)| c * h).sum();
        }
        if let Some(rule) = &self.inner {
            for v in out.iter_mut().take(p + 1).skip(kc + 1) {
                *v = 0.0;
            }
            for (z, w) in rule.iter() {
                jacobi_fill(p, self.mu, -self.mu, z, &mut self.scratch);
                let kern = w * (a + z).powf(-1.0 - self.mu);
                for k in kc + 1..=p {
                    out[k] += kern * self.scratch[k];
                }
            }
        }
        Ok(())
    }
}

/// History function H_k(ξ) of a uniform grid with element width `dx`:
/// −μ/Γ(1−μ)·(2/Δx)^μ·Σ_m C_km h_m(ξ).
pub fn history_function_uniform(k: usize, mu: f64, delta_eps: usize, xi: f64, dx: f64) -> Result<f64> {
    check_mu(mu)?;
    if !(dx > 0.0) {
        return domain("element width must be positive");
    }
    let c = fractonomial_expansion_coeffs(k, mu);
    let mut s = 0.0;
    for (m, cm) in c.iter().enumerate() {
        s += cm * memory_mode(m, mu, delta_eps, xi)?;
    }
    Ok(kernel_constant(mu) * (2.0 / dx).powf(mu) * s)
}

/// Uniform-grid block for a basis element of width 2 (unit Jacobian).
pub fn uniform_unit_block(delta_eps: usize, p_order: usize, mu: f64, q: usize) -> Result<DMatrix<f64>> {
    check_mu(mu)?;
    if delta_eps < 1 {
        return domain("history blocks need Δε >= 1");
    }
    if p_order == 0 {
        return domain("polynomial order must be at least 1");
    }
    if delta_eps == 1 {
        return pair_block((0.0, 2.0), (2.0, 4.0), p_order, p_order, mu, q);
    }
    let rule = QuadratureRule::gauss_legendre(q.max(p_order + 12))?;
    let mut far = FarField::new(p_order, mu)?;
    let mut ik = vec![0.0; p_order + 1];
    let mut dpsi = vec![0.0; p_order + 1];
    let mut b = DMatrix::zeros(p_order + 1, p_order + 1);
    let cst = kernel_constant(mu);
    for (xi, w) in rule.iter() {
        far.eval(2.0 * delta_eps as f64 - xi, p_order, &mut ik)?;
        modal_derivatives(p_order, xi, &mut dpsi);
        for k in 0..=p_order {
            let hk = w * cst * ik[k];
            for p in 0..=p_order {
                b[(k, p)] += hk * dpsi[p];
            }
        }
    }
    Ok(b)
}

/// Uniform-grid history block Ŝ^{(Δε)} for elements of width `dx`.
pub fn history_block_uniform(delta_eps: usize, p_order: usize, mu: f64, dx: f64, q: usize) -> Result<HistoryBlock> {
    if !(dx > 0.0) {
        return domain("element width must be positive");
    }
    let unit = uniform_unit_block(delta_eps, p_order, mu, q)?;
    Ok(HistoryBlock { data: unit * (2.0 / dx).powf(mu), key: BlockKey::Uniform { delta_eps }, mu })
}

/// Panel breakpoints at distances σ, 2σ, 4σ, … from the near end. A panel
/// never ends closer to the far end than half its own length, so the test
/// weight (1−η)^μ stays well resolved by the rules of interior panels;
/// `first` forces a breakpoint at exactly σ.
fn pieces(w: f64, sigma: f64, first: bool) -> Vec<f64> {
    let mut br = vec![0.0];
    let mut d = sigma;
    if first && sigma < w * (1.0 - 1e-14) {
        br.push(sigma);
        d = 2.0 * sigma;
    }
    while 1.5 * d < w {
        br.push(d);
        d *= 2.0;
    }
    br.push(w);
    br
}

struct PairAccumulator {
    ae: f64,
    we: f64,
    at: f64,
    wt: f64,
    mu: f64,
    p_test: usize,
    p_basis: usize,
    vk: Vec<f64>,
    dpsi: Vec<f64>,
    b: DMatrix<f64>,
}

impl PairAccumulator {
    /// Adds `weight`·v_k(s)·ψ'_p(x); the test weight (1−η)^μ is applied
    /// unless the quadrature weight already carries it.
    fn add(&mut self, x: f64, s: f64, weight: f64, test_weight_in_rule: bool) {
        let xi = 2.0 * (x - self.ae) / self.we - 1.0;
        let eta = 2.0 * (s - self.at) / self.wt - 1.0;
        modal_derivatives(self.p_basis, xi, &mut self.dpsi);
        jacobi_fill(self.p_test, self.mu, -self.mu, eta, &mut self.vk);
        let mut c = weight * 2.0 / self.we;
        if !test_weight_in_rule {
            c *= (1.0 - eta).powf(self.mu);
        }
        for k in 0..=self.p_test {
            let ck = c * self.vk[k];
            for p in 0..=self.p_basis {
                self.b[(k, p)] += ck * self.dpsi[p];
            }
        }
    }
}

/// History block between a basis element `basis = [a_e, b_e]` and a test
/// element `test = [a_t, b_t]` with a_t ≥ b_e, in physical coordinates.
///
/// Both elements are split into panels graded geometrically toward the
/// closest points; panel pairs are integrated by tensor Gauss rules, and
/// the touching corner (when a_t = b_e) by a Duffy split whose radial rule
/// carries the r^{−μ} singularity exactly.
pub fn pair_block(
    basis: (f64, f64),
    test: (f64, f64),
    p_test: usize,
    p_basis: usize,
    mu: f64,
    q: usize,
) -> Result<DMatrix<f64>> {
    check_mu(mu)?;
    let (ae, be) = basis;
    let (at, bt) = test;
    let (we, wt) = (be - ae, bt - at);
    let gap = at - be;
    if !(we > 0.0 && wt > 0.0) || !gap.is_finite() {
        return domain("degenerate element in history pair");
    }
    if gap < 0.0 {
        return domain("the test element must lie to the right of the basis element");
    }
    if p_test == 0 || p_basis == 0 {
        return domain("polynomial order must be at least 1");
    }
    let q = q.max((p_test + p_basis) / 2 + 16);
    let sigma = if gap > 0.0 { gap } else { we.min(0.5 * wt) };
    let pe = pieces(we, sigma, gap == 0.0);
    let pt = pieces(wt, sigma, false);
    let gl = QuadratureRule::gauss_legendre(q)?;
    let gj_end = QuadratureRule::gauss_jacobi(q, mu, 0.0)?;
    let mut acc = PairAccumulator {
        ae,
        we,
        at,
        wt,
        mu,
        p_test,
        p_basis,
        vk: Vec::new(),
        dpsi: vec![0.0; p_basis + 1],
        b: DMatrix::zeros(p_test + 1, p_basis + 1),
    };
    let last_t = pt.len() - 2;
    for i in 0..pe.len() - 1 {
        let (e0, e1) = (be - pe[i + 1], be - pe[i]);
        for j in 0..pt.len() - 1 {
            let (t0, t1) = (at + pt[j], at + pt[j + 1]);
            if gap == 0.0 && i == 0 && j == 0 {
                duffy_corner(&mut acc, be, at, t1 - t0, q)?;
                continue;
            }
            let (hx, cx) = (0.5 * (e1 - e0), 0.5 * (e0 + e1));
            let (ht, ct) = (0.5 * (t1 - t0), 0.5 * (t0 + t1));
            let at_end = j == last_t;
            let (trule, tscale) = if at_end { (&gj_end, ((t1 - t0) / wt).powf(mu)) } else { (&gl, 1.0) };
            for (zx, wx) in gl.iter() {
                let x = cx + hx * zx;
                // distances from offsets: s − x in absolute coordinates cancels for small gaps
                let dx = pe[i] + 0.5 * (pe[i + 1] - pe[i]) * (1.0 - zx);
                for (zs, ws) in trule.iter() {
                    let s = ct + ht * zs;
                    let ds = pt[j] + 0.5 * (pt[j + 1] - pt[j]) * (1.0 + zs);
                    let w = hx * wx * ht * ws * tscale * (gap + dx + ds).powf(-1.0 - mu);
                    acc.add(x, s, w, at_end);
                }
            }
        }
    }
    Ok(acc.b * kernel_constant(mu))
}

/// Corner square [b_e − h, b_e] × [a_t, a_t + h] with b_e = a_t. With
/// x = b_e − h t', s = a_t + h s', the kernel is h^{−1−μ}(s' + t')^{−1−μ}; the
/// two Duffy triangles map it to h^{1−μ} r^{−μ} (1+u)^{−1−μ}.
fn duffy_corner(acc: &mut PairAccumulator, be: f64, at: f64, h: f64, q: usize) -> Result<()> {
    let mu = acc.mu;
    let radial = QuadratureRule::gauss_jacobi(q, 0.0, -mu)?;
    let gl = QuadratureRule::gauss_legendre(q)?;
    let scale = h.powf(1.0 - mu) * 2f64.powf(mu - 1.0) * 0.5;
    for (zr, wr) in radial.iter() {
        let r = 0.5 * (1.0 + zr);
        for (zu, wu) in gl.iter() {
            let u = 0.5 * (1.0 + zu);
            let w = scale * wr * wu * (1.0 + u).powf(-1.0 - mu);
            acc.add(be - h * r * u, at + h * r, w, false);
            acc.add(be - h * r, at + h * r * u, w, false);
        }
    }
    Ok(())
}

fn check_pair(grid: &Grid, eps: usize, e: usize) -> Result<()> {
    if eps >= grid.nel() {
        return domain(format!("element {eps} outside a grid of {} elements", grid.nel()));
    }
    if e >= eps {
        return domain(format!("history blocks need e < ε, got e = {e}, ε = {eps}"));
    }
    Ok(())
}

/// History block of an arbitrary grid for test element ε and basis element e.
pub fn history_block_general(
    grid: &Grid,
    eps: usize,
    e: usize,
    p_test: usize,
    p_basis: usize,
    mu: f64,
    q: usize,
) -> Result<HistoryBlock> {
    check_pair(grid, eps, e)?;
    let data = pair_block(grid.element(e), grid.element(eps), p_test, p_basis, mu, q)?;
    Ok(HistoryBlock { data, key: BlockKey::Pair { eps, e }, mu })
}

/// History block on a kernel-based grid (or a composite grid built on one).
pub fn history_block_kernel_grid(
    grid: &Grid,
    eps: usize,
    e: usize,
    p_order: usize,
    mu: f64,
    q: usize,
) -> Result<HistoryBlock> {
    history_block_general(grid, eps, e, p_order, p_order, mu, q)
}

/// History block on a geometrically graded grid.
pub fn history_block_geometric(
    grid: &Grid,
    eps: usize,
    e: usize,
    p_order: usize,
    mu: f64,
    q: usize,
) -> Result<HistoryBlock> {
    history_block_general(grid, eps, e, p_order, p_order, mu, q)
}

/// Scale-free description of an element pair: log width ratio and
/// gap in units of the basis width, quantised so that pairs related by a
/// dilation share a key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum GeometryKey {
    Uniform { delta_eps: usize, p: usize },
    General { log_ratio: i64, log_gap: i64, p_test: usize, p_basis: usize },
}

const KEY_RESOLUTION: f64 = 1e9;

struct Geometry {
    key: GeometryKey,
    /// Test interval relative to a basis element [0, 2].
    unit_test: (f64, f64),
    /// (2/w_e)^μ.
    scale: f64,
}

fn geometry(grid: &Grid, eps: usize, e: usize, p_test: usize, p_basis: usize, mu: f64) -> Geometry {
    let (ae, be) = grid.element(e);
    let (at, bt) = grid.element(eps);
    let we = be - ae;
    let ratio = (bt - at) / we;
    let gap = (at - be) / we;
    // equal-Δε pairs of a uniform grid share one scale bit for bit
    let nominal = if *grid.kind() == GridKind::Uniform { grid.length() / grid.nel() as f64 } else { we };
    let scale = (2.0 / nominal).powf(mu);
    let quant = |v: f64| (v * KEY_RESOLUTION).round() as i64;
    let delta = gap + 1.0;
    if p_test == p_basis && (ratio - 1.0).abs() < 1e-9 && (delta - delta.round()).abs() < 1e-9 {
        return Geometry {
            key: GeometryKey::Uniform { delta_eps: delta.round() as usize, p: p_test },
            unit_test: (2.0 * delta.round(), 2.0 * delta.round() + 2.0),
            scale,
        };
    }
    Geometry {
        key: GeometryKey::General { log_ratio: quant(ratio.ln()), log_gap: quant(gap.ln_1p()), p_test, p_basis },
        unit_test: (2.0 + 2.0 * gap, 2.0 + 2.0 * gap + 2.0 * ratio),
        scale,
    }
}

fn compute_unit(g: &Geometry, mu: f64, q: usize) -> Result<DMatrix<f64>> {
    match g.key {
        GeometryKey::Uniform { delta_eps, p } => uniform_unit_block(delta_eps, p, mu, q),
        GeometryKey::General { p_test, p_basis, .. } => pair_block((0.0, 2.0), g.unit_test, p_test, p_basis, mu, q),
    }
}

/// On-line block construction with memoisation of every pair geometry seen.
///
/// Pairs that differ only by a dilation (all Δε-equal pairs of a uniform
/// grid, all equal-Δε pairs of a geometric grid, the interior-interior pairs of
/// a composite grid) share one computed block.
#[derive(Debug)]
pub struct HistoryBuilder {
    mu: f64,
    q: usize,
    memo: HashMap<GeometryKey, Arc<DMatrix<f64>>>,
}

impl HistoryBuilder {
    pub fn new(mu: f64, q: usize) -> Result<Self> {
        check_mu(mu)?;
        Ok(Self { mu, q, memo: HashMap::new() })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Number of distinct unit blocks computed so far.
    pub fn distinct_blocks(&self) -> usize {
        self.memo.len()
    }

    /// Physical block for test element ε and basis element e.
    pub fn block(&mut self, grid: &Grid, eps: usize, e: usize, p_test: usize, p_basis: usize) -> Result<DMatrix<f64>> {
        check_pair(grid, eps, e)?;
        let g = geometry(grid, eps, e, p_test, p_basis, self.mu);
        let unit = match self.memo.get(&g.key) {
            Some(b) => Arc::clone(b),
            None => {
                let b = Arc::new(compute_unit(&g, self.mu, self.q)?);
                self.memo.insert(g.key, Arc::clone(&b));
                b
            }
        };
        Ok(unit.as_ref() * g.scale)
    }

    /// Compute, in parallel, every block needed for `pairs` of (ε, e) with
    /// per-element orders `orders`.
    pub fn prepare(&mut self, grid: &Grid, pairs: &[(usize, usize)], orders: &[usize]) -> Result<()> {
        let mut todo: HashMap<GeometryKey, Geometry> = HashMap::new();
        for &(eps, e) in pairs {
            check_pair(grid, eps, e)?;
            let g = geometry(grid, eps, e, orders[eps], orders[e], self.mu);
            if !self.memo.contains_key(&g.key) {
                todo.entry(g.key).or_insert(g);
            }
        }
        let (mu, q) = (self.mu, self.q);
        let built: Vec<(GeometryKey, Result<DMatrix<f64>>)> =
            todo.into_par_iter().map(|(k, g)| (k, compute_unit(&g, mu, q))).collect();
        for (k, b) in built {
            self.memo.insert(k, Arc::new(b?));
        }
        Ok(())
    }
}

/// Interaction class of an element pair on a composite grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InteractionClass {
    /// Both elements in the graded layer.
    BoundaryBoundary { eps: usize, e: usize },
    /// Both elements in the uniform interior: keyed by Δε.
    InteriorInterior { delta_eps: usize },
    /// Interior test element, boundary-layer basis element.
    InteriorBoundary { eps: usize, e: usize },
}

/// Classify a pair (ε, e) of a grid whose first `nb` elements form the layer.
pub fn interaction_class(nb: usize, eps: usize, e: usize) -> InteractionClass {
    if eps < nb {
        InteractionClass::BoundaryBoundary { eps, e }
    } else if e >= nb {
        InteractionClass::InteriorInterior { delta_eps: eps - e }
    } else {
        InteractionClass::InteriorBoundary { eps, e }
    }
}

const CACHE_MAGIC: &[u8; 8] = b"FSEMHIST";
const CACHE_VERSION: u32 = 1;
const CACHE_HEADER_LEN: usize = 8 + 4 + 8 + 4 + 4 + 4;

/// Off-line store of the Nel_max − 1 uniform-grid history blocks at order
/// P_max, kept for a basis element of width 2 and rescaled on retrieval.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryCache {
    mu: f64,
    q: usize,
    p_max: usize,
    nel_max: usize,
    blocks: Vec<DMatrix<f64>>,
}

impl HistoryCache {
    /// Build all blocks Δε = 1..Nel_max−1 in parallel.
    pub fn build(nel_max: usize, p_max: usize, mu: f64, q: usize) -> Result<Self> {
        check_mu(mu)?;
        if nel_max < 2 {
            return domain("a cache needs Nel_max >= 2");
        }
        let blocks =
            (1..nel_max).into_par_iter().map(|d| uniform_unit_block(d, p_max, mu, q)).collect::<Result<Vec<_>>>()?;
        Ok(Self { mu, q, p_max, nel_max, blocks })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn p_max(&self) -> usize {
        self.p_max
    }

    pub fn nel_max(&self) -> usize {
        self.nel_max
    }

    /// Number of stored blocks (Nel_max − 1).
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Stored unit-Jacobian block for Δε.
    pub fn unit_block(&self, delta_eps: usize) -> Result<&DMatrix<f64>> {
        if delta_eps == 0 || delta_eps >= self.nel_max {
            return Err(Error::Cache(format!("Δε = {delta_eps} not stored (Nel_max = {})", self.nel_max)));
        }
        Ok(&self.blocks[delta_eps - 1])
    }

    /// Block for Δε at order P ≤ P_max and element width `dx`.
    ///
    /// Rows 0..=P are the leading test modes; the columns are the bubbles
    /// 1..P−1 plus both vertex modes, the right one being stored at P_max.
    pub fn block(&self, delta_eps: usize, p_order: usize, dx: f64) -> Result<HistoryBlock> {
        if p_order == 0 || p_order > self.p_max {
            return Err(Error::Cache(format!("P = {p_order} not available (P_max = {})", self.p_max)));
        }
        let unit = self.unit_block(delta_eps)?;
        let scale = (2.0 / dx).powf(self.mu);
        let pm = self.p_max;
        let data = DMatrix::from_fn(p_order + 1, p_order + 1, |k, p| {
            let col = if p == p_order { pm } else { p };
            unit[(k, col)] * scale
        });
        Ok(HistoryBlock { data, key: BlockKey::Uniform { delta_eps }, mu: self.mu })
    }

    /// All blocks Δε = 1..Nel−1 for a uniform grid of `nel` elements.
    pub fn blocks_for(&self, nel: usize, p_order: usize, dx: f64) -> Result<Vec<HistoryBlock>> {
        if nel > self.nel_max {
            return Err(Error::Cache(format!("Nel = {nel} exceeds Nel_max = {}", self.nel_max)));
        }
        (1..nel).map(|d| self.block(d, p_order, dx)).collect()
    }

    /// Serialise to the versioned, checksummed little-endian format.
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.p_max + 1;
        let mut buf = Vec::with_capacity(CACHE_HEADER_LEN + self.blocks.len() * n * n * 8 + 4);
        buf.extend_from_slice(CACHE_MAGIC);
        buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
        buf.extend_from_slice(&self.mu.to_le_bytes());
        buf.extend_from_slice(&(self.q as u32).to_le_bytes());
        buf.extend_from_slice(&(self.p_max as u32).to_le_bytes());
        buf.extend_from_slice(&(self.nel_max as u32).to_le_bytes());
        for b in &self.blocks {
            for k in 0..n {
                for p in 0..n {
                    buf.extend_from_slice(&b[(k, p)].to_le_bytes());
                }
            }
        }
        let crc = crc32fast::hash(&buf);
        buf.extend_from_slice(&crc.to_le_bytes());
        buf
    }

    /// Parse the format written by [`HistoryCache::to_bytes`].
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::Cache(m.to_string());
        if bytes.len() < CACHE_HEADER_LEN + 4 {
            return Err(bad("file too short for a cache header"));
        }
        if &bytes[..8] != CACHE_MAGIC {
            return Err(bad("bad magic"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let version = u32_at(8);
        if version != CACHE_VERSION {
            return Err(Error::Cache(format!("unsupported cache version {version}")));
        }
        let mu = f64::from_le_bytes(bytes[12..20].try_into().unwrap());
        let q = u32_at(20) as usize;
        let p_max = u32_at(24) as usize;
        let nel_max = u32_at(28) as usize;
        if nel_max < 2 || p_max == 0 {
            return Err(bad("invalid cache dimensions"));
        }
        let n = p_max + 1;
        let expected = CACHE_HEADER_LEN + (nel_max - 1) * n * n * 8 + 4;
        if bytes.len() != expected {
            return Err(Error::Cache(format!(
                "expected {expected} bytes, found {} (truncated or padded)",
                bytes.len()
            )));
        }
        let body = &bytes[..expected - 4];
        let stored = u32::from_le_bytes(bytes[expected - 4..].try_into().unwrap());
        if crc32fast::hash(body) != stored {
            return Err(bad("checksum mismatch"));
        }
        let mut blocks = Vec::with_capacity(nel_max - 1);
        let mut off = CACHE_HEADER_LEN;
        for _ in 1..nel_max {
            let b = DMatrix::from_fn(n, n, |k, p| {
                let o = off + (k * n + p) * 8;
                f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap())
            });
            off += n * n * 8;
            blocks.push(b);
        }
        Ok(Self { mu, q, p_max, nel_max, blocks })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        f.sync_all()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    /// Load and check that the file serves a run with (μ, Q, Nel, P).
    pub fn load_for(path: impl AsRef<Path>, mu: f64, q: usize, nel: usize, p_order: usize) -> Result<Self> {
        let c = Self::load(path)?;
        if c.mu != mu {
            return Err(Error::Cache(format!("cache built for μ = {}, requested {mu}", c.mu)));
        }
        if c.q != q {
            return Err(Error::Cache(format!("cache built with Q = {}, requested {q}", c.q)));
        }
        if p_order > c.p_max || nel > c.nel_max {
            return Err(Error::Cache(format!(
                "cache holds P <= {}, Nel <= {}; requested P = {p_order}, Nel = {nel}",
                c.p_max, c.nel_max
            )));
        }
        Ok(c)
    }
}

/// Memory-fading strategies for truncated history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum FadingMode {
    /// Keep every block.
    #[default]
    None,
    /// Drop faded blocks entirely.
    Full,
    /// Keep only the four vertex-vertex corner entries.
    PartialI,
    /// Keep the first and last rows and columns.
    PartialII,
    /// Keep the first and last rows and columns and the diagonal.
    PartialIII,
}

/// Which history blocks fade and how.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct FadingPolicy {
    pub mode: FadingMode,
    /// Number of most recent blocks (Δε = 1..=retain) kept in full.
    pub retain: usize,
}

impl FadingPolicy {
    pub fn new(mode: FadingMode, retain: usize) -> Self {
        Self { mode, retain }
    }

    /// No fading.
    pub fn none() -> Self {
        Self::default()
    }

    /// Whether the block at element difference Δε is faded.
    pub fn fades(&self, delta_eps: usize) -> bool {
        self.mode != FadingMode::None && delta_eps > self.retain
    }

    /// Check the policy against a grid of `nel` elements.
    pub fn validate(&self, nel: usize) -> Result<()> {
        if self.mode != FadingMode::None && self.retain > nel.saturating_sub(1) {
            return Err(Error::Config(format!(
                "fade retain {} exceeds Nel − 1 = {}",
                self.retain,
                nel.saturating_sub(1)
            )));
        }
        Ok(())
    }
}

/// Apply a fading mask to a block.
pub fn apply_fading(block: &DMatrix<f64>, mode: FadingMode) -> DMatrix<f64> {
    let (pt, pe) = (block.nrows() - 1, block.ncols() - 1);
    let keep = |k: usize, p: usize| -> bool {
        let edge_row = k == 0 || k == pt;
        let edge_col = p == 0 || p == pe;
        match mode {
            FadingMode::None => true,
            FadingMode::Full => false,
            FadingMode::PartialI => edge_row && edge_col,
            FadingMode::PartialII => edge_row || edge_col,
            FadingMode::PartialIII => edge_row || edge_col || k == p,
        }
    };
    DMatrix::from_fn(block.nrows(), block.ncols(), |k, p| if keep(k, p) { block[(k, p)] } else { 0.0 })
}

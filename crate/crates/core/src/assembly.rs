//! Global assembly for both Petrov-Galerkin variants, Dirichlet reduction and
//! the global/element degree-of-freedom maps.

use nalgebra::{DMatrix, DVector};

use crate::element_ops::{global_test_blocks, global_test_load, local_load, local_mass, local_stiffness};
use crate::error::{domain, Error, Result};
use crate::forcing::Force;
use crate::grids::Grid;
use crate::history::{apply_fading, FadingPolicy, HistoryBuilder, HistoryCache};

/// Which test space the scheme uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Variant {
    /// Test functions supported on one element; history enters via blocks.
    #[default]
    LocalTests,
    /// Test functions supported on [0, x_ε]; every pair e ≤ ε is built.
    GlobalTests,
}

/// Element-to-global map for C⁰ bases with per-element orders.
///
/// Element e owns global indices offset(e) ..= offset(e) + P_e, sharing its
/// first and last index with its neighbours.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofMap {
    orders: Vec<usize>,
    offsets: Vec<usize>,
}

impl DofMap {
    /// Per-element polynomial orders.
    pub fn new(orders: Vec<usize>) -> Result<Self> {
        if orders.is_empty() {
            return domain("a dof map needs at least one element");
        }
        if orders.contains(&0) {
            return domain("polynomial orders must be at least 1");
        }
        let mut offsets = Vec::with_capacity(orders.len() + 1);
        let mut acc = 0;
        for &p in &orders {
            offsets.push(acc);
            acc += p;
        }
        offsets.push(acc);
        Ok(Self { orders, offsets })
    }

    /// Same order P on `nel` elements.
    pub fn uniform(nel: usize, p_order: usize) -> Result<Self> {
        Self::new(vec![p_order; nel])
    }

    pub fn nel(&self) -> usize {
        self.orders.len()
    }

    pub fn orders(&self) -> &[usize] {
        &self.orders
    }

    pub fn order(&self, e: usize) -> usize {
        self.orders[e]
    }

    /// Number of global unknowns, Σ P_e + 1.
    pub fn ndof(&self) -> usize {
        self.offsets[self.nel()] + 1
    }

    /// 0-based global index of mode p on element e.
    pub fn map(&self, e: usize, p: usize) -> usize {
        debug_assert!(p <= self.orders[e]);
        self.offsets[e] + p
    }

    /// The same map in 1-based element/mode/global numbering.
    pub fn map_one_based(&self, e: usize, p: usize) -> usize {
        self.map(e - 1, p - 1) + 1
    }

    /// Global coefficients to per-element coefficient lists.
    pub fn scatter(&self, u: &[f64]) -> Result<Vec<Vec<f64>>> {
        if u.len() != self.ndof() {
            return domain(format!("expected {} global values, got {}", self.ndof(), u.len()));
        }
        Ok((0..self.nel()).map(|e| (0..=self.orders[e]).map(|p| u[self.map(e, p)]).collect()).collect())
    }

    /// Per-element coefficients to global coefficients; shared vertices must agree.
    pub fn gather(&self, local: &[Vec<f64>]) -> Result<Vec<f64>> {
        if local.len() != self.nel() || local.iter().zip(&self.orders).any(|(c, &p)| c.len() != p + 1) {
            return domain("element coefficient lists do not match the dof map");
        }
        let mut u = vec![0.0; self.ndof()];
        for (e, c) in local.iter().enumerate() {
            if e > 0 && local[e - 1][self.orders[e - 1]] != c[0] {
                return domain(format!("vertex value shared by elements {} and {e} differs", e - 1));
            }
            for (p, v) in c.iter().enumerate() {
                u[self.map(e, p)] = *v;
            }
        }
        Ok(u)
    }
}

/// Grid, orders and problem constants shared by every assembly routine.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub grid: Grid,
    pub dofs: DofMap,
    pub mu: f64,
    pub lambda: f64,
    /// Quadrature points for mass and load integrals.
    pub q: usize,
}

impl Discretization {
    /// Order P on every element of `grid`.
    pub fn new(grid: Grid, p_order: usize, mu: f64, lambda: f64, q: usize) -> Result<Self> {
        let orders = vec![p_order; grid.nel()];
        Self::with_orders(grid, orders, mu, lambda, q)
    }

    /// Per-element orders.
    pub fn with_orders(grid: Grid, orders: Vec<usize>, mu: f64, lambda: f64, q: usize) -> Result<Self> {
        if !(mu > 0.0 && mu < 1.0) {
            return Err(Error::Config(format!("μ must lie in (0, 1), got {mu}")));
        }
        if !lambda.is_finite() {
            return Err(Error::Config("λ must be finite".into()));
        }
        if orders.len() != grid.nel() {
            return Err(Error::Config(format!("{} orders given for {} elements", orders.len(), grid.nel())));
        }
        let dofs = DofMap::new(orders)?;
        let p_max = dofs.orders().iter().copied().max().unwrap_or(1);
        if q < p_max + 2 {
            return Err(Error::Config(format!("Q = {q} is below P + 2 = {}", p_max + 2)));
        }
        Ok(Self { grid, dofs, mu, lambda, q })
    }

    /// The common order when all elements share one.
    pub fn uniform_order(&self) -> Option<usize> {
        let p = self.dofs.order(0);
        self.dofs.orders().iter().all(|&o| o == p).then_some(p)
    }
}

/// Where the local-test variant obtains its history blocks.
#[derive(Debug)]
pub enum HistorySource<'a> {
    /// Build on-line with a fresh memoising builder.
    Compute,
    /// Build on-line, reusing (and extending) an existing builder.
    Builder(&'a mut HistoryBuilder),
    /// Read from an off-line cache (uniform grids with one order only).
    Cache(&'a HistoryCache),
}

/// Counters describing how a system was assembled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AssemblyStats {
    /// Off-diagonal blocks placed into the matrix.
    pub history_blocks: usize,
    /// Distinct history blocks actually computed or retrieved.
    pub distinct_history_blocks: usize,
    /// Mass blocks formed for off-diagonal pairs (global variant).
    pub history_mass_blocks: usize,
    /// Blocks altered by memory fading.
    pub faded_blocks: usize,
}

/// Assembled global system before boundary conditions.
#[derive(Debug, Clone)]
pub struct GlobalSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub dofs: DofMap,
    pub stats: AssemblyStats,
}

/// Linear system with the two boundary unknowns removed.
#[derive(Debug, Clone)]
pub struct ReducedSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

fn add_block(m: &mut DMatrix<f64>, dofs: &DofMap, eps: usize, e: usize, block: &DMatrix<f64>) {
    for k in 0..block.nrows() {
        let row = dofs.map(eps, k);
        for p in 0..block.ncols() {
            m[(row, dofs.map(e, p))] += block[(k, p)];
        }
    }
}

fn add_local_operators(disc: &Discretization, force: &Force, m: &mut DMatrix<f64>, f: &mut DVector<f64>) -> Result<()> {
    let dofs = &disc.dofs;
    for eps in 0..disc.grid.nel() {
        let (a, b) = disc.grid.element(eps);
        let p = dofs.order(eps);
        let mut block = local_stiffness(a, b, p, disc.mu)?;
        if disc.lambda != 0.0 {
            block -= local_mass(a, b, p, disc.mu, disc.q)? * disc.lambda;
        }
        add_block(m, dofs, eps, eps, &block);
        let load = local_load(a, b, p, disc.mu, force, disc.q)?;
        for k in 0..=p {
            f[dofs.map(eps, k)] += load[k];
        }
    }
    Ok(())
}

/// Local-test assembly: diagonal blocks S − λM, history blocks strictly below
/// (faded per `fading`), loads against the element test functions.
pub fn assemble_local_variant(
    disc: &Discretization,
    force: &Force,
    history: HistorySource<'_>,
    fading: FadingPolicy,
    history_q: usize,
) -> Result<GlobalSystem> {
    let nel = disc.grid.nel();
    fading.validate(nel)?;
    let dofs = &disc.dofs;
    let n = dofs.ndof();
    let mut m = DMatrix::zeros(n, n);
    let mut f = DVector::zeros(n);
    add_local_operators(disc, force, &mut m, &mut f)?;
    let mut stats = AssemblyStats::default();
    let pairs: Vec<(usize, usize)> = (1..nel).flat_map(|eps| (0..eps).map(move |e| (eps, e))).collect();

    let mut place = |m: &mut DMatrix<f64>, eps: usize, e: usize, block: DMatrix<f64>, stats: &mut AssemblyStats| {
        let block = if fading.fades(eps - e) {
            stats.faded_blocks += 1;
            apply_fading(&block, fading.mode)
        } else {
            block
        };
        add_block(m, dofs, eps, e, &block);
        stats.history_blocks += 1;
    };

    match history {
        HistorySource::Cache(cache) => {
            let p = disc
                .uniform_order()
                .ok_or_else(|| Error::Config("cached history needs a single polynomial order".into()))?;
            if !disc.grid.is_uniform() {
                return Err(Error::Config("cached history needs a uniform grid".into()));
            }
            if cache.mu() != disc.mu {
                return Err(Error::Cache(format!("cache built for μ = {}, run uses μ = {}", cache.mu(), disc.mu)));
            }
            let blocks = cache.blocks_for(nel, p, disc.grid.width(0))?;
            stats.distinct_history_blocks = blocks.len();
            for (eps, e) in pairs {
                place(&mut m, eps, e, blocks[eps - e - 1].data.clone(), &mut stats);
            }
        }
        HistorySource::Compute => {
            let mut builder = HistoryBuilder::new(disc.mu, history_q)?;
            fill_from_builder(disc, &mut builder, &pairs, &mut m, &mut stats, &mut place)?;
        }
        HistorySource::Builder(builder) => {
            if builder.mu() != disc.mu {
                return Err(Error::Config("history builder μ differs from the discretisation".into()));
            }
            fill_from_builder(disc, builder, &pairs, &mut m, &mut stats, &mut place)?;
        }
    }
    Ok(GlobalSystem { matrix: m, rhs: f, dofs: dofs.clone(), stats })
}

fn fill_from_builder(
    disc: &Discretization,
    builder: &mut HistoryBuilder,
    pairs: &[(usize, usize)],
    m: &mut DMatrix<f64>,
    stats: &mut AssemblyStats,
    place: &mut impl FnMut(&mut DMatrix<f64>, usize, usize, DMatrix<f64>, &mut AssemblyStats),
) -> Result<()> {
    let before = builder.distinct_blocks();
    builder.prepare(&disc.grid, pairs, disc.dofs.orders())?;
    for &(eps, e) in pairs {
        let b = builder.block(&disc.grid, eps, e, disc.dofs.order(eps), disc.dofs.order(e))?;
        place(m, eps, e, b, stats);
    }
    stats.distinct_history_blocks = builder.distinct_blocks() - before;
    Ok(())
}

/// Global-test assembly: blocks Ŝ − λM̂ for every e ≤ ε, loads against the
/// global test functions. Mass blocks are only formed when λ ≠ 0.
pub fn assemble_global_variant(disc: &Discretization, force: &Force) -> Result<GlobalSystem> {
    let nel = disc.grid.nel();
    let dofs = &disc.dofs;
    let n = dofs.ndof();
    let with_mass = disc.lambda != 0.0;
    let mut m = DMatrix::zeros(n, n);
    let mut f = DVector::zeros(n);
    let mut stats = AssemblyStats::default();
    for eps in 0..nel {
        let pt = dofs.order(eps);
        for e in 0..=eps {
            let (s, mass) = global_test_blocks(&disc.grid, eps, e, pt, dofs.order(e), disc.mu, disc.q, with_mass)?;
            let block = match mass {
                Some(mass) => {
                    if e < eps {
                        stats.history_mass_blocks += 1;
                    }
                    s - mass * disc.lambda
                }
                None => s,
            };
            add_block(&mut m, dofs, eps, e, &block);
            if e < eps {
                stats.history_blocks += 1;
                stats.distinct_history_blocks += 1;
            }
        }
        let load = global_test_load(&disc.grid, eps, pt, disc.mu, force, disc.q)?;
        for k in 0..=pt {
            f[dofs.map(eps, k)] += load[k];
        }
    }
    Ok(GlobalSystem { matrix: m, rhs: f, dofs: dofs.clone(), stats })
}

/// Assemble with the chosen variant; history options apply to local tests only.
pub fn assemble(
    disc: &Discretization,
    force: &Force,
    variant: Variant,
    history: HistorySource<'_>,
    fading: FadingPolicy,
    history_q: usize,
) -> Result<GlobalSystem> {
    match variant {
        Variant::LocalTests => assemble_local_variant(disc, force, history, fading, history_q),
        Variant::GlobalTests => {
            if fading.mode != crate::history::FadingMode::None {
                return Err(Error::Config("memory fading applies to the local-test variant only".into()));
            }
            if matches!(history, HistorySource::Cache(_)) {
                return Err(Error::Config("cached history applies to the local-test variant only".into()));
            }
            assemble_global_variant(disc, force)
        }
    }
}

/// Remove the first and last rows and columns (u(0) = u(L) = 0).
pub fn apply_dirichlet(system: &GlobalSystem) -> ReducedSystem {
    let n = system.matrix.nrows();
    let r = n - 2;
    ReducedSystem { matrix: system.matrix.view((1, 1), (r, r)).into_owned(), rhs: system.rhs.rows(1, r).into_owned() }
}

/// Pad a reduced solution with the homogeneous boundary values.
pub fn expand_dirichlet(u: &DVector<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(u.len() + 2);
    out.push(0.0);
    out.extend(u.iter().copied());
    out.push(0.0);
    out
}

//! Run configuration: command-line settings merged over an optional
//! `key = value` file, validated into a [`RunConfig`].

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use fsem::assembly::{Discretization, Variant};
use fsem::grids::{composite_grid, composite_grid_mirrored, geometric_grid, kernel_grid, uniform_grid};
use fsem::history::{FadingMode, FadingPolicy};
use fsem::problems::{default_mu, problem, ManufacturedProblem, PROBLEM_NAMES};
use fsem::Grid;

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Local,
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GridArg {
    Uniform,
    Kernel,
    Geometric,
    Composite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FadeArg {
    None,
    Full,
    P1,
    P2,
    P3,
}

impl From<FadeArg> for FadingMode {
    fn from(f: FadeArg) -> Self {
        match f {
            FadeArg::None => FadingMode::None,
            FadeArg::Full => FadingMode::Full,
            FadeArg::P1 => FadingMode::PartialI,
            FadeArg::P2 => FadingMode::PartialII,
            FadeArg::P3 => FadingMode::PartialIII,
        }
    }
}

/// Settings shared by every subcommand. Each may also be given in the
/// `--config` file under its long name (e.g. `fade-mode = p3`); flags win.
#[derive(Debug, Clone, Default, Args)]
pub struct Settings {
    /// key = value file with defaults for any of these settings
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Manufactured problem name
    #[arg(long, global = true)]
    pub problem: Option<String>,
    /// Test-function variant
    #[arg(long, global = true, value_enum)]
    pub variant: Option<VariantArg>,
    /// Grid family
    #[arg(long, global = true, value_enum)]
    pub grid: Option<GridArg>,
    /// Number of elements (total, including any boundary layer)
    #[arg(long, global = true)]
    pub nel: Option<usize>,
    /// Polynomial order on every element
    #[arg(long, global = true)]
    pub p: Option<usize>,
    /// Polynomial order in the boundary layer (composite grids)
    #[arg(long, global = true)]
    pub pb: Option<usize>,
    /// Polynomial order in the interior (composite grids)
    #[arg(long, global = true)]
    pub pi: Option<usize>,
    /// Elements in the boundary layer (composite grids)
    #[arg(long, global = true)]
    pub nb: Option<usize>,
    /// Boundary-layer width (kernel, geometric and composite grids)
    #[arg(long, global = true)]
    pub lb: Option<f64>,
    /// Geometric ratio; composite layers are geometric when given, kernel-based otherwise
    #[arg(long, global = true)]
    pub ratio: Option<f64>,
    /// Mirror the boundary layer at x = L (composite grids)
    #[arg(long, global = true)]
    pub mirror: bool,
    /// Fractional order μ of ₀D^{1+μ}
    #[arg(long, global = true)]
    pub mu: Option<f64>,
    /// Helmholtz coefficient λ
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Quadrature points for element integrals
    #[arg(long, global = true)]
    pub q: Option<usize>,
    /// History fading mode
    #[arg(long, global = true, value_enum)]
    pub fade_mode: Option<FadeArg>,
    /// History blocks kept before fading starts (Δε ≤ retain are exact)
    #[arg(long, global = true)]
    pub fade_retain: Option<usize>,
    /// History cache file
    #[arg(long, global = true)]
    pub cache: Option<PathBuf>,
    /// Output CSV path (stdout when absent)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for history construction
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

/// Parse a `key = value` file; `#` starts a comment.
pub fn read_config_file(path: &Path) -> Result<HashMap<String, String>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let mut map = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Failure::Config(format!("{}:{}: expected key = value", path.display(), i + 1)))?;
        map.insert(k.trim().replace('_', "-"), v.trim().to_string());
    }
    Ok(map)
}

struct Merge<'a> {
    file: &'a HashMap<String, String>,
}

impl Merge<'_> {
    fn get<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, Failure> {
        if flag.is_some() {
            return Ok(flag);
        }
        self.file
            .get(key)
            .map(|v| v.parse::<T>().map_err(|_| Failure::Config(format!("config key '{key}': cannot parse '{v}'"))))
            .transpose()
    }

    fn get_enum<T: ValueEnum>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, Failure> {
        if flag.is_some() {
            return Ok(flag);
        }
        self.file
            .get(key)
            .map(|v| {
                T::from_str(v, true).map_err(|_| Failure::Config(format!("config key '{key}': invalid value '{v}'")))
            })
            .transpose()
    }
}

/// Validated configuration of one solve.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: ManufacturedProblem,
    pub variant: Variant,
    pub grid: Grid,
    pub orders: Vec<usize>,
    pub q: usize,
    pub fading: FadingPolicy,
    pub cache: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn resolve(s: &Settings) -> Result<Self, Failure> {
        let empty = HashMap::new();
        let file_map = match &s.config {
            Some(p) => read_config_file(p)?,
            None => empty,
        };
        let m = Merge { file: &file_map };
        let known = [
            "problem",
            "variant",
            "grid",
            "nel",
            "p",
            "pb",
            "pi",
            "nb",
            "lb",
            "ratio",
            "mirror",
            "mu",
            "lambda",
            "q",
            "fade-mode",
            "fade-retain",
            "cache",
            "out",
            "threads",
        ];
        if let Some(k) = file_map.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(Failure::Config(format!("unknown config key '{k}'")));
        }

        let name = m.get(s.problem.clone(), "problem")?.unwrap_or_else(|| "poly7".into());
        if !PROBLEM_NAMES.contains(&name.as_str()) {
            return Err(Failure::Config(format!("unknown problem '{name}'; known: {}", PROBLEM_NAMES.join(", "))));
        }
        let mu = m.get(s.mu, "mu")?.unwrap_or_else(|| default_mu(&name));
        let lambda = m.get(s.lambda, "lambda")?.unwrap_or(0.0);
        let problem = problem(&name, mu, lambda)?;

        let variant = match m.get_enum(s.variant, "variant")?.unwrap_or(VariantArg::Local) {
            VariantArg::Local => Variant::LocalTests,
            VariantArg::Global => Variant::GlobalTests,
        };
        let kind = m.get_enum(s.grid, "grid")?.unwrap_or(GridArg::Uniform);
        let nel = m.get(s.nel, "nel")?.unwrap_or(10);
        let p = m.get(s.p, "p")?.unwrap_or(6);
        let pb = m.get(s.pb, "pb")?.unwrap_or(p);
        let pi = m.get(s.pi, "pi")?.unwrap_or(p);
        let nb = m.get(s.nb, "nb")?.unwrap_or(1);
        let ratio = m.get(s.ratio, "ratio")?;
        let mirror = s.mirror || m.get(None, "mirror")?.unwrap_or(false);
        let q = m.get(s.q, "q")?.unwrap_or(40);
        if nel == 0 {
            return Err(Failure::Config("--nel must be at least 1".into()));
        }

        let (grid, orders) = match kind {
            GridArg::Uniform => (uniform_grid(nel, 1.0)?, vec![p; nel]),
            GridArg::Kernel => {
                let lb = m.get(s.lb, "lb")?.unwrap_or(1.0);
                (kernel_grid(nel, lb, 1.0 - mu)?, vec![p; nel])
            }
            GridArg::Geometric => {
                let lb = m.get(s.lb, "lb")?.unwrap_or(1.0);
                (geometric_grid(nel, lb, ratio.unwrap_or(3.0))?, vec![p; nel])
            }
            GridArg::Composite => {
                let lb = m.get(s.lb, "lb")?.unwrap_or(1e-2);
                let layers = if mirror { 2 } else { 1 };
                if nel <= layers * nb {
                    return Err(Failure::Config(format!(
                        "--nel {nel} leaves no interior elements after {layers}×{nb} layer elements"
                    )));
                }
                let layer = match ratio {
                    Some(r) => geometric_grid(nb, lb, r)?,
                    None => kernel_grid(nb, lb, 1.0 - mu)?,
                };
                let interior = nel - layers * nb;
                let grid = if mirror {
                    composite_grid_mirrored(&layer, interior, 1.0)?
                } else {
                    composite_grid(&layer, interior, 1.0)?
                };
                let mut orders = vec![pb; nb];
                orders.extend(std::iter::repeat_n(pi, interior));
                if mirror {
                    orders.extend(std::iter::repeat_n(pb, nb));
                }
                (grid, orders)
            }
        };

        let mode: FadingMode = m.get_enum(s.fade_mode, "fade-mode")?.unwrap_or(FadeArg::None).into();
        let retain = m.get(s.fade_retain, "fade-retain")?;
        let fading = match (mode, retain) {
            (FadingMode::None, _) => FadingPolicy::none(),
            (_, Some(r)) => FadingPolicy::new(mode, r),
            (_, None) => return Err(Failure::Config("--fade-mode needs --fade-retain".into())),
        };
        let cache = m.get(s.cache.clone(), "cache")?;
        let out = m.get(s.out.clone(), "out")?;
        let threads = m.get(s.threads, "threads")?;

        let cfg = Self { problem, variant, grid, orders, q, fading, cache, out, threads };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Cross-field consistency.
    pub fn validate(&self) -> Result<(), Failure> {
        if self.fading.mode != FadingMode::None && self.variant == Variant::GlobalTests {
            return Err(Failure::Config("memory fading applies to the local-test variant only".into()));
        }
        self.fading.validate(self.grid.nel())?;
        if self.cache.is_some() {
            if self.variant == Variant::GlobalTests {
                return Err(Failure::Config("a history cache applies to the local-test variant only".into()));
            }
            if !self.grid.is_uniform() || self.orders.iter().any(|&o| o != self.orders[0]) {
                return Err(Failure::Config("a history cache needs a uniform grid with one polynomial order".into()));
            }
        }
        if self.threads == Some(0) {
            return Err(Failure::Config("--threads must be at least 1".into()));
        }
        Ok(())
    }

    pub fn discretization(&self) -> Result<Discretization, Failure> {
        Ok(Discretization::with_orders(
            self.grid.clone(),
            self.orders.clone(),
            self.problem.mu,
            self.problem.lambda,
            self.q,
        )?)
    }
}

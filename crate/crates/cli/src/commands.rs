//! Subcommand implementations. Every command writes one header-first CSV
//! (to `--out` or stdout) and a short human-readable summary on stderr.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;
use std::time::Instant;

use clap::ValueEnum;
use fsem::assembly::{apply_dirichlet, assemble, HistorySource, Variant};
use fsem::history::{FadingMode, FadingPolicy, HistoryCache};
use fsem::solve_postproc::{condition_number, run, solve, Norm, RunOptions, RunResult};

use crate::config::{FadeArg, RunConfig, Settings};
use crate::Failure;

/// Condition-number norm selectable on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormArg {
    Inf,
    Two,
}

impl From<NormArg> for Norm {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::Inf => Norm::Infinity,
            NormArg::Two => Norm::Two,
        }
    }
}

fn csv_writer(out: Option<&Path>) -> Result<csv::Writer<Box<dyn Write>>, Failure> {
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(File::create(p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?),
        None => Box::new(io::stdout()),
    };
    Ok(csv::Writer::from_writer(sink))
}

fn write_row<I, T>(w: &mut csv::Writer<Box<dyn Write>>, row: I) -> Result<(), Failure>
where
    I: IntoIterator<Item = T>,
    T: AsRef<[u8]>,
{
    w.write_record(row).map_err(|e| Failure::Config(format!("writing CSV: {e}")))
}

fn finish(mut w: csv::Writer<Box<dyn Write>>) -> Result<(), Failure> {
    w.flush().map_err(|e| Failure::Config(format!("writing CSV: {e}")))
}

fn error_quadrature(cfg: &RunConfig) -> usize {
    2 * cfg.orders.iter().max().copied().unwrap_or(1) + 20
}

fn variant_name(v: Variant) -> &'static str {
    match v {
        Variant::LocalTests => "local",
        Variant::GlobalTests => "global",
    }
}

/// Assemble and solve one configuration, honouring `--cache`.
pub fn solve_config(cfg: &RunConfig, condition: Option<Norm>) -> Result<RunResult, Failure> {
    let disc = cfg.discretization()?;
    let force = cfg.problem.force()?;
    let opts = RunOptions { variant: cfg.variant, fading: cfg.fading, condition, ..RunOptions::default() };
    let loaded;
    let history = match &cfg.cache {
        Some(path) => {
            loaded = HistoryCache::load_for(path, cfg.problem.mu, opts.history_q, cfg.grid.nel(), cfg.orders[0])?;
            HistorySource::Cache(&loaded)
        }
        None => HistorySource::Compute,
    };
    let r = run(&disc, &force, history, opts)?;
    if r.residual > 1e-8 {
        return Err(Failure::Numeric(format!("relative residual {:.3e} exceeds 1e-8", r.residual)));
    }
    Ok(r)
}

pub fn cmd_solve(settings: &Settings, samples: usize, condition: Option<NormArg>) -> Result<(), Failure> {
    let cfg = RunConfig::resolve(settings)?;
    let r = solve_config(&cfg, condition.map(Norm::from))?;
    let exact = |x: f64| cfg.problem.exact(x);
    let per = r.field.l2_error_per_element(exact, error_quadrature(&cfg))?;
    let l2 = per.iter().map(|v| v * v).sum::<f64>().sqrt();

    let mut w = csv_writer(cfg.out.as_deref())?;
    write_row(&mut w, ["x", "u_numeric", "u_exact", "abs_err"])?;
    let n = samples.max(2);
    for i in 0..n {
        let x = cfg.grid.length() * i as f64 / (n - 1) as f64;
        let u = r.field.evaluate(x)?;
        let ue = exact(x);
        write_row(&mut w, [x, u, ue, (u - ue).abs()].map(|v| format!("{v:.17e}")))?;
    }
    finish(w)?;

    eprintln!(
        "problem={} variant={} nel={} orders={:?} mu={} lambda={}",
        cfg.problem.name,
        variant_name(cfg.variant),
        cfg.grid.nel(),
        cfg.orders,
        cfg.problem.mu,
        cfg.problem.lambda
    );
    eprintln!("l2_error={l2:.6e}");
    eprintln!("element_l2_errors={}", per.iter().map(|v| format!("{v:.6e}")).collect::<Vec<_>>().join(","));
    eprintln!("residual={:.3e}", r.residual);
    if let Some(c) = r.condition {
        eprintln!("condition={c:.6e}");
    }
    Ok(())
}

/// Which parameter a convergence sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepArg {
    P,
    Nel,
}

pub fn cmd_convergence(
    settings: &Settings,
    sweep: SweepArg,
    values: &[usize],
    check_decreasing: bool,
) -> Result<(), Failure> {
    if values.is_empty() {
        return Err(Failure::Config("--values needs at least one entry".into()));
    }
    let mut errors = Vec::with_capacity(values.len());
    let mut w = csv_writer(settings.out.as_deref())?;
    write_row(&mut w, ["param", "value", "dofs", "l2_error", "residual"])?;
    for &v in values {
        let mut s = settings.clone();
        match sweep {
            SweepArg::P => {
                s.p = Some(v);
                s.pb = None;
                s.pi = None;
            }
            SweepArg::Nel => s.nel = Some(v),
        }
        let cfg = RunConfig::resolve(&s)?;
        let r = solve_config(&cfg, None)?;
        let err = r.field.l2_error(|x| cfg.problem.exact(x), error_quadrature(&cfg))?;
        errors.push(err);
        let name = match sweep {
            SweepArg::P => "p",
            SweepArg::Nel => "nel",
        };
        let dofs = r.field.dofs().ndof();
        write_row(
            &mut w,
            [name.to_string(), v.to_string(), dofs.to_string(), format!("{err:.6e}"), format!("{:.3e}", r.residual)],
        )?;
    }
    finish(w)?;
    if check_decreasing {
        if let Some(i) = (1..errors.len()).find(|&i| errors[i] >= errors[i - 1]) {
            return Err(Failure::Numeric(format!(
                "error does not decrease from value {} ({:.3e}) to {} ({:.3e})",
                values[i - 1],
                errors[i - 1],
                values[i],
                errors[i]
            )));
        }
    }
    eprintln!("sweep of {} runs; first {:.3e}, last {:.3e}", errors.len(), errors[0], errors[errors.len() - 1]);
    Ok(())
}

pub fn cmd_condition(settings: &Settings, ps: &[usize], nels: &[usize], norm: NormArg) -> Result<(), Failure> {
    let variants: Vec<Variant> = match settings.variant {
        Some(_) => vec![RunConfig::resolve(settings)?.variant],
        None => vec![Variant::LocalTests, Variant::GlobalTests],
    };
    let mut w = csv_writer(settings.out.as_deref())?;
    write_row(&mut w, ["variant", "nel", "p", "condition"])?;
    for &variant in &variants {
        for &nel in nels {
            for &p in ps {
                let mut s = settings.clone();
                s.nel = Some(nel);
                s.p = Some(p);
                let cfg = RunConfig::resolve(&s)?;
                let disc = cfg.discretization()?;
                let force = cfg.problem.force()?;
                let sys = assemble(
                    &disc,
                    &force,
                    variant,
                    HistorySource::Compute,
                    FadingPolicy::none(),
                    RunOptions::default().history_q,
                )?;
                let c = condition_number(&apply_dirichlet(&sys).matrix, norm.into())?;
                write_row(
                    &mut w,
                    [variant_name(variant).to_string(), nel.to_string(), p.to_string(), format!("{c:.6e}")],
                )?;
            }
        }
    }
    finish(w)
}

pub fn cmd_cache_build(settings: &Settings, nel_max: usize, p_max: usize, history_q: usize) -> Result<(), Failure> {
    let path = settings
        .cache
        .as_deref()
        .or(settings.out.as_deref())
        .ok_or_else(|| Failure::Config("cache build needs --cache <path>".into()))?;
    let mu = settings.mu.ok_or_else(|| Failure::Config("cache build needs --mu".into()))?;
    let t = Instant::now();
    let cache = HistoryCache::build(nel_max, p_max, mu, history_q)?;
    cache.save(path)?;
    eprintln!(
        "built {} blocks (Nel_max={nel_max}, P_max={p_max}, mu={mu}, Q={history_q}) in {:.3}s -> {}",
        cache.len(),
        t.elapsed().as_secs_f64(),
        path.display()
    );
    Ok(())
}

pub fn cmd_cache_info(settings: &Settings) -> Result<(), Failure> {
    let path = settings.cache.as_deref().ok_or_else(|| Failure::Config("cache info needs --cache <path>".into()))?;
    let bytes = std::fs::read(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let cache = HistoryCache::from_bytes(&bytes)?;
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("header validated by from_bytes"));
    let mut w = csv_writer(settings.out.as_deref())?;
    write_row(&mut w, ["version", "mu", "q", "p_max", "nel_max", "blocks", "bytes"])?;
    write_row(
        &mut w,
        [
            version.to_string(),
            format!("{}", cache.mu()),
            cache.q().to_string(),
            cache.p_max().to_string(),
            cache.nel_max().to_string(),
            cache.len().to_string(),
            bytes.len().to_string(),
        ],
    )?;
    finish(w)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Median-of-3 wall times of on-line history construction against cache
/// retrieval (file read included), for assembly alone and with the solve.
pub fn cmd_cache_bench(settings: &Settings) -> Result<(), Failure> {
    let cfg = RunConfig::resolve(settings)?;
    let path = cfg.cache.clone().ok_or_else(|| Failure::Config("cache bench needs --cache <path>".into()))?;
    if cfg.variant != Variant::LocalTests {
        return Err(Failure::Config("cache bench uses the local-test variant".into()));
    }
    let disc = cfg.discretization()?;
    let force = cfg.problem.force()?;
    let hq = RunOptions::default().history_q;
    let (nel, p, mu) = (cfg.grid.nel(), cfg.orders[0], cfg.problem.mu);
    let (mut online, mut retrieval, mut solves) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..3 {
        let t = Instant::now();
        let a = assemble(&disc, &force, Variant::LocalTests, HistorySource::Compute, cfg.fading, hq)?;
        online.push(t.elapsed().as_secs_f64());
        let t = Instant::now();
        let cache = HistoryCache::load_for(&path, mu, hq, nel, p)?;
        let b = assemble(&disc, &force, Variant::LocalTests, HistorySource::Cache(&cache), cfg.fading, hq)?;
        retrieval.push(t.elapsed().as_secs_f64());
        let t = Instant::now();
        solve(&apply_dirichlet(&b))?;
        solves.push(t.elapsed().as_secs_f64());
        if (&a.matrix - &b.matrix).amax() > 1e-12 * a.matrix.amax() {
            return Err(Failure::Numeric("cached and on-line systems differ".into()));
        }
    }
    let (on, re, so) = (median(online), median(retrieval), median(solves));
    let mut w = csv_writer(cfg.out.as_deref())?;
    write_row(
        &mut w,
        ["nel", "p", "online_assembly_s", "retrieval_assembly_s", "solve_s", "assembly_speedup", "total_speedup"],
    )?;
    write_row(
        &mut w,
        [
            nel.to_string(),
            p.to_string(),
            format!("{on:.6e}"),
            format!("{re:.6e}"),
            format!("{so:.6e}"),
            format!("{:.3}", on / re),
            format!("{:.3}", (on + so) / (re + so)),
        ],
    )?;
    finish(w)
}

pub fn cmd_fading(settings: &Settings, counts: &[usize], cases: &[FadeArg]) -> Result<(), Failure> {
    let base = RunConfig::resolve(settings)?;
    let nel = base.grid.nel();
    let mut w = csv_writer(base.out.as_deref())?;
    write_row(&mut w, ["faded", "case", "l2_error"])?;
    for &count in counts {
        if count + 1 > nel {
            return Err(Failure::Config(format!("cannot fade {count} of the {} history blocks", nel - 1)));
        }
        for &case in cases {
            let mode: FadingMode = case.into();
            let mut cfg = base.clone();
            cfg.fading = if count == 0 || mode == FadingMode::None {
                FadingPolicy::none()
            } else {
                FadingPolicy::new(mode, nel - 1 - count)
            };
            cfg.validate()?;
            let r = solve_config(&cfg, None)?;
            let err = r.field.l2_error(|x| cfg.problem.exact(x), error_quadrature(&cfg))?;
            let name = case.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
            write_row(&mut w, [count.to_string(), name, format!("{err:.6e}")])?;
        }
    }
    finish(w)
}

pub fn cmd_grid(settings: &Settings) -> Result<(), Failure> {
    let cfg = RunConfig::resolve(settings)?;
    let mut w = csv_writer(cfg.out.as_deref())?;
    write_row(&mut w, ["element", "x_left", "x_right", "width", "order"])?;
    for e in 0..cfg.grid.nel() {
        let (a, b) = cfg.grid.element(e);
        write_row(
            &mut w,
            [
                e.to_string(),
                format!("{a:.17e}"),
                format!("{b:.17e}"),
                format!("{:.17e}", b - a),
                cfg.orders[e].to_string(),
            ],
        )?;
    }
    finish(w)
}

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use gexp_core::payoff::ParseOptions;
use gexp_core::verify::{parse_step, reports_from_json, reports_table, reports_to_json, run_suite, SuiteConfig, VerificationReport};
use gexp_core::{
    build_lattice, conditional_expect, extract_worst_policy, lattice_expect, sample_paths, solve_gheat, CylinderFunctional,
    Grid1D, IncrementMode, Lattice, PayoffExpr, VolatilityPolicy,
};

use crate::config::{fmt_sig, RunConfig};
use crate::{BackendChoice, ConditionalArgs, ExpectArgs, Functional, ReportArgs, ReportFormat, SimulateArgs, VerifyArgs, EXIT_FAILURES};

fn payoff(text: &str, allow_exp: bool) -> Result<PayoffExpr> {
    if allow_exp {
        log::warn!("exp admitted: payoff may leave the polynomial-growth class");
    }
    Ok(PayoffExpr::parse_with(text, &ParseOptions { allow_exp })?)
}

impl Functional {
    fn times(&self, cfg: &RunConfig) -> Result<Vec<f64>> {
        let times = match (self.t, self.times.is_empty()) {
            (Some(t), _) => vec![t],
            (None, true) => vec![cfg.horizon],
            (None, false) => self.times.clone(),
        };
        if !times.iter().all(|t| t.is_finite() && *t >= 0.0) || times.windows(2).any(|w| w[0] >= w[1]) {
            bail!("times must be nonnegative and strictly increasing, got {times:?}");
        }
        if *times.last().unwrap() <= 0.0 {
            bail!("the last time must be positive");
        }
        Ok(times)
    }

    fn build(&self, cfg: &RunConfig) -> Result<CylinderFunctional> {
        let mode = if self.levels { IncrementMode::Levels } else { IncrementMode::Increments };
        Ok(CylinderFunctional::new(self.times(cfg)?, payoff(&self.phi, self.allow_exp)?, mode)?)
    }
}

/// Lattice ending at the functional's last time.
fn lattice_for(cfg: &RunConfig, x: &CylinderFunctional) -> Result<Lattice> {
    Ok(build_lattice(*x.times().last().unwrap(), cfg.n_steps, &cfg.params, cfg.sigma_refinement)?)
}

fn pde_grid(cfg: &RunConfig, t: f64) -> Result<Grid1D> {
    let half = cfg.x_span * (cfg.params.sigma_upper_sq * t).sqrt();
    Ok(Grid1D::new(-half, half, cfg.nx, t, &cfg.params, cfg.cfl_safety)?)
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<fs::File>)> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok((path, BufWriter::new(file)))
}

pub fn expect(cfg: &RunConfig, a: &ExpectArgs) -> Result<u8> {
    let x = a.f.build(cfg)?;
    let single = x.times().len() == 1;
    let backend = a.backend.unwrap_or(if single { BackendChoice::Both } else { BackendChoice::Lattice });
    if backend != BackendChoice::Lattice && !single {
        bail!("the pde backend takes a single time; use --backend lattice for {} times", x.times().len());
    }
    let d = cfg.precision;
    let lattice = match backend {
        BackendChoice::Pde => None,
        _ => Some(lattice_expect(&lattice_for(cfg, &x)?, &x)?),
    };
    let pde = match backend {
        BackendChoice::Lattice => None,
        _ => {
            let t = x.times()[0];
            let u = solve_gheat(x.phi(), t, &pde_grid(cfg, t)?, &cfg.params)?;
            if a.save {
                let (path, mut w) = create(&cfg.out, "expect_pde.csv")?;
                u.write_csv(&mut w)?;
                w.flush()?;
                eprintln!("wrote {}", path.display());
            }
            Some(u.at(0.0))
        }
    };
    if let Some(v) = lattice {
        println!("lattice {}", fmt_sig(v, d));
    }
    if let Some(v) = pde {
        println!("pde {}", fmt_sig(v, d));
    }
    if let (Some(l), Some(p)) = (lattice, pde) {
        println!("diff {}", fmt_sig(p - l, d));
    }
    Ok(0)
}

fn parse_level(text: &str, n_steps: usize) -> Result<usize> {
    match text {
        "mid" => Ok(n_steps / 2),
        _ => text.parse().with_context(|| format!("--j expects a level index or `mid`, got `{text}`")),
    }
}

pub fn conditional(cfg: &RunConfig, a: &ConditionalArgs) -> Result<u8> {
    let x = a.f.build(cfg)?;
    let lat = lattice_for(cfg, &x)?;
    let c = conditional_expect(&lat, &x, parse_level(&a.j, lat.n_steps())?)?;
    let d = cfg.precision;
    let observed = c.history.iter().map(Vec::len).max().unwrap_or(0);
    let write = |w: &mut dyn Write| -> io::Result<()> {
        write!(w, "node")?;
        for i in 1..=observed {
            write!(w, ",b{i}")?;
        }
        writeln!(w, ",psi")?;
        for i in 0..c.len() {
            write!(w, "{}", fmt_sig(c.positions[i], d))?;
            for k in 0..observed {
                match c.history[i].get(k) {
                    Some(v) => write!(w, ",{}", fmt_sig(*v, d))?,
                    None => write!(w, ",")?,
                }
            }
            writeln!(w, ",{}", fmt_sig(c.values[i], d))?;
        }
        Ok(())
    };
    emit(cfg, a.save, "conditional.csv", write)?;
    Ok(0)
}

fn emit(cfg: &RunConfig, save: bool, name: &str, write: impl Fn(&mut dyn Write) -> io::Result<()>) -> Result<()> {
    if save {
        let (path, mut w) = create(&cfg.out, name)?;
        write(&mut w)?;
        w.flush()?;
        eprintln!("wrote {}", path.display());
    } else {
        let stdout = io::stdout();
        let mut w = BufWriter::new(stdout.lock());
        write(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

pub fn simulate(cfg: &RunConfig, a: &SimulateArgs) -> Result<u8> {
    let lat = build_lattice(cfg.horizon, cfg.n_steps, &cfg.params, cfg.sigma_refinement)?;
    let policy = match a.policy.strip_prefix("worst:") {
        Some(text) => {
            let x = CylinderFunctional::terminal(cfg.horizon, payoff(text, false)?)?;
            extract_worst_policy(&lat, &x)?
        }
        None => VolatilityPolicy::by_name(&a.policy, &lat)?,
    };
    let ens = sample_paths(&lat, &policy, cfg.n_paths, cfg.seed)?;
    emit(cfg, a.save, "paths.csv", |w| ens.write_csv(w))?;
    if a.save && a.policy.starts_with("worst:") {
        emit(cfg, true, "policy.csv", |w| policy.write_csv(&lat, w))?;
    }
    Ok(0)
}

/// Same defaults as the library suite when the config is at its defaults.
fn suite_config(cfg: &RunConfig, a: &VerifyArgs) -> Result<SuiteConfig> {
    let base = SuiteConfig::default();
    Ok(SuiteConfig {
        params: cfg.params,
        horizon: cfg.horizon,
        n_steps: cfg.n_steps,
        markov_steps: 2 * cfg.n_steps,
        algebra_steps: (cfg.n_steps / 2).max(2),
        mc_steps: cfg.n_steps,
        n_paths: cfg.n_paths,
        doob_paths: base.doob_paths / base.n_paths * cfg.n_paths,
        seeds: (0..3).map(|i| cfg.seed.wrapping_add(i)).collect(),
        sigma_refinement: cfg.sigma_refinement,
        nx: cfg.nx,
        tolerances: cfg.tolerances,
        only: (!a.only.is_empty()).then(|| a.only.clone()),
        m: a.m.as_deref().map(str::parse).transpose()?,
        f: a.f.as_deref().map(parse_step).transpose()?,
        f_lower: a.f_lower,
        negative: a.negative,
        timings: a.timings,
    })
}

/// Check id of a report: the text before the first `:`.
fn check_of(r: &VerificationReport) -> &str {
    r.id.split(':').next().unwrap_or(&r.id)
}

fn summary(reports: &[VerificationReport]) -> (usize, usize, usize) {
    let unexpected = reports.iter().filter(|r| !r.as_expected()).count();
    let xfail = reports.iter().filter(|r| !r.expected_pass && !r.pass).count();
    (reports.len(), xfail, unexpected)
}

pub fn verify(cfg: &RunConfig, a: &VerifyArgs) -> Result<u8> {
    if a.negative && a.m.is_none() && a.f.is_none() {
        bail!("--negative marks a custom --m or --f; neither was given");
    }
    let suite = suite_config(cfg, a)?;
    let reports = run_suite(&suite)?;

    let mut groups: BTreeMap<&str, Vec<VerificationReport>> = BTreeMap::new();
    for r in &reports {
        groups.entry(check_of(r)).or_default().push(r.clone());
    }
    let checks = cfg.out.join("checks");
    for (id, rs) in &groups {
        let (_, mut w) = create(&checks, &format!("{id}.json"))?;
        w.write_all(reports_to_json(rs).as_bytes())?;
        w.flush()?;
    }
    let (path, mut w) = create(&cfg.out, "report.json")?;
    w.write_all(reports_to_json(&reports).as_bytes())?;
    w.flush()?;
    let (_, mut w) = create(&cfg.out, "config.txt")?;
    w.write_all(cfg.to_text().as_bytes())?;
    w.flush()?;

    print!("{}", reports_table(&reports));
    let (n, xfail, unexpected) = summary(&reports);
    println!("{n} checks, {xfail} expected failures, {unexpected} unexpected");
    eprintln!("wrote {}", path.display());
    Ok(if unexpected == 0 { 0 } else { EXIT_FAILURES })
}

pub fn report(cfg: &RunConfig, a: &ReportArgs) -> Result<u8> {
    let path = a.input.clone().unwrap_or_else(|| cfg.out.join("report.json"));
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let reports = reports_from_json(&text)?;
    let (n, xfail, unexpected) = summary(&reports);
    match a.format {
        ReportFormat::Table => print!("{}", reports_table(&reports)),
        ReportFormat::Json => println!("{}", reports_to_json(&reports)),
        ReportFormat::Summary => {}
    }
    if a.format != ReportFormat::Json {
        println!("{n} checks, {xfail} expected failures, {unexpected} unexpected");
    }
    Ok(0)
}

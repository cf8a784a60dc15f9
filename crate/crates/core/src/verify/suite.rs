//! The standard verification suite: every check with its positive cases and
//! negative controls, run as independent parallel jobs.

use std::time::Instant;

use rayon::prelude::*;

use super::algebra::{check_conditional_algebra, ALGEBRA_CORPUS};
use super::inequalities::{check_bdg_a, check_bdg_two_sided, check_doob, check_downcrossing, Supermartingale};
use super::martingale::*;
use super::process::{parse_step, ProcessSpec};
use super::{Backend, VerificationReport};
use crate::calculus::{IncreasingSpec, StepProcess};
use crate::error::{Error, Result};
use crate::lattice::{build_lattice, lattice_expect, CylinderFunctional, IncrementMode, Lattice};
use crate::params::GParams;
use crate::payoff::PayoffExpr;
use crate::pde::{gnormal_expect, Grid1D};
use crate::scenario::ScenarioFamily;

pub const CHECK_IDS: [&str; 18] = [
    "gnormal-moments",
    "cross-backend",
    "conditional-algebra",
    "symmetric-martingale",
    "gbm-characterization",
    "representation",
    "additivity",
    "isometry",
    "transfer",
    "qv-identity",
    "qv-band",
    "compensator",
    "doob",
    "downcrossing",
    "bdg-a",
    "bdg-two-sided",
    "l2-bound",
    "l1-bound",
];

/// Payoffs compared between the PDE and the lattice.
pub const CROSS_BACKEND_CORPUS: [&str; 6] = ["x1", "x1^2", "-(x1^2)", "abs(x1)", "max(x1 - 0.5, 0)", "x1^3"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Induction identities on plain and augmented lattices.
    pub dp: f64,
    /// Moments and conditional algebra on the Markov lattice.
    pub exact: f64,
    /// Per-path algebraic identities.
    pub path: f64,
    /// PDE against closed-form moments.
    pub pde: f64,
    /// PDE against lattice.
    pub cross: f64,
    /// Relative slack of the maximal inequality.
    pub doob_rel: f64,
    /// Per-step increase allowed in the compensated process.
    pub monotone: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            dp: 1e-8,
            exact: 1e-10,
            path: 1e-12,
            pde: 2e-3,
            cross: 1e-2,
            doob_rel: 0.05,
            monotone: 1e-13,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub params: GParams,
    pub horizon: f64,
    /// Steps of augmented (path-dependent) lattices, halved when the state space is too large.
    pub n_steps: usize,
    /// Steps of the Markov lattice used for moments and cross-backend values.
    pub markov_steps: usize,
    pub algebra_steps: usize,
    pub mc_steps: usize,
    pub n_paths: usize,
    /// Paths for the maximal inequality on processes that are functions of `B`.
    pub doob_paths: usize,
    pub seeds: Vec<u64>,
    pub sigma_refinement: usize,
    pub nx: usize,
    pub tolerances: Tolerances,
    /// Run only these check ids.
    pub only: Option<Vec<String>>,
    /// Replaces the built-in processes of the martingale checks.
    pub m: Option<ProcessSpec>,
    /// Replaces the built-in integrands of the representation and compensator checks.
    pub f: Option<StepProcess>,
    /// Lower bound `C <= |f|` for the representation check.
    pub f_lower: f64,
    /// Mark reports on `m` / `f` as negative controls.
    pub negative: bool,
    /// Record wall-clock time per report; makes the output nondeterministic.
    pub timings: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            params: GParams::default(),
            horizon: 1.0,
            n_steps: 100,
            markov_steps: 200,
            algebra_steps: 50,
            mc_steps: 100,
            n_paths: 10_000,
            doob_paths: 100_000,
            seeds: vec![1, 2, 3],
            sigma_refinement: 3,
            nx: 401,
            tolerances: Tolerances::default(),
            only: None,
            m: None,
            f: None,
            f_lower: 0.5,
            negative: false,
            timings: false,
        }
    }
}

struct Ctx<'a> {
    cfg: &'a SuiteConfig,
    /// Two-point variance grid for path-dependent induction.
    dp: Lattice,
    markov: Lattice,
    mc: Lattice,
    family: ScenarioFamily,
}

impl Ctx<'_> {
    fn seed(&self) -> u64 {
        self.cfg.seeds.first().copied().unwrap_or(0)
    }

    fn t(&self, frac: f64) -> f64 {
        frac * self.cfg.horizon
    }

    /// Built-in processes as `(spec, expected to pass)`, or the user's.
    fn processes(&self, builtin: &[(&str, bool)]) -> Vec<(ProcessSpec, bool)> {
        match &self.cfg.m {
            Some(m) => vec![(m.clone(), !self.cfg.negative)],
            None => builtin.iter().map(|(s, ok)| (s.parse().expect("built-in process"), *ok)).collect(),
        }
    }

    fn integrands(&self, builtin: &[&str]) -> Result<Vec<(StepProcess, bool)>> {
        match &self.cfg.f {
            Some(f) => Ok(vec![(f.clone(), !self.cfg.negative)]),
            None => builtin.iter().map(|s| Ok((parse_step(s)?, true))).collect(),
        }
    }
}

fn mark(r: VerificationReport, expected: bool) -> VerificationReport {
    if expected {
        r
    } else {
        r.negative()
    }
}

fn step(text: &str) -> StepProcess {
    parse_step(text).expect("built-in step process")
}

fn run_check(id: &str, c: &Ctx) -> Result<Vec<VerificationReport>> {
    let cfg = c.cfg;
    let tol = &cfg.tolerances;
    let p = cfg.params;
    let horizon = cfg.horizon;
    let b: ProcessSpec = "B".parse()?;
    let mut out = Vec::new();
    match id {
        "gnormal-moments" => {
            let sq = CylinderFunctional::terminal(horizon, PayoffExpr::parse("x1^2")?)?;
            let upper = lattice_expect(&c.markov, &sq)?;
            let lower = -lattice_expect(&c.markov, &sq.negated())?;
            let grid = Grid1D::centered(horizon, cfg.nx, &p)?;
            let pde_upper = gnormal_expect(sq.phi(), horizon, &p, &grid)?;
            let pde_lower = -gnormal_expect(&sq.phi().negated(), horizon, &p, &grid)?;
            let (hi, lo) = (p.sigma_upper_sq * horizon, p.sigma_lower_sq * horizon);
            let theorem = "G-normal second moments";
            let n = c.markov.n_steps();
            out.push(VerificationReport::equality("gnormal-moments:lattice:upper", theorem, upper, hi, tol.exact, Backend::LatticeDp, n));
            out.push(VerificationReport::equality("gnormal-moments:lattice:lower", theorem, lower, lo, tol.exact, Backend::LatticeDp, n));
            out.push(
                VerificationReport::equality("gnormal-moments:pde:upper", theorem, pde_upper, hi, tol.pde, Backend::PdeLattice, n)
                    .with_part("nx", cfg.nx as f64),
            );
            out.push(
                VerificationReport::equality("gnormal-moments:pde:lower", theorem, pde_lower, lo, tol.pde, Backend::PdeLattice, n)
                    .with_part("nx", cfg.nx as f64),
            );
        }
        "cross-backend" => {
            let grid = Grid1D::centered(horizon, cfg.nx, &p)?;
            let reports: Vec<Result<VerificationReport>> = CROSS_BACKEND_CORPUS
                .par_iter()
                .map(|text| {
                    let x = CylinderFunctional::terminal(horizon, PayoffExpr::parse(text)?)?;
                    let lat = lattice_expect(&c.markov, &x)?;
                    let pde = gnormal_expect(x.phi(), horizon, &p, &grid)?;
                    Ok(VerificationReport::equality(
                        format!("cross-backend:{}", x.phi()),
                        "agreement of PDE and lattice expectations",
                        pde,
                        lat,
                        tol.cross,
                        Backend::PdeLattice,
                        c.markov.n_steps(),
                    )
                    .with_part("nx", cfg.nx as f64))
                })
                .collect();
            for r in reports {
                out.push(r?);
            }
        }
        "conditional-algebra" => {
            let lat = build_lattice(horizon, cfg.algebra_steps, &p, cfg.sigma_refinement)?;
            out.push(check_conditional_algebra(&lat, &ALGEBRA_CORPUS, tol.exact)?);
        }
        "symmetric-martingale" => {
            for (m, ok) in c.processes(&[("B", true), ("int:x1", true), ("qv", false)]) {
                out.push(mark(check_symmetric_martingale(&c.dp, &m, c.t(0.25), horizon, tol.dp)?, ok));
            }
        }
        "gbm-characterization" => {
            for (m, ok) in c.processes(&[("B", true), ("2B", false), ("qv-t", false)]) {
                out.push(mark(check_gbm_characterization(&c.dp, &m, tol.dp)?, ok));
            }
        }
        "representation" => {
            let half = c.t(0.5);
            let builtin = ["1".to_string(), "2".to_string(), format!("step:0=1;{half}=1.5"), "abs(x1)+1".to_string()];
            let builtin: Vec<&str> = builtin.iter().map(String::as_str).collect();
            for (f, ok) in c.integrands(&builtin)? {
                let reports = check_representation(&c.dp, &c.mc, &c.family, &f, cfg.f_lower, tol.dp, tol.path, cfg.n_paths, c.seed())?;
                out.extend(reports.into_iter().map(|r| mark(r, ok)));
            }
        }
        "additivity" => {
            let sq = CylinderFunctional::terminal(horizon, PayoffExpr::parse("x1^2")?)?;
            let cases = [(&sq, "B", true), (&sq, "const:0", true), (&sq, "qv", false)];
            let neg = sq.negated();
            for (x, y, ok) in cases.into_iter().chain([(&neg, "qv", false)]) {
                out.push(mark(check_additivity_lemma(&c.dp, x, &y.parse()?, c.t(0.5), horizon, tol.exact)?, ok));
            }
        }
        "isometry" => {
            let etas = ["1".to_string(), "x1".to_string(), format!("ind:0,{}", c.t(0.5)), format!("ind:{},{}", c.t(0.25), c.t(0.75))];
            for eta in &etas {
                for side in [Side::Upper, Side::Lower] {
                    out.push(check_isometry(&c.dp, &step(eta), &b, side, tol.dp)?);
                }
            }
        }
        "transfer" => {
            let x = CylinderFunctional::new(vec![c.t(0.25), horizon], PayoffExpr::parse("max(x1, 0) - x2^2")?, IncrementMode::Levels)?;
            for xi in ["1", "1 + abs(x1)", "-x1"] {
                out.push(check_transfer(&c.dp, &x, &PayoffExpr::parse(xi)?, c.t(0.25), c.t(0.75), tol.dp)?);
            }
        }
        "qv-identity" => {
            for (m, ok) in c.processes(&[("B", true), ("int:x1", true), ("2B", true)]) {
                out.push(mark(check_qv_identity(&c.mc, &c.family, &m, cfg.n_paths, c.seed(), tol.path)?, ok));
            }
        }
        "qv-band" => out.push(check_qv_band(&c.mc, &c.family, cfg.n_paths, c.seed())?),
        "compensator" => {
            for (f, ok) in c.integrands(&["1", "-1", "x1"])? {
                let reports = check_compensator(&c.dp, &c.mc, &c.family, &f, cfg.n_paths, c.seed(), tol.monotone, tol.dp)?;
                out.extend(reports.into_iter().map(|r| mark(r, ok)));
            }
        }
        "doob" => {
            for (x, ok) in c.processes(&[("B", true), ("int:max(min(100*x1, 1), -1)", true)]) {
                let n_paths = if x.is_markov() { cfg.doob_paths } else { cfg.n_paths };
                for &seed in &cfg.seeds {
                    let r = check_doob(&c.mc, &c.family, &x, 2.0, n_paths, seed, tol.doob_rel)?;
                    let id = format!("{}:seed={seed}", r.id);
                    out.push(mark(VerificationReport { id, ..r }, ok));
                }
            }
        }
        "downcrossing" => {
            let catalogue = [
                Supermartingale::Constant(1.5),
                Supermartingale::Envelope(PayoffExpr::parse("max(x1 + 2, 0)")?),
                Supermartingale::Envelope(PayoffExpr::parse("1 + max(x1, 0)")?),
                Supermartingale::SquareCompensated(p.sigma_upper_sq * horizon + 0.5),
            ];
            for x in &catalogue {
                out.push(check_downcrossing(&c.mc, &c.family, x, 1.0, 2.0, cfg.n_paths, c.seed())?);
            }
        }
        "bdg-a" => {
            for eta in ["1", "x1", "0"] {
                for a in [IncreasingSpec::Time, IncreasingSpec::QuadVar] {
                    out.push(check_bdg_a(&c.mc, &c.dp, &c.family, &step(eta), &b, a, 1.0, cfg.n_paths, c.seed())?);
                }
            }
            out.push(check_bdg_a(&c.mc, &c.dp, &c.family, &step("1"), &b, IncreasingSpec::Time, 2.0, cfg.n_paths, c.seed())?);
        }
        "bdg-two-sided" => {
            let half = format!("ind:0,{}", c.t(0.5));
            for eta in ["1", "0", "x1", half.as_str()] {
                out.push(check_bdg_two_sided(&c.mc, &c.dp, &c.family, &step(eta), &b, 1.0, cfg.n_paths, c.seed())?);
            }
            out.push(check_bdg_two_sided(&c.mc, &c.dp, &c.family, &step("1"), &b, 2.0, cfg.n_paths, c.seed())?);
        }
        "l2-bound" | "l1-bound" => {
            let half = format!("ind:0,{}", c.t(0.5));
            for eta in ["1", "x1", half.as_str()] {
                for a in [IncreasingSpec::Time, IncreasingSpec::QuadVar] {
                    out.push(if id == "l2-bound" {
                        check_l2_bound(&c.dp, &step(eta), &b, a, tol.dp)?
                    } else {
                        check_l1_bound(&c.dp, &step(eta), a, tol.dp)?
                    });
                }
            }
        }
        other => return Err(Error::UnknownCheck(other.to_string())),
    }
    Ok(out)
}

/// Selected checks, sorted by report id.
pub fn run_suite(cfg: &SuiteConfig) -> Result<Vec<VerificationReport>> {
    let ids: Vec<&str> = match &cfg.only {
        Some(only) => {
            for id in only {
                if !CHECK_IDS.contains(&id.as_str()) {
                    return Err(Error::UnknownCheck(id.clone()));
                }
            }
            CHECK_IDS.iter().copied().filter(|id| only.iter().any(|o| o == id)).collect()
        }
        None => CHECK_IDS.to_vec(),
    };
    if cfg.seeds.is_empty() {
        return Err(Error::InvalidArgument("at least one seed is required".into()));
    }
    cfg.params.validate()?;
    let p = cfg.params;
    let ctx = Ctx {
        cfg,
        dp: build_lattice(cfg.horizon, cfg.n_steps, &p, 0)?,
        markov: build_lattice(cfg.horizon, cfg.markov_steps, &p, cfg.sigma_refinement)?,
        mc: build_lattice(cfg.horizon, cfg.mc_steps, &p, cfg.sigma_refinement)?,
        family: ScenarioFamily::standard(&build_lattice(cfg.horizon, cfg.mc_steps, &p, cfg.sigma_refinement)?),
    };
    let results: Vec<Result<Vec<VerificationReport>>> = ids
        .par_iter()
        .map(|id| {
            let start = Instant::now();
            let mut reports = run_check(id, &ctx)?;
            log::info!("{id}: {} reports in {:.1?}", reports.len(), start.elapsed());
            if cfg.timings {
                let ms = start.elapsed().as_secs_f64() * 1e3;
                for r in &mut reports {
                    r.wall_ms = Some(ms);
                }
            }
            Ok(reports)
        })
        .collect();
    let mut all = Vec::new();
    for r in results {
        all.extend(r?);
    }
    all.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SuiteConfig {
        SuiteConfig {
            n_steps: 16,
            markov_steps: 40,
            algebra_steps: 8,
            mc_steps: 20,
            n_paths: 300,
            doob_paths: 2000,
            seeds: vec![1],
            nx: 101,
            ..Default::default()
        }
    }

    #[test]
    fn unknown_id_rejected() {
        let cfg = SuiteConfig {
            only: Some(vec!["nope".into()]),
            ..small()
        };
        assert_eq!(run_suite(&cfg).unwrap_err(), Error::UnknownCheck("nope".into()));
    }

    #[test]
    fn custom_negative_control() {
        let cfg = SuiteConfig {
            only: Some(vec!["gbm-characterization".into()]),
            m: Some("2B".parse().unwrap()),
            negative: true,
            ..small()
        };
        let r = run_suite(&cfg).unwrap();
        assert_eq!(r.len(), 1);
        assert!(!r[0].pass && !r[0].expected_pass && r[0].as_expected());
    }

    #[test]
    fn selected_checks_behave_and_repeat() {
        let cfg = SuiteConfig {
            only: Some(["symmetric-martingale", "additivity", "qv-band", "doob"].map(String::from).to_vec()),
            ..small()
        };
        let a = run_suite(&cfg).unwrap();
        for r in &a {
            assert!(r.as_expected(), "{r:?}");
        }
        let b = run_suite(&cfg).unwrap();
        assert_eq!(super::super::reports_to_json(&a), super::super::reports_to_json(&b));
        assert!(a.windows(2).all(|w| w[0].id <= w[1].id));
    }
}

//! Scenario synthesis and seeded experiment sweeps.
//!
//! Configuration is a JSON document ([`ScenarioConfig`]); every field has a
//! default, so `{}` is a valid config. The master seed can be overridden by
//! the `RIS_SIM_SEED` environment variable.
//!
//! CSV outputs start with one comment line
//! `# schema=<name>/<version> master_seed=<seed> db_ref=1W`; powers in dB are
//! `10·log10(P / 1 W)`.
//!
//! Random streams: the channel of trial `t` at `n_i` elements comes from the
//! path `(0, n_i, t)` and is shared by all architectures, so architectures are
//! compared on the same channels; the solver initialization comes from
//! `(1, n_i, architecture index, t)`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, ChannelModel};
use crate::architectures::{ArchitectureSpec, Family};
use crate::channel::{evaluate, Fidelity, LinkBlocks};
use crate::coupling::{ris_coupling_matrix, ArrayGeometry, DEFAULT_FREQUENCY};
use crate::error::{Error, Result};
use crate::linalg::{c64, rel_frobenius, CMatrix};
use crate::netparams::{random_passive_network, random_passive_terminations, ParamKind, PortPartition, DEFAULT_Z0};
use crate::optimize::{optimize_s_group, optimize_y_forest, optimize_z_group_mc, BeamformingSolution, MimoScenario, SolveOptions};
use crate::seeds;

pub const SEED_ENV: &str = "RIS_SIM_SEED";
pub const SWEEP_SCHEMA: &str = "ris-sweep/1";
pub const SUMMARY_SCHEMA: &str = "ris-summary/1";
pub const SCATTER_SCHEMA: &str = "ris-scatter/1";

/// `10·log10(P / 1 W)`.
pub fn to_db(p: f64) -> f64 {
    10.0 * p.log10()
}

/// `10^{L₀/10} · d^{−α}`.
pub fn pathloss(d: f64, l0_db: f64, alpha: f64) -> Result<f64> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::InvalidGeometry(format!("distance must be positive, got {d}")));
    }
    Ok(10f64.powf(l0_db / 10.0) * d.powf(-alpha))
}

/// One architecture of a sweep; `group_size` is required for `group` and `forest`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureEntry {
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_size: Option<usize>,
}

impl ArchitectureEntry {
    pub fn spec(&self, n_i: usize) -> Result<ArchitectureSpec> {
        ArchitectureSpec::new(self.family, n_i, self.group_size)
    }

    /// `single`, `fully`, `tree`, `group4`, `forest4`, …
    pub fn label(&self) -> String {
        match (self.family, self.group_size) {
            (Family::Group | Family::Forest, Some(g)) => format!("{}{g}", self.family),
            (f, _) => f.to_string(),
        }
    }
}

impl std::str::FromStr for ArchitectureEntry {
    type Err = Error;

    /// `fully`, `tree`, `group:4`, `forest:4`.
    fn from_str(s: &str) -> Result<Self> {
        let (family, size) = match s.split_once(':') {
            Some((f, g)) => {
                let g = g.trim().parse().map_err(|_| Error::InvalidArchitecture(format!("bad group size in '{s}'")))?;
                (f, Some(g))
            }
            None => (s, None),
        };
        Ok(Self { family: family.trim().parse()?, group_size: size })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_outer: usize,
    pub tol: f64,
    pub inner_budget: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolveOptions::default();
        Self { max_outer: d.max_outer, tol: d.tol, inner_budget: d.inner_budget }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Positions in metres.
    pub tx: [f64; 2],
    pub ris: [f64; 2],
    pub rx: [f64; 2],
    pub n_t: usize,
    pub n_r: usize,
    pub n_i_list: Vec<usize>,
    /// Reference path loss at 1 m, dB.
    pub l0_db: f64,
    /// Path-loss exponent RIS → receiver.
    pub alpha_ri: f64,
    /// Path-loss exponent transmitter → RIS.
    pub alpha_it: f64,
    /// Transmit power, W.
    pub p_t: f64,
    /// Carrier frequency, Hz (sets the dipole geometry).
    pub frequency: f64,
    pub z0: f64,
    pub architectures: Vec<ArchitectureEntry>,
    /// Include dipole mutual coupling at the RIS.
    pub coupling: bool,
    pub trials: usize,
    pub master_seed: u64,
    pub output: Option<PathBuf>,
    /// Largest tolerated fraction of runs that stop on their budget.
    pub max_nonconverged_fraction: f64,
    pub solver: SolverConfig,
    /// Channel model of the `scatter` experiment.
    pub scatter_model: ChannelModel,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            tx: [0.0, 0.0],
            ris: [50.0, 2.0],
            rx: [52.0, 0.0],
            n_t: 2,
            n_r: 2,
            n_i_list: vec![4, 8, 16, 32, 64, 128, 256],
            l0_db: -30.0,
            alpha_ri: 2.8,
            alpha_it: 2.0,
            p_t: 0.01,
            frequency: DEFAULT_FREQUENCY,
            z0: DEFAULT_Z0,
            architectures: vec![
                ArchitectureEntry { family: Family::Single, group_size: None },
                ArchitectureEntry { family: Family::Group, group_size: Some(4) },
                ArchitectureEntry { family: Family::Fully, group_size: None },
                ArchitectureEntry { family: Family::Forest, group_size: Some(4) },
                ArchitectureEntry { family: Family::Tree, group_size: None },
            ],
            coupling: false,
            trials: 1000,
            master_seed: 1,
            output: None,
            max_nonconverged_fraction: 0.25,
            solver: SolverConfig::default(),
            scatter_model: ChannelModel::LosRandomPhase,
        }
    }
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl ScenarioConfig {
    /// Reads a JSON config; unknown fields are rejected.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(vec![format!("{}: {e}", path.display())]))
    }

    /// Replaces the master seed with `RIS_SIM_SEED` when set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.master_seed = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(vec![format!("{SEED_ENV}='{v}' is not an unsigned integer")]))?;
        }
        Ok(())
    }

    pub fn d_it(&self) -> f64 {
        distance(self.tx, self.ris)
    }

    pub fn d_ri(&self) -> f64 {
        distance(self.ris, self.rx)
    }

    /// Per-entry variances `(L_RI, L_IT)`.
    pub fn pathlosses(&self) -> Result<(f64, f64)> {
        Ok((pathloss(self.d_ri(), self.l0_db, self.alpha_ri)?, pathloss(self.d_it(), self.l0_db, self.alpha_it)?))
    }

    pub fn solve_options(&self, seed: u64) -> SolveOptions {
        SolveOptions {
            max_outer: self.solver.max_outer,
            tol: self.solver.tol,
            seed,
            inner_budget: self.solver.inner_budget,
            init: None,
        }
    }

    /// Checks every field and reports all problems at once.
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let finite = |p: [f64; 2]| p.iter().all(|v| v.is_finite());
        if !(finite(self.tx) && finite(self.ris) && finite(self.rx)) {
            bad.push("positions must be finite".to_string());
        }
        if !(self.d_it() > 0.0) {
            bad.push("transmitter and RIS must not coincide".to_string());
        }
        if !(self.d_ri() > 0.0) {
            bad.push("RIS and receiver must not coincide".to_string());
        }
        if self.n_t == 0 || self.n_r == 0 {
            bad.push("n_t and n_r must be at least 1".to_string());
        }
        if self.n_i_list.is_empty() || self.n_i_list.contains(&0) {
            bad.push("n_i_list must be non-empty with entries ≥ 1".to_string());
        }
        if !self.l0_db.is_finite() {
            bad.push("l0_db must be finite".to_string());
        }
        if !(self.alpha_ri > 0.0 && self.alpha_ri.is_finite()) || !(self.alpha_it > 0.0 && self.alpha_it.is_finite()) {
            bad.push("path-loss exponents must be positive".to_string());
        }
        if !(self.p_t > 0.0 && self.p_t.is_finite()) {
            bad.push("p_t must be positive".to_string());
        }
        if !(self.frequency > 0.0 && self.frequency.is_finite()) {
            bad.push("frequency must be positive".to_string());
        }
        if !(self.z0 > 0.0 && self.z0.is_finite()) {
            bad.push("z0 must be positive".to_string());
        }
        if self.trials == 0 {
            bad.push("trials must be at least 1".to_string());
        }
        if !(0.0..=1.0).contains(&self.max_nonconverged_fraction) {
            bad.push("max_nonconverged_fraction must lie in [0, 1]".to_string());
        }
        if self.solver.max_outer == 0 || self.solver.inner_budget == 0 || !(self.solver.tol > 0.0) {
            bad.push("solver max_outer, inner_budget and tol must be positive".to_string());
        }
        if self.architectures.is_empty() {
            bad.push("architectures must be non-empty".to_string());
        }
        for a in &self.architectures {
            for &n in self.n_i_list.iter().filter(|&&n| n > 0) {
                if let Err(e) = a.spec(n) {
                    bad.push(format!("architecture {} at n_i = {n}: {e}", a.label()));
                }
            }
            if self.coupling && matches!(a.family, Family::Tree | Family::Forest) {
                bad.push(format!("architecture {} has no solver with coupling on", a.label()));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(bad))
        }
    }
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io { path: path.display().to_string(), message: e.to_string() }
}

/// I.i.d. Rayleigh blocks `S_RI ~ CN(0, L_RI)`, `S_IT ~ CN(0, L_IT)` with a
/// fully obstructed direct link (`Z_RT = 0`), mapped to all three forms.
pub fn synthesize_scenario(cfg: &ScenarioConfig, n_i: usize, seed: u64) -> Result<MimoScenario> {
    let (l_ri, l_it) = cfg.pathlosses()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |r: usize, c: usize, var: f64| {
        let s = (var / 2.0).sqrt();
        CMatrix::from_fn(r, c, |_, _| {
            let (re, im): (f64, f64) = (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
            c64(re * s, im * s)
        })
    };
    let s_ri = draw(cfg.n_r, n_i, l_ri);
    let s_it = draw(n_i, cfg.n_t, l_it);
    let two_z0 = 2.0 * cfg.z0;
    let z = LinkBlocks { rt: CMatrix::zeros(cfg.n_r, cfg.n_t), ri: s_ri.scale(two_z0), it: s_it.scale(two_z0) };
    let z_ii = if cfg.coupling {
        Some(ris_coupling_matrix(&ArrayGeometry::quarter_wave(n_i, cfg.frequency)?, cfg.z0)?)
    } else {
        None
    };
    MimoScenario::new(z, z_ii, cfg.z0, cfg.p_t)
}

/// Runs the solver matching the architecture and coupling flag.
pub fn solve(scn: &MimoScenario, spec: &ArchitectureSpec, coupling: bool, opts: &SolveOptions) -> Result<BeamformingSolution> {
    match spec.family() {
        Family::Tree | Family::Forest => optimize_y_forest(scn, spec, opts),
        _ if coupling => optimize_z_group_mc(scn, spec, opts),
        _ => optimize_s_group(scn, spec, opts),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRecord {
    pub n_i: usize,
    pub architecture: String,
    pub coupling: bool,
    pub trial: usize,
    /// Seed of the channel realization.
    pub seed: u64,
    pub power_w: f64,
    pub power_db: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub n_i: usize,
    pub architecture: String,
    pub coupling: bool,
    pub trials: usize,
    pub mean_power_w: f64,
    pub se_power_w: f64,
    pub mean_power_db: f64,
    pub nonconverged: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub records: Vec<ExperimentRecord>,
    pub summary: Vec<SummaryRow>,
    pub master_seed: u64,
    pub max_nonconverged_fraction: f64,
}

impl SweepOutcome {
    pub fn nonconverged(&self) -> usize {
        self.records.iter().filter(|r| !r.converged).count()
    }

    /// `NonConvergence` when too many runs stopped on their budget.
    pub fn check(&self) -> Result<()> {
        let (count, total) = (self.nonconverged(), self.records.len());
        if count as f64 > self.max_nonconverged_fraction * total as f64 {
            return Err(Error::NonConvergence { count, total, limit: self.max_nonconverged_fraction });
        }
        Ok(())
    }
}

/// Channel seed of trial `t` at `n_i` elements.
pub fn channel_seed(master: u64, n_i: usize, trial: usize) -> u64 {
    seeds::derive(master, &[0, n_i as u64, trial as u64])
}

/// Solver-initialization seed of one row.
pub fn solver_seed(master: u64, n_i: usize, arch: usize, trial: usize) -> u64 {
    seeds::derive(master, &[1, n_i as u64, arch as u64, trial as u64])
}

/// Optimizes every `(n_i, architecture, trial)` in parallel and writes the
/// records (sorted) to `cfg.output` when set.
pub fn run_sweep(cfg: &ScenarioConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize, usize)> = cfg
        .n_i_list
        .iter()
        .flat_map(|&n| (0..cfg.architectures.len()).flat_map(move |a| (0..cfg.trials).map(move |t| (n, a, t))))
        .collect();
    let mut records = jobs
        .into_par_iter()
        .map(|(n_i, a, trial)| {
            let start = Instant::now();
            let entry = cfg.architectures[a];
            let seed = channel_seed(cfg.master_seed, n_i, trial);
            let scn = synthesize_scenario(cfg, n_i, seed)?;
            let opts = cfg.solve_options(solver_seed(cfg.master_seed, n_i, a, trial));
            let sol = solve(&scn, &entry.spec(n_i)?, cfg.coupling, &opts)?;
            Ok((
                a,
                ExperimentRecord {
                    n_i,
                    architecture: entry.label(),
                    coupling: cfg.coupling,
                    trial,
                    seed,
                    power_w: sol.power(),
                    power_db: to_db(sol.power()),
                    iterations: sol.iterations(),
                    converged: sol.converged,
                    wall_time_s: start.elapsed().as_secs_f64(),
                },
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    records.sort_by_key(|(a, r)| (r.n_i, *a, r.trial));

    let mut summary = Vec::new();
    for &n_i in &cfg.n_i_list {
        for (a, entry) in cfg.architectures.iter().enumerate() {
            let rows: Vec<&ExperimentRecord> = records.iter().filter(|(i, r)| *i == a && r.n_i == n_i).map(|(_, r)| r).collect();
            let (mean, se) = analysis::mean_se(rows.iter().map(|r| r.power_w));
            summary.push(SummaryRow {
                n_i,
                architecture: entry.label(),
                coupling: cfg.coupling,
                trials: rows.len(),
                mean_power_w: mean,
                se_power_w: se,
                mean_power_db: to_db(mean),
                nonconverged: rows.iter().filter(|r| !r.converged).count(),
            });
        }
    }
    let outcome = SweepOutcome {
        records: records.into_iter().map(|(_, r)| r).collect(),
        summary,
        master_seed: cfg.master_seed,
        max_nonconverged_fraction: cfg.max_nonconverged_fraction,
    };
    if let Some(path) = &cfg.output {
        write_csv_file(path, SWEEP_SCHEMA, cfg.master_seed, &outcome.records)?;
    }
    Ok(outcome)
}

/// One row of the structural-scattering experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScatterRow {
    pub ni: usize,
    pub mean_pr_db: f64,
    pub mean_prp_db: f64,
    pub delta_emp: f64,
    pub delta_closed: f64,
}

/// Mean optimal SISO power with (`P_R`) and without (`P_R′`) structural
/// scattering, unit transmit power and unit-variance channels.
pub fn scatter_rows(ni_list: &[usize], trials: usize, master_seed: u64, model: ChannelModel) -> Result<Vec<ScatterRow>> {
    ni_list
        .iter()
        .map(|&n| {
            let s = analysis::monte_carlo_powers(n, trials, master_seed, model)?;
            Ok(ScatterRow {
                ni: n,
                mean_pr_db: to_db(s.mean_pr),
                mean_prp_db: to_db(s.mean_prp),
                delta_emp: s.delta(),
                delta_closed: analysis::los_delta(n),
            })
        })
        .collect()
}

/// Three-way (Z/Y/S) agreement of the general channel on random passive
/// networks with `N_T = N_I = N_R = 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub fixtures: usize,
    pub seed: u64,
    pub max_deviation: f64,
}

pub fn equivalence_check(seed: u64, fixtures: usize) -> Result<EquivalenceReport> {
    let p = PortPartition::new(2, 2, 2)?;
    let mut worst: f64 = 0.0;
    for k in 0..fixtures {
        let s = seeds::derive(seed, &[k as u64]);
        let net = random_passive_network(p, s, DEFAULT_Z0);
        let terms = random_passive_terminations(p, s, DEFAULT_Z0);
        let [hz, hy, hs] = [ParamKind::Z, ParamKind::Y, ParamKind::S].map(|kind| evaluate(Fidelity::General, kind, &net, &terms));
        let (hz, hy, hs) = (hz?.h, hy?.h, hs?.h);
        worst = worst.max(rel_frobenius(&hy, &hz)).max(rel_frobenius(&hs, &hz)).max(rel_frobenius(&hs, &hy));
    }
    Ok(EquivalenceReport { fixtures, seed, max_deviation: worst })
}

/// Writes the schema comment line followed by the CSV rows.
pub fn write_csv<W: Write, T: Serialize>(out: W, schema: &str, master_seed: u64, rows: &[T]) -> Result<()> {
    let mut out = out;
    let fail = |e: &dyn std::fmt::Display| Error::Io { path: "<output>".into(), message: e.to_string() };
    writeln!(out, "# schema={schema} master_seed={master_seed} db_ref=1W").map_err(|e| fail(&e))?;
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| fail(&e))?;
    }
    w.flush().map_err(|e| fail(&e))
}

pub fn write_csv_file<T: Serialize>(path: &Path, schema: &str, master_seed: u64, rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| io_error(path, e))?;
    write_csv(BufWriter::new(file), schema, master_seed, rows).map_err(|e| match e {
        Error::Io { message, .. } => io_error(path, message),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioConfig {
        ScenarioConfig { n_i_list: vec![4], trials: 3, ..ScenarioConfig::default() }
    }

    #[test]
    fn pathloss_examples() {
        assert!((pathloss(1.0, -30.0, 2.0).unwrap() - 1e-3).abs() < 1e-18);
        assert!((pathloss(10.0, 0.0, 2.0).unwrap() - 1e-2).abs() < 1e-17);
        assert!((pathloss(10.0, -30.0, 2.0).unwrap() - 1e-5).abs() < 1e-20);
        let cfg = ScenarioConfig::default();
        assert!((cfg.d_ri() - 8f64.sqrt()).abs() < 1e-12);
        let (l_ri, _) = cfg.pathlosses().unwrap();
        assert!((l_ri - 1e-3 * 8f64.sqrt().powf(-2.8)).abs() < 1e-18);
        assert!(matches!(pathloss(0.0, -30.0, 2.0), Err(Error::InvalidGeometry(_))));
    }

    #[test]
    fn scenario_is_deterministic_and_obstructed() {
        let cfg = small();
        let a = synthesize_scenario(&cfg, 4, 9).unwrap();
        assert_eq!(a, synthesize_scenario(&cfg, 4, 9).unwrap());
        assert_ne!(a, synthesize_scenario(&cfg, 4, 10).unwrap());
        assert_eq!(a.z.rt, CMatrix::zeros(2, 2));
        let s_rt = -(&a.s.ri * &a.s.it);
        assert!(rel_frobenius(&a.s.rt, &s_rt) < 1e-12);
    }

    #[test]
    fn entry_variance_matches_pathloss() {
        let cfg = ScenarioConfig { n_r: 1, ..small() };
        let (l_ri, _) = cfg.pathlosses().unwrap();
        let n_i = 100;
        let samples: Vec<f64> =
            (0..100).flat_map(|t| synthesize_scenario(&cfg, n_i, t).unwrap().s.ri.iter().map(|v| v.norm_sqr()).collect::<Vec<_>>()).collect();
        let (mean, se) = analysis::mean_se(samples.iter().copied());
        assert!((mean - l_ri).abs() < 3.0 * se, "{mean} vs {l_ri} ± {se}");
    }

    #[test]
    fn validation_lists_every_problem() {
        let cfg = ScenarioConfig { trials: 0, alpha_ri: -1.0, rx: [50.0, 2.0], n_i_list: vec![6], ..ScenarioConfig::default() };
        let Err(Error::InvalidConfig(list)) = cfg.validate() else { panic!() };
        // trials, exponent, coincident RIS/receiver, group/forest of 4 on 6 elements
        assert_eq!(list.len(), 5, "{list:?}");
        assert!(ScenarioConfig::default().validate().is_ok());
        let coupled = ScenarioConfig { coupling: true, ..ScenarioConfig::default() };
        assert!(coupled.validate().is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = ScenarioConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<ScenarioConfig>(&text).unwrap(), cfg);
        assert_eq!(serde_json::from_str::<ScenarioConfig>("{}").unwrap(), cfg);
        assert!(serde_json::from_str::<ScenarioConfig>(r#"{"trails": 3}"#).is_err());
    }

    #[test]
    fn architecture_entries_parse() {
        let e: ArchitectureEntry = "group:4".parse().unwrap();
        assert_eq!((e.family, e.group_size, e.label()), (Family::Group, Some(4), "group4".to_string()));
        assert_eq!("tree".parse::<ArchitectureEntry>().unwrap().label(), "tree");
        assert!("ring".parse::<ArchitectureEntry>().is_err());
        assert!("group:x".parse::<ArchitectureEntry>().is_err());
    }

    #[test]
    fn sweep_is_deterministic_and_sorted() {
        let cfg = small();
        let a = run_sweep(&cfg).unwrap();
        let b = run_sweep(&cfg).unwrap();
        let key = |o: &SweepOutcome| o.records.iter().map(|r| (r.n_i, r.architecture.clone(), r.trial, r.power_w.to_bits())).collect::<Vec<_>>();
        assert_eq!(key(&a), key(&b));
        assert_eq!(a.records.len(), 5 * 3);
        assert_eq!(a.summary.len(), 5);
        assert!(a.records.windows(2).all(|w| (w[0].n_i, w[0].trial) <= (w[1].n_i, w[1].trial) || w[0].architecture != w[1].architecture));
        assert!(a.records.iter().all(|r| r.power_w >= 0.0));
        a.check().unwrap();
    }

    #[test]
    fn csv_has_schema_header() {
        let rows = scatter_rows(&[4], 10, 3, ChannelModel::LosRandomPhase).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, SCATTER_SCHEMA, 3, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "# schema=ris-scatter/1 master_seed=3 db_ref=1W");
        assert_eq!(lines.next().unwrap(), "ni,mean_pr_db,mean_prp_db,delta_emp,delta_closed");
        // P_R' = N_I² exactly for unit-modulus channels
        assert!((rows[0].mean_prp_db - to_db(16.0)).abs() < 1e-12);
    }

    #[test]
    fn equivalence_report() {
        let r = equivalence_check(7, 20).unwrap();
        assert!(r.max_deviation < 1e-9, "{}", r.max_deviation);
    }

    #[test]
    fn env_seed_override() {
        // the only test touching the variable
        let mut cfg = small();
        std::env::set_var(SEED_ENV, "77");
        cfg.apply_env().unwrap();
        assert_eq!(cfg.master_seed, 77);
        std::env::set_var(SEED_ENV, "x");
        assert!(cfg.apply_env().is_err());
        std::env::remove_var(SEED_ENV);
    }
}

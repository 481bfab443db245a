//! Acceptance suite: one pass/fail line per criterion, nonzero exit on any
//! failure. Runs as a plain binary (`harness = false`).

use std::f64::consts::TAU;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ris_network::analysis::{self, ChannelModel};
use ris_network::architectures::{random_feasible, validate, ArchitectureSpec, RisConfiguration, RisParam};
use ris_network::channel::{evaluate, map_matched, matched_channel, Fidelity, LinkBlocks};
use ris_network::harness::{self, ScenarioConfig};
use ris_network::linalg::{c64, identity, real, rel_frobenius, unitarity_defect, CMatrix, CVector, C64};
use ris_network::netparams::{
    random_passive_network, random_passive_terminations, NetworkMatrix, ParamKind, PortPartition, DEFAULT_Z0,
};
use ris_network::optimize::{optimize_s_group, optimize_z_group_mc, s_inner_bound, s_inner_step, SolveOptions};

const Z0: f64 = DEFAULT_Z0;
const KINDS: [ParamKind; 3] = [ParamKind::Z, ParamKind::Y, ParamKind::S];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

/// Fails the criterion when the runtime limit is exceeded.
fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> (Outcome, Duration) {
    let start = Instant::now();
    let mut o = f();
    let t = start.elapsed();
    if let Some(limit) = limit {
        if t > limit {
            o.pass = false;
            o.detail += &format!("; runtime {:.1?} over {:.0?}", t, limit);
        }
    }
    (o, t)
}

fn three_way(net: &NetworkMatrix, terms: &ris_network::netparams::TerminationSet, f: Fidelity) -> [CMatrix; 3] {
    KINDS.map(|k| evaluate(f, k, net, terms).expect("channel").h)
}

fn spread(h: &[CMatrix; 3]) -> f64 {
    rel_frobenius(&h[1], &h[0]).max(rel_frobenius(&h[2], &h[0])).max(rel_frobenius(&h[2], &h[1]))
}

fn with_block(net: &NetworkMatrix, r: usize, c: usize, m: CMatrix) -> NetworkMatrix {
    let mut b = net.blocks();
    b[r][c] = m;
    NetworkMatrix::from_blocks(net.kind(), net.partition(), net.z0(), &b).expect("blocks")
}

fn c1_equivalence() -> Outcome {
    let p = PortPartition::new(2, 2, 2).unwrap();
    let worst = (0..100)
        .map(|s| spread(&three_way(&random_passive_network(p, s, Z0), &random_passive_terminations(p, s, Z0), Fidelity::General)))
        .fold(0.0, f64::max);
    outcome(worst < 1e-9, format!("max three-way deviation {worst:.2e} over 100 fixtures (< 1e-9)"))
}

fn c2_degradation() -> Outcome {
    let p = PortPartition::new(2, 3, 2).unwrap();
    let (t, i, r) = (0, 1, 2);
    let mut worst = [0.0f64; 3];
    for s in 0..100 {
        let net = random_passive_network(p, s, Z0).unilateral();
        let terms = random_passive_terminations(p, s, Z0);
        for k in KINDS {
            let g = evaluate(Fidelity::General, k, &net, &terms).unwrap().h;
            let u = evaluate(Fidelity::Unilateral, k, &net, &terms).unwrap().h;
            worst[0] = worst[0].max(rel_frobenius(&u, &g));
        }
        let matched = with_block(&with_block(&net, t, t, identity(2) * real(Z0)), r, r, identity(2) * real(Z0));
        let mterms = ris_network::netparams::TerminationSet::matched(p, terms.z_i.clone(), Z0).unwrap();
        for k in KINDS {
            let u = evaluate(Fidelity::Unilateral, k, &matched, &mterms).unwrap().h;
            let c = evaluate(Fidelity::MatchedWithCoupling, k, &matched, &mterms).unwrap().h;
            worst[1] = worst[1].max(rel_frobenius(&c, &u));
        }
        let decoupled = with_block(&matched, i, i, identity(3) * real(Z0));
        for k in KINDS {
            let c = evaluate(Fidelity::MatchedWithCoupling, k, &decoupled, &mterms).unwrap().h;
            let m = evaluate(Fidelity::Matched, k, &decoupled, &mterms).unwrap().h;
            worst[2] = worst[2].max(rel_frobenius(&m, &c));
        }
    }
    let pass = worst.iter().all(|&w| w < 1e-10);
    outcome(
        pass,
        format!(
            "general→unilateral {:.1e}, →matched+coupling {:.1e}, →matched {:.1e} (< 1e-10)",
            worst[0], worst[1], worst[2]
        ),
    )
}

fn random_blocks(rng: &mut ChaCha8Rng, n_r: usize, n_i: usize, n_t: usize, scale: f64) -> LinkBlocks {
    let mut rc = |r, c| CMatrix::from_fn(r, c, |_, _| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale);
    LinkBlocks { rt: rc(n_r, n_t), ri: rc(n_r, n_i), it: rc(n_i, n_t) }
}

fn c3_mapping() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let specs = [ArchitectureSpec::single(4), ArchitectureSpec::group(4, 2).unwrap(), ArchitectureSpec::fully(4)];
    let mut worst: f64 = 0.0;
    for s in 0..100u64 {
        let z = random_blocks(&mut rng, 2, 4, 2, Z0);
        let m = map_matched(&z, Z0);
        let ris = random_feasible(&specs[(s % 3) as usize], s, Z0);
        let hz = matched_channel(ParamKind::Z, &z, &ris, None).unwrap().h;
        let hy = matched_channel(ParamKind::Y, &m.y, &ris, None).unwrap().h;
        let hs = matched_channel(ParamKind::S, &m.s, &ris, None).unwrap().h;
        worst = worst.max(rel_frobenius(&hy, &hz)).max(rel_frobenius(&hs, &hz));
    }
    outcome(worst < 1e-10, format!("max deviation from Z-form {worst:.2e} over 100 fixtures (< 1e-10)"))
}

fn c4_expected_power() -> Outcome {
    let s = analysis::monte_carlo_powers(100, 10_000, 4, ChannelModel::LosRandomPhase).unwrap();
    let closed = analysis::los_expected_power(100);
    let z = (s.mean_pr - closed) / s.se_pr;
    let prp_exact = s.mean_prp == 1e4 && s.se_prp == 0.0;
    outcome(
        z.abs() < 3.0 && prp_exact && (closed - 11872.45).abs() < 0.01,
        format!("E[P_R] {:.2} vs {closed:.2} ({z:+.2} SE); P_R' = {}", s.mean_pr, s.mean_prp),
    )
}

fn c5_delta() -> Outcome {
    let mut emp = Vec::new();
    let mut pass = (analysis::los_delta(100) - 0.1577).abs() <= 5e-4;
    let mut detail = format!("δ(100) = {:.5}", analysis::los_delta(100));
    for n in [16, 64, 256] {
        let d = analysis::monte_carlo_powers(n, 10_000, 5, ChannelModel::LosRandomPhase).unwrap().delta();
        let closed = analysis::los_delta(n);
        pass &= (d - closed).abs() <= 0.01;
        detail += &format!("; N={n}: {d:.4} vs {closed:.4}");
        emp.push(d);
    }
    pass &= emp.windows(2).all(|w| w[1] < w[0]);
    outcome(pass, detail)
}

fn c6_siso_grid() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut pass = true;
    let mut worst_gap: f64 = 0.0;
    for (n, k) in [(1usize, 720usize), (2, 180), (3, 48)] {
        let step = TAU / k as f64;
        for _ in 0..20 {
            let inst = analysis::draw_instance(&mut rng, n, ChannelModel::Rayleigh);
            let (p_star, _) = analysis::max_power_exact(&inst);
            let mut best: f64 = 0.0;
            let mut idx = vec![0usize; n];
            loop {
                let theta: Vec<f64> = idx.iter().map(|&i| i as f64 * step).collect();
                best = best.max(inst.p_t * analysis::siso_exact(&inst, &theta).norm_sqr());
                let mut d = 0;
                while d < n {
                    idx[d] += 1;
                    if idx[d] < k {
                        break;
                    }
                    idx[d] = 0;
                    d += 1;
                }
                if d == n {
                    break;
                }
            }
            // each phase is within step/2 of the optimum: |Δh| ≤ Σ|a_n|·step/2
            let resolution = inst.p_t.sqrt() * inst.cascades().map(|a| a.norm()).sum::<f64>() * step / 2.0;
            let gap = p_star.sqrt() - best.sqrt();
            pass &= best <= p_star * (1.0 + 1e-12) && gap <= resolution;
            worst_gap = worst_gap.max(gap / resolution);
        }
    }
    outcome(pass, format!("60 instances; worst gap {:.2} of grid resolution", worst_gap))
}

fn c7_s_bound() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let mut rv = |n: usize| CVector::from_fn(n, |_, _| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    for s in 0..50 {
        let spec = match s % 3 {
            0 => ArchitectureSpec::single(8),
            1 => ArchitectureSpec::group(8, 4).unwrap(),
            _ => ArchitectureSpec::fully(8),
        };
        let (rt, ri, it) = (rv(1)[0], rv(8), rv(8));
        let theta = s_inner_step(rt, &ri, &it, &spec, &identity(8));
        let value = (rt + (ri.transpose() * &theta * &it)[(0, 0)]).norm();
        let bound = s_inner_bound(rt, &ri, &it, &spec);
        worst = worst.max((bound - value).abs() / bound);
    }
    outcome(worst < 1e-6, format!("max relative gap to bound {worst:.2e} over 50 instances (< 1e-6)"))
}

fn default_config() -> ScenarioConfig {
    ScenarioConfig::default()
}

fn solve_row(cfg: &ScenarioConfig, n_i: usize, arch: &str, seed: u64) -> f64 {
    let entry: harness::ArchitectureEntry = arch.parse().unwrap();
    let scn = harness::synthesize_scenario(cfg, n_i, harness::channel_seed(cfg.master_seed, n_i, seed as usize)).unwrap();
    let opts = cfg.solve_options(harness::solver_seed(cfg.master_seed, n_i, 0, seed as usize));
    harness::solve(&scn, &entry.spec(n_i).unwrap(), cfg.coupling, &opts).unwrap().power()
}

fn c8_cross_architecture() -> Outcome {
    use rayon::prelude::*;
    let cfg = default_config();
    let archs = ["fully", "tree", "group:4", "forest:4"];
    let p: Vec<[f64; 4]> = (0..20u64).into_par_iter().map(|s| archs.map(|a| solve_row(&cfg, 16, a, s))).collect();
    let mean = |k: usize| p.iter().map(|r| r[k]).sum::<f64>() / p.len() as f64;
    let gap_tree = (mean(1) - mean(0)).abs() / mean(0);
    let gap_forest = (mean(3) - mean(2)).abs() / mean(2);
    outcome(
        gap_tree < 0.01 && gap_forest < 0.01,
        format!("N_I=16, 20 seeds: tree vs fully {:.2e}, forest4 vs group4 {:.2e} (< 1e-2)", gap_tree, gap_forest),
    )
}

fn c9_ordering() -> Outcome {
    use rayon::prelude::*;
    let cfg = default_config();
    let rows: Vec<[f64; 3]> =
        (0..20u64).into_par_iter().map(|s| ["single", "group:4", "fully"].map(|a| solve_row(&cfg, 16, a, s))).collect();
    let violations = rows.iter().filter(|r| r[1] < r[0] * (1.0 - 1e-6) || r[2] < r[1] * (1.0 - 1e-6)).count();
    let gain = rows.iter().map(|r| r[2] / r[0]).sum::<f64>() / rows.len() as f64;
    outcome(violations == 0, format!("{violations} of 20 seeds out of order; mean fully/single gain {gain:.3}"))
}

fn c10_coupling() -> Outcome {
    use rayon::prelude::*;
    let coupled = ScenarioConfig { coupling: true, ..default_config() };
    // monotone traces
    let monotone = (0..20u64)
        .into_par_iter()
        .filter(|&s| {
            let scn = harness::synthesize_scenario(&coupled, 8, s).unwrap();
            let opts = SolveOptions { max_outer: 50, tol: 1e-300, seed: s, ..SolveOptions::default() };
            let sol = optimize_z_group_mc(&scn, &ArchitectureSpec::fully(8), &opts).unwrap();
            sol.trace.windows(2).all(|w| w[1] >= w[0] - 1e-12 * w[0].abs()) && sol.max_violation <= 1e-8
        })
        .count();
    // N_I = 2 grid oracle
    let scn = harness::synthesize_scenario(&coupled, 2, 10).unwrap();
    let sol = optimize_z_group_mc(&scn, &ArchitectureSpec::single(2), &SolveOptions::default()).unwrap();
    let k = 400;
    let grid: Vec<f64> = (0..k).map(|i| -20.0 * Z0 + 40.0 * Z0 * i as f64 / (k - 1) as f64).collect();
    let best = grid
        .par_iter()
        .map(|&x1| grid.iter().map(|&x2| grid_power(&scn.z, &scn.z_ii, x1, x2, scn.p_t)).fold(0.0, f64::max))
        .reduce(|| 0.0, f64::max);
    let ratio = sol.power() / best;
    // reported, not asserted: coupled vs uncoupled optimum on the same channels
    let uncoupled = harness::synthesize_scenario(&default_config(), 2, 10).unwrap();
    let p_off = optimize_s_group(&uncoupled, &ArchitectureSpec::single(2), &SolveOptions::default()).unwrap().power();
    outcome(
        monotone == 20 && ratio >= 0.99,
        format!(
            "{monotone}/20 monotone feasible traces; N_I=2 solver/grid {ratio:.4}; coupled {:.2} dB vs uncoupled {:.2} dB",
            harness::to_db(sol.power()),
            harness::to_db(p_off)
        ),
    )
}

/// `P_T σ_max²` of `(Z_RT − Z_RI (jX + Z_II)⁻¹ Z_IT)/2Z₀` for diagonal `X`,
/// with the 2×2 inverse and singular value written out.
fn grid_power(z: &LinkBlocks, z_ii: &CMatrix, x1: f64, x2: f64, p_t: f64) -> f64 {
    let m = [[z_ii[(0, 0)] + C64::new(0.0, x1), z_ii[(0, 1)]], [z_ii[(1, 0)], z_ii[(1, 1)] + C64::new(0.0, x2)]];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let inv = CMatrix::from_row_slice(2, 2, &[m[1][1] / det, -m[0][1] / det, -m[1][0] / det, m[0][0] / det]);
    let h = (&z.rt - &z.ri * inv * &z.it) / real(2.0 * Z0);
    let g = h.adjoint() * &h;
    let tr = (g[(0, 0)] + g[(1, 1)]).re;
    let det = (g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)]).re;
    p_t * (tr + (tr * tr - 4.0 * det).max(0.0).sqrt()) / 2.0
}

fn c11_properties() -> Outcome {
    let mut failures = Vec::new();
    let mut run = |name: &str, cases: u32, test: &dyn Fn(u64) -> bool| {
        let mut runner = TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
        if let Err(e) = runner.run(&any::<u64>(), |s| {
            prop_assert!(test(s));
            Ok(())
        }) {
            failures.push(format!("{name}: {e}"));
        }
    };
    let p = PortPartition::new(2, 3, 2).unwrap();
    run("conversions", 200, &|s| {
        let z = random_passive_network(p, s, Z0);
        KINDS.iter().all(|&k| {
            let back = z.to_kind(k).and_then(|m| m.to_kind(ParamKind::Z)).unwrap();
            rel_frobenius(back.values(), z.values()) < 1e-10
        })
    });
    run("reciprocity", 200, &|s| {
        let sm = random_passive_network(p, s, Z0).to_kind(ParamKind::S).unwrap();
        rel_frobenius(sm.values(), &sm.values().transpose()) < 1e-12
    });
    run("passivity", 200, &|s| {
        let sm = random_passive_network(p, s, Z0).to_kind(ParamKind::S).unwrap();
        let v = sm.values();
        // I − SᴴS positive semidefinite
        let m = identity(v.nrows()) - v.adjoint() * v;
        let m = m.map(|z| z.re);
        nalgebra::SymmetricEigen::new(m).eigenvalues.min() > -1e-12
    });
    run("losslessness", 200, &|s| {
        let spec = ArchitectureSpec::fully(4);
        let ris = random_feasible(&spec, s, Z0);
        let theta = ris.theta().unwrap();
        unitarity_defect(&theta) < 1e-10 && rel_frobenius(&theta, &theta.transpose()) < 1e-10
    });
    run("feasibility at every iterate", 12, &|s| {
        let cfg = ScenarioConfig { coupling: s % 2 == 0, ..default_config() };
        let scn = harness::synthesize_scenario(&cfg, 4, s).unwrap();
        let opts = SolveOptions { seed: s, max_outer: 30, ..SolveOptions::default() };
        let specs = if cfg.coupling {
            vec![ArchitectureSpec::single(4), ArchitectureSpec::group(4, 2).unwrap(), ArchitectureSpec::fully(4)]
        } else {
            vec![ArchitectureSpec::tree(4), ArchitectureSpec::forest(4, 2).unwrap(), ArchitectureSpec::fully(4)]
        };
        specs.iter().all(|spec| {
            let sol = harness::solve(&scn, spec, cfg.coupling, &opts).unwrap();
            let final_ok = validate(&sol.ris, 1e-8).is_feasible();
            let monotone = sol.trace.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12));
            sol.max_violation <= 1e-8 && final_ok && monotone
        })
    });
    run("determinism", 4, &|s| {
        let cfg = ScenarioConfig { n_i_list: vec![4], trials: 2, master_seed: s, ..default_config() };
        let a = harness::run_sweep(&cfg).unwrap();
        let b = harness::run_sweep(&cfg).unwrap();
        a.records.iter().zip(&b.records).all(|(x, y)| x.power_w.to_bits() == y.power_w.to_bits() && x.seed == y.seed)
    });
    run("power accounting", 20, &|s| {
        let scn = harness::synthesize_scenario(&default_config(), 4, s).unwrap();
        let sol = optimize_s_group(&scn, &ArchitectureSpec::fully(4), &SolveOptions { seed: s, ..SolveOptions::default() }).unwrap();
        let ris = RisConfiguration::new(RisParam::Scattering(sol.ris.theta().unwrap()), sol.ris.spec, Z0);
        let p = scn.received_power(ris_network::optimize::Formulation::S, &ris, &sol.w, &sol.g).unwrap();
        (p - sol.power()).abs() <= 1e-12 * p
    });
    let n = failures.len();
    outcome(n == 0, if n == 0 { "7 property suites, 0 failures".to_string() } else { failures.join(" | ") })
}

type Criterion = (&'static str, Option<Duration>, fn() -> Outcome);

fn main() -> ExitCode {
    let suite = Instant::now();
    let secs = |s| Some(Duration::from_secs(s));
    let criteria: Vec<Criterion> = vec![
        ("three-way model equivalence", secs(5), c1_equivalence),
        ("degradation chain", secs(5), c2_degradation),
        ("mapping consistency", None, c3_mapping),
        ("E[P_R] closed form (LoS Monte Carlo)", secs(30), c4_expected_power),
        ("structural-scattering ratio δ", None, c5_delta),
        ("SISO brute-force oracle", None, c6_siso_grid),
        ("S inner-step bound attainment", None, c7_s_bound),
        ("cross-architecture equivalence", secs(120), c8_cross_architecture),
        ("architecture ordering", None, c9_ordering),
        ("Z-solver with coupling", None, c10_coupling),
        ("property suites", None, c11_properties),
    ];
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.into_iter().enumerate() {
        let (o, t) = timed(limit, f);
        failed += usize::from(!o.pass);
        println!("criterion {:>2} {} {name} [{:.2?}]: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, t, o.detail);
    }
    let total = suite.elapsed();
    println!("acceptance: {} of 11 criteria passed in {:.1?}", 11 - failed, total);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

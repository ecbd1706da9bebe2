//! Subcommand bodies. Each returns its tables; nothing touches disk here.

use dfcrb::montecarlo::{self, McOptions, SearchWindow};
use dfcrb::plateau_approx;
use dfcrb::qstats;
use dfcrb::sweep::{self, SweepScenario};

use crate::artifacts::{num, opt, Table};
use crate::config::{ExperimentConfig, UpCheckConfig};
use crate::error::{CliError, Result};

/// Values given on the command line that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub snr_db: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    CrbSweep,
    TurningPoint,
    Qstats,
    ApproxCheck,
    UpCheck,
    McRmse,
}

impl Subcommand {
    pub fn as_str(self) -> &'static str {
        match self {
            Subcommand::CrbSweep => "crb-sweep",
            Subcommand::TurningPoint => "turning-point",
            Subcommand::Qstats => "qstats",
            Subcommand::ApproxCheck => "approx-check",
            Subcommand::UpCheck => "up-check",
            Subcommand::McRmse => "mc-rmse",
        }
    }
}

pub const CRB_SWEEP_HEADER: &[&str] = &["delta_omega", "norm_sep", "crb_fc_db", "crb_pc_db", "singular_flag"];
pub const TURNING_POINT_HEADER: &[&str] = &[
    "snr_db",
    "n_sources",
    "mode",
    "fitted_declining_slope",
    "slope_stderr",
    "plateau_flatness",
    "plateau_level_db",
    "detected_turning_point",
    "analytic_omega",
    "ratio",
    "clamped",
];
pub const QSTATS_HEADER: &[&str] = &[
    "delta_omega",
    "delta_omega_over_Omega",
    "re_q0",
    "im_q0",
    "abs_q0",
    "abs_q1",
    "abs_q2",
    "expected_abs_q0",
];
pub const QSTATS_SUBARRAY_HEADER: &[&str] = &["delta_omega_over_Omega", "subarray", "re_q0k", "im_q0k", "abs_q0k"];
pub const APPROX_CHECK_HEADER: &[&str] = &["delta_omega_over_Omega", "exact_mgmt11", "approx_mgmt11", "rel_error"];
pub const UP_CHECK_HEADER: &[&str] = &["s_tilde", "p", "max_abs_gradient", "tail_mu", "tail_gradient", "pass"];
pub const MC_RMSE_HEADER: &[&str] = &[
    "delta_omega_over_Omega",
    "rmse_db",
    "prob_resolve",
    "n_capped",
    "flagged",
    "estimator",
    "mode",
];

/// Largest accepted `|u_p'|` and the tail tolerance for `up-check`.
const UP_GRADIENT_LIMIT: f64 = 1.0;
const UP_TAIL_LIMIT: f64 = 1e-9;

fn db(x: Option<f64>) -> Option<f64> {
    x.map(|v| 10.0 * v.log10())
}

/// Seed recorded in the manifest for this subcommand.
pub fn effective_seed(cmd: Subcommand, cfg: &ExperimentConfig, ov: &Overrides) -> u64 {
    ov.seed.unwrap_or(match (cmd, &cfg.mc) {
        (Subcommand::McRmse, Some(mc)) => mc.seed,
        _ => cfg.scenario.seed,
    })
}

fn scenario_for(cfg: &ExperimentConfig, ov: &Overrides, n_sources: usize, noise: f64) -> SweepScenario {
    let mut s = cfg.scenario.sweep_scenario(n_sources, noise);
    if let Some(seed) = ov.seed {
        s.seed = seed;
    }
    s
}

pub fn run(cmd: Subcommand, cfg: &ExperimentConfig, ov: &Overrides) -> Result<Vec<Table>> {
    match cmd {
        Subcommand::CrbSweep => crb_sweep(cfg, ov),
        Subcommand::TurningPoint => turning_point(cfg, ov),
        Subcommand::Qstats => qstats_cmd(cfg),
        Subcommand::ApproxCheck => approx_check(cfg, ov),
        Subcommand::UpCheck => Ok(vec![up_check(&cfg.up_check.clone().unwrap_or_default())?]),
        Subcommand::McRmse => mc_rmse(cfg, ov),
    }
}

fn crb_sweep(cfg: &ExperimentConfig, ov: &Overrides) -> Result<Vec<Table>> {
    let g = cfg.geometry()?;
    let sw = cfg.sweep()?;
    let mut tables = Vec::new();
    for &l in &sw.sources {
        for (label, noise) in cfg.scenario.noise_levels(ov.snr_db.as_deref()) {
            let base = scenario_for(cfg, ov, l, noise);
            let trace = sweep::crb_sweep(&g, &base, &sw.grid())?;
            let mut t = Table::new(format!("crb-sweep_L{l}_snr{label}"), CRB_SWEEP_HEADER);
            for j in 0..trace.len() {
                let (fc, pc) = (trace.fc[j], trace.pc[j]);
                let flag = u8::from(fc.is_none()) | (u8::from(pc.is_none()) << 1);
                t.push(vec![
                    num(trace.delta_omega[j]),
                    num(trace.normalized[j]),
                    opt(db(fc)),
                    opt(db(pc)),
                    flag.to_string(),
                ]);
            }
            tables.push(t);
        }
    }
    Ok(tables)
}

fn turning_point(cfg: &ExperimentConfig, ov: &Overrides) -> Result<Vec<Table>> {
    let g = cfg.geometry()?;
    let sw = cfg.sweep()?;
    let modes = sw.modes()?;
    let mut t = Table::new("turning-point", TURNING_POINT_HEADER);
    for (label, noise) in cfg.scenario.noise_levels(ov.snr_db.as_deref()) {
        for &l in &sw.sources {
            let trace = sweep::crb_sweep(&g, &scenario_for(cfg, ov, l, noise), &sw.grid())?;
            for &mode in &modes {
                let r = sweep::detect_turning_point(&trace, mode)?;
                t.push(vec![
                    label.clone(),
                    l.to_string(),
                    mode.as_str().into(),
                    num(r.fitted_declining_slope),
                    num(r.slope_stderr),
                    num(r.plateau_flatness),
                    num(10.0 * r.plateau_level),
                    num(r.detected_turning_point),
                    num(r.analytic_omega),
                    num(r.ratio),
                    r.clamped.to_string(),
                ]);
            }
        }
    }
    Ok(vec![t])
}

fn qstats_cmd(cfg: &ExperimentConfig) -> Result<Vec<Table>> {
    let g = cfg.geometry()?;
    let sw = cfg.sweep()?;
    let omega = g.rayleigh_limit();
    let grid: Vec<f64> = sw.grid().points()?.iter().map(|x| x * omega).collect();
    let tr = qstats::q_trace(&g, &grid, sw.per_subarray)?;
    let mut t = Table::new("qstats", QSTATS_HEADER);
    for j in 0..grid.len() {
        let q0 = tr.q[0][j];
        t.push(vec![
            num(tr.delta_omega[j]),
            num(tr.normalized[j]),
            num(q0.re),
            num(q0.im),
            num(q0.norm()),
            num(tr.q[1][j].norm()),
            num(tr.q[2][j].norm()),
            num(tr.expected_abs_q0[j]),
        ]);
    }
    let mut tables = vec![t];
    if sw.per_subarray {
        let mut s = Table::new("qstats-subarrays", QSTATS_SUBARRAY_HEADER);
        for (k, series) in tr.q_sub.iter().enumerate() {
            for (j, q) in series.iter().enumerate() {
                s.push(vec![
                    num(tr.normalized[j]),
                    (k + 1).to_string(),
                    num(q.re),
                    num(q.im),
                    num(q.norm()),
                ]);
            }
        }
        tables.push(s);
    }
    Ok(tables)
}

fn approx_check(cfg: &ExperimentConfig, ov: &Overrides) -> Result<Vec<Table>> {
    let g = cfg.geometry()?;
    let sw = cfg.sweep()?;
    let levels = cfg.scenario.noise_levels(ov.snr_db.as_deref());
    let base = scenario_for(cfg, ov, 2, levels[0].1);
    let cmp = plateau_approx::compare_mgmt(&g, &base, &sw.grid().points()?)?;
    let mut t = Table::new("approx-check", APPROX_CHECK_HEADER);
    for j in 0..cmp.normalized.len() {
        t.push(vec![
            num(cmp.normalized[j]),
            num(cmp.exact[j]),
            num(cmp.approx[j]),
            num(cmp.rel_error[j]),
        ]);
    }
    Ok(vec![t])
}

pub fn up_check(u: &UpCheckConfig) -> Result<Table> {
    let grid = u.mu_grid();
    let mut t = Table::new("up-check", UP_CHECK_HEADER);
    for &s in &u.s_tilde {
        for &p in &u.powers {
            let c = plateau_approx::u_p_gradient_check(s, p, &grid)?;
            let tail = plateau_approx::u_p_gradient(u.tail_mu, s, p).abs();
            let pass = c.max_abs_gradient <= UP_GRADIENT_LIMIT && tail < UP_TAIL_LIMIT;
            t.push(vec![
                num(s),
                p.to_string(),
                num(c.max_abs_gradient),
                num(u.tail_mu),
                num(tail),
                pass.to_string(),
            ]);
        }
    }
    Ok(t)
}

fn mc_rmse(cfg: &ExperimentConfig, ov: &Overrides) -> Result<Vec<Table>> {
    let g = cfg.geometry()?;
    let mc = cfg.mc()?;
    let levels = cfg.scenario.noise_levels(ov.snr_db.as_deref());
    if levels.len() != 1 {
        return Err(CliError::Invalid {
            field: "scenario.snr_db".into(),
            reason: "mc-rmse takes a single SNR level".into(),
        });
    }
    let template = scenario_for(cfg, ov, mc.sources, levels[0].1);
    let window = if mc.window_half_width == 0.0 {
        SearchWindow::Visible { points: mc.grid_points }
    } else {
        SearchWindow::AroundSources {
            half_width: mc.window_half_width,
            points: mc.grid_points,
        }
    };
    let mut t = Table::new("mc-rmse", MC_RMSE_HEADER);
    for est in mc.estimators()? {
        let opts = McOptions {
            trials: mc.trials,
            seed: ov.seed.unwrap_or(mc.seed),
            threshold_db: Some(mc.threshold_db(est)),
            window,
        };
        let r = montecarlo::run(&g, &template, est, &mc.separations, &opts)?;
        let rmse_db = r.rmse_db();
        for (p, e) in r.points.iter().zip(rmse_db) {
            t.push(vec![
                num(p.normalized),
                num(e),
                num(p.prob_resolve),
                p.n_capped.to_string(),
                p.flagged.to_string(),
                est.as_str().into(),
                est.mode().as_str().into(),
            ]);
        }
    }
    Ok(vec![t])
}

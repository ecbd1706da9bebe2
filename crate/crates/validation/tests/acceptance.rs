//! Acceptance suite. Prints one PASS/FAIL line per criterion, then one line
//! per experiment-level invariant, and exits non-zero if anything failed.

use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use dfcrb::montecarlo::{self, Estimator, McOptions, McResult};
use dfcrb::plateau_approx;
use dfcrb::qstats;
use dfcrb::signal::{Amplitudes, SourceScenario};
use dfcrb::sweep::{self, CrbTrace, GridSpec, SweepScenario};
use dfcrb::{crb, ArrayGeometry, CalibrationMode, C64};
use dfcrb_validation::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MODES: [CalibrationMode; 2] = [CalibrationMode::Fully, CalibrationMode::Partly];
const SOURCE_COUNTS: [usize; 3] = [2, 3, 4];

type Check = std::result::Result<Vec<String>, String>;

struct Verdict {
    pass: bool,
    notes: Vec<String>,
}

fn verdict(pass: bool, notes: Vec<String>) -> Check {
    if pass {
        Ok(notes)
    } else {
        Err(notes.join("; "))
    }
}

fn run(label: &str, title: &str, f: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f));
    let elapsed = start.elapsed();
    let v = match result {
        Ok(Ok(notes)) => Verdict { pass: true, notes },
        Ok(Err(why)) => Verdict {
            pass: false,
            notes: vec![why],
        },
        Err(_) => Verdict {
            pass: false,
            notes: vec!["panicked".into()],
        },
    };
    println!(
        "{} {label:<4} {title} [{:.1}s] {}",
        if v.pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        v.notes.join("; ")
    );
    v.pass
}

fn err(e: dfcrb::Error) -> String {
    e.to_string()
}

struct ReferenceSweeps {
    traces: Vec<CrbTrace>,
    elapsed: Duration,
}

fn reference_sweeps() -> &'static ReferenceSweeps {
    static CELL: OnceLock<ReferenceSweeps> = OnceLock::new();
    CELL.get_or_init(|| {
        let start = Instant::now();
        let g = reference_geometry();
        let traces = SOURCE_COUNTS
            .iter()
            .map(|&l| {
                sweep::crb_sweep(&g, &SweepScenario::standard(theta_min(), l, 0.01), &GridSpec::default())
                    .expect("reference sweep")
            })
            .collect();
        ReferenceSweeps {
            traces,
            elapsed: start.elapsed(),
        }
    })
}

fn declining_slope() -> Check {
    let sweeps = reference_sweeps();
    let mut pass = sweeps.elapsed < Duration::from_secs(60);
    let mut notes = vec![format!("sweeps took {:.1}s", sweeps.elapsed.as_secs_f64())];
    for (trace, &l) in sweeps.traces.iter().zip(&SOURCE_COUNTS) {
        let target = -2.0 * (l as f64 - 1.0);
        let tol = if l == 4 { 0.15 } else { 0.10 };
        for mode in MODES {
            let fit = sweep::fit_declining_slope(trace, mode, 0.01, 0.1).map_err(err)?;
            let ok = (fit.slope - target).abs() <= tol * target.abs();
            pass &= ok;
            notes.push(format!("L={l} {mode} slope {:.3} (target {target})", fit.slope));
        }
    }
    verdict(pass, notes)
}

fn plateau() -> Check {
    let mut pass = true;
    let mut notes = Vec::new();
    for (trace, &l) in reference_sweeps().traces.iter().zip(&SOURCE_COUNTS) {
        for mode in MODES {
            let flat = sweep::plateau_flatness(trace, mode, 1.5, 10.0).map_err(err)?;
            let steep = sweep::mean_abs_slope(trace, mode, 0.01, 0.1).map_err(err)?;
            let contrast = steep / flat;
            pass &= flat < 0.5 && steep >= 2.0 && contrast >= 4.0;
            notes.push(format!(
                "L={l} {mode} flatness {flat:.2} declining |slope| {steep:.2} contrast {contrast:.2}"
            ));
        }
    }
    verdict(pass, notes)
}

fn turning_point() -> Check {
    let mut pass = true;
    let mut notes = Vec::new();
    for (trace, &l) in reference_sweeps().traces.iter().zip(&SOURCE_COUNTS) {
        let fc = sweep::detect_turning_point(trace, CalibrationMode::Fully).map_err(err)?;
        let pc = sweep::detect_turning_point(trace, CalibrationMode::Partly).map_err(err)?;
        let agree = (fc.ratio / pc.ratio).max(pc.ratio / fc.ratio);
        let ok = (0.5..=2.0).contains(&fc.ratio) && (0.5..=2.0).contains(&pc.ratio) && agree <= 1.5;
        pass &= ok;
        notes.push(format!(
            "L={l} fully {:.3} partly {:.3} factor {agree:.3}",
            fc.ratio, pc.ratio
        ));
    }
    verdict(pass, notes)
}

fn snr_insensitivity() -> Check {
    let g = reference_geometry();
    let levels = [10.0, 20.0, 30.0];
    let traces: Vec<CrbTrace> = levels
        .iter()
        .map(|&snr| {
            let base = SweepScenario::standard(theta_min(), 3, dfcrb::signal::noise_power_from_snr_db(snr));
            sweep::crb_sweep(&g, &base, &GridSpec::default())
        })
        .collect::<dfcrb::Result<_>>()
        .map_err(err)?;
    let mut pass = true;
    let mut notes = Vec::new();
    for mode in MODES {
        let ratios: Vec<f64> = traces
            .iter()
            .map(|t| sweep::detect_turning_point(t, mode).map(|r| r.ratio))
            .collect::<dfcrb::Result<_>>()
            .map_err(err)?;
        let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let spread = hi / lo - 1.0;
        // log10(CRB / sigma^2) must coincide across noise levels
        let s2_ref = dfcrb::signal::noise_power_from_snr_db(levels[1]);
        let mut deviation: f64 = 0.0;
        for (t, &snr) in traces.iter().zip(&levels) {
            let s2 = dfcrb::signal::noise_power_from_snr_db(snr);
            for (a, b) in t.values(mode).iter().zip(traces[1].values(mode)) {
                if let (Some(a), Some(b)) = (a, b) {
                    deviation = deviation.max(((a / s2).log10() - (b / s2_ref).log10()).abs());
                }
            }
        }
        pass &= spread <= 0.05 && deviation < 1e-8;
        notes.push(format!(
            "{mode} ratios {:.4}/{:.4}/{:.4} spread {:.2e} log deviation {deviation:.1e}",
            ratios[0], ratios[1], ratios[2], spread
        ));
    }
    verdict(pass, notes)
}

fn psd_ordering() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = f64::INFINITY;
    for _ in 0..200 {
        let g = random_small_geometry(&mut rng, 20);
        let sc = random_scenario(&mut rng, &g);
        let (fc, pc) = crb::crb_both(&g, &sc).map_err(err)?;
        let d = &pc.matrix - &fc.matrix;
        let d = (&d + d.transpose()) * 0.5;
        let min = d.symmetric_eigen().eigenvalues.min();
        worst = worst.min(min);
    }
    verdict(worst >= -1e-10, vec![format!("smallest eigenvalue {worst:.3e} over 200 scenarios")])
}

fn hoeffding_pin() -> Check {
    let b = qstats::hoeffding_bound_q0(0.25, 2.0 * PI, 1.0, 200).map_err(err)?;
    let freq = qstats::empirical_exceedance(b.threshold, 2.0 * PI, 1.0, 200, 100_000, 6);
    let pass = (b.probability - 0.00772).abs() <= 1e-5
        && (b.threshold - 0.3536).abs() <= 1e-4
        && freq <= b.probability;
    verdict(
        pass,
        vec![format!(
            "threshold {:.6} bound {:.6} empirical {freq:.2e}",
            b.threshold, b.probability
        )],
    )
}

fn q_expectation() -> Check {
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let x = 0.05 + 4.95 * i as f64 / 49.0;
        let dw = 2.0 * PI * x;
        let empirical = qstats::empirical_mean_q0(dw, 1.0, 100, 10_000, 70 + i as u64);
        worst = worst.max((empirical - qstats::expected_q0_magnitude(dw, 1.0)).abs());
    }
    verdict(worst < 0.02, vec![format!("max deviation {worst:.4} over 50 separations")])
}

fn f_identity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let g = if i % 2 == 0 {
            reference_geometry()
        } else {
            ArrayGeometry::random_distributed(10, 10, 0.5, 455.0, 1.0, &mut rng).map_err(err)?
        };
        let omega = g.rayleigh_limit();
        let x = 10f64.powf(rng.random_range(-1.0..1.0));
        let w0 = rng.random_range(0.01..1.0);
        let s: Vec<C64> = (0..2)
            .map(|_| C64::from_polar(rng.random_range(0.5..1.5), rng.random_range(0.0..2.0 * PI)))
            .collect();
        let sc = SourceScenario::new(vec![w0, w0 + x * omega], Amplitudes::Fixed(s), 0.01, 1)
            .map_err(err)?;
        let exact = crb::fim_matrices(&g, &sc).map_err(err)?.f;
        let via = plateau_approx::fim_f_via_q(&g, &sc).map_err(err)?;
        worst = worst.max(rel_diff(&via, &exact));
    }
    verdict(worst < 1e-8, vec![format!("max relative deviation {worst:.2e} over 50 scenarios")])
}

fn up_gradient() -> Check {
    let grid: Vec<f64> = (0..=4000).map(|i| 10f64.powf(-2.0 + 4.0 * i as f64 / 4000.0)).collect();
    let mut max: f64 = 0.0;
    let mut tail: f64 = 0.0;
    for s in [0.5, 1.0, 2.0] {
        for p in 0..4 {
            let c = plateau_approx::u_p_gradient_check(s, p, &grid).map_err(err)?;
            max = max.max(c.max_abs_gradient);
            tail = tail.max(plateau_approx::u_p_gradient(1e6, s, p).abs());
        }
    }
    verdict(max <= 1.0 && tail < 1e-9, vec![format!("max |u'| {max:.4} tail {tail:.2e}")])
}

fn approximation_shape() -> Check {
    let g = reference_geometry();
    let base = SweepScenario::standard(theta_min(), 2, 0.01);
    let grid = GridSpec::default().points().map_err(err)?;
    let cmp = plateau_approx::compare_mgmt(&g, &base, &grid).map_err(err)?;
    let hi = cmp.median_error(1.0, f64::INFINITY).ok_or("no points above Omega")?;
    let lo = cmp.median_error(0.0, 0.3).ok_or("no points below 0.3 Omega")?;
    verdict(
        hi < 0.3 && lo >= 3.0 * hi,
        vec![format!("median error {hi:.3} above Omega, {lo:.3e} below 0.3 Omega")],
    )
}

struct MonteCarloRuns {
    music: McResult,
    rare: McResult,
    elapsed: Duration,
    template: SweepScenario,
}

const MC_GRID: [f64; 7] = [0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0];

fn monte_carlo() -> std::result::Result<&'static MonteCarloRuns, String> {
    static CELL: OnceLock<std::result::Result<MonteCarloRuns, String>> = OnceLock::new();
    CELL.get_or_init(|| {
        let start = Instant::now();
        let g = reference_geometry();
        let template = SweepScenario {
            amplitudes: Amplitudes::Gaussian,
            snapshots: 50,
            ..SweepScenario::standard(theta_min(), 2, 0.01)
        };
        let opts = McOptions {
            trials: montecarlo::DEFAULT_TRIALS,
            seed: 11,
            ..McOptions::default()
        };
        let music = montecarlo::run(&g, &template, Estimator::Music, &MC_GRID, &opts).map_err(err)?;
        let rare =
            montecarlo::run(&g, &template, Estimator::SpectralRare, &MC_GRID, &opts).map_err(err)?;
        Ok(MonteCarloRuns {
            music,
            rare,
            elapsed: start.elapsed(),
            template,
        })
    })
    .as_ref()
    .map_err(|e| e.clone())
}

fn monte_carlo_knee() -> Check {
    let runs = monte_carlo()?;
    let mut pass = runs.elapsed < Duration::from_secs(600);
    let mut notes = vec![format!("runs took {:.1}s", runs.elapsed.as_secs_f64())];
    for r in [&runs.music, &runs.rare] {
        let knee = r.rmse_at(0.2).unwrap() / r.rmse_at(2.0).unwrap();
        let low = r
            .points
            .iter()
            .filter(|p| p.normalized < 0.2)
            .map(|p| p.prob_resolve)
            .fold(0.0, f64::max);
        let high = r
            .points
            .iter()
            .filter(|p| p.normalized >= 2.0)
            .map(|p| p.prob_resolve)
            .fold(1.0, f64::min);
        pass &= knee > 10.0 && low < 0.2 && high > 0.8;
        notes.push(format!(
            "{} RMSE ratio {knee:.1}, P below 0.2 Omega at most {low:.3}, P from 2 Omega at least {high:.3}",
            r.estimator
        ));
    }
    verdict(pass, notes)
}

fn oracle_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let g = random_small_geometry(&mut rng, 20);
        let sc = random_scenario(&mut rng, &g);
        let s = sc.amplitude_matrix().map_err(err)?;
        let fd = finite_difference_fim(&g, sc.frequencies(), &s);
        let l = sc.n_sources();
        let f = fd.view((0, 0), (l, l)).into_owned();
        let exact = crb::fim_matrices(&g, &sc).map_err(err)?.f;
        worst = worst.max(rel_diff(&exact, &f));
    }
    verdict(worst < 1e-3, vec![format!("max relative deviation {worst:.2e} over 20 scenarios")])
}

fn flatness_contrast() -> Check {
    let mut pass = true;
    let mut notes = Vec::new();
    for (trace, &l) in reference_sweeps().traces.iter().zip(&SOURCE_COUNTS) {
        for mode in MODES {
            let flat = sweep::plateau_flatness(trace, mode, 1.5, 10.0).map_err(err)?;
            let steep = sweep::mean_abs_slope(trace, mode, 0.01, 0.1).map_err(err)?;
            pass &= flat < steep / 4.0;
            notes.push(format!("L={l} {mode} {flat:.2} vs {:.2}", steep / 4.0));
        }
    }
    verdict(pass, notes)
}

fn randomized_turning_points() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let base = SweepScenario::standard(theta_min(), 2, 0.01);
    let draws = 30;
    let mut hits = [0usize; 2];
    for _ in 0..draws {
        let g = ArrayGeometry::random_distributed(10, 10, 0.5, 455.0, 1.0, &mut rng).map_err(err)?;
        let trace = sweep::crb_sweep(&g, &base, &GridSpec::default()).map_err(err)?;
        for (i, mode) in MODES.into_iter().enumerate() {
            let r = sweep::detect_turning_point(&trace, mode).map_err(err)?;
            if (0.5..=2.0).contains(&r.ratio) {
                hits[i] += 1;
            }
        }
    }
    let need = (0.9 * draws as f64).ceil() as usize;
    verdict(
        hits.iter().all(|&h| h >= need),
        vec![format!("in range: fully {}/{draws}, partly {}/{draws}", hits[0], hits[1])],
    )
}

fn aperture_doubling() -> Check {
    let base = SweepScenario::standard(theta_min(), 2, 0.01);
    let mut pass = true;
    let mut notes = Vec::new();
    let narrow = ArrayGeometry::uniform_distributed(10, 10, 0.5, 50.0, 1.0).map_err(err)?;
    let wide = ArrayGeometry::uniform_distributed(10, 10, 0.5, 100.0, 1.0).map_err(err)?;
    let tn = sweep::crb_sweep(&narrow, &base, &GridSpec::default()).map_err(err)?;
    let tw = sweep::crb_sweep(&wide, &base, &GridSpec::default()).map_err(err)?;
    for mode in MODES {
        let a = sweep::detect_turning_point(&tn, mode).map_err(err)?.detected_turning_point;
        let b = sweep::detect_turning_point(&tw, mode).map_err(err)?.detected_turning_point;
        let halving = a / b / 2.0;
        pass &= (halving - 1.0).abs() <= 0.3;
        notes.push(format!("{mode} turning point shrinks by {:.3}", a / b));
    }
    verdict(pass, notes)
}

fn median_abs_q0(subarrays: usize, per_subarray: usize, seed: u64) -> std::result::Result<f64, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::new();
    for _ in 0..40 {
        let g = ArrayGeometry::random_distributed(subarrays, per_subarray, 0.5, 455.0, 1.0, &mut rng)
            .map_err(err)?;
        for i in 0..20 {
            let x = 10f64.powf(i as f64 / 19.0);
            values.push(qstats::q_global(&g, x * g.rayleigh_limit(), 0).map_err(err)?.norm());
        }
    }
    values.sort_by(f64::total_cmp);
    Ok(values[values.len() / 2])
}

fn q_vanishes_beyond_rayleigh() -> Check {
    // one element per subarray puts all 100 centroids independently
    // uniform; ten-element subarrays are reported alongside
    let single = median_abs_q0(100, 1, 14)?;
    let grouped = median_abs_q0(10, 10, 14)?;
    verdict(
        single < 0.2,
        vec![format!("median |Q0| {single:.4} (100 x 1), {grouped:.4} (10 x 10)")],
    )
}

fn monte_carlo_shape() -> Check {
    let runs = monte_carlo()?;
    let mut pass = true;
    let mut notes = Vec::new();
    let g = reference_geometry();
    for r in [&runs.music, &runs.rare] {
        let before = r.log_slope(0.0, 1.0).ok_or("too few points before Omega")?;
        let after = r.log_slope(2.0, f64::INFINITY).ok_or("too few points after 2 Omega")?;
        let band = 3.0 * r.probability_band();
        let monotone = r
            .points
            .windows(2)
            .all(|w| w[1].prob_resolve >= w[0].prob_resolve - band);
        // average bound over amplitude draws at 2 Omega
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let mut avg = 0.0;
        let n = 20;
        for _ in 0..n {
            let sc = runs.template.template_at(&g, 2.0 * g.rayleigh_limit()).map_err(err)?;
            let realized = sc.realize(&mut rng).map_err(err)?;
            avg += crb::crb(&g, &realized, r.mode()).map_err(err)?.average / n as f64;
        }
        let rmse = r.rmse_at(2.0).unwrap();
        let efficient = rmse >= 0.9 * avg.sqrt();
        pass &= before.abs() > 4.0 * after.abs() && monotone && efficient;
        notes.push(format!(
            "{} slopes {before:.2}/{after:.2}, monotone {monotone}, RMSE {rmse:.2e} vs sqrt CRB {:.2e}",
            r.estimator,
            avg.sqrt()
        ));
    }
    verdict(pass, notes)
}

type Entry = (&'static str, &'static str, fn() -> Check);

fn main() {
    println!("criteria");
    let criteria: [Entry; 12] = [
        ("C1", "declining slope", declining_slope),
        ("C2", "plateau", plateau),
        ("C3", "turning point", turning_point),
        ("C4", "SNR insensitivity", snr_insensitivity),
        ("C5", "PSD ordering", psd_ordering),
        ("C6", "Hoeffding pin", hoeffding_pin),
        ("C7", "Q expectation", q_expectation),
        ("C8", "exact F identity", f_identity),
        ("C9", "u_p gradient", up_gradient),
        ("C10", "approximation shape", approximation_shape),
        ("C11", "Monte-Carlo knee", monte_carlo_knee),
        ("C12", "oracle equivalence", oracle_equivalence),
    ];
    let mut failed = Vec::new();
    for (label, title, f) in criteria {
        if !run(label, title, f) {
            failed.push(label);
        }
    }
    println!("invariants");
    let invariants: [Entry; 5] = [
        ("I1", "flatness below a quarter of the declining slope", flatness_contrast),
        ("I2", "randomized turning points in range", randomized_turning_points),
        ("I3", "doubling the interval halves the turning point", aperture_doubling),
        ("I4", "median |Q0| beyond the Rayleigh cell", q_vanishes_beyond_rayleigh),
        ("I5", "Monte-Carlo knee, monotonicity and efficiency", monte_carlo_shape),
    ];
    for (label, title, f) in invariants {
        if !run(label, title, f) {
            failed.push(label);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all checks passed");
    } else {
        println!("acceptance: {} failed: {}", failed.len(), failed.join(", "));
        std::process::exit(1);
    }
}

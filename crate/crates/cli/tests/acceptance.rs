//! Acceptance criteria, one line of output each. Reference values come from
//! formulas coded here independently of the library.
//!
//! Run with `cargo test -p ccqi-cli --test acceptance`.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use ccqi_core::fringes::{self, FringeGeometry, FringeProfile};
use ccqi_core::sectors::{self, DensityMatrix, SectorObservable, SectorSpace, StateVector};
use ccqi_core::stats::{self, CategoryLayout, Counts, Decision, PlanMethod, TestSettings};
use ccqi_core::{
    predict_decay, predict_excitation, predict_photon, simulate_decay, simulate_excitation,
    simulate_photon, DecayParams, ExcitationParams, ExperimentParams, Hypothesis, PhotonParams,
    SimConfig,
};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const POINTS: usize = 1000;

fn rng(tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x5eed_0000 + tag)
}

/// Relative error, with exact zeros compared on the scale of `n0`.
fn rel_err(got: f64, want: f64, n0: f64) -> f64 {
    if want == 0.0 {
        got.abs() / n0.max(1.0)
    } else {
        ((got - want) / want).abs()
    }
}

fn max_err(got: &[f64], want: &[f64], n0: f64) -> f64 {
    got.iter()
        .zip(want)
        .map(|(&g, &w)| rel_err(g, w, n0))
        .fold(0.0, f64::max)
}

fn check_tol(label: &str, err: f64, tol: f64) -> Result<(), String> {
    if err < tol {
        Ok(())
    } else {
        Err(format!("{label}: max relative error {err:e} >= {tol:e}"))
    }
}

fn random_n0(r: &mut ChaCha8Rng) -> u64 {
    // Log-uniform over 1 .. 1e9.
    10f64.powf(r.random_range(0.0..9.0)).round() as u64
}

fn random_excitation(r: &mut ChaCha8Rng, n0: u64) -> ExcitationParams {
    let lambda = r.random_range(0.01..10.0);
    let t = r.random_range(0.0..5.0) / lambda;
    ExcitationParams::new(n0, r.random_range(0.0..=1.0), lambda, t).unwrap()
}

fn random_decay(r: &mut ChaCha8Rng, n0: u64) -> DecayParams {
    let lambda = r.random_range(0.01..10.0);
    let mut t = || r.random_range(0.0..2.0) / lambda;
    let (t1, t2, t3) = (t(), t(), t());
    let lambda_prime = r.random_range(0.0..10.0);
    DecayParams::new(n0, lambda, t1, t2, t3)
        .unwrap()
        .with_lambda_prime(lambda_prime)
        .unwrap()
}

fn random_photon(r: &mut ChaCha8Rng, n0: u64) -> PhotonParams {
    PhotonParams::new(n0, r.random_range(0.0..=1.0), r.random_range(0.0..=1.0)).unwrap()
}

// Count tables written out term by term.

fn excitation_oracle(n: f64, eps: f64, lambda: f64, t: f64, h: Hypothesis) -> [f64; 4] {
    let e = f64::exp(-lambda * t);
    match h {
        Hypothesis::Pos => [(1.0 - e * eps) * n, e * eps * n, 0.0, 0.0],
        _ => [
            (1.0 - eps) * n + (1.0 - e) * eps * n / 2.0,
            e * eps * n / 2.0,
            (1.0 - e) * eps * n / 2.0,
            e * eps * n / 2.0,
        ],
    }
}

fn decay_oracle(p: &DecayParams, h: Hypothesis) -> [f64; 4] {
    let n = p.n0() as f64;
    let (l, t1, t2, t3) = (p.lambda(), p.t1(), p.t2(), p.t3());
    let t = t1 + t2 + t3;
    match h {
        Hypothesis::Pos => [(1.0 - f64::exp(-l * t)) * n, f64::exp(-l * t) * n, 0.0, 0.0],
        Hypothesis::Ccqi => [
            (1.0 - f64::exp(-l * t) - f64::exp(-l * t1) / 2.0 + f64::exp(-l * (t1 + t2)) / 2.0) * n,
            f64::exp(-l * t) * n,
            f64::exp(-l * t1) * (1.0 - f64::exp(-l * t2)) * n / 2.0,
            0.0,
        ],
        Hypothesis::ModifiedRate => {
            let s = f64::exp(-l * (t1 + t3) - p.lambda_prime() * t2);
            [(1.0 - s) * n, s * n, 0.0, 0.0]
        }
    }
}

fn photon_oracle(n: f64, d: f64, u: f64, h: Hypothesis) -> [f64; 3] {
    match h {
        Hypothesis::Pos => [
            (1.0 + 3.0 * u * d) * n / 4.0,
            (1.0 - u * d) * n / 4.0,
            (1.0 - u * d) * n / 2.0,
        ],
        _ => [
            (1.0 + u * d) * n / 4.0,
            (1.0 + u * d) * n / 4.0,
            (1.0 - u * d) * n / 2.0,
        ],
    }
}

fn excitation_tables() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1);
    let mut worst = 0.0f64;
    for _ in 0..POINTS {
        let n0 = random_n0(&mut r);
        let p = random_excitation(&mut r, n0);
        for h in [Hypothesis::Pos, Hypothesis::Ccqi] {
            let got = predict_excitation(&p, h)
                .map_err(|e| e.to_string())?
                .to_array();
            let want = excitation_oracle(p.n0() as f64, p.epsilon(), p.lambda(), p.t(), h);
            worst = worst.max(max_err(&got, &want, p.n0() as f64));
        }
    }
    let elapsed = start.elapsed();
    check_tol("excitation", worst, 1e-12)?;
    if elapsed >= Duration::from_secs(1) {
        return Err(format!("runtime {elapsed:?} >= 1 s"));
    }
    Ok(format!(
        "8 expressions x {POINTS} points, max rel err {worst:.1e}, {elapsed:?}"
    ))
}

fn decay_tables() -> Outcome {
    let mut r = rng(2);
    let mut worst = 0.0f64;
    let mut reduction = 0.0f64;
    for _ in 0..POINTS {
        let n0 = random_n0(&mut r);
        let p = random_decay(&mut r, n0);
        for h in [Hypothesis::Pos, Hypothesis::Ccqi, Hypothesis::ModifiedRate] {
            let got = predict_decay(&p, h).map_err(|e| e.to_string())?.to_array();
            worst = worst.max(max_err(&got, &decay_oracle(&p, h), p.n0() as f64));
        }
        // Setting the inside rate back to the free rate recovers superposition.
        let same = p.with_lambda_prime(p.lambda()).unwrap();
        let modified = predict_decay(&same, Hypothesis::ModifiedRate)
            .unwrap()
            .to_array();
        let pos = predict_decay(&same, Hypothesis::Pos).unwrap().to_array();
        reduction = reduction.max(max_err(&modified, &pos, p.n0() as f64));
    }
    check_tol("decay", worst, 1e-12)?;
    check_tol("modified rate at lambda' = lambda", reduction, 1e-12)?;
    Ok(format!(
        "3 hypotheses x {POINTS} points, max rel err {worst:.1e}; lambda'=lambda vs PoS {reduction:.1e}"
    ))
}

fn photon_tables() -> Outcome {
    let mut r = rng(3);
    let mut worst = 0.0f64;
    let mut gap_err = 0.0f64;
    for _ in 0..POINTS {
        let n0 = random_n0(&mut r);
        let p = random_photon(&mut r, n0);
        let n = p.n0() as f64;
        let mut tables = Vec::new();
        for h in [Hypothesis::Pos, Hypothesis::Ccqi] {
            let got = predict_photon(&p, h).map_err(|e| e.to_string())?.to_array();
            worst = worst.max(max_err(&got, &photon_oracle(n, p.d(), p.u(), h), n));
            tables.push(got);
        }
        // A difference of two counts is only resolved to the scale of the counts.
        let gap = p.u() * p.d() * n / 2.0;
        let diffs = [tables[0][0] - tables[1][0], tables[1][1] - tables[0][1]];
        for diff in diffs {
            gap_err = gap_err.max((diff - gap).abs() / n);
        }
    }
    check_tol("photon", worst, 1e-12)?;
    check_tol("counter gap", gap_err, 1e-12)?;
    Ok(format!(
        "6 expressions x {POINTS} points, max rel err {worst:.1e}; gap vs ud N0/2 {gap_err:.1e} of N0"
    ))
}

/// Largest |observed - expected| in units of the binomial standard deviation.
/// A category with zero variance must match exactly.
fn max_sigma(counts: &[u64], predicted: &[f64], n0: u64) -> Result<f64, String> {
    let n = n0 as f64;
    let mut worst = 0.0f64;
    for (&c, &e) in counts.iter().zip(predicted) {
        let p = (e / n).clamp(0.0, 1.0);
        let sd = (n * p * (1.0 - p)).sqrt();
        let dev = (c as f64 - e).abs();
        if sd < 1e-9 {
            if dev > 1e-6 {
                return Err(format!(
                    "{c} counts where the prediction {e} is deterministic"
                ));
            }
        } else {
            worst = worst.max(dev / sd);
        }
    }
    Ok(worst)
}

fn monte_carlo() -> Outcome {
    const N0: u64 = 1_000_000;
    const SETS: usize = 20;
    let start = Instant::now();
    let mut r = rng(4);
    let mut worst = 0.0f64;
    let mut runs = 0;
    // Single worker: the time budget is for one core.
    let sim = |seed: u64| SimConfig::new(seed).with_workers(1);
    for set in 0..SETS as u64 {
        let e = random_excitation(&mut r, N0);
        let d = random_decay(&mut r, N0);
        let p = random_photon(&mut r, N0);
        for h in [Hypothesis::Pos, Hypothesis::Ccqi] {
            let counts = simulate_excitation(&e, h, &sim(set)).unwrap().to_array();
            let pred = predict_excitation(&e, h).unwrap().to_array();
            worst = worst
                .max(max_sigma(&counts, &pred, N0).map_err(|m| format!("excitation {h:?}: {m}"))?);
            let counts = simulate_photon(&p, h, &sim(set)).unwrap().to_array();
            let pred = predict_photon(&p, h).unwrap().to_array();
            worst =
                worst.max(max_sigma(&counts, &pred, N0).map_err(|m| format!("photon {h:?}: {m}"))?);
            runs += 2;
        }
        for h in [Hypothesis::Pos, Hypothesis::Ccqi, Hypothesis::ModifiedRate] {
            let counts = simulate_decay(&d, h, &sim(set)).unwrap().to_array();
            let pred = predict_decay(&d, h).unwrap().to_array();
            worst =
                worst.max(max_sigma(&counts, &pred, N0).map_err(|m| format!("decay {h:?}: {m}"))?);
            runs += 1;
        }
    }
    let elapsed = start.elapsed();
    if worst > 5.0 {
        return Err(format!("deviation {worst:.2} sigma exceeds 5"));
    }
    if elapsed >= Duration::from_secs(60) {
        return Err(format!("runtime {elapsed:?} >= 60 s"));
    }
    Ok(format!(
        "{runs} runs of 1e6, max deviation {worst:.2} sigma, {elapsed:.1?} on one worker"
    ))
}

fn conservation() -> Outcome {
    const INPUTS: usize = 10_000;
    let mut r = rng(5);
    let mut worst = 0.0f64;
    for i in 0..INPUTS {
        let n0 = if i % 10 == 0 {
            random_n0(&mut r)
        } else {
            r.random_range(0..2_000)
        };
        let sim = SimConfig::new(i as u64);
        let n = n0 as f64;
        let mut check =
            |predicted: f64, simulated: Option<u64>, what: &str| -> Result<(), String> {
                let err = (predicted - n).abs() / n.max(1.0);
                worst = worst.max(err);
                if err >= 1e-9 {
                    return Err(format!("{what}: prediction sums to {predicted}, n0 = {n0}"));
                }
                if let Some(s) = simulated {
                    if s != n0 {
                        return Err(format!("{what}: tallies sum to {s}, n0 = {n0}"));
                    }
                }
                Ok(())
            };
        // Large populations are checked on the predictors only.
        let small = n0 < 10_000;
        let e = random_excitation(&mut r, n0);
        let d = random_decay(&mut r, n0);
        let p = random_photon(&mut r, n0);
        for h in [Hypothesis::Pos, Hypothesis::Ccqi] {
            let s = small.then(|| simulate_excitation(&e, h, &sim).unwrap().total());
            check(predict_excitation(&e, h).unwrap().total(), s, "excitation")?;
            let s = small.then(|| simulate_photon(&p, h, &sim).unwrap().total());
            check(predict_photon(&p, h).unwrap().total(), s, "photon")?;
        }
        for h in [Hypothesis::Pos, Hypothesis::Ccqi, Hypothesis::ModifiedRate] {
            let s = small.then(|| simulate_decay(&d, h, &sim).unwrap().total());
            check(predict_decay(&d, h).unwrap().total(), s, "decay")?;
        }
    }
    Ok(format!(
        "{INPUTS} inputs x 7 hypotheses, integer tallies exact, max prediction rel err {worst:.1e}"
    ))
}

fn random_complex(r: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))
}

fn random_space(r: &mut ChaCha8Rng) -> SectorSpace {
    let total = r.random_range(2..=16usize);
    let mut dims = Vec::new();
    let mut left = total;
    while left > 0 {
        let d = r.random_range(1..=left);
        dims.push(d);
        left -= d;
    }
    if dims.len() == 1 {
        // Need at least two sectors for cross-sector checks.
        dims = vec![total - 1, 1];
    }
    SectorSpace::new(dims).unwrap()
}

/// Hermitian and block diagonal in the sector decomposition.
fn random_observable(r: &mut ChaCha8Rng, space: &SectorSpace) -> SectorObservable {
    let n = space.total_dim();
    let g = DMatrix::from_fn(n, n, |_, _| random_complex(r));
    let mut h = (&g + g.adjoint()) * Complex64::new(0.5, 0.0);
    for i in 0..n {
        for j in 0..n {
            if space.sector_of(i) != space.sector_of(j) {
                h[(i, j)] = Complex64::new(0.0, 0.0);
            }
        }
    }
    SectorObservable::new(space.clone(), h).unwrap()
}

fn random_density(r: &mut ChaCha8Rng, space: &SectorSpace) -> DensityMatrix {
    let n = space.total_dim();
    let g = DMatrix::from_fn(n, n, |_, _| random_complex(r));
    let m = &g * g.adjoint();
    let tr = m.trace();
    let mut rho = m / tr;
    // Remove rounding asymmetry.
    rho = (&rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
    DensityMatrix::new(space.clone(), rho).unwrap()
}

fn sector_state(r: &mut ChaCha8Rng, space: &SectorSpace, sector: usize) -> StateVector {
    let range = space.sector_range(sector);
    let amps = DVector::from_fn(space.total_dim(), |i, _| {
        if range.contains(&i) {
            random_complex(r)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    StateVector::normalized(space.clone(), amps).unwrap()
}

fn superselection() -> Outcome {
    const INSTANCES: usize = 1000;
    const TOL: f64 = 1e-10;
    let mut r = rng(6);
    let (mut cross, mut idem, mut trace, mut invariance) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut max_dim = 0;
    for _ in 0..INSTANCES {
        let space = random_space(&mut r);
        max_dim = max_dim.max(space.total_dim());
        let a = random_observable(&mut r, &space);
        let k = space.num_sectors();
        let i = r.random_range(0..k);
        let j = (i + r.random_range(1..k)) % k;
        let psi = sector_state(&mut r, &space, i);
        let phi = sector_state(&mut r, &space, j);
        let element = sectors::sector_matrix_element(&a, &psi, &phi).map_err(|e| e.to_string())?;
        cross = cross.max(element.norm());

        let rho = random_density(&mut r, &space);
        let once = sectors::superselect(&rho);
        let twice = sectors::superselect(&once);
        idem = idem.max((twice.matrix() - once.matrix()).camax());
        trace = trace.max((once.trace() - rho.trace()).norm());
        if sectors::purity(&once) > sectors::purity(&rho) + TOL {
            return Err(format!(
                "purity increased: {} -> {}",
                sectors::purity(&rho),
                sectors::purity(&once)
            ));
        }
        let before = rho.expectation(&a).map_err(|e| e.to_string())?;
        let after = once.expectation(&a).map_err(|e| e.to_string())?;
        invariance = invariance.max((before - after).norm());
    }
    for (what, v) in [
        ("cross-sector element", cross),
        ("idempotence", idem),
        ("trace", trace),
        ("expectation invariance", invariance),
    ] {
        if v >= TOL {
            return Err(format!("{what}: {v:e} >= {TOL:e}"));
        }
    }
    Ok(format!(
        "{INSTANCES} instances up to dim {max_dim}; max |<psi|A|phi>| {cross:.1e}, idempotence {idem:.1e}, trace {trace:.1e}, tr(A rho) {invariance:.1e}"
    ))
}

fn fringe_checks() -> Outcome {
    let mut r = rng(7);
    let mut period_err = 0.0f64;
    let mut mean_err = 0.0f64;
    let mut calib_err = 0.0f64;
    for _ in 0..50 {
        let s = r.random_range(1e-6..1e-3);
        let wavelength = r.random_range(1e-12..1e-9);
        let l = s * r.random_range(200.0..1e4);
        let period = wavelength * l / s;
        let periods = r.random_range(3..20) as f64;
        let x0 = r.random_range(-5.0..5.0) * period;
        let g = FringeGeometry::new(s, wavelength, l, x0, x0 + periods * period, 4001)
            .map_err(|e| e.to_string())?;

        let maxima = fringes::locate_maxima(&g).map_err(|e| e.to_string())?;
        if maxima.len() < 3 {
            return Err(format!("only {} maxima found", maxima.len()));
        }
        let measured = (maxima[maxima.len() - 1] - maxima[0]) / (maxima.len() - 1) as f64;
        period_err = period_err.max(rel_err(measured, period, 1.0));

        let coherent = fringes::coherent_pattern(&g).map_err(|e| e.to_string())?;
        let incoherent = fringes::incoherent_pattern(&g);
        mean_err = mean_err.max((coherent.mean_intensity() - 2.0).abs());
        mean_err = mean_err.max((incoherent.mean_intensity() - 2.0).abs());

        let calibration = FringeProfile::sum(&fringes::calibration_patterns(&g))
            .ok_or("calibration grids differ")?
            .scaled(0.5);
        for (a, b) in calibration.intensity.iter().zip(&incoherent.intensity) {
            calib_err = calib_err.max((a - b).abs());
        }
    }
    check_tol("period", period_err, 1e-9)?;
    check_tol("mean intensity", mean_err, 1e-9)?;
    check_tol("calibration sum", calib_err, 1e-12)?;
    Ok(format!(
        "50 geometries; period rel err {period_err:.1e}, |mean - 2| {mean_err:.1e}, calibration/2 vs incoherent {calib_err:.1e}"
    ))
}

fn discrimination() -> Outcome {
    let params =
        ExperimentParams::Excitation(ExcitationParams::new(1, 0.2, 1.0, 2f64.ln()).unwrap());
    let h0 = stats::build_model(&params, Hypothesis::Pos, None, None).unwrap();
    let h1 = stats::build_model(&params, Hypothesis::Ccqi, None, None).unwrap();
    let settings = TestSettings {
        power_replicates: 1_000_000,
        ..TestSettings::with_seed(8)
    };
    // The design does not depend on the level.
    let mut closed = Vec::new();
    for alpha in [1e-3, 0.05, 0.5] {
        let plan =
            stats::min_sample_size(&h0, &h1, alpha, 0.999, &settings).map_err(|e| e.to_string())?;
        if plan.method != PlanMethod::ClosedForm {
            return Err(format!("expected closed form, got {:?}", plan.method));
        }
        closed.push(plan.min_n0);
    }
    if closed.iter().any(|&n| n != 66) {
        return Err(format!("closed form gave {closed:?}, expected 66"));
    }
    let simulated = stats::min_sample_size_simulated(&h0, &h1, 0.05, 0.999, &settings)
        .map_err(|e| e.to_string())?
        .min_n0;
    if simulated.abs_diff(66) > 1 {
        return Err(format!("simulation gave {simulated}, expected 66 +/- 1"));
    }
    let counts = Counts::new(CategoryLayout::Atom, vec![65, 0, 1, 0]).unwrap();
    let report = stats::discriminate(&counts, &h0, &h1, 0.01, &TestSettings::with_seed(9))
        .map_err(|e| e.to_string())?;
    if report.p_value_h0 != 0.0 || report.decision != Decision::FavorH1 {
        return Err(format!("single b click: {report:?}"));
    }
    Ok(format!(
        "closed form 66, simulation {simulated}; one counter-b click gives p = 0, {}",
        report.decision
    ))
}

fn run_cli(config: &str, dir: &std::path::Path, name: &str) -> Result<Vec<u8>, String> {
    let cfg = dir.join(format!("{name}.ini"));
    let out = dir.join(format!("{name}.csv"));
    std::fs::write(&cfg, config).map_err(|e| e.to_string())?;
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_ccqi"))
        .arg("simulate")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .map_err(|e| e.to_string())?;
    if !status.success() {
        return Err(format!("ccqi exited with {status}"));
    }
    std::fs::read(&out).map_err(|e| e.to_string())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let experiments = [
        "kind = excitation\nhypothesis = ccqi\nepsilon = 0.3\nlambda = 1.5\nt = 0.4",
        "kind = decay\nhypothesis = modified-rate\nlambda = 1\nlambda_prime = 0.5\nt1 = 0.2\nt2 = 0.3\nt3 = 0.1",
        "kind = photon\nhypothesis = pos\nd = 0.7\nu = 0.9",
    ];
    let mut compared = 0;
    for (i, experiment) in experiments.iter().enumerate() {
        let config = |workers: usize| {
            format!(
                "[experiment]\n{experiment}\nn0 = 1000003\n\n[simulation]\nseed = 42\nchunk_size = 4096\nworkers = {workers}\n"
            )
        };
        let first = run_cli(&config(1), dir.path(), &format!("{i}-a"))?;
        let second = run_cli(&config(1), dir.path(), &format!("{i}-b"))?;
        let parallel = run_cli(&config(8), dir.path(), &format!("{i}-c"))?;
        if first != second {
            return Err(format!("experiment {i}: consecutive runs differ"));
        }
        if first != parallel {
            return Err(format!("experiment {i}: 1 and 8 workers differ"));
        }
        compared += 1;
    }
    Ok(format!(
        "{compared} simulate artifacts byte-identical across reruns and 1 vs 8 workers"
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("excitation table", excitation_tables),
        ("decay tables", decay_tables),
        ("photon table", photon_tables),
        ("Monte Carlo vs predictors", monte_carlo),
        ("conservation", conservation),
        ("superselection", superselection),
        ("fringes", fringe_checks),
        ("discrimination", discrimination),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {}. {name}: {detail}", i + 1),
            Err(reason) => {
                failed += 1;
                println!("FAIL {}. {name}: {reason}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

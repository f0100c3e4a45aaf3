//! Invariant suites shared by the property tests and the acceptance runner.
//!
//! Each suite drives proptest's runner with a fixed RNG so failures
//! reproduce, and reports the shrunk counterexample as an error string.

#![allow(dead_code)]

use chrono::{Duration, NaiveDate, NaiveDateTime};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use raildelay::cox::{
    build_risk_sets, fit_stratified_cox, partial_log_likelihood, survival_curve, CoxDataset, CoxOptions, CoxSubject,
    StepCovariates,
};
use raildelay::ctmc::{
    intensity_matrix, log_likelihood, path_transition_probability, predict_delay_rate, CtmcParams, ObservedPath,
    SegmentScheme, State, TransitionParams,
};
use raildelay::ingest::{
    derive_indicators, read_dataset_csv, read_runs_csv, read_weather_csv, section_covariates, write_dataset_csv,
    write_runs_csv, write_weather_csv, AnalysisDataset, InitialStation, RunRecord, SpotRecord, WeatherSample,
};
use raildelay::numerics::{matrix_exponential, maximize, FnObjective, SquareMatrix};
use raildelay::simulate::{simulate, simulate_states, SimConfig};
use raildelay::validation::{mae, observed_delay_rate, run_validation, walk_forward_split, FoldConfig, ValidationMode};
use raildelay::CovariateSpec;

pub type Suite = (&'static str, fn() -> Result<(), String>);

/// Every suite, in module order.
pub fn all() -> Vec<Suite> {
    vec![
        ("numerics: semigroup", semigroup),
        ("numerics: row stochasticity", stochastic_rows),
        ("numerics: maximizer idempotence", maximizer_idempotence),
        ("ingest: one section per consecutive spot pair", section_count),
        (
            "ingest: indicators invariant under time translation",
            translation_invariance,
        ),
        ("ingest: precipitation flag", precip_flag),
        ("ingest: CSV round trip", csv_round_trip),
        ("cox: null partial likelihood", null_partial_likelihood),
        ("cox: gradient against finite differences", cox_gradient),
        ("cox: covariate rescaling equivariance", cox_rescaling),
        ("cox: survival monotone and bounded", survival_monotone),
        ("cox: two-event closed form", cox_closed_form),
        ("ctmc: intensity rows", intensity_rows),
        ("ctmc: stochastic and refinement invariant", refinement_invariance),
        ("ctmc: train order relabeling", relabeling_invariance),
        ("ctmc: homogeneity reduction", homogeneity),
        ("ctmc: prediction bounded and continuous", prediction_continuity),
        ("validation: averaged MAE is the fold mean", averaged_mae),
        ("validation: MAE symmetric with triangle inequality", mae_metric),
        ("validation: nested training ranges", nested_folds),
        ("validation: observed rate idempotent per point", observed_idempotent),
        ("simulate: determinism under seed", determinism),
        ("simulate: no change over zero length", zero_length),
        ("simulate: Monte Carlo agreement", monte_carlo_agreement),
    ]
}

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn check<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

// ---------------------------------------------------------------- numerics

/// Intensity matrix of order 2 or 3 with off-diagonal rates in (0, 3].
fn generator() -> impl Strategy<Value = SquareMatrix> {
    (2usize..=3)
        .prop_flat_map(|n| prop::collection::vec(1e-4f64..3.0, n * (n - 1)).prop_map(move |r| (n, r)))
        .prop_map(|(n, rates)| {
            let mut e = vec![0.0; n * n];
            let mut it = rates.into_iter();
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        e[i * n + j] = it.next().unwrap();
                    }
                }
                e[i * n + i] = -(0..n).filter(|&j| j != i).map(|j| e[i * n + j]).sum::<f64>();
            }
            SquareMatrix::new(n, e).unwrap()
        })
}

pub fn semigroup() -> Result<(), String> {
    check(256, (generator(), 0.0f64..5.0, 0.0f64..5.0), |(q, u, v)| {
        let lhs = matrix_exponential(&q, u)
            .unwrap()
            .mul(&matrix_exponential(&q, v).unwrap());
        let rhs = matrix_exponential(&q, u + v).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-9, "diff {}", lhs.max_abs_diff(&rhs));
        Ok(())
    })
}

pub fn stochastic_rows() -> Result<(), String> {
    check(256, (generator(), 0.0f64..50.0), |(q, t)| {
        let p = matrix_exponential(&q, t).unwrap();
        for s in p.row_sums() {
            prop_assert!(close(s, 1.0, 1e-9), "row sum {s}");
        }
        prop_assert!(p.entries().iter().all(|&x| x >= -1e-12));
        Ok(())
    })
}

pub fn maximizer_idempotence() -> Result<(), String> {
    let coef = prop::collection::vec(-2.0f64..2.0, 1..4);
    check(64, (coef, 0.1f64..2.0), |(a, ridge)| {
        let n = a.len();
        let f = |x: &[f64]| -> f64 {
            let sum: f64 = x.iter().sum();
            x.iter().zip(&a).map(|(xi, ai)| ai * xi - xi.exp()).sum::<f64>() - 0.5 * ridge * sum * sum
        };
        let obj = FnObjective::new(n, f);
        let tol = 1e-6;
        let first = maximize(&obj, &vec![0.0; n], tol).unwrap();
        let again = maximize(&obj, &first.argmax, tol).unwrap();
        for (x, y) in first.argmax.iter().zip(&again.argmax) {
            prop_assert!(close(*x, *y, tol), "{x} vs {y}");
        }
        Ok(())
    })
}

// ------------------------------------------------------------------ ingest

fn base_time() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2018, 2, 1)
        .unwrap()
        .and_hms_opt(6, 0, 0)
        .unwrap()
}

/// A run with `n` spots and per-section running-time changes in seconds.
fn run_from(gaps: &[(i64, i64, i64)], shift_minutes: i64) -> RunRecord {
    let t0 = base_time() + Duration::minutes(shift_minutes);
    let mut planned = t0;
    let mut late = 0i64;
    let mut spots = Vec::new();
    for (k, &(run_secs, extra, dwell)) in std::iter::once(&(0, 0, 0)).chain(gaps.iter()).enumerate() {
        planned += Duration::seconds(run_secs);
        late += extra;
        let arr = planned + Duration::seconds(late);
        spots.push(SpotRecord {
            name: format!("S{k}"),
            lat: 60.0,
            lon: 18.0,
            cumulative_km: 5.0 * k as f64,
            planned_arrival: planned,
            planned_departure: planned,
            actual_arrival: Some(arr),
            actual_departure: Some(arr + Duration::seconds(dwell)),
        });
        late += dwell;
    }
    RunRecord {
        train_id: "T".into(),
        initial_station: InitialStation::SouthTerminus,
        spots,
    }
}

fn sections_strategy() -> impl Strategy<Value = Vec<(i64, i64, i64)>> {
    prop::collection::vec((60i64..1200, -120i64..600, 0i64..120), 1..12)
}

pub fn section_count() -> Result<(), String> {
    check(256, sections_strategy(), |gaps| {
        let run = run_from(&gaps, 0);
        let d = derive_indicators(&run);
        prop_assert_eq!(d.sections.len(), run.spots.len() - 1);
        prop_assert!(d.missing.is_empty());
        Ok(())
    })
}

pub fn translation_invariance() -> Result<(), String> {
    check(256, (sections_strategy(), -100_000i64..100_000), |(gaps, shift)| {
        let a = derive_indicators(&run_from(&gaps, 0));
        let b = derive_indicators(&run_from(&gaps, shift));
        prop_assert_eq!(a, b);
        Ok(())
    })
}

pub fn precip_flag() -> Result<(), String> {
    let sample = |p: f64| WeatherSample {
        grid_lat: 60.0,
        grid_lon: 18.0,
        hour: base_time(),
        temperature: -2.0,
        humidity: 80.0,
        snow_depth: 1.0,
        ice_snow_precip: p,
    };
    let precip = prop_oneof![Just(0.0), 0.0f64..5.0];
    check(256, (precip.clone(), precip), |(a, b)| {
        let w = section_covariates(&sample(a), &sample(b));
        if w.precip_flag == 0 {
            prop_assert!(a == 0.0 && b == 0.0);
        } else {
            prop_assert!(a > 0.0 || b > 0.0);
        }
        Ok(())
    })
}

pub fn small_config(seed: u64, trains: usize, missing_rate: f64) -> SimConfig {
    let text = format!(
        "seed = {seed}\ntrain_count = {trains}\nperiods = 2018-02-01..2018-02-28\nperiod_severity = 1\n\
         line_length_km = 120\nspot_count = 10\nsection_km_min = 3\nsection_km_max = 25\n\
         missing_rate = {missing_rate}\nctmc_boundaries = 40, 80\ncox_bump_centers = 40, 80\n"
    );
    SimConfig::parse(&text, "small").unwrap()
}

pub fn csv_round_trip() -> Result<(), String> {
    check(16, (any::<u64>(), 0.0f64..0.2), |(seed, missing)| {
        let sim = simulate(&small_config(seed, 20, missing)).unwrap();
        let mut buf = Vec::new();
        write_runs_csv(&mut buf, &sim.runs).unwrap();
        prop_assert_eq!(&read_runs_csv(&buf[..], "runs").unwrap(), &sim.runs);

        buf.clear();
        write_weather_csv(&mut buf, &sim.weather).unwrap();
        prop_assert_eq!(&read_weather_csv(&buf[..], "weather").unwrap(), &sim.weather);

        let grid = raildelay::ingest::WeatherGrid::new(sim.weather.clone());
        let (ds, _) = raildelay::ingest::assemble_dataset(&sim.runs, &grid).unwrap();
        buf.clear();
        write_dataset_csv(&mut buf, &ds.sections).unwrap();
        let back = AnalysisDataset::new(read_dataset_csv(&buf[..], "dataset").unwrap());
        prop_assert_eq!(back, ds);
        Ok(())
    })
}

// --------------------------------------------------------------------- cox

/// Subjects with three covariate pieces and up to three events each.
pub fn random_cox(seed: u64, n: usize, p: usize) -> CoxDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let subjects = (0..n)
        .map(|i| {
            let censor = rng.random_range(20.0..100.0);
            let mut ends = vec![rng.random_range(1.0..censor), rng.random_range(1.0..censor), censor];
            ends.sort_by(f64::total_cmp);
            ends.dedup();
            let values = ends
                .iter()
                .map(|_| (0..p).map(|_| rng.random_range(-1.5..1.5)).collect())
                .collect();
            let k = rng.random_range(0..=3);
            let mut events: Vec<f64> = (0..k)
                .map(|_| ((rng.random_range(0.5..censor) * 10.0).round() / 10.0).min(censor))
                .collect();
            events.sort_by(f64::total_cmp);
            events.dedup();
            CoxSubject {
                id: format!("S{i:03}"),
                events,
                censor,
                covariates: StepCovariates::new(0.0, ends, values).unwrap(),
            }
        })
        .collect();
    CoxDataset::new((0..p).map(|j| format!("x{j}")).collect(), subjects).unwrap()
}

pub fn null_partial_likelihood() -> Result<(), String> {
    check(64, (any::<u64>(), 5usize..40, 1usize..3), |(seed, n, p)| {
        let ds = random_cox(seed, n, 2);
        let (ll, _) = partial_log_likelihood(&[0.0, 0.0], &ds, p);
        let expected: f64 = build_risk_sets(&ds, p)
            .iter()
            .map(|rs| -(rs.events.len() as f64) * (rs.members.len() as f64).ln())
            .sum();
        prop_assert_eq!(ll, expected);
        Ok(())
    })
}

pub fn cox_gradient() -> Result<(), String> {
    let ds = random_cox(7, 10, 3);
    check(10, prop::collection::vec(-1.0f64..1.0, 3), |beta| {
        let (_, grad) = partial_log_likelihood(&beta, &ds, 2);
        let h = 1e-5;
        for j in 0..3 {
            let mut up = beta.clone();
            let mut down = beta.clone();
            up[j] += h;
            down[j] -= h;
            let fd = (partial_log_likelihood(&up, &ds, 2).0 - partial_log_likelihood(&down, &ds, 2).0) / (2.0 * h);
            prop_assert!(
                (grad[j] - fd).abs() <= 1e-6 * grad[j].abs().max(1.0),
                "{j}: {} vs {fd}",
                grad[j]
            );
        }
        Ok(())
    })
}

fn scaled_column(ds: &CoxDataset, j: usize, c: f64) -> CoxDataset {
    let mut out = ds.clone();
    for s in &mut out.subjects {
        for v in &mut s.covariates.values {
            v[j] *= c;
        }
    }
    out
}

pub fn cox_rescaling() -> Result<(), String> {
    check(
        24,
        (any::<u64>(), 0usize..2, prop_oneof![0.05f64..0.9, 1.1f64..20.0]),
        |(seed, j, c)| {
            let ds = random_cox(seed, 60, 2);
            let opts = CoxOptions {
                max_rank: 2,
                tol: 1e-10,
            };
            let Ok(a) = fit_stratified_cox(&ds, &opts) else {
                return Err(TestCaseError::reject("no finite estimate"));
            };
            let b = fit_stratified_cox(&scaled_column(&ds, j, c), &opts).unwrap();
            prop_assert!(close(b.beta[j] * c, a.beta[j], 1e-7 * (1.0 + a.beta[j].abs())));
            prop_assert!(close(b.beta[1 - j], a.beta[1 - j], 1e-7 * (1.0 + a.beta[1 - j].abs())));
            prop_assert!(
                close(a.log_likelihood, b.log_likelihood, 1e-8),
                "{} vs {}",
                a.log_likelihood,
                b.log_likelihood
            );
            for (ra, rb) in a.hazard_ratios.iter().zip(&b.hazard_ratios) {
                prop_assert!(close(ra.p_value, rb.p_value, 1e-8), "{} vs {}", ra.p_value, rb.p_value);
            }
            Ok(())
        },
    )
}

pub fn survival_monotone() -> Result<(), String> {
    let path = (
        prop::collection::vec((1.0f64..40.0, -3.0f64..3.0, -3.0f64..3.0), 1..6),
        1usize..3,
    );
    check(32, (any::<u64>(), path), |(seed, (pieces, stratum))| {
        let ds = random_cox(seed, 40, 2);
        let Ok(fit) = fit_stratified_cox(&ds, &CoxOptions::default()) else {
            return Err(TestCaseError::reject("no finite estimate"));
        };
        let mut end = 0.0;
        let ends: Vec<f64> = pieces
            .iter()
            .map(|(len, _, _)| {
                end += len;
                end
            })
            .collect();
        let values = pieces.iter().map(|&(_, a, b)| vec![a, b]).collect();
        let cov = StepCovariates::new(0.0, ends, values).unwrap();
        let curve = survival_curve(&fit, stratum, &cov);
        prop_assert_eq!(curve.points[0], (0.0, 1.0));
        for w in curve.points.windows(2) {
            prop_assert!(w[1].1 <= w[0].1 && w[1].0 >= w[0].0);
        }
        prop_assert!(curve.points.iter().all(|&(_, s)| (0.0..=1.0).contains(&s)));
        Ok(())
    })
}

pub fn cox_closed_form() -> Result<(), String> {
    let subject = |id: &str, events: Vec<f64>, censor: f64, x: f64| CoxSubject {
        id: id.into(),
        events,
        censor,
        covariates: StepCovariates::constant(vec![x], censor),
    };
    // risk sets {A(1), B(0), C(1)} then {B, C}; the score equation gives e^β = 1/√2
    let ds = CoxDataset::new(
        vec!["x".into()],
        vec![
            subject("A", vec![10.0], 40.0, 1.0),
            subject("B", vec![20.0], 40.0, 0.0),
            subject("C", vec![], 30.0, 1.0),
        ],
    )
    .unwrap();
    let fit = fit_stratified_cox(
        &ds,
        &CoxOptions {
            max_rank: 1,
            tol: 1e-10,
        },
    )
    .map_err(|e| e.to_string())?;
    let expected = -0.5 * 2f64.ln();
    if (fit.beta[0] - expected).abs() < 1e-7 {
        Ok(())
    } else {
        Err(format!("beta {} vs {expected}", fit.beta[0]))
    }
}

// -------------------------------------------------------------------- ctmc

pub fn params_strategy(p: usize, m: usize) -> impl Strategy<Value = CtmcParams> {
    let transition = move || {
        (
            -4.0f64..-1.0,
            prop::collection::vec(-0.5f64..0.5, p),
            prop::collection::vec(-0.7f64..0.7, m),
        )
            .prop_map(|(log_baseline, beta, z)| TransitionParams { log_baseline, beta, z })
    };
    (transition(), transition())
        .prop_map(move |(pd, dp)| CtmcParams::new((0..p).map(|j| format!("x{j}")).collect(), pd, dp).unwrap())
}

/// Pieces of random length and value, starting at `start`.
fn random_covariates(rng: &mut ChaCha8Rng, start: f64, pieces: usize, p: usize) -> StepCovariates {
    let mut end = start;
    let ends = (0..pieces)
        .map(|_| {
            end += rng.random_range(2.0..30.0);
            end
        })
        .collect();
    let values = (0..pieces)
        .map(|_| (0..p).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    StepCovariates::new(start, ends, values).unwrap()
}

/// Paths observed at every covariate change point.
pub fn random_paths(params: &CtmcParams, scheme: &SegmentScheme, seed: u64, n: usize) -> Vec<ObservedPath> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = params.covariate_count();
    (0..n)
        .map(|i| {
            let pieces = rng.random_range(2..8);
            let cov = random_covariates(&mut rng, 0.0, pieces, p);
            let spots: Vec<f64> = std::iter::once(cov.start).chain(cov.ends.iter().copied()).collect();
            let states = simulate_states(&mut rng, params, scheme, &cov, &spots).unwrap();
            ObservedPath::new(format!("T{i:03}"), spots, states, cov).unwrap()
        })
        .collect()
}

fn scheme_2() -> SegmentScheme {
    SegmentScheme::new(vec![40.0, 80.0]).unwrap()
}

pub fn intensity_rows() -> Result<(), String> {
    let x = prop::collection::vec(-50.0f64..50.0, 2);
    check(256, (params_strategy(2, 2), x, 0.0f64..200.0), |(params, x, t)| {
        let q = intensity_matrix(&params, &x, t, &scheme_2());
        for i in 0..2 {
            prop_assert_eq!(q.row(i).iter().sum::<f64>(), 0.0);
            prop_assert!(q.row(i)[1 - i] > 0.0);
        }
        Ok(())
    })
}

pub fn refinement_invariance() -> Result<(), String> {
    check(
        128,
        (params_strategy(2, 2), any::<u64>(), 0.0f64..1.0, 0.0f64..1.0),
        |(params, seed, fa, fb)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let cov = random_covariates(&mut rng, 0.0, 6, 2);
            // refinement: every piece split at its midpoint with the same values
            let mut ends = Vec::new();
            let mut values = Vec::new();
            let mut lo = cov.start;
            for (e, v) in cov.ends.iter().zip(&cov.values) {
                ends.extend([0.5 * (lo + e), *e]);
                values.extend([v.clone(), v.clone()]);
                lo = *e;
            }
            let fine = StepCovariates::new(cov.start, ends, values).unwrap();
            let (a, b) = {
                let (x, y) = (fa * cov.end(), fb * cov.end());
                (x.min(y), x.max(y))
            };
            let coarse_p = path_transition_probability(&params, &cov, a, b, &scheme_2()).unwrap();
            let fine_p = path_transition_probability(&params, &fine, a, b, &scheme_2()).unwrap();
            for s in coarse_p.row_sums() {
                prop_assert!(close(s, 1.0, 1e-9));
            }
            prop_assert!(
                coarse_p.max_abs_diff(&fine_p) <= 1e-10,
                "{}",
                coarse_p.max_abs_diff(&fine_p)
            );
            Ok(())
        },
    )
}

pub fn relabeling_invariance() -> Result<(), String> {
    check(
        64,
        (params_strategy(2, 2), any::<u64>(), any::<u64>()),
        |(params, seed, shuffle)| {
            let paths = random_paths(&params, &scheme_2(), seed, 12);
            let mut permuted = paths.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(shuffle);
            for i in (1..permuted.len()).rev() {
                permuted.swap(i, rng.random_range(0..=i));
            }
            let a = log_likelihood(&params, &paths, &scheme_2()).unwrap();
            let b = log_likelihood(&params, &permuted, &scheme_2()).unwrap();
            prop_assert!(close(a, b, 1e-10 * (1.0 + a.abs())), "{a} vs {b}");
            Ok(())
        },
    )
}

pub fn homogeneity() -> Result<(), String> {
    check(128, (1e-3f64..0.5, 1e-3f64..0.5, 0.1f64..200.0), |(q_pd, q_dp, u)| {
        let params = CtmcParams::homogeneous(q_pd, q_dp);
        let scheme = SegmentScheme::homogeneous();
        let cov = StepCovariates::constant(vec![], 1000.0);
        let at = |t: f64| path_transition_probability(&params, &cov, t, t + u, &scheme).unwrap();
        let reference = at(0.0);
        for t in [100.0, 300.0] {
            prop_assert!(reference.max_abs_diff(&at(t)) <= 1e-10);
        }
        Ok(())
    })
}

pub fn prediction_continuity() -> Result<(), String> {
    check(
        32,
        (params_strategy(2, 2), any::<u64>(), 0usize..8),
        |(params, seed, which)| {
            let scheme = scheme_2();
            let cohort = random_paths(&params, &scheme, seed, 10);
            let points = [5.0, 20.0, 45.0, 70.0, 100.0];
            let base = predict_delay_rate(&params, &scheme, &cohort, &points).unwrap();
            let mut theta = params.to_vec();
            let k = which % theta.len();
            theta[k] += 1e-8;
            let bumped = CtmcParams::from_vec(params.names.clone(), 2, &theta).unwrap();
            let moved = predict_delay_rate(&bumped, &scheme, &cohort, &points).unwrap();
            for (r0, r1) in base.iter().zip(&moved) {
                if let (Some(a), Some(b)) = (r0.rate, r1.rate) {
                    prop_assert!((0.0..=1.0).contains(&a));
                    prop_assert!((a - b).abs() < 1e-6);
                }
            }
            Ok(())
        },
    )
}

// -------------------------------------------------------------- validation

pub fn averaged_mae() -> Result<(), String> {
    check(4, any::<u64>(), |seed| {
        let cfg = small_config(seed, 140, 0.0);
        let sim = simulate(&cfg).unwrap();
        let (ds, _) =
            raildelay::ingest::assemble_dataset(&sim.runs, &raildelay::ingest::WeatherGrid::new(sim.weather.clone()))
                .unwrap();
        let folds = FoldConfig {
            window_days: 4,
            eval_points: vec![20.0, 50.0, 90.0, 110.0],
            ..FoldConfig::default()
        };
        let mode = ValidationMode::Fixed(sim.truth.ctmc_params.clone());
        let report = run_validation(
            &ds,
            &cfg.ctmc.scheme().unwrap(),
            &CovariateSpec::default(),
            &folds,
            &mode,
        )
        .unwrap();
        let maes: Vec<f64> = report.folds.iter().filter_map(|f| f.mae).collect();
        prop_assert_eq!(maes.len(), report.completed_folds);
        prop_assert_eq!(
            report.averaged_mae.unwrap(),
            maes.iter().sum::<f64>() / maes.len() as f64
        );
        Ok(())
    })
}

pub fn mae_metric() -> Result<(), String> {
    let vectors = (1usize..20).prop_flat_map(|n| {
        (
            prop::collection::vec(0.0f64..1.0, n),
            prop::collection::vec(0.0f64..1.0, n),
            prop::collection::vec(0.0f64..1.0, n),
        )
    });
    check(256, vectors, |(a, b, c)| {
        let ab = mae(&a, &b).unwrap();
        prop_assert_eq!(ab, mae(&b, &a).unwrap());
        prop_assert!(ab <= mae(&a, &c).unwrap() + mae(&c, &b).unwrap() + 1e-15);
        Ok(())
    })
}

pub fn nested_folds() -> Result<(), String> {
    check(
        256,
        (0i64..400, 0i64..200, 1u32..15, 1usize..8, 0i64..30),
        |(start, offset, w, k, slack)| {
            let d0 = NaiveDate::from_ymd_opt(2016, 12, 1).unwrap() + Duration::days(start);
            let first_end = d0 + Duration::days(offset);
            let end = first_end + Duration::days(i64::from(w) * k as i64 + slack);
            let folds = walk_forward_split((d0, end), first_end, w, k).unwrap();
            prop_assert_eq!(folds.len(), k);
            for pair in folds.windows(2) {
                prop_assert!(pair[1].training_start <= pair[0].training_start);
                prop_assert!(pair[1].training_end > pair[0].training_end);
            }
            for f in &folds {
                prop_assert!(f.validation_start > f.training_end && f.validation_end <= end);
            }
            Ok(())
        },
    )
}

pub fn observed_idempotent() -> Result<(), String> {
    let params = CtmcParams::homogeneous(0.05, 0.1);
    let scheme = SegmentScheme::homogeneous();
    let raw = random_paths(&params, &scheme, 3, 30);
    let paths: Vec<ObservedPath> = raw
        .into_iter()
        .map(|p| {
            let cov = StepCovariates::new(
                p.covariates.start,
                p.covariates.ends.clone(),
                vec![vec![]; p.covariates.ends.len()],
            )
            .unwrap();
            ObservedPath::new(p.train_id, p.distances, p.states, cov).unwrap()
        })
        .collect();
    let points = prop::collection::vec(0.0f64..100.0, 1..10);
    check(128, points, |points| {
        let mut doubled = points.clone();
        doubled.extend(points.iter().copied());
        let once: Vec<_> = points.iter().map(|&d| observed_delay_rate(&paths, d).ok()).collect();
        let twice: Vec<_> = doubled.iter().map(|&d| observed_delay_rate(&paths, d).ok()).collect();
        prop_assert_eq!(&twice[..points.len()], &once[..]);
        prop_assert_eq!(&twice[points.len()..], &once[..]);
        Ok(())
    })
}

// ---------------------------------------------------------------- simulate

pub fn determinism() -> Result<(), String> {
    check(8, any::<u64>(), |seed| {
        let cfg = small_config(seed, 15, 0.05);
        let a = simulate(&cfg).unwrap();
        let b = simulate(&cfg).unwrap();
        prop_assert_eq!(&a.runs, &b.runs);
        prop_assert_eq!(&a.weather, &b.weather);
        prop_assert_eq!(&a.ctmc, &b.ctmc);
        prop_assert_eq!(a.cox.subjects.len(), b.cox.subjects.len());
        for (x, y) in a.cox.subjects.iter().zip(&b.cox.subjects) {
            prop_assert_eq!(&x.events, &y.events);
        }
        Ok(())
    })
}

pub fn zero_length() -> Result<(), String> {
    check(128, (params_strategy(1, 2), any::<u64>()), |(params, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cov = random_covariates(&mut rng, 0.0, 5, 1);
        let mut spots: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..cov.end())).collect();
        spots.sort_by(f64::total_cmp);
        // repeat every spot once: zero-length steps
        let doubled: Vec<f64> = spots.iter().flat_map(|&s| [s, s]).collect();
        let states = simulate_states(&mut rng, &params, &scheme_2(), &cov, &doubled).unwrap();
        for pair in states.chunks(2) {
            prop_assert_eq!(pair[0], pair[1]);
        }
        Ok(())
    })
}

pub fn monte_carlo_agreement() -> Result<(), String> {
    check(3, (params_strategy(1, 2), any::<u64>()), |(params, seed)| {
        let scheme = scheme_2();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cov = random_covariates(&mut rng, 0.0, 6, 1);
        let target = cov.end();
        let n = 20_000;
        let delayed = (0..n)
            .filter(|_| {
                let s = simulate_states(&mut rng, &params, &scheme, &cov, &[0.0, target]).unwrap();
                s[1] == State::Delayed
            })
            .count();
        let p = path_transition_probability(&params, &cov, 0.0, target, &scheme)
            .unwrap()
            .row(0)[1];
        let se = (p * (1.0 - p) / n as f64).sqrt().max(1e-12);
        let freq = delayed as f64 / n as f64;
        prop_assert!((freq - p).abs() <= 3.0 * se + 1e-9, "freq {freq} vs {p} (se {se})");
        Ok(())
    })
}

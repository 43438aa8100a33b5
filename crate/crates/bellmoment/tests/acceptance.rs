//! End-to-end acceptance suite. Each criterion prints one PASS/FAIL
//! line; run with `cargo test --test acceptance -- --nocapture` to see
//! them all.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use bellmoment::consts::NOISE_CLAMP;
use bellmoment::inequalities::{
    eval_cfrd, eval_in33, eval_in33_clamped, eval_in33r, eval_ine22,
    eval_salles_class, normalize_salles_coeffs,
};
use bellmoment::lhv;
use bellmoment::matrix::ComplexMatrix;
use bellmoment::quantum::{expectation, BipartiteState, Observable, Party};
use bellmoment::scenarios::{bell_three_choices, sweep_ine22, tilted_two_choices, BipartiteScenario};
use bellmoment::search::{bell_three_params, multi_start, tilted_params, NmOptions, SearchSpace};
use bellmoment::sospoly;
use bellmoment::table::MomentTable;
use bellmoment::weakmeas::{table_from_weak, Scheme, WeakConfig};

fn criterion(name: &str, f: impl FnOnce() + std::panic::UnwindSafe) {
    match std::panic::catch_unwind(f) {
        Ok(()) => println!("acceptance {name}: PASS"),
        Err(e) => {
            println!("acceptance {name}: FAIL");
            std::panic::resume_unwind(e);
        }
    }
}

fn random_hermitian(rng: &mut ChaCha8Rng, dim: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(dim);
    for i in 0..dim {
        m[(i, i)] = Complex64::new(rng.random_range(-1.5..1.5), 0.0);
        for j in (i + 1)..dim {
            let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    m
}

fn random_two_qubit_scenario(rng: &mut ChaCha8Rng, m_a: usize, m_b: usize) -> BipartiteScenario {
    let mut amps: Vec<Complex64> = (0..4)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut amps {
        *a /= norm;
    }
    let state = BipartiteState::new(2, 2, amps).unwrap();
    let obs = |rng: &mut ChaCha8Rng, party, count: usize| {
        (1..=count)
            .map(|i| Observable::new(party, i, random_hermitian(rng, 2)).unwrap())
            .collect::<Vec<_>>()
    };
    let oa = obs(rng, Party::A, m_a);
    let ob = obs(rng, Party::B, m_b);
    BipartiteScenario::new(state, oa, ob).unwrap()
}

/// Random mixture of deterministic value assignments: the most general
/// finite classical model for a moment table.
fn random_classical_table(rng: &mut ChaCha8Rng, m_a: usize, m_b: usize, range: f64) -> MomentTable {
    let atoms = rng.random_range(1..=4usize);
    let mut samples = Vec::with_capacity(atoms);
    let mut weights = Vec::with_capacity(atoms);
    for _ in 0..atoms {
        let a: Vec<f64> = (0..m_a).map(|_| rng.random_range(-range..range)).collect();
        let b: Vec<f64> = (0..m_b).map(|_| rng.random_range(-range..range)).collect();
        samples.push((a, b));
        weights.push(rng.random_range(0.01..1.0));
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    MomentTable::from_lhv_samples(&samples, Some(&weights)).unwrap()
}

fn random_salles_coeffs(rng: &mut ChaCha8Rng, m_a: usize, m_b: usize) -> Vec<Vec<Vec<f64>>> {
    let forms = rng.random_range(1..=3usize);
    let mut coeffs: Vec<Vec<Vec<f64>>> = (0..forms)
        .map(|_| {
            (0..m_a)
                .map(|_| (0..m_b).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect()
        })
        .collect();
    normalize_salles_coeffs(&mut coeffs).unwrap();
    coeffs
}

#[test]
fn a01_exact_three_choice_violation() {
    criterion("01 exact three-choice violation 9/8 vs 10/8", || {
        let t = bell_three_choices().table().unwrap();
        let r = eval_in33(&t).unwrap();
        assert!((r.lhs - 9.0 / 8.0).abs() < 1e-12, "lhs {}", r.lhs);
        assert!((r.rhs - 10.0 / 8.0).abs() < 1e-12, "rhs {}", r.rhs);
        assert!((r.margin + 0.125).abs() < 1e-12, "margin {}", r.margin);
        assert!(!r.satisfied);
    });
}

#[test]
fn a02_bell_correlator_table() {
    criterion("02 correlators (1-cos(2pi(x-y)/3))/4", || {
        let s = bell_three_choices();
        for x in 0..3 {
            for y in 0..3 {
                let got = expectation(&s.state, &s.obs_a[x].op, &s.obs_b[y].op).unwrap();
                let want =
                    (1.0 - (2.0 * std::f64::consts::PI * (x as f64 - y as f64) / 3.0).cos()) / 4.0;
                assert!((got - want).abs() < 1e-12, "({x},{y}): {got} vs {want}");
            }
        }
    });
}

#[test]
fn a03_violation_window() {
    criterion("03 tilt-angle violation window (0, pi/4)", || {
        let steps = 1000;
        let grid: Vec<f64> = (0..steps)
            .map(|i| std::f64::consts::FRAC_PI_4 * i as f64 / (steps - 1) as f64)
            .collect();
        let points = sweep_ine22(&grid).unwrap();
        assert!(points[0].margin.abs() <= 1e-10);
        assert!(points[steps - 1].margin.abs() <= 1e-10);
        for p in &points[1..steps - 1] {
            assert!(p.margin < 0.0, "phi {} margin {}", p.phi, p.margin);
        }
        let t = tilted_two_choices(std::f64::consts::FRAC_PI_6).unwrap().table().unwrap();
        let m = eval_ine22(&t).unwrap().margin;
        assert!((m + 0.05).abs() < 1e-12, "margin {m}");
    });
}

#[test]
fn a04_null_event_behavior() {
    criterion("04 null event at r = 0.01", || {
        let r = 0.01;
        let t = bell_three_choices().table().unwrap().null_mix(r).unwrap();
        assert!(eval_in33(&t).unwrap().satisfied);
        let robust = eval_in33r(&t, r).unwrap();
        assert!(!robust.satisfied);
        assert!((robust.margin + r / 8.0).abs() < 1e-12, "margin {}", robust.margin);
    });
}

#[test]
fn a05_quantum_validity_500_scenarios() {
    criterion("05 fourth-moment inequalities hold on 500 random scenarios", || {
        let mut rng = ChaCha8Rng::seed_from_u64(501);
        for _ in 0..500 {
            let t = random_two_qubit_scenario(&mut rng, 2, 2).table().unwrap();
            assert!(eval_cfrd(&t).unwrap().margin >= -1e-9);
            let coeffs = random_salles_coeffs(&mut rng, 2, 2);
            assert!(eval_salles_class(&t, &coeffs).unwrap().margin >= -1e-9);
        }
    });
}

#[test]
fn a06_classical_soundness_100k() {
    criterion("06 classical soundness over 1e5 assignments", || {
        let mut rng = ChaCha8Rng::seed_from_u64(601);
        for _ in 0..100_000 {
            let t = random_classical_table(&mut rng, 3, 3, 2.0);
            assert!(eval_cfrd(&t).unwrap().margin >= -1e-9);
            assert!(eval_in33(&t).unwrap().margin >= -1e-9);
            assert!(eval_ine22(&t).unwrap().margin >= -1e-9);
            let coeffs = random_salles_coeffs(&mut rng, 3, 3);
            assert!(eval_salles_class(&t, &coeffs).unwrap().margin >= -1e-9);
            let r = rng.random_range(0.01..1.0f64);
            let mixed = t.null_mix(r).unwrap();
            assert!(eval_in33r(&mixed, r).unwrap().margin >= -1e-9);
            assert!(eval_cfrd(&mixed).unwrap().margin >= -1e-9);
        }
    });
}

#[test]
fn a07_weak_measurement_recovery() {
    criterion("07 weak-measurement recovery at g = 0.5, n = 1e6", || {
        let s = bell_three_choices();
        for scheme in [Scheme::Subtract, Scheme::Twin] {
            let cfg = WeakConfig { g: 0.5, scheme, samples: 1_000_000, seed: 7 };
            let weak = table_from_weak(&s, &cfg).unwrap();
            let est = weak.table.get(1, 2, 2, 2);
            let err = weak.error(1, 2, 2, 2).unwrap();
            assert!(
                (est - 0.375).abs() <= 5.0 * err,
                "{scheme:?}: {est} +- {err}"
            );
            let (margin, sigma) = weak
                .margin_with_sigma(|t| eval_in33_clamped(t, NOISE_CLAMP))
                .unwrap();
            assert!(
                (margin + 0.125).abs() <= 5.0 * sigma,
                "{scheme:?}: margin {margin} sigma {sigma}"
            );
        }
    });
}

#[test]
fn a08_lhv_oracle_equivalence() {
    criterion("08 LHV construction matches quantum moments on 500 inputs", || {
        let mut rng = ChaCha8Rng::seed_from_u64(801);
        for _ in 0..500 {
            let n = rng.random_range(2..=4usize);
            let dim_a = rng.random_range(n..=n + 2);
            let dim_b = rng.random_range(n..=n + 2);
            let ap = random_hermitian(&mut rng, dim_a);
            let am = random_hermitian(&mut rng, dim_a);
            let bs: Vec<ComplexMatrix> = (0..rng.random_range(1..=2usize))
                .map(|_| random_hermitian(&mut rng, dim_b))
                .collect();
            let model = lhv::build_lhv(n, &ap, &am, &bs).unwrap();
            for cell in &model.cells {
                assert!(cell.weight >= 0.0);
                for c in &cell.conditionals {
                    if let lhv::Conditional::Gaussian { variance, .. } = c {
                        assert!(*variance >= 0.0);
                    }
                }
            }
            let got = lhv::lhv_moments(&model).unwrap();
            let want = lhv::quantum_reference_table(n, &ap, &am, &bs).unwrap();
            let d = lhv::max_moment_discrepancy(&got, &want);
            assert!(d <= 1e-9, "discrepancy {d}");
        }
    });
}

#[test]
fn a09_polynomial_suite() {
    criterion("09 witness polynomial: positivity scan and SOS infeasibility", || {
        let (v, _) = sospoly::min_w(100, 9);
        assert!(v >= -1e-8, "min {v}");
        let mut rng = ChaCha8Rng::seed_from_u64(901);
        let r2 = std::f64::consts::SQRT_2;
        let c = (2.0f64 / 3.0).powf(1.5);
        for _ in 0..100_000 {
            let p = sospoly::PolyPoint {
                a1: rng.random_range(-3.0..3.0),
                a2: rng.random_range(-3.0..3.0),
                b1: rng.random_range(-3.0..3.0),
                b2: rng.random_range(-3.0..3.0),
            };
            let (ap, am) = ((p.a1 + p.a2) / r2, (p.a1 - p.a2) / r2);
            let (bp, bm) = ((p.b1 + p.b2) / r2, (p.b1 - p.b2) / r2);
            let w = sospoly::eval_w(p);
            assert!((w - sospoly::eval_w_rotated(ap, am, bp, bm)).abs() < 1e-10 * (1.0 + w.abs()));
            let a = (ap * ap + am * am).sqrt();
            let b = (bp * bp + bm * bm).sqrt();
            let hyp = (a * a + b * b).sqrt();
            assert!((ap * bp * (am + bm)).abs() <= c * a * b * hyp + 1e-10);
            assert!(a * a + b * b + a * a * b * b >= 2.0 * hyp * a * b - 1e-10);
        }
        let cert = sospoly::non_sos_certificate();
        assert!((cert.forced_lower_bound - 3.375).abs() < 1e-12);
        assert_eq!(cert.allowed_upper_bound, 3.0);
        assert!(cert.infeasible);
        assert!(cert.min_constraint_violation > 0.1);
        assert!((cert.t_star - 4.0 / 3.0).abs() < 1e-10);
        assert!((cert.t_max_value - 32.0 / 27.0).abs() < 1e-10);
    });
}

#[test]
fn a10_search_regressions() {
    criterion("10 search recovers known violations, none for cfrd", || {
        let opts = NmOptions { max_evals: 1500, ..Default::default() };
        let space33 = SearchSpace { m_a: 3, m_b: 3, projectors_only: false };
        let r = multi_start(&space33, "in33", 10, 10, &opts, &[bell_three_params()]).unwrap();
        assert!(r.best_margin <= -0.125 + 1e-6, "in33 best {}", r.best_margin);
        let space22 = SearchSpace { m_a: 2, m_b: 2, projectors_only: false };
        let start = tilted_params(std::f64::consts::FRAC_PI_6).unwrap();
        let r = multi_start(&space22, "ine22", 10, 10, &opts, &[start]).unwrap();
        assert!(r.best_margin <= -0.05 + 1e-6, "ine22 best {}", r.best_margin);
        let r = multi_start(&space22, "cfrd", 100, 10, &opts, &[]).unwrap();
        assert!(r.best_margin >= -1e-6, "cfrd best {}", r.best_margin);
    });
}

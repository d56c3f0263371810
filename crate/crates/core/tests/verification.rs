//! End-to-end verification suite on the canonical market.

use mnpairs::analysis::{run_verification_suite, ExperimentReport, VerificationConfig};
use mnpairs::closed_form::{merton_specialize, value_function};
use mnpairs::market_model::MarketParams;
use mnpairs::simulation::{mc_expected_utility, SimConfig, Strategy};

fn canonical() -> MarketParams {
    MarketParams::new(-0.5, 0.5, 1.0, 1.0, 0.0, 1.0)
}

fn small() -> VerificationConfig {
    VerificationConfig { n_paths: 20_000, n_steps: 100, ..VerificationConfig::default() }
}

#[test]
fn full_suite_passes_on_the_canonical_market() {
    let r = run_verification_suite(canonical(), 0.5, 1.0, &VerificationConfig::default()).unwrap();
    assert!(r.passed(), "{}", r.render_text());
    for name in ["a_h_vs_rk4", "b_g_vs_quadrature", "c_pde_vs_closed_form", "e_curve_peaks_at_one"] {
        assert!(r.verdict(name).unwrap().passed, "{name}");
    }
    let d = r.mc_section("d_optimal_vs_value_function").unwrap();
    assert!(d.z_score.abs() <= d.threshold);
    let curve = r.table("perturbation_curve").unwrap();
    let (scale, mean) = (curve.column("scale").unwrap(), curve.column("mean").unwrap());
    let best = mean.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
    assert_eq!(scale[best], 1.0);
}

#[test]
fn not_trading_is_worth_zero_and_less_than_the_optimum() {
    let p = canonical();
    let sol = merton_specialize(p, 0.5, 1.0).unwrap();
    let cfg = SimConfig::new(1_000, 50, 1.0, 4).with_fixed_z0(1.0);
    let zero = mc_expected_utility(p, &Strategy::zero(), &cfg, 0.5).unwrap();
    assert_eq!((zero.mean, zero.std_error), (0.0, 0.0));
    assert!(value_function(&sol, 1.0, 1.0, 0.0).unwrap() > 0.0);
}

#[test]
fn reports_are_bit_reproducible_across_worker_counts() {
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_verification_suite(canonical(), 0.5, 1.0, &small()).unwrap().to_json())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(1));
    let back = ExperimentReport::from_json(&one).unwrap();
    assert_eq!(back.to_json(), one);
}

#[test]
fn ill_posed_horizon_is_refused() {
    let p = MarketParams::new(0.0, 1.0, 1.0, 1.0, 0.0, 1.0);
    assert!(run_verification_suite(p, 0.25, 1.0, &small()).is_err());
}

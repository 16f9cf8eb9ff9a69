//! State preparation from input cats through projection to phase-space checks.

use num_complex::Complex64 as C64;
use qnd_core::fockspace::StateVector;
use qnd_core::phaseprep::{noon_target, phase_error, phase_target, prepare_noon, prepare_phase, success_probability};
use qnd_core::projection::{extract_virtual, outcome_distribution, project_joint, virtual_to_joint, JointOutcome};
use qnd_core::states::{cat_superposition, coherent_state, kerr_evolve, CatComponent, CatSpec};
use qnd_core::wigner::{linspace, marginal_check, wigner_function};

fn overlap(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C64>().norm()
}

#[test]
fn kerr_quarter_period_makes_a_cat() {
    // e^{−iπn²/2} sends even n to 1 and odd n to −i.
    let alpha = C64::new(2.0, 0.0);
    let coh = coherent_state(alpha, 40).unwrap();
    let evolved = kerr_evolve(&coh, std::f64::consts::FRAC_PI_2).unwrap();
    let spec = CatSpec::new(vec![
        CatComponent::new(C64::new(0.5, -0.5), alpha, 0.0),
        CatComponent::new(C64::new(0.5, 0.5), -alpha, 0.0),
    ]);
    let cat = cat_superposition(&spec, 40).unwrap();
    assert!((overlap(&evolved.to_vec(), &cat.to_vec()) - 1.0).abs() < 1e-10);
}

#[test]
fn projecting_the_joint_state_matches_the_folded_product() {
    let spec = CatSpec::shared_squeeze(&[1.0, 5.0], &[1.162, 3.277], -0.097);
    let c = cat_superposition(&spec, 40).unwrap();
    let joint = c.tensor(&c);
    for total in [4usize, 10, 15] {
        let from_joint = extract_virtual(&joint, total).unwrap();
        let direct = project_joint(&c.to_vec(), &c.to_vec(), total).unwrap();
        assert!((overlap(from_joint.q(), direct.q()) - 1.0).abs() < 1e-12);
        let back = virtual_to_joint(&direct.state, [total + 1, total + 1]).unwrap();
        assert!((back.norm() - 1.0).abs() < 1e-12);
    }
    let dist = outcome_distribution(&c.to_vec(), &c.to_vec()).unwrap();
    assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    assert!((dist[10] - success_probability(&spec, 10)).abs() < 1e-9);
}

#[test]
fn prepared_phase_state_beats_the_bare_coherent_input() {
    let shaped = CatSpec::shared_squeeze(&[1.0, 5.0], &[1.162, 3.277], -0.097);
    let bare = CatSpec::shared_squeeze(&[1.0], &[2.2], 0.0);
    let a = prepare_phase(&shaped, 10).unwrap();
    let b = prepare_phase(&bare, 10).unwrap();
    assert!(a.error_f < b.error_f, "{} vs {}", a.error_f, b.error_f);
    let target = phase_target(10, a.theta).unwrap();
    let fid = a.outcome.state.inner(&target).unwrap().norm_sqr();
    assert!((1.0 - fid - a.error_f).abs() < 1e-9);
    // The canonical phase state itself has zero error.
    let (f, _) = phase_error(target.q());
    assert!(f < 1e-12);
}

#[test]
fn stored_outcome_reproduces_its_wigner_function() {
    let prep = prepare_noon(C64::new(5.0, 0.0), 12, None).unwrap();
    let text = serde_json::to_string(&prep.outcome).unwrap();
    let back: JointOutcome = serde_json::from_str(&text).unwrap();
    let axis = linspace(-8.0, 8.0, 81);
    let a = wigner_function(prep.outcome.q(), &axis, &axis).unwrap();
    let b = wigner_function(back.q(), &axis, &axis).unwrap();
    assert_eq!(a.values, b.values);
    assert!((a.integral() - 1.0).abs() < 1e-3, "{}", a.integral());
    marginal_check(&a, prep.outcome.q()).unwrap();
}

#[test]
fn noon_wigner_shows_interference() {
    // An equal superposition of |0⟩ and |N⟩ has negative regions near the origin.
    let target = noon_target(8).unwrap();
    let axis = linspace(-7.0, 7.0, 71);
    let w = wigner_function(target.q(), &axis, &axis).unwrap();
    assert!(w.values.min() < -0.05);
    assert!(w.max_abs() <= 1.0 / std::f64::consts::PI + 1e-12);
    let v = StateVector::single_mode(target.q().to_vec()).unwrap();
    assert!((v.norm() - 1.0).abs() < 1e-12);
}

use num_complex::Complex64;
use proptest::prelude::*;

use ris_kinematics::bounds::{eigen_extremes, oeb_scenario1, path_efim, scenario_fim, Efim};
use ris_kinematics::channel::{far_field_steering, near_field_steering, Regime, SignalModel};
use ris_kinematics::codes::{dft_code_assignment, verify_code_constraints};
use ris_kinematics::fim::{AnalyticDerivatives, ParamLabel, Scenario};
use ris_kinematics::geometry::{direction_between, Vec3};
use ris_kinematics::harness::{ExperimentConfig, SweepPoint};

fn small_config(phi: [f64; 3], p_u: [f64; 3]) -> ExperimentConfig {
    let mut config = ExperimentConfig::default();
    config.geometry.sensors[0].phi_rad = phi;
    config.geometry.p_u_m = p_u;
    config.numerology.subcarriers = 4;
    config
}

fn model(config: &ExperimentConfig, side: f64, antennas: usize, seed: u64, regime: Regime) -> SignalModel {
    let p = SweepPoint {
        carrier_hz: 100e9,
        side_length_m: side,
        antennas,
        seed,
    };
    config.build_model(&p, regime).unwrap()
}

fn angles() -> impl Strategy<Value = [f64; 3]> {
    proptest::array::uniform3(-0.6f64..0.6)
}

fn receiver() -> impl Strategy<Value = [f64; 3]> {
    (1.5f64..2.5, 2.6f64..3.5, 3.8f64..4.2).prop_map(|(x, y, z)| [x, y, z])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn steering_entries_have_unit_modulus(
        src in proptest::array::uniform3(-3.0f64..3.0),
        offsets in proptest::collection::vec(proptest::array::uniform3(-0.05f64..0.05), 1..20),
        lambda in 1e-3f64..0.05,
    ) {
        let src = Vec3::from(src) + Vec3::new(0.0, 0.0, 5.0);
        let elems: Vec<Vec3> = offsets.iter().map(|o| Vec3::from(*o)).collect();
        let near = near_field_steering(&src, &elems, lambda).unwrap();
        let dir = direction_between(&Vec3::zeros(), &src).unwrap();
        let far = far_field_steering(&dir, &elems, lambda);
        for z in near.entries.iter().chain(&far.entries) {
            prop_assert!((z.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn steering_phase_is_reciprocal(
        a in proptest::array::uniform3(-3.0f64..3.0),
        b in proptest::array::uniform3(-3.0f64..3.0),
        lambda in 1e-3f64..0.05,
    ) {
        let (a, b) = (Vec3::from(a), Vec3::from(b));
        prop_assume!((a - b).norm() > 1e-6);
        let ab = near_field_steering(&a, &[b], lambda).unwrap().entries[0];
        let ba = near_field_steering(&b, &[a], lambda).unwrap().entries[0];
        prop_assert!((ab - ba).norm() < 1e-12);
    }

    #[test]
    fn dft_codes_are_separable(sensors in 1usize..8, extra in 1usize..12) {
        let code = dft_code_assignment(sensors, sensors + extra).unwrap();
        prop_assert!(verify_code_constraints(&code).max() < 1e-12);
    }

    #[test]
    fn signal_is_linear_in_path_gains(phi in angles(), p_u in receiver(), re in -3.0f64..3.0, im in -3.0f64..3.0) {
        let config = small_config(phi, p_u);
        let codes = config.codes().unwrap();
        let base = model(&config, 0.01, 2, 0, Regime::Near);
        let s = Complex64::new(re, im);
        let mut scaled = base.with_los_gain(base.los_gain() * s);
        for (m, sensor) in base.sensors().iter().enumerate() {
            scaled = scaled.with_sensor(m, sensor.with_gain(sensor.gain() * s));
        }
        let a = base.signal_block(&codes).unwrap();
        let b = scaled.signal_block(&codes).unwrap();
        let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max) * s.norm();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x * s - y).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn fim_is_symmetric_psd_with_matched_gain_pairs(
        phi in angles(),
        p_u in receiver(),
        antennas in 1usize..6,
        seed in 0u64..1000,
        far in proptest::bool::ANY,
        exercise in proptest::bool::ANY,
    ) {
        let config = small_config(phi, p_u);
        let regime = if far { Regime::Far } else { Regime::Near };
        let scenario = if exercise { Scenario::Exercise } else { Scenario::Rest };
        let m = model(&config, 0.02, antennas, seed, regime);
        let fim = scenario_fim(&m, &config.codes().unwrap(), &AnalyticDerivatives, scenario).unwrap();
        prop_assert!(fim.symmetry_residual() < 1e-12);
        let ev = fim.eigenvalues();
        prop_assert!(ev[0] >= -1e-9 * ev[ev.len() - 1]);
        prop_assert!(fim.cross_path_ratio() < 1e-9);
        for sensor in 0..m.sensors().len() {
            let [re, im] = ParamLabel::gains(sensor);
            let (rr, ii) = (fim.entry(&re, &re).unwrap(), fim.entry(&im, &im).unwrap());
            prop_assert!((rr - ii).abs() <= 1e-9 * rr);
            prop_assert!(fim.entry(&re, &im).unwrap().abs() <= 1e-9 * rr);
        }
    }

    #[test]
    fn far_field_orientation_is_never_identifiable(phi in angles(), p_u in receiver(), antennas in 1usize..16, seed in 0u64..1000) {
        let config = small_config(phi, p_u);
        let m = model(&config, 0.03, antennas, seed, Regime::Far);
        let fim = scenario_fim(&m, &config.codes().unwrap(), &AnalyticDerivatives, Scenario::Rest).unwrap();
        for sensor in 0..m.sensors().len() {
            prop_assert!(path_efim(&fim, Scenario::Rest, sensor).unwrap().nullity_ratio() < 1e-9);
        }
    }

    #[test]
    fn efim_eigenvalues_and_bounds_scale_with_information(
        entries in proptest::array::uniform6(-1.0f64..1.0),
        c in 0.01f64..100.0,
    ) {
        let a = nalgebra::DMatrix::from_row_slice(2, 3, &entries);
        let m = a.transpose() * a + nalgebra::DMatrix::identity(3, 3) * 0.1;
        let efim = Efim::from_matrix(ParamLabel::orientations(0).to_vec(), m).unwrap();
        let scaled = efim.scaled(c);
        let ((max, min), (smax, smin)) = (eigen_extremes(&efim), eigen_extremes(&scaled));
        prop_assert!((smax - c * max).abs() <= 1e-12 * c * max);
        prop_assert!((smin - c * min).abs() <= 1e-10 * c * max);
        let (b, sb) = (oeb_scenario1(&efim).unwrap(), oeb_scenario1(&scaled).unwrap());
        prop_assert!((sb.root * c.sqrt() - b.root).abs() <= 1e-10 * b.root);
    }
}

use std::f64::consts::PI;

use super::suite::unit_hessian_mode;
use super::*;
use crate::field::{GridSpec, SupNorm};
use crate::flow::{FlowConfig, FlowEngine, MonitorRecord};
use crate::initial::random_bandlimited;

fn line(n: usize) -> GridSpec {
    GridSpec::unit(1, n).unwrap()
}

fn sine(g: &GridSpec, a: f64) -> PeriodicScalarField {
    PeriodicScalarField::from_fn(g, |x| a * (2.0 * PI * x[0]).sin()).unwrap()
}

#[test]
fn psi_examples() {
    let g = line(128);
    let cfg = FlowConfig::new(g.clone());
    assert_eq!(
        psi(&PeriodicScalarField::zeros(&g), &cfg)
            .unwrap()
            .sup_norm(),
        0.0
    );
    let c = psi(&PeriodicScalarField::constant(&g, 0.3).unwrap(), &cfg).unwrap();
    assert!(c.values().iter().all(|&v| (v - 100.0 * 0.09).abs() < 1e-12));
    let eps = 0.01;
    let p = psi(&sine(&g, eps), &cfg).unwrap();
    let exact = PeriodicScalarField::from_fn(&g, |x| {
        let (s, co) = (2.0 * PI * x[0]).sin_cos();
        100.0 * (eps * s).powi(2)
            + 10.0 * (2.0 * PI * eps * co).powi(2)
            + (4.0 * PI * PI * eps * s).powi(2)
    })
    .unwrap();
    assert!(p.zip_map(&exact, |a, b| a - b).unwrap().sup_norm() <= 1e-10);
}

#[test]
fn report_lines_have_fixed_shape() {
    let mut r = ResidualReport::new("demo");
    r.push(0.5, 1.0, 4.0);
    r.push(0.25, 0.0, 0.0);
    r.fitted_constant = 0.25;
    r.fitted_order = 2.0;
    let text = r.to_lines();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines,
        [
            "demo,5e-1,1e0,4e0,2.5e-1",
            "demo,2.5e-1,0e0,0e0,0e0",
            "demo,2.5e-1,2e0,true"
        ]
    );
    r.fail("broken");
    r.fail("second reason");
    assert!(r.to_lines().ends_with("demo,2.5e-1,2e0,false\n"));
    assert!(r.summary().contains("broken"));
}

#[test]
fn arctan_cubic_term() {
    let q: f64 = 0.1;
    // arctan q − q = −q³/3 + q⁵/5 − ...
    let series: f64 = (1..8)
        .map(|k| (-1f64).powi(k) * q.powi(2 * k + 1) / (2 * k + 1) as f64)
        .sum();
    assert!((q.atan() - q - series).abs() < 1e-17);
    assert!((q.atan() - q + 3.3135e-4).abs() < 1e-8);
}

#[test]
fn angle_expansion_is_cubic_for_single_mode() {
    let g = line(128);
    let r = check_angle_expansion(
        &[unit_hessian_mode(&g)],
        &[1e-1, 1e-2, 1e-3],
        DiffScheme::Spectral,
    )
    .unwrap();
    assert!(r.pass, "{}", r.summary());
    assert!(r.fitted_order >= 2.9, "{}", r.fitted_order);
    for s in &r.samples {
        assert!(s.residual <= r.fitted_constant * s.bound * (1.0 + 1e-12));
    }
}

#[test]
fn angle_expansion_rejects_bad_input() {
    let g = line(64);
    let err = check_angle_expansion(&[sine(&g, 1.0)], &[1e-1, 1e-2, 1e-3], DiffScheme::Spectral);
    assert!(matches!(err, Err(VerifyError::Precondition(_))));
    let err = check_angle_expansion(
        &[unit_hessian_mode(&g)],
        &[1e-1, 1e-2],
        DiffScheme::Spectral,
    );
    assert!(matches!(err, Err(VerifyError::TooFewAmplitudes { .. })));
    let flat = PeriodicScalarField::constant(&g, 0.5).unwrap();
    let r = check_angle_expansion(&[flat], &[1e-1, 1e-2, 1e-3], DiffScheme::Spectral).unwrap();
    assert!(r.pass);
    assert!(r.samples.iter().all(|s| s.residual == 0.0));
}

#[test]
fn laplacian_difference_examples() {
    let g = line(128);
    let amps = [1e-1, 1e-2, 1e-3];
    let f = PeriodicScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).cos()).unwrap();
    let base = unit_hessian_mode(&g);
    let r = check_laplacian_difference(&base, &f, &amps, DiffScheme::Spectral).unwrap();
    assert!(r.pass, "{}", r.summary());
    assert!(r.fitted_order >= 1.0);

    let flat = PeriodicScalarField::constant(&g, 2.0).unwrap();
    let r = check_laplacian_difference(&flat, &f, &amps, DiffScheme::Spectral).unwrap();
    assert!(
        r.pass && r.samples.iter().all(|s| s.residual < 1e-9),
        "{}",
        r.to_lines()
    );
    let r = check_laplacian_difference(&base, &flat, &amps, DiffScheme::Spectral).unwrap();
    assert!(
        r.pass && r.samples.iter().all(|s| s.residual == 0.0),
        "{}",
        r.to_lines()
    );
}

#[test]
fn geometry_oracles_pass() {
    assert!(
        check_angle_oracle(&[1, 2], 1000, 0.5, 1e-10, 11)
            .unwrap()
            .pass
    );
    assert!(check_angle_gradient(100, 1.0, 1e-6, 1e-5, 12).unwrap().pass);
    let g = GridSpec::unit(2, 64).unwrap();
    let u = random_bandlimited(&g, 2, 1).scaled(0.002);
    let f = random_bandlimited(&g, 2, 2);
    let r = check_laplacian_routes(&u, &f, DiffScheme::Spectral, 1e-8).unwrap();
    assert!(r.pass, "{}", r.summary());
}

fn constant_triple(kappa: f64, c: f64) -> Trajectory {
    let g = line(16);
    let mut cfg = FlowConfig::new(g.clone());
    cfg.kappa = kappa;
    let engine = FlowEngine::new(cfg.clone()).unwrap();
    let s0 = engine
        .initial_state(PeriodicScalarField::constant(&g, c).unwrap())
        .unwrap();
    let s1 = engine.step(&s0).unwrap();
    let s2 = engine.step(&s1).unwrap();
    Trajectory {
        config: cfg,
        triples: vec![Triple {
            prev: s0,
            mid: s1,
            next: s2,
            outer: None,
        }],
    }
}

#[test]
fn constant_data_meets_inequalities_with_equality() {
    let traj = constant_triple(-1.0, 0.05);
    let r = check_evolution_inequality(Inequality::U2, &traj).unwrap();
    assert!(r.pass, "{}", r.summary());
    // LHS − 2κu² is only the O(dt⁴) error of the time difference.
    let dt = traj.triples[0].dt();
    assert!(
        r.samples[0].residual.abs() <= 1e-12,
        "{} at dt {dt}",
        r.samples[0].residual
    );
    let r = check_evolution_inequality(Inequality::Psi, &constant_triple(0.0, 0.05)).unwrap();
    assert!(r.pass);
    assert_eq!(r.samples[0].residual, 0.0);
}

#[test]
fn psi_inequality_holds_along_small_mode() {
    let g = line(128);
    let mut cfg = FlowConfig::new(g.clone());
    cfg.t_max = 0.02;
    let engine = FlowEngine::new(cfg).unwrap();
    let traj = Trajectory::sample(&engine, sine(&g, 1e-3), 0.002, 10).unwrap();
    assert!(traj.triples.len() >= 9);
    for kind in Inequality::ALL {
        let r = check_evolution_inequality(kind, &traj).unwrap();
        assert!(r.pass, "{}", r.summary());
    }
    let r = check_evolution_inequality(Inequality::Psi, &traj).unwrap();
    assert!(
        r.samples.iter().all(|s| s.residual <= 1e-8),
        "{}",
        r.to_lines()
    );
    assert!(r.fitted_constant <= -0.25, "{}", r.fitted_constant);
}

#[test]
fn centred_samples_land_on_exact_times() {
    let g = line(32);
    let mut cfg = FlowConfig::new(g.clone());
    cfg.t_max = 0.02;
    let engine = FlowEngine::new(cfg).unwrap();
    let w = 0.5 * engine.config().dt();
    let traj = Trajectory::sample_centered(&engine, sine(&g, 1e-3), 0.005, 10, w).unwrap();
    assert_eq!(traj.triples.len(), 4);
    for (k, tr) in traj.triples.iter().enumerate() {
        let c = 0.005 * (k + 1) as f64;
        let (before, after) = tr.outer.as_ref().unwrap();
        let times = [before.t(), tr.prev.t(), tr.mid.t(), tr.next.t(), after.t()];
        for (j, t) in times.into_iter().enumerate() {
            assert!((t - (c + (j as f64 - 2.0) * w)).abs() < 1e-15, "{t} vs {c}");
        }
    }
    assert!(
        Trajectory::sample_centered(&engine, sine(&g, 1e-3), 0.005, 1, 2.0 * w + 1e-9).is_err()
    );
    assert!(Trajectory::sample_centered(&engine, sine(&g, 1e-3), 3.0 * w, 1, w).is_err());
}

#[test]
fn large_data_is_outside_the_small_data_region() {
    let g = line(64);
    let engine = FlowEngine::new(FlowConfig::new(g.clone())).unwrap();
    let err = Trajectory::sample(&engine, sine(&g, 1e-2), 0.001, 3);
    assert!(matches!(err, Err(VerifyError::OutsideSmallData { .. })));
}

#[test]
fn resolution_stability_rule() {
    let mut a = ResidualReport::new("du2");
    let mut b = ResidualReport::new("du2");
    a.fitted_constant = 0.0;
    b.fitted_constant = 0.0;
    assert!(check_resolution_stability(&a, &b).pass);
    a.fitted_constant = 1.0;
    b.fitted_constant = 1.5;
    let r = check_resolution_stability(&a, &b);
    assert!(r.pass && r.name == "du2_resolution");
    b.fitted_constant = 3.0;
    assert!(!check_resolution_stability(&a, &b).pass);
    b.fitted_constant = 0.0;
    assert!(!check_resolution_stability(&a, &b).pass);
}

#[test]
fn wang_quantity_examples() {
    let g = line(32);
    let mut cfg = FlowConfig::new(g.clone());
    let engine = FlowEngine::new(cfg.clone()).unwrap();
    let zero = engine
        .initial_state(PeriodicScalarField::zeros(&g))
        .unwrap();
    assert_eq!(wang_quantity(&zero, 10.0, 100.0, 10.0), 0.0);

    cfg.kappa = -1.0;
    cfg.t_max = 0.5;
    cfg.checkpoint_every = 50;
    let engine = FlowEngine::new(cfg.clone()).unwrap();
    let mut sampler = crate::flow::StateSampler::default();
    engine
        .integrate(
            PeriodicScalarField::constant(&g, 0.01).unwrap(),
            &mut sampler,
        )
        .unwrap();
    for s in &sampler.states {
        let exact = 10.0 * 100.0 * (0.01 * (-s.t()).exp()).powi(2);
        assert!((wang_quantity(s, 10.0, 100.0, 10.0) - exact).abs() < 1e-12);
    }
    let r = check_wang_trick(&sampler.states, &cfg, 10.0, 1e-8);
    assert!(r.pass && r.samples.iter().all(|s| s.residual < 0.0));
}

#[test]
fn wang_quantity_decreases_for_two_mode_data() {
    let g = line(64);
    let mut cfg = FlowConfig::new(g.clone());
    let dt = cfg.dt();
    cfg.checkpoint_every = 20;
    cfg.t_max = 100.0 * 20.0 * dt;
    let u0 = PeriodicScalarField::from_fn(&g, |x| {
        1e-3 * ((2.0 * PI * x[0]).sin() + (4.0 * PI * x[0]).cos())
    })
    .unwrap();
    let mut sampler = crate::flow::StateSampler::default();
    FlowEngine::new(cfg.clone())
        .unwrap()
        .integrate(u0, &mut sampler)
        .unwrap();
    assert!(sampler.states.len() >= 100);
    let r = check_wang_trick(&sampler.states, &cfg, 10.0, 1e-8);
    assert!(r.pass, "{}", r.summary());
    let r = check_psi_monotone(&sampler.records, 1e-8);
    assert!(r.pass, "{}", r.summary());
}

fn constant_records(kappa: f64) -> Vec<MonitorRecord> {
    let g = line(8);
    let mut cfg = FlowConfig::new(g.clone());
    cfg.kappa = kappa;
    cfg.t_max = 1.0;
    cfg.checkpoint_every = 10;
    let engine = FlowEngine::new(cfg).unwrap();
    let state = engine
        .initial_state(PeriodicScalarField::constant(&g, 0.02).unwrap())
        .unwrap();
    let mut records = Vec::new();
    engine.integrate_to_horizon(state, &mut records);
    records
}

#[test]
fn decay_rates_of_constant_data() {
    let records = constant_records(-1.0);
    let w = (0.0, 1.0);
    assert!((fit_decay_rate(&records, DecayField::SupU, w).unwrap() + 1.0).abs() < 1e-6);
    assert!((fit_decay_rate(&records, DecayField::PsiMax, w).unwrap() + 2.0).abs() < 1e-6);
    assert!(matches!(
        fit_decay_rate(&records, DecayField::SupDu, w),
        Err(VerifyError::NonPositive { .. })
    ));
    assert!(matches!(
        fit_decay_rate(&records, DecayField::SupU, (2.0, 3.0)),
        Err(VerifyError::EmptyWindow(..))
    ));
    let flat = constant_records(0.0);
    assert!(fit_decay_rate(&flat, DecayField::SupU, w).unwrap().abs() < 1e-12);
}

#[test]
fn second_variation_of_single_mode() {
    let g = line(128);
    let r = check_second_variation(
        &sine(&g, 1.0),
        &[4e-3, 2e-3, 1e-3],
        DiffScheme::Spectral,
        1e-4,
    )
    .unwrap();
    assert!(r.pass, "{}", r.summary());
    let exact = 8.0 * PI.powi(4);
    assert!(
        (r.fitted_constant - exact).abs() / exact < 1e-6,
        "{}",
        r.fitted_constant
    );
    assert!((r.fitted_order - 2.0).abs() < 0.05);
    let flat = PeriodicScalarField::constant(&g, 3.0).unwrap();
    assert!(matches!(
        check_second_variation(&flat, &[1e-3, 5e-4], DiffScheme::Spectral, 1e-4),
        Err(VerifyError::Degenerate(_))
    ));
}

#[test]
fn second_variation_is_non_negative_in_random_directions() {
    for r in suite::variation_reports_with(6).unwrap() {
        assert!(r.pass, "{}", r.summary());
        assert!(r.fitted_constant > 0.0);
    }
}

#[test]
fn volume_rate_matches_centred_difference() {
    let case = SmallDataCase::standard(2)[1];
    let engine = FlowEngine::new(case.config(case.n).unwrap()).unwrap();
    let r = check_volume_lyapunov(&engine, case.initial(case.n).unwrap(), 200).unwrap();
    assert!(r.pass, "{}", r.summary());
}

#[test]
fn suite_names_round_trip() {
    for name in Suite::NAMES {
        assert_eq!(name.parse::<Suite>().unwrap().to_string(), name);
    }
    assert!("everything".parse::<Suite>().is_err());
    for kind in Inequality::ALL {
        assert_eq!(kind.name().parse::<Inequality>().unwrap(), kind);
    }
}

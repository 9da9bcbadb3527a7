use matchfn::scalar::pearson;
use matchfn::simulate::{
    closed_form_efficiency, simulate_market, simulate_regions, write_truth, RegionSpec, Shocks,
    SimConfig, Technology,
};

fn noiseless() -> SimConfig {
    SimConfig {
        e_sigma: 0.0,
        ..SimConfig::paper_shape()
    }
}

#[test]
fn same_seed_is_bit_identical() {
    let a = simulate_market(&SimConfig::paper_shape()).unwrap();
    let b = simulate_market(&SimConfig::paper_shape()).unwrap();
    assert_eq!(a, b);
    let c = simulate_market(&SimConfig {
        seed: 8,
        ..SimConfig::paper_shape()
    })
    .unwrap();
    assert_ne!(a.panel, c.panel);
}

#[test]
fn closed_form_round_trip_on_noiseless_panel() {
    let cfg = noiseless();
    let out = simulate_market(&cfg).unwrap();
    let recovered = closed_form_efficiency(&out.panel, cfg.alpha).unwrap();
    for ((obs, truth), a) in out.panel.iter().zip(&out.truth).zip(recovered) {
        assert!(obs.engagements >= 100);
        let a = a.unwrap();
        assert!(
            (a / truth.efficiency - 1.0).abs() < 1e-2,
            "{}: {a} vs {}",
            obs.period,
            truth.efficiency
        );
    }
}

#[test]
fn efficiency_and_male_shocks_are_independent() {
    let s = Shocks::draw(42, 10_000);
    let r = pearson(&s.efficiency, &s.males).unwrap();
    assert!(r.abs() < 0.05, "{r}");
    let r = pearson(&s.efficiency, &s.females).unwrap();
    assert!(r.abs() < 0.05, "{r}");
}

#[test]
fn technology_has_constant_returns() {
    for tech in [
        Technology::CobbDouglas,
        Technology::Ces { r: -0.5 },
        Technology::Ces { r: 0.5 },
    ] {
        let base = tech.output(0.6, 1234.5, 987.0);
        for psi in [0.3, 2.0, 17.0] {
            let scaled = tech.output(0.6, psi * 1234.5, psi * 987.0);
            assert!((scaled / (psi * base) - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn paper_shape_scenario() {
    let out = simulate_market(&SimConfig::paper_shape()).unwrap();
    let obs = out.panel.observations();
    let first = &obs[0];
    let last = &obs[obs.len() - 1];
    // tightness F/M declines
    let t0 = first.females as f64 / first.males as f64;
    let t1 = last.females as f64 / last.males as f64;
    assert!(t1 < t0);
    // the efficiency trend triples; the realized ratio includes the AR deviation
    let a = out.true_efficiency();
    let ratio = a[a.len() - 1] / a[0];
    assert!((ratio / 3.0).ln().abs() < 0.3, "{ratio}");
    assert!(out
        .truth
        .iter()
        .all(|t| t.eps_f == 0.6 && (t.eps_m - 0.4).abs() < 1e-15));
    assert_eq!(first.period.to_string(), "2014-01");
    assert_eq!(last.period.to_string(), "2024-12");
}

#[test]
fn ces_truth_varies_with_inputs() {
    let cfg = SimConfig {
        technology: Technology::Ces { r: 0.5 },
        ..SimConfig::paper_shape()
    };
    let out = simulate_market(&cfg).unwrap();
    assert!(out
        .truth
        .iter()
        .all(|t| (t.eps_f + t.eps_m - 1.0).abs() < 1e-12));
    assert!(out
        .truth
        .iter()
        .any(|t| (t.eps_f - out.truth[0].eps_f).abs() > 1e-3));
    assert!(simulate_market(&SimConfig {
        technology: Technology::Ces { r: 1.0 },
        ..cfg
    })
    .is_err());
}

#[test]
fn regions_are_simulated_independently() {
    let specs = [
        RegionSpec {
            name: "kanto".into(),
            size: 1.0,
            log_a_shift: 0.0,
        },
        RegionSpec {
            name: "kansai".into(),
            size: 0.5,
            log_a_shift: -0.2,
        },
        RegionSpec {
            name: "kyushu".into(),
            size: 0.25,
            log_a_shift: 0.1,
        },
    ];
    let out = simulate_regions(&SimConfig::paper_shape(), &specs).unwrap();
    assert_eq!(out.panel.len(), 3 * 132);
    assert_eq!(out.panel.regions().len(), 3);
    let kansai = out.panel.slice_region(Some("kansai")).unwrap();
    let f0 = kansai.observations()[0].females as f64;
    assert!((f0 / 10_000.0 - 1.0).abs() < 1e-3);
}

#[test]
fn truth_csv_has_header_and_rows() {
    let out = simulate_market(&SimConfig {
        periods: 3,
        ..SimConfig::paper_shape()
    })
    .unwrap();
    let mut buf = Vec::new();
    write_truth(&mut buf, &out.truth).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "ym,region,A,eps_f,eps_m");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("2014-01,,"));
}

use iterlil::error::Error;
use iterlil::grid::GridSpec;
use iterlil::lil::{center_y1, clt_check, lil_scan, supermartingale_check, LilScanConfig};
use iterlil::prw::simulate_path;
use iterlil::renewal::{build_tables, renewal_function};
use iterlil::rng::Stream;
use iterlil::stats;
use iterlil::JointStepLaw;

fn law(s: &str) -> JointStepLaw {
    JointStepLaw::parse(s).unwrap()
}

#[test]
fn final_values_are_sign_symmetric() {
    let cfg = LilScanConfig {
        t_max: 1e4,
        n_rep: 200,
        seed: 41,
        ..Default::default()
    };
    let res = lil_scan(&law("exp_indep(1,1)"), &cfg, None).unwrap();
    let positive = res.final_values().iter().filter(|&&x| x > 0.0).count() as f64 / 200.0;
    assert!((0.3..=0.7).contains(&positive), "fraction positive {positive}");
}

#[test]
fn centred_count_mean_matches_table() {
    let l = law("eta_eq_xi(lognormal(0,0.5))");
    let t = 100.0;
    let table = build_tables(&l, 0.01, t, 1).unwrap();
    let xs: Vec<f64> = (0..10_000)
        .map(|rep| {
            let p = simulate_path(&l, t, &mut Stream::replicate(77, rep)).unwrap();
            center_y1(p.y_at(t) as f64, t, &l).unwrap()
        })
        .collect();
    let expected = center_y1(table.v_at(1, t).unwrap(), t, &l).unwrap();
    let (m, se) = (stats::mean(&xs), stats::std_error(&xs));
    assert!((m - expected).abs() < 3.0 * se, "{m} +- {se} vs {expected}");
}

#[test]
fn dumped_columns_reproduce_normalized_values() {
    let cfg = LilScanConfig {
        j: 2,
        t_max: 300.0,
        n_rep: 5,
        seed: 5,
        ..Default::default()
    };
    let res = lil_scan(&law("eta_eq_xi(exp(1))"), &cfg, None).unwrap();
    let mut buf = Vec::new();
    res.write_csv(&mut buf).unwrap();
    let mut rdr = csv::Reader::from_reader(buf.as_slice());
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let f = |i: usize| rec[i].parse::<f64>().unwrap();
        assert_eq!((f(2) - f(3)) / f(4), f(5));
        rows += 1;
    }
    assert_eq!(rows, 5 * res.scan_times.len());
}

#[test]
fn envelope_widens_with_horizon() {
    let l = law("exp_indep(1,1)");
    let pts: Vec<f64> = (0..30).map(|i| 20.0 * 1.3f64.powi(i)).collect();
    let short: Vec<f64> = pts.iter().copied().filter(|&t| t <= 2000.0).collect();
    let scan = |times: Vec<f64>| {
        let t_max = *times.last().unwrap();
        let cfg = LilScanConfig {
            grid: GridSpec::Points(times),
            t_max,
            n_rep: 20,
            seed: 9,
            ..Default::default()
        };
        lil_scan(&l, &cfg, None).unwrap()
    };
    let a = scan(short);
    let b = scan(pts);
    assert!(b.envelope_max >= a.envelope_max && b.envelope_min <= a.envelope_min);
    for (ra, rb) in a.r.iter().zip(&b.r) {
        assert_eq!(ra[..], rb[..ra.len()]);
    }
}

#[test]
fn supermartingale_bound_without_moments() {
    let res = supermartingale_check(&law("slow_tail(1)"), 100.0, &[0.1], 20_000, 8).unwrap();
    assert!(res[0].pass(), "{:?}", res[0]);
    assert_eq!(res[0].saturated, 0);
}

#[test]
fn clt_preconditions() {
    let l = law("exp_indep(1,1)");
    let table = renewal_function(&l, 0.1, 100.0).unwrap();
    assert!(matches!(clt_check(&l, &table, 100.0, 99, 0), Err(Error::Precondition(_))));
    assert!(matches!(clt_check(&l, &table, 200.0, 100, 0), Err(Error::TableRange { .. })));
    let c = clt_check(&l, &table, 100.0, 500, 0).unwrap();
    assert!(c.ks <= 1.0);
}

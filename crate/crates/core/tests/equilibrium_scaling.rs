use thermsearch::equilibrium::gibbs_state;
use thermsearch::experiments::{fit_log_points, fit_power_points, ols};
use thermsearch::{
    build_spectrum, error_probability, fit_powerlaw, ground_state_probability, log_grid, tau_scan,
    EllChoice, ModelParams, ModelSpec,
};

/// Direct Boltzmann sum over the unsorted level list.
fn p1_by_summation(p: &ModelParams) -> f64 {
    let levels: Vec<f64> = (1..=p.n)
        .map(|k| {
            let e = p.a * (k as f64).ln();
            if k == p.ell {
                e + p.marker_energy()
            } else {
                e
            }
        })
        .collect();
    let ground = levels[p.ell - 1];
    let z: f64 = levels.iter().map(|e| (-p.beta * (e - ground)).exp()).sum();
    1.0 / z
}

#[test]
fn ground_state_probability_matches_summation() {
    for &(n, a, b, beta, ell) in &[
        (500, 1.2, 2.0, 1.0, 500),
        (500, 0.6, 1.0, 2.0, 1),
        (37, 3.0, 4.0, 1.0, 20),
        (1, 1.0, 2.0, 1.0, 1),
    ] {
        let p = ModelParams::new(n, a, b, beta, ell);
        let want = p1_by_summation(&p);
        assert!((ground_state_probability(&p).unwrap() - want).abs() <= 1e-12);
        let sorted = gibbs_state(&build_spectrum(&p).unwrap());
        assert!((sorted[0] - want).abs() <= 1e-12);
    }
}

#[test]
fn success_probability_grows_with_n_when_dominant() {
    let mut last = 0.0;
    for n in [10, 50, 100, 500, 1000, 5000] {
        let p1 = ground_state_probability(&ModelParams::from_products(n, 1.2, 2.0, n)).unwrap();
        assert!(p1 > last, "N={n}");
        last = p1;
    }
}

#[test]
fn error_probability_tracks_power_law_in_cold_regime() {
    let mut last = 1.0;
    for n in [100, 200, 500, 1000, 2000, 5000] {
        let p = ModelParams::from_products(n, 3.0, 4.0, n);
        let e = error_probability(&p).unwrap();
        let bare = (n as f64).powf(-1.0);
        assert!(
            e.exact / bare < 2.0 && e.exact / bare > 0.5,
            "N={n}: ratio {}",
            e.exact / bare
        );
        assert!(e.exact < last);
        assert!((e.exact + ground_state_probability(&p).unwrap() - 1.0).abs() < 1e-15);
        last = e.exact;
    }
}

#[test]
fn synthetic_fits_are_exact() {
    let ns: Vec<f64> = [100.0, 300.0, 1000.0, 3000.0].to_vec();
    let ys: Vec<f64> = ns.iter().map(|n: &f64| 2.0 * n.ln()).collect();
    let f = fit_log_points(&ns, &ys).unwrap();
    assert!((f.slope - 2.0).abs() < 1e-12 && f.intercept.abs() < 1e-11 && f.r_squared == 1.0);

    let ys: Vec<f64> = ns.iter().map(|n| (n / 100.0).powf(0.5)).collect();
    let f = fit_power_points(&ns, &ys).unwrap();
    assert!((f.slope - 0.5).abs() < 1e-12 && f.intercept.abs() < 1e-12);

    assert!(ols(&[3.0, 3.0, 3.0], &[1.0, 2.0, 3.0]).is_err());
    assert!(fit_log_points(&[10.0, 20.0, 30.0], &[1.0, 2.0, 3.0]).is_err());
}

#[test]
fn scan_rows_sorted_and_failures_recorded() {
    let mut grid = log_grid(1.2, 2.0, EllChoice::Last, &[40, 10, 30, 20]);
    // an invalid point must not stop the scan
    grid.push(ModelSpec::Logarithmic(ModelParams::from_products(
        25, 1.2, 2.0, 99,
    )));
    let r = tau_scan(&grid);
    let ns: Vec<usize> = r.rows.iter().map(|row| row.n).collect();
    assert_eq!(ns, [10, 20, 25, 30, 40]);
    assert!(r.rows[2].status.starts_with("error"));
    assert!(r
        .rows
        .iter()
        .filter(|row| row.is_ok())
        .all(|row| row.tau_v.unwrap().is_finite()));
    assert_eq!(tau_scan(&grid), r);
}

#[test]
fn exponent_falls_as_background_steepens() {
    // gradual crossover towards logarithmic growth near a*beta = 1
    let ns = [100, 200, 300, 400, 600];
    let mut last = f64::INFINITY;
    for ab in [0.3, 0.6, 0.9, 1.2] {
        let kappa = fit_powerlaw(&tau_scan(&log_grid(ab, 2.0, EllChoice::Last, &ns)))
            .unwrap()
            .slope;
        assert!(kappa < last, "a*beta={ab}: kappa {kappa} not below {last}");
        last = kappa;
    }
}

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thermsearch::dynamics::{hitting_time_with, propagate_with};
use thermsearch::experiments::{fit_log_points, fit_power_points, ScanMeta};
use thermsearch::spectrum::SpectrumSource;
use thermsearch::{
    build_generator, decompose, equilibrium_report, error_probability, gamma_profile,
    gillespie_sample, glauber_rates, hitting_curves, spectral_gap, tau_scan, EllChoice, FitModel,
    FitReport, Hitting, ModelSpec, PopulationVector, ScanResult, ScanRow, Start,
};

use crate::config::*;
use crate::error::CliError;
use crate::plot::{gamma_chart, p1_chart, tau_chart, Chart, PlotKind, Profile};
use crate::table::{format_float, write_table, Cell, Format, Table};

pub fn run(command: &Command) -> Result<(), CliError> {
    let cfg = RunConfig::new(command);
    match command {
        Command::Spectrum(a) => spectrum(a, &cfg),
        Command::Equilibrium(a) => equilibrium(a, &cfg),
        Command::Relax(a) => relax(a, &cfg),
        Command::Gillespie(a) => gillespie(a, &cfg),
        Command::TauScan(a) => tau_scan_cmd(a, &cfg),
        Command::Fit(a) => fit(a, &cfg),
        Command::Gamma(a) => gamma(a, &cfg),
        Command::ReproduceFig1(a) => reproduce_fig1(a, &cfg),
        Command::ReproduceFig2(a) => reproduce_fig2(a, &cfg),
        Command::Plot(a) => plot(a),
    }
}

fn table_with_config<S: Into<String>>(
    columns: impl IntoIterator<Item = S>,
    cfg: &RunConfig,
) -> Table {
    let mut t = Table::new(columns);
    t.meta("version", cfg.version.clone())
        .meta("config", cfg.to_json());
    t
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn emit(table: &Table, output: &OutputArgs) -> Result<(), CliError> {
    write_table(table, output.format, output.out.as_deref())
}

fn time_grid(t_max: f64, steps: usize) -> Result<Vec<f64>, CliError> {
    if !(t_max.is_finite() && t_max > 0.0) || steps == 0 {
        return Err(CliError::Usage(
            "need a positive finite --t-max and --steps >= 1".into(),
        ));
    }
    Ok((0..=steps)
        .map(|i| t_max * i as f64 / steps as f64)
        .collect())
}

fn check_threshold(threshold: f64) -> Result<(), CliError> {
    if threshold > 0.0 && threshold < 1.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "--threshold must lie in (0, 1), got {threshold}"
        )))
    }
}

fn spectrum(args: &SpectrumArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let spec = args.model.spec()?;
    let spectrum = spec.spectrum()?;
    let mut t = table_with_config(["rank", "index", "beta_energy"], cfg);
    let beta = spectrum.beta();
    match spectral_gap(&spectrum) {
        Ok(gap) => t.meta("beta_gap", format_float(beta * gap)),
        Err(_) => t.meta("beta_gap", "undefined"),
    };
    t.meta(
        "dominant",
        equilibrium_report(&spectrum).dominant.to_string(),
    );
    for (rank, (&e, &idx)) in spectrum
        .energies()
        .iter()
        .zip(spectrum.permutation())
        .enumerate()
    {
        t.push(vec![
            Cell::from(rank + 1),
            Cell::from(idx + 1),
            Cell::Float(beta * e),
        ]);
    }
    if let Some(path) = &args.dump_rates {
        let rates = glauber_rates(&spectrum, spec.bare_rate())?;
        let mut text = String::new();
        let n = rates.n();
        for k in 0..n {
            for l in 0..n {
                if k != l {
                    let _ = writeln!(
                        text,
                        "{} {} {}",
                        k + 1,
                        l + 1,
                        format_float(rates.rate(k, l))
                    );
                }
            }
        }
        write_text(path, &text)?;
    }
    emit(&t, &args.output)
}

fn equilibrium(args: &EquilibriumArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let spec = args.model.spec()?;
    let spectrum = spec.spectrum()?;
    let report = equilibrium_report(&spectrum);
    if args.levels {
        let mut t = table_with_config(["rank", "index", "beta_energy", "probability"], cfg);
        let beta = spectrum.beta();
        for (rank, ((&e, &idx), &p)) in spectrum
            .energies()
            .iter()
            .zip(spectrum.permutation())
            .zip(&report.gibbs)
            .enumerate()
        {
            t.push(vec![
                Cell::from(rank + 1),
                Cell::from(idx + 1),
                Cell::Float(beta * e),
                Cell::Float(p),
            ]);
        }
        return emit(&t, &args.output);
    }
    let mut t = table_with_config(
        [
            "n",
            "p1_eq",
            "p_err",
            "p_err_asymptotic",
            "dominant",
            "log_z",
        ],
        cfg,
    );
    let (p_err, asymptotic) = match spectrum.source() {
        SpectrumSource::Logarithmic(p) => {
            let e = error_probability(p)?;
            (e.exact, Cell::Float(e.asymptotic))
        }
        SpectrumSource::Degenerate { .. } => (report.p_err, Cell::Empty),
    };
    t.push(vec![
        Cell::from(spectrum.len()),
        Cell::Float(report.p1_eq),
        Cell::Float(p_err),
        asymptotic,
        Cell::from(report.dominant.to_string()),
        Cell::Float(report.log_z),
    ]);
    emit(&t, &args.output)
}

fn start_vector(kind: StartKind, n: usize) -> PopulationVector {
    match kind {
        StartKind::Uniform => PopulationVector::uniform(n),
        StartKind::Top => PopulationVector::point(n, n - 1),
    }
}

fn relax(args: &RelaxArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let spec = args.model.spec()?;
    check_threshold(args.threshold)?;
    let times_v = time_grid(args.t_max, args.steps)?;
    let v = spec.bare_rate();
    let spectrum = spec.spectrum()?;
    let n = spectrum.len();
    let rates = glauber_rates(&spectrum, v)?;
    let decomposition = decompose(&build_generator(&rates))?;
    let p0 = start_vector(args.start, n);
    let times: Vec<f64> = times_v.iter().map(|t| t / v).collect();
    let traj = propagate_with(&decomposition, &p0, &times)?;
    let hitting = hitting_time_with(&decomposition, &p0, args.threshold, args.t_max / v)?;

    let mut columns = vec!["t_v".to_string(), "p1".to_string()];
    if args.full {
        columns.extend((1..=n).map(|k| format!("p_{k}")));
    }
    let mut t = table_with_config(columns, cfg);
    t.meta("p1_eq", format_float(decomposition.right_vector(0)[0]));
    match decomposition.tau_rlx() {
        Some(tau) => t.meta("tau_v", format_float(tau * v)),
        None => t.meta("tau_v", "undefined"),
    };
    match hitting {
        Hitting::Reached { time } => t.meta("hitting_time_v", format_float(time * v)),
        Hitting::NotReached { .. } => t.meta("hitting_time_v", "not reached"),
    };
    t.meta("max_norm_defect", format_float(traj.max_norm_defect));
    for (tv, p) in times_v.iter().zip(&traj.populations) {
        let mut row = vec![Cell::Float(*tv), Cell::Float(p.ground())];
        if args.full {
            row.extend(p.as_slice().iter().map(|&x| Cell::Float(x)));
        }
        t.push(row);
    }
    if let Some(path) = &args.plot {
        let curve = times_v
            .iter()
            .copied()
            .zip(traj.ground_populations())
            .collect();
        write_text(
            path,
            &p1_chart(&[(n, curve)], Some(args.threshold)).to_svg(),
        )?;
    }
    emit(&t, &args.output)
}

/// Gillespie estimate next to exact propagation at the same times.
fn gillespie_table(
    spec: &ModelSpec,
    start: StartKind,
    times_v: &[f64],
    traj: usize,
    seed: u64,
    cfg: &RunConfig,
) -> Result<Table, CliError> {
    if traj == 0 {
        return Err(CliError::Usage("--traj must be at least 1".into()));
    }
    let v = spec.bare_rate();
    let spectrum = spec.spectrum()?;
    let n = spectrum.len();
    let rates = glauber_rates(&spectrum, v)?;
    let times: Vec<f64> = times_v.iter().map(|t| t / v).collect();
    let p0 = start_vector(start, n);
    let gstart = match start {
        StartKind::Uniform => Start::Distribution(p0.as_slice().to_vec()),
        StartKind::Top => Start::Level(n - 1),
    };
    let sample = gillespie_sample(&rates, &gstart, &times, traj, seed)?;
    let exact = propagate_with(&decompose(&build_generator(&rates))?, &p0, &times)?;
    let mut t = table_with_config(
        [
            "t_v",
            "p1_sample",
            "p1_std_error",
            "p1_exact",
            "tv_distance",
        ],
        cfg,
    );
    t.meta("seed", seed.to_string())
        .meta("trajectories", traj.to_string());
    for (i, tv) in times_v.iter().enumerate() {
        let p = &exact.populations[i];
        t.push(vec![
            Cell::Float(*tv),
            Cell::Float(sample.populations[i][0]),
            Cell::Float(sample.std_errors[i][0]),
            Cell::Float(p.ground()),
            Cell::Float(p.total_variation(&sample.populations[i])),
        ]);
    }
    Ok(t)
}

fn gillespie(args: &GillespieArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let spec = args.model.spec()?;
    if args.times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(CliError::Usage(
            "--times must be finite and nonnegative".into(),
        ));
    }
    let t = gillespie_table(&spec, args.start, &args.times, args.traj, args.seed, cfg)?;
    emit(&t, &args.output)
}

pub const SCAN_COLUMNS: [&str; 12] = [
    "series",
    "model",
    "n",
    "ell",
    "a_beta",
    "b_beta",
    "ground_beta_energy",
    "tau_v",
    "max_gamma_v",
    "p1_eq",
    "hitting_time_v",
    "status",
];

fn push_scan_rows(t: &mut Table, series: &str, result: &ScanResult) {
    for r in &result.rows {
        t.push(vec![
            series.into(),
            r.model.as_str().into(),
            r.n.into(),
            r.ell.into(),
            r.a_beta.into(),
            r.b_beta.into(),
            r.ground_energy.into(),
            r.tau_v.into(),
            r.max_gamma_v.into(),
            r.p1_eq.into(),
            r.hitting_time.into(),
            r.status.as_str().into(),
        ]);
    }
}

fn scan_meta(t: &mut Table, result: &ScanResult) {
    t.meta("scan", result.meta.scan.clone());
    if let Some(th) = result.meta.threshold {
        t.meta("threshold", format_float(th));
    }
    if let Some(tm) = result.meta.t_max {
        t.meta("t_max_v", format_float(tm));
    }
}

/// Rebuild scan rows from a table written by [`push_scan_rows`].
pub fn scan_from_table(table: &Table, series: Option<&str>) -> Result<ScanResult, CliError> {
    let col = |name: &str| {
        table
            .column(name)
            .ok_or_else(|| CliError::Parse(format!("missing column '{name}'")))
    };
    let idx: Vec<usize> = SCAN_COLUMNS
        .iter()
        .map(|c| col(c))
        .collect::<Result<_, _>>()?;
    let text = |row: &[Cell], i: usize| match &row[idx[i]] {
        Cell::Text(s) => s.clone(),
        Cell::Int(x) => x.to_string(),
        Cell::Float(x) => format_float(*x),
        Cell::Empty => String::new(),
    };
    let num = |row: &[Cell], i: usize| row[idx[i]].as_f64();
    let need = |row: &[Cell], i: usize| {
        num(row, i)
            .ok_or_else(|| CliError::Parse(format!("non-numeric '{}' value", SCAN_COLUMNS[i])))
    };
    let mut rows = Vec::new();
    for row in &table.rows {
        if row.len() != table.columns.len() {
            return Err(CliError::Parse("ragged row".into()));
        }
        if series.is_some_and(|s| s != text(row, 0)) {
            continue;
        }
        rows.push(ScanRow {
            model: text(row, 1),
            n: need(row, 2)? as usize,
            ell: need(row, 3)? as usize,
            a_beta: need(row, 4)?,
            b_beta: need(row, 5)?,
            ground_energy: need(row, 6)?,
            tau_v: num(row, 7),
            max_gamma_v: num(row, 8),
            p1_eq: num(row, 9),
            hitting_time: num(row, 10),
            status: text(row, 11),
        });
    }
    let scan = table.get_meta("scan").unwrap_or("tau").to_string();
    Ok(ScanResult {
        rows,
        meta: ScanMeta {
            scan,
            threshold: None,
            t_max: None,
            grid: Vec::new(),
        },
    })
}

fn fit_scan(result: &ScanResult, kind: FitKind, column: FitColumn) -> Result<FitReport, CliError> {
    let pick = |r: &ScanRow| match column {
        FitColumn::TauV => r.tau_v,
        FitColumn::HittingTimeV => r.hitting_time,
    };
    if let Some(first) = result.rows.first() {
        if result
            .rows
            .iter()
            .any(|r| r.model != first.model || r.a_beta != first.a_beta || r.b_beta != first.b_beta)
        {
            return Err(CliError::Usage(
                "rows differ in more than N; select one curve with --series".into(),
            ));
        }
    }
    let (ns, ys): (Vec<f64>, Vec<f64>) = result
        .rows
        .iter()
        .filter_map(|r| pick(r).map(|y| (r.n as f64, y)))
        .unzip();
    let report = match kind {
        FitKind::Log => fit_log_points(&ns, &ys)?,
        FitKind::Power => fit_power_points(&ns, &ys)?,
    };
    Ok(report)
}

const FIT_COLUMNS: [&str; 8] = [
    "series",
    "model",
    "slope",
    "intercept",
    "r_squared",
    "max_abs_residual",
    "max_rel_residual",
    "n_points",
];

fn push_fit(t: &mut Table, series: &str, f: &FitReport) {
    let model = match f.model {
        FitModel::Log => "log",
        FitModel::Power => "power",
    };
    t.push(vec![
        series.into(),
        model.into(),
        f.slope.into(),
        f.intercept.into(),
        f.r_squared.into(),
        f.max_abs_residual.into(),
        f.max_rel_residual.into(),
        f.n_points.into(),
    ]);
}

fn tau_scan_cmd(args: &TauScanArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let grid = args.grid.specs()?;
    let result = tau_scan(&grid);
    let mut t = table_with_config(SCAN_COLUMNS, cfg);
    scan_meta(&mut t, &result);
    // a fit needs four points; smaller scans just go without
    let fit = fit_scan(&result, args.fit, FitColumn::TauV).ok();
    if let Some(f) = &fit {
        t.meta("fit", serde_json::to_string(f).expect("fit serializes"));
    }
    push_scan_rows(&mut t, "scan", &result);
    if let Some(path) = &args.plot {
        let pts = result
            .rows
            .iter()
            .filter_map(|r| r.tau_v.map(|y| (r.n, y)))
            .collect();
        write_text(path, &tau_chart(&[("tau v".into(), pts, fit)]).to_svg())?;
    }
    emit(&t, &args.output)
}

fn fit(args: &FitArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.input).map_err(|source| CliError::Io {
        path: args.input.clone(),
        source,
    })?;
    let table = Table::parse_csv(&text)?;
    let result = scan_from_table(&table, args.series.as_deref())?;
    let report = fit_scan(&result, args.model, args.column)?;
    let mut t = table_with_config(FIT_COLUMNS, cfg);
    t.meta("input", args.input.display().to_string());
    push_fit(&mut t, args.series.as_deref().unwrap_or("all"), &report);
    emit(&t, &args.output)
}

fn gamma_profiles(grid: &[ModelSpec]) -> Result<Vec<Profile>, CliError> {
    grid.iter()
        .map(|spec| {
            let spectrum = spec.spectrum()?;
            let rates = glauber_rates(&spectrum, spec.bare_rate())?;
            Ok((spec.n(), gamma_profile(&rates)))
        })
        .collect()
}

fn gamma_table(profiles: &[Profile], cfg: &RunConfig) -> Table {
    let mut t = table_with_config(["n", "k", "gamma_v"], cfg);
    let maxima: Vec<String> = profiles
        .iter()
        .map(|(n, p)| {
            format!(
                "{n}:{}",
                format_float(p.iter().map(|x| x.1).fold(0.0, f64::max))
            )
        })
        .collect();
    t.meta("max_gamma_v", maxima.join(" "));
    for (n, profile) in profiles {
        for &(k, g) in profile {
            t.push(vec![Cell::from(*n), Cell::from(k), Cell::Float(g)]);
        }
    }
    t
}

fn gamma(args: &GammaArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let profiles = gamma_profiles(&args.grid.specs()?)?;
    if let Some(path) = &args.plot {
        write_text(path, &gamma_chart(&profiles).to_svg())?;
    }
    emit(&gamma_table(&profiles, cfg), &args.output)
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn data_path(dir: &Path, stem: &str, format: Format) -> PathBuf {
    let ext = match format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    dir.join(format!("{stem}.{ext}"))
}

fn reproduce_fig1(args: &Fig1Args, cfg: &RunConfig) -> Result<(), CliError> {
    check_threshold(args.threshold)?;
    let times = time_grid(args.t_max, args.steps)?;
    let grid = model_grid(args.a_beta, args.b_beta, EllChoice::Last, &args.n_grid)?;
    prepare_dir(&args.out_dir)?;
    let dir = args.out_dir.as_path();

    let scan = hitting_curves(&grid, args.threshold, args.t_max, &times);
    let result = &scan.result;

    let mut curves_t = table_with_config(
        std::iter::once("t_v".to_string())
            .chain(result.rows.iter().map(|r| format!("p1_n{}", r.n))),
        cfg,
    );
    for (i, tv) in times.iter().enumerate() {
        let mut row = vec![Cell::Float(*tv)];
        row.extend(
            scan.curves
                .iter()
                .map(|c| c.get(i).copied().map_or(Cell::Empty, Cell::Float)),
        );
        curves_t.push(row);
    }
    write_table(
        &curves_t,
        args.format,
        Some(&data_path(dir, "fig1_p1", args.format)),
    )?;

    let mut hit_t = table_with_config(SCAN_COLUMNS, cfg);
    scan_meta(&mut hit_t, result);
    let fit = fit_scan(result, FitKind::Log, FitColumn::HittingTimeV).ok();
    if let Some(f) = &fit {
        hit_t.meta("fit", serde_json::to_string(f).expect("fit serializes"));
    }
    push_scan_rows(&mut hit_t, "l=N", result);
    write_table(
        &hit_t,
        args.format,
        Some(&data_path(dir, "fig1_hitting", args.format)),
    )?;

    let profiles = gamma_profiles(&grid)?;
    write_table(
        &gamma_table(&profiles, cfg),
        args.format,
        Some(&data_path(dir, "fig1_gamma", args.format)),
    )?;

    let curves: Vec<(usize, Vec<(f64, f64)>)> = result
        .rows
        .iter()
        .zip(&scan.curves)
        .filter(|(_, c)| !c.is_empty())
        .map(|(r, c)| (r.n, times.iter().copied().zip(c.iter().copied()).collect()))
        .collect();
    write_text(
        &dir.join("fig1_p1.svg"),
        &p1_chart(&curves, Some(args.threshold)).to_svg(),
    )?;
    write_text(
        &dir.join("fig1_gamma.svg"),
        &gamma_chart(&profiles).to_svg(),
    )?;

    if args.traj > 0 {
        let spec = grid.iter().min_by_key(|s| s.n()).expect("grid is nonempty");
        let stride = (args.steps / 10).max(1);
        let sample_times: Vec<f64> = times.iter().copied().step_by(stride).collect();
        let t = gillespie_table(
            spec,
            StartKind::Uniform,
            &sample_times,
            args.traj,
            args.seed,
            cfg,
        )?;
        write_table(
            &t,
            args.format,
            Some(&data_path(dir, "fig1_gillespie", args.format)),
        )?;
    }

    let mut summary = table_with_config(FIT_COLUMNS, cfg);
    if let Some(f) = &fit {
        push_fit(&mut summary, "hitting l=N", f);
    }
    print!("{}", summary.render(Format::Csv));
    Ok(())
}

/// Named curve of the relaxation-time figure.
struct Curve {
    series: String,
    a_beta: f64,
    b_beta: f64,
    ell: EllChoice,
    fit: FitKind,
}

fn fig2_curves(args: &Fig2Args) -> (Vec<Curve>, Vec<Curve>) {
    let curve = |series: &str, a_beta, b_beta, ell, fit| Curve {
        series: series.into(),
        a_beta,
        b_beta,
        ell,
        fit,
    };
    let mut log = Vec::new();
    if matches!(args.regime, Regime::Log | Regime::All) {
        log.push(curve(
            "a1.2_b2_l=N",
            1.2,
            2.0,
            EllChoice::Last,
            FitKind::Log,
        ));
        log.push(curve(
            "a1.2_b2_l=1",
            1.2,
            2.0,
            EllChoice::First,
            FitKind::Log,
        ));
        if !args.no_comparison {
            log.push(curve("a3_b4_l=N", 3.0, 4.0, EllChoice::Last, FitKind::Log));
            log.push(curve(
                "a1.2_b4_l=N",
                1.2,
                4.0,
                EllChoice::Last,
                FitKind::Log,
            ));
            log.push(curve(
                "a1.2_b5_l=N",
                1.2,
                5.0,
                EllChoice::Last,
                FitKind::Log,
            ));
        }
    }
    let mut power = Vec::new();
    if matches!(args.regime, Regime::Power | Regime::All) {
        for a in [0.3, 0.6, 0.9] {
            power.push(curve(
                &format!("a{a}_b2_l=N"),
                a,
                2.0,
                EllChoice::Last,
                FitKind::Power,
            ));
        }
    }
    (log, power)
}

fn reproduce_fig2(args: &Fig2Args, cfg: &RunConfig) -> Result<(), CliError> {
    prepare_dir(&args.out_dir)?;
    let dir = args.out_dir.as_path();
    let (log_curves, power_curves) = fig2_curves(args);
    let mut fits = table_with_config(FIT_COLUMNS, cfg);
    fits.meta("seed", args.seed.to_string());

    for (stem, curves, ns) in [
        ("fig2_log", &log_curves, &args.n_grid),
        ("fig2_power", &power_curves, &args.power_grid),
    ] {
        if curves.is_empty() {
            continue;
        }
        let mut t = table_with_config(SCAN_COLUMNS, cfg);
        t.meta("scan", "tau").meta("seed", args.seed.to_string());
        let mut chart = Vec::new();
        for c in curves.iter() {
            let grid = model_grid(c.a_beta, c.b_beta, c.ell, ns)?;
            let result = tau_scan(&grid);
            push_scan_rows(&mut t, &c.series, &result);
            let fit = fit_scan(&result, c.fit, FitColumn::TauV);
            match &fit {
                Ok(f) => push_fit(&mut fits, &c.series, f),
                Err(e) => {
                    fits.meta(format!("fit_error {}", c.series), e.to_string());
                }
            }
            let pts = result
                .rows
                .iter()
                .filter_map(|r| r.tau_v.map(|y| (r.n, y)))
                .collect();
            chart.push((c.series.clone(), pts, fit.ok()));
        }
        write_table(&t, args.format, Some(&data_path(dir, stem, args.format)))?;
        write_text(
            &dir.join(format!("{stem}.svg")),
            &tau_chart(&chart).to_svg(),
        )?;
    }
    write_table(
        &fits,
        args.format,
        Some(&data_path(dir, "fig2_fits", args.format)),
    )?;
    print!("{}", fits.render(Format::Csv));
    Ok(())
}

/// System size recorded in a table's embedded config, if any.
fn config_n(table: &Table) -> Option<usize> {
    let cfg: serde_json::Value = serde_json::from_str(table.get_meta("config")?).ok()?;
    cfg["model"]["n"].as_u64().map(|n| n as usize)
}

fn numeric(table: &Table, name: &str) -> Result<Vec<f64>, CliError> {
    let col = table
        .numeric_column(name)
        .ok_or_else(|| CliError::Parse(format!("missing column '{name}'")))?;
    col.into_iter()
        .map(|x| x.ok_or_else(|| CliError::Parse(format!("non-numeric '{name}' value"))))
        .collect()
}

fn p1_from_table(table: &Table, threshold: Option<f64>) -> Result<Chart, CliError> {
    let t = numeric(table, "t_v")?;
    let mut curves = Vec::new();
    for (i, name) in table.columns.iter().enumerate() {
        let n = match name.strip_prefix("p1_n") {
            Some(n) => n
                .parse()
                .map_err(|_| CliError::Parse(format!("bad column '{name}'")))?,
            None if name == "p1" => config_n(table).unwrap_or(0),
            None => continue,
        };
        let pts = table
            .rows
            .iter()
            .zip(&t)
            .filter_map(|(r, &tv)| r[i].as_f64().map(|p| (tv, p)))
            .collect();
        curves.push((n, pts));
    }
    if curves.is_empty() {
        return Err(CliError::Parse("no p1 columns in input".into()));
    }
    Ok(p1_chart(&curves, threshold))
}

fn gamma_from_table(table: &Table) -> Result<Chart, CliError> {
    let (ns, ks, gs) = (
        numeric(table, "n")?,
        numeric(table, "k")?,
        numeric(table, "gamma_v")?,
    );
    let mut profiles: Vec<Profile> = Vec::new();
    for ((n, k), g) in ns.into_iter().zip(ks).zip(gs) {
        let (n, k) = (n as usize, k as usize);
        match profiles.last_mut() {
            Some((m, p)) if *m == n => p.push((k, g)),
            _ => profiles.push((n, vec![(k, g)])),
        }
    }
    Ok(gamma_chart(&profiles))
}

fn tau_from_table(table: &Table, fit: Option<FitKind>) -> Result<Chart, CliError> {
    let col = table
        .column("series")
        .ok_or_else(|| CliError::Parse("missing column 'series'".into()))?;
    let mut names: Vec<String> = Vec::new();
    for row in &table.rows {
        if let Cell::Text(s) = &row[col] {
            if !names.contains(s) {
                names.push(s.clone());
            }
        }
    }
    let mut scans = Vec::new();
    for name in names {
        let result = scan_from_table(table, Some(&name))?;
        let pts = result
            .rows
            .iter()
            .filter_map(|r| r.tau_v.map(|y| (r.n, y)))
            .collect();
        let report = fit.and_then(|k| fit_scan(&result, k, FitColumn::TauV).ok());
        scans.push((name, pts, report));
    }
    Ok(tau_chart(&scans))
}

fn plot(args: &PlotArgs) -> Result<(), CliError> {
    let kind: PlotKind = args.kind.parse()?;
    let text = std::fs::read_to_string(&args.input).map_err(|source| CliError::Io {
        path: args.input.clone(),
        source,
    })?;
    let table = Table::parse_csv(&text)?;
    let chart = match kind {
        PlotKind::P1 => p1_from_table(&table, args.threshold)?,
        PlotKind::Gamma => gamma_from_table(&table)?,
        PlotKind::Tau => tau_from_table(&table, args.fit)?,
    };
    write_text(&args.out, &chart.to_svg())
}

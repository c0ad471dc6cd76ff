//! The five pipelines behind the subcommands.

use rayon::prelude::*;

use openbath_core::{
    bohr_frequencies, build_liouvillian, effective_occupation, fit_effective_beta_mu, generalized_boltzmann_ratio,
    kms_check, ladder_steady_state, liouvillian_nullspace, occupation, reduce_to_ladder, spectral_matrix_for,
    threshold_crossings, time_evolve, verify_all_relations, verify_factorization, verify_gibbs_stationarity,
    BalanceReport, BathSpec, BmsCoefficients, CMatrix, Complex64, EffectiveFit, EigenStructure, Method,
    RateLadder, StationaryState, Statistics,
};
use openbath_core::balance::DEFAULT_BALANCE_TOL;
use openbath_core::steady::THRESHOLD_TIE_TOL;

use crate::config::{GridConfig, RawScenario, RunMode, SolverMethod, FIG1_CONFIG};
use crate::output::{cell, num, Csv, Summary};
use crate::scenario::{apply_coefficient_override, Scenario};
use crate::CliError;

/// Files produced by a run, and whether verification failed.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub files: Vec<(String, String)>,
    pub notices: Vec<String>,
    pub failure: Option<String>,
}

impl Outcome {
    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }
}

/// Horizon of an explicit integration: forty relaxation times.
const RELAXATION_TIMES: f64 = 40.0;

/// Stationary state with its context, populations in level order when the
/// generator is a ladder.
#[derive(Debug, Clone)]
pub struct SteadySolution {
    pub eig: EigenStructure,
    pub coeff: BmsCoefficients,
    pub ladder: Option<RateLadder>,
    pub state: StationaryState,
    /// `(level, energy, number, population)`.
    pub levels: Vec<(usize, f64, i64, f64)>,
    pub fit: Option<Result<EffectiveFit, String>>,
    pub warnings: Vec<String>,
}

impl SteadySolution {
    pub fn populations(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.3).collect()
    }
}

pub fn solve_steady(scenario: &Scenario, overrides: &[String], base: &std::path::Path) -> Result<SteadySolution, CliError> {
    let eig = scenario.diagonalize()?;
    let mut coeff = scenario.assemble(&eig)?;
    for o in overrides {
        apply_coefficient_override(&mut coeff, o, base)?;
    }
    let ladder = reduce_to_ladder(&coeff, &eig);
    let solver = &scenario.config.solver;
    let mut warnings = Vec::new();
    let method = match (solver.method, &ladder) {
        (SolverMethod::Auto, Ok(_)) => Method::LadderRecursion,
        (SolverMethod::Auto, Err(e)) => {
            warnings.push(format!("not a ladder ({e}); using the nullspace"));
            Method::Nullspace
        }
        (SolverMethod::Ladder, Err(e)) => return Err(e.clone().into()),
        (SolverMethod::Ladder, Ok(_)) => Method::LadderRecursion,
        (SolverMethod::Nullspace, _) => Method::Nullspace,
        (SolverMethod::TimeEvolution, _) => Method::TimeEvolution,
    };
    let ladder = ladder.ok();
    let state = match method {
        Method::LadderRecursion => {
            let l = ladder.as_ref().expect("ladder method implies a ladder");
            let mut s = ladder_steady_state(l)?;
            s.populations = l.to_state_order(&s.populations);
            s
        }
        Method::Nullspace => liouvillian_nullspace(&build_liouvillian(&coeff, &eig)?)?,
        Method::TimeEvolution => {
            let l = build_liouvillian(&coeff, &eig)?;
            let t_final = match (solver.t_final, ladder.as_ref().and_then(RateLadder::relaxation_gap)) {
                (Some(t), _) => t,
                (None, Some(gap)) => RELAXATION_TIMES / gap,
                (None, None) => {
                    return Err(CliError::Config(
                        "time evolution needs `solver.t_final` when the relaxation rate is unknown".into(),
                    ))
                }
            };
            let d = eig.dim();
            let rho0 = CMatrix::identity(d, d) * Complex64::new(1.0 / d as f64, 0.0);
            time_evolve(&l, &rho0, t_final, solver.dt)?.to_stationary(&l)
        }
    };
    warnings.extend(state.warnings.iter().cloned());

    let (levels, fit) = match &ladder {
        Some(l) => {
            let by_level = l.to_level_order(&state.populations);
            let levels: Vec<_> = l
                .states
                .iter()
                .enumerate()
                .map(|(m, &s)| (m, eig.energies[s], eig.number(s), by_level[m]))
                .collect();
            let ratios: Vec<f64> = by_level.windows(2).map(|w| w[1] / w[0]).collect();
            let fit = fit_effective_beta_mu(&l.omega, &ratios).map_err(|e| e.to_string());
            (levels, Some(fit))
        }
        None => (
            (0..eig.dim())
                .map(|a| (a, eig.energies[a], eig.number(a), state.populations[a]))
                .collect(),
            None,
        ),
    };
    Ok(SteadySolution {
        eig,
        coeff,
        ladder,
        state,
        levels,
        fit,
        warnings,
    })
}

fn populations_csv(sol: &SteadySolution) -> String {
    let mut csv = Csv::new(&["level", "energy", "number", "population"]);
    for &(m, e, n, p) in &sol.levels {
        csv.row([m.to_string(), num(e), n.to_string(), num(p)]);
    }
    csv.finish()
}

fn ratios_csv(scenario: &Scenario, sol: &SteadySolution) -> String {
    let mut csv = Csv::new(&["link", "omega", "ratio", "prediction"]);
    let Some(ladder) = &sol.ladder else {
        return csv.finish();
    };
    let p = sol.populations();
    let specs = scenario.specs();
    let closed_form = scenario.bundle.is_some() && scenario.uniform_coupling();
    for m in 0..ladder.links() {
        let w = ladder.omega[m];
        let prediction = if closed_form {
            generalized_boltzmann_ratio(w, &specs).map(num).unwrap_or_else(|_| "error".into())
        } else if ladder.down[m] > 0.0 {
            num(ladder.up[m] / ladder.down[m])
        } else {
            "error".into()
        };
        csv.row([m.to_string(), num(w), num(p[m + 1] / p[m]), prediction]);
    }
    csv.finish()
}

fn describe_model(scenario: &Scenario, summary: &mut Summary) {
    match &scenario.bundle {
        Some(b) => {
            summary.line("model", &b.name);
            for n in &b.notes {
                summary.line("note", n);
            }
        }
        None => summary.line("model", "operator files"),
    }
    if let Some(r) = &scenario.config.reference {
        summary.line("reference", r);
    }
    summary.line("baths", scenario.baths.len());
    for (k, b) in scenario.baths.iter().enumerate() {
        summary.line(
            &format!("bath {k}"),
            format!("{} {} beta={} mu={}", b.spec.label, b.spec.statistics, num(b.spec.beta), num(b.spec.mu)),
        );
    }
}

fn steady_summary(scenario: &Scenario, sol: &SteadySolution) -> Summary {
    let mut s = Summary::default();
    s.line("mode", scenario.mode.name());
    describe_model(scenario, &mut s);
    s.line("levels", sol.levels.len());
    s.line("method", sol.state.method);
    s.line("residual", num(sol.state.residual));
    s.line("unique", sol.state.unique);
    match &sol.fit {
        Some(Ok(fit)) => {
            s.line("beta_bar", num(fit.beta_bar));
            s.line("mu_bar", num(fit.mu_bar));
            s.line("consistency", num(fit.consistency));
            s.line("inversion", fit.inversion);
            s.line("underdetermined", fit.underdetermined);
        }
        Some(Err(e)) => s.line("fit", format!("failed: {e}")),
        None => s.line("fit", "unavailable: the generator is not a ladder"),
    }
    s.line(
        "rate_scale",
        "stationary populations do not depend on a common rescaling of all rates; transients do",
    );
    for w in &sol.warnings {
        s.line("warning", w);
    }
    s
}

pub fn run_steady(scenario: &Scenario, overrides: &[String], base: &std::path::Path) -> Result<Outcome, CliError> {
    let sol = solve_steady(scenario, overrides, base)?;
    Ok(Outcome {
        files: vec![
            ("populations.csv".into(), populations_csv(&sol)),
            ("ratios.csv".into(), ratios_csv(scenario, &sol)),
            ("summary.txt".into(), steady_summary(scenario, &sol).finish()),
        ],
        notices: sol.warnings.clone(),
        failure: None,
    })
}

fn retolerance(r: &mut BalanceReport, tol: f64) {
    for p in &mut r.per_bath {
        retolerance(p, tol);
    }
    r.tolerance = tol;
    let structural = r.warnings.iter().any(|w| w.contains("coefficient sets for"));
    r.pass = !structural && r.max_rel_violation <= tol && r.per_bath.iter().all(|p| p.pass);
}

fn kms_grid(eig: &EigenStructure, bath: &BathSpec) -> Vec<f64> {
    let mut grid: Vec<f64> = bohr_frequencies(eig)
        .iter()
        .map(|f| f.omega)
        .filter(|&w| w > 1e-12 && (bath.statistics == Statistics::Fermi || w > bath.mu))
        .collect();
    grid.dedup();
    grid
}

pub fn run_verify(
    scenario: &Scenario,
    overrides: &[String],
    base: &std::path::Path,
    tol: Option<f64>,
) -> Result<Outcome, CliError> {
    let tol = tol.or(scenario.config.solver.tol).unwrap_or(DEFAULT_BALANCE_TOL);
    if !(tol > 0.0) {
        return Err(CliError::Config(format!("tolerance must be positive, got {tol}")));
    }
    let eig = scenario.diagonalize()?;
    let mut coeff = scenario.assemble(&eig)?;
    for o in overrides {
        apply_coefficient_override(&mut coeff, o, base)?;
    }
    let specs = scenario.specs();
    let mut text = Summary::default();
    let mut notices = Vec::new();
    let mut failures: Vec<String> = Vec::new();
    text.line("mode", "verify");
    describe_model(scenario, &mut text);
    text.line("tolerance", format!("{tol:e}"));
    text.raw("\n");

    for mut report in verify_all_relations(&coeff, &eig, &specs) {
        retolerance(&mut report, tol);
        if !report.pass {
            let worst = report
                .worst
                .as_ref()
                .map(|w| w.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" "))
                .unwrap_or_else(|| "none".into());
            failures.push(format!(
                "{}: max relative violation {:e} at [{worst}]",
                report.relation, report.max_rel_violation
            ));
        }
        text.raw(&report.to_string());
        text.raw("\n");
    }

    let ladder = reduce_to_ladder(&coeff, &eig);
    match (&ladder, &scenario.bundle) {
        (Ok(l), Some(bundle)) if scenario.uniform_coupling() && overrides.is_empty() => {
            let mut report = verify_factorization(l, &specs, &bundle.g_factors);
            report.per_bath.clear();
            if !report.pass {
                failures.push(format!("factorization: max relative violation {:e}", report.max_rel_violation));
            }
            text.raw(&report.to_string());
            text.raw("\n");
        }
        _ => {
            let why = "factorization: skipped, needs a preset ladder with unmodified coefficients";
            text.line("notice", why);
            notices.push(why.into());
        }
    }

    for (k, b) in specs.iter().enumerate() {
        let grid = kms_grid(&eig, b);
        if grid.is_empty() {
            continue;
        }
        let r = kms_check(&spectral_matrix_for(b)?, b, &grid)?;
        text.line("relation", "kms");
        text.line("bath", k);
        text.line("max_violation", num(r.max_violation));
        text.line("entrywise_violation", num(r.entrywise_violation));
        text.line("pass", r.pass);
        text.raw("\n");
        if !r.pass {
            failures.push(format!("kms: bath {k} violation {:e} at omega {}", r.max_violation, r.worst_omega));
        }
    }

    if specs.len() == 1 {
        let l = build_liouvillian(&coeff, &eig)?;
        let res = verify_gibbs_stationarity(&l, &eig, specs[0].beta, specs[0].mu);
        let scale = l.max_norm().max(1e-300);
        let pass = res.total <= tol * scale;
        text.raw(&res.to_string());
        text.line("generator_norm", num(scale));
        text.line("pass", pass);
        if !pass {
            failures.push(format!("gibbs-stationarity: residual {:e} against norm {:e}", res.total, scale));
        }
    } else {
        let why = format!("gibbs-stationarity: skipped, {} reservoirs", specs.len());
        text.line("notice", &why);
        notices.push(why);
    }
    text.raw("\n");
    text.line("overall", if failures.is_empty() { "pass" } else { "fail" });
    Ok(Outcome {
        files: vec![("verify.txt".into(), text.finish())],
        notices,
        failure: if failures.is_empty() { None } else { Some(failures.join("; ")) },
    })
}

fn occupation_files(specs: &[BathSpec], grid: &[f64], notices: &mut Vec<String>) -> Vec<(String, String)> {
    let mut header = vec!["omega".to_string()];
    header.extend((1..=specs.len()).map(|k| format!("f{k}")));
    header.push("fbar".into());
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut occ = Csv::new(&header_refs);
    for &w in grid {
        let mut row = vec![num(w)];
        for b in specs {
            row.push(occupation(w, b).map(num).unwrap_or_else(|_| "error".into()));
        }
        row.push(effective_occupation(w, specs).map(num).unwrap_or_else(|_| "error".into()));
        occ.row(row);
    }
    let mut crossings = Csv::new(&["index", "omega"]);
    match threshold_crossings(specs, grid) {
        Ok(xs) => {
            for (i, w) in xs.iter().enumerate() {
                crossings.row([i.to_string(), num(*w)]);
            }
        }
        Err(e) => notices.push(format!("crossings not computed: {e}")),
    }
    vec![
        ("occupation.csv".into(), occ.finish()),
        ("crossings.csv".into(), crossings.finish()),
    ]
}

fn grid_of(scenario: &Scenario) -> Result<Vec<f64>, CliError> {
    match &scenario.config.grid {
        Some(g) => Ok(g.values()),
        None if scenario.mode == RunMode::Fig1 => {
            let defaults: GridConfig = RawScenario::from_str(FIG1_CONFIG, std::path::Path::new("."))?
                .parse()?
                .grid
                .expect("built-in grid");
            Ok(defaults.values())
        }
        None => Err(CliError::Config("an occupation scan needs a `[grid]` section".into())),
    }
}

pub fn run_occupation_scan(scenario: &Scenario) -> Result<Outcome, CliError> {
    if scenario.baths.is_empty() {
        return Err(CliError::Config("an occupation scan needs at least one bath".into()));
    }
    let grid = grid_of(scenario)?;
    let mut notices = Vec::new();
    let files = occupation_files(&scenario.specs(), &grid, &mut notices);
    Ok(Outcome {
        files,
        notices,
        failure: None,
    })
}

pub fn run_fig1(scenario: &Scenario, overrides: &[String], base: &std::path::Path) -> Result<Outcome, CliError> {
    let grid = grid_of(scenario)?;
    let specs = scenario.specs();
    let mut notices = Vec::new();
    let mut files = occupation_files(&specs, &grid, &mut notices);
    let sol = solve_steady(scenario, overrides, base)?;
    files.push(("populations.csv".into(), populations_csv(&sol)));
    let mut summary = steady_summary(scenario, &sol);
    if let Some(l) = &sol.ladder {
        let p = sol.populations();
        let mut matching = 0;
        for m in 0..l.links() {
            let f = effective_occupation(l.omega[m], &specs).map(|f| f - 0.5).unwrap_or(f64::NAN);
            let dp = p[m + 1] - p[m];
            let tie = f.abs() <= THRESHOLD_TIE_TOL;
            if (tie && dp.abs() <= 1e-12 * p[m].max(p[m + 1])) || (!tie && (dp > 0.0) == (f > 0.0)) {
                matching += 1;
            }
        }
        summary.line("threshold_links", format!("{matching} of {}", l.links()));
    }
    files.push(("summary.txt".into(), summary.finish()));
    notices.extend(sol.warnings);
    Ok(Outcome {
        files,
        notices,
        failure: None,
    })
}

struct SweepRow {
    value: f64,
    result: Result<(Vec<f64>, Option<EffectiveFit>), String>,
}

pub fn run_sweep(
    raw: &RawScenario,
    path_override: Option<&str>,
    values_override: Option<&[f64]>,
    overrides: &[String],
) -> Result<Outcome, CliError> {
    let base = Scenario::resolve(raw, RunMode::Sweep)?;
    let sweep = base.config.sweep.clone();
    let path = match (path_override, &sweep) {
        (Some(p), _) => p.to_string(),
        (None, Some(s)) => s.path.clone(),
        (None, None) => return Err(CliError::Config("sweep needs a `[sweep]` section or --path".into())),
    };
    let grid = match (values_override, &sweep) {
        (Some(v), _) => v.to_vec(),
        (None, Some(s)) => s.grid()?,
        (None, None) => return Err(CliError::Config("sweep needs a grid".into())),
    };
    if grid.is_empty() {
        return Ok(Outcome {
            files: vec![("sweep.csv".into(), String::new())],
            notices: vec!["empty sweep grid".into()],
            failure: None,
        });
    }
    // The path must address a number before any row runs.
    raw.clone().set_scalar(&path, grid[0])?;

    let rows: Vec<SweepRow> = grid
        .par_iter()
        .map(|&value| {
            let result = (|| {
                let mut r = raw.clone();
                r.set_scalar(&path, value)?;
                let scenario = Scenario::resolve(&r, RunMode::Sweep)?;
                let sol = solve_steady(&scenario, overrides, &raw.base_dir)?;
                Ok::<_, CliError>((sol.populations(), sol.fit.and_then(Result::ok)))
            })()
            .map_err(|e| e.to_string());
            SweepRow { value, result }
        })
        .collect();

    let width = rows
        .iter()
        .filter_map(|r| r.result.as_ref().ok().map(|(p, _)| p.len()))
        .max()
        .unwrap_or(0);
    let mut header: Vec<String> = ["value", "status", "beta_bar", "mu_bar", "consistency"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..width).map(|m| format!("p{m}")));
    header.push("message".into());
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = Csv::new(&header_refs);
    let mut notices = Vec::new();
    for row in rows {
        let mut cells = vec![num(row.value)];
        match row.result {
            Ok((pops, fit)) => {
                cells.push("ok".into());
                match fit {
                    Some(f) => cells.extend([num(f.beta_bar), num(f.mu_bar), num(f.consistency)]),
                    None => cells.extend([String::new(), String::new(), String::new()]),
                }
                cells.extend((0..width).map(|m| pops.get(m).map(|p| num(*p)).unwrap_or_default()));
                cells.push(String::new());
            }
            Err(e) => {
                notices.push(format!("{path} = {}: {e}", row.value));
                cells.push("error".into());
                cells.extend((0..3 + width).map(|_| String::new()));
                cells.push(cell(&e));
            }
        }
        csv.row(cells);
    }
    Ok(Outcome {
        files: vec![("sweep.csv".into(), csv.finish())],
        notices,
        failure: None,
    })
}

//! Subcommand implementations. Each returns a report envelope whose
//! `failures` list drives the process exit code; hard input errors are
//! returned as `CliError` instead (usage, exit 2).

use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use plasma_spike_core::balance::{fuzz_certificates, BalanceMode};
use plasma_spike_core::greens::DomainKernel;
use plasma_spike_core::kirchhoff::find_critical;
use plasma_spike_core::model::ProblemConfig;
use plasma_spike_core::pde::dump::{decode_field, encode_field};
use plasma_spike_core::pde::solve::{continue_in_mu, residual_inf, solve_semilinear, SolveOutcome};
use plasma_spike_core::pde::{build_grid, extract_spikes, seed_spike, GridField};
use plasma_spike_core::radial::shoot;
use plasma_spike_core::verify::{farfield_remainder, local_profile_error, mass_quantization_check};

use crate::manifest::{Envelope, Failure, RunManifest};
use crate::{CheckArg, CliError, DomainArg, ModeArg};

const SHOOT_TOL: f64 = 1e-6;

fn envelope(subcommand: &str, parameters: Value, report: Value, failures: Vec<Failure>) -> Envelope {
    Envelope {
        manifest: RunManifest::new(subcommand, parameters),
        report,
        failures,
    }
}

pub fn profile(n: usize, p: f64, csv: Option<&Path>) -> Result<Envelope, CliError> {
    let config = ProblemConfig::new(n, p)?;
    let profile = shoot(&config, SHOOT_TOL)?;
    let (value_gap, slope_gap) = profile.glue_gaps();
    let pohozaev = profile.pohozaev_residual();
    let mass_quadrature = profile.mass_quadrature();
    let mass_rel = (mass_quadrature - profile.mass).abs() / profile.mass;

    let mut failures = Vec::new();
    if value_gap != 0.0 {
        failures.push(Failure::flag(
            "glue_value_gap",
            format!("{value_gap:e} (exact zero required by construction)"),
        ));
    }
    failures.extend(Failure::check("glue_slope_gap", slope_gap.abs(), 1e-8));
    failures.extend(Failure::check("pohozaev_residual", pohozaev.abs(), 1e-6));
    failures.extend(Failure::check("mass_quadrature_rel_err", mass_rel, 1e-6));

    if let Some(path) = csv {
        let mut text = String::from("r,u,du\n");
        for k in 0..profile.sample_count() {
            let s = profile.sample(k);
            text.push_str(&format!("{},{},{}\n", s.r, s.u, s.du));
        }
        fs::write(path, text)?;
    }

    let report = json!({
        "config": config,
        "a_star": profile.a_star,
        "uprime1": profile.uprime1,
        "R0": profile.r0,
        "M_p0": profile.mass,
        "glue_value_gap": value_gap,
        "glue_slope_gap": slope_gap,
        "pohozaev_residual": pohozaev,
        "mass_quadrature": mass_quadrature,
        "w0_center": profile.w0_center(),
    });
    let parameters = json!({
        "N": n, "p": p,
        "csv": csv.map(|p| p.display().to_string()),
    });
    Ok(envelope("profile", parameters, report, failures))
}

pub fn greens(
    domain: DomainArg,
    check: CheckArg,
    samples: usize,
    n: usize,
    p: f64,
    seed: u64,
) -> Result<Envelope, CliError> {
    let config = ProblemConfig::new(n, p)?;
    let kernel = match domain {
        DomainArg::Ball => DomainKernel::unit_ball(config),
        DomainArg::Halfspace => DomainKernel::half_space(config),
    };
    if samples == 0 {
        return Err(CliError::Usage("--samples must be positive".into()));
    }
    if check == CheckArg::Rescale && domain != DomainArg::Ball {
        return Err(CliError::Usage(
            "the rescaling identity check needs --domain ball".into(),
        ));
    }

    let mut failures = Vec::new();
    let mut dirichlet = None;
    let mut symmetry = None;
    let mut min_green = None;
    let mut grad_rel = None;
    let mut harmonicity = None;
    let mut rescale = None;

    if check == CheckArg::All {
        let full = kernel.conformance_report(samples, seed)?;
        dirichlet = Some(full.dirichlet);
        symmetry = Some(full.symmetry);
        min_green = Some(full.min_green);
        grad_rel = Some(full.grad_rel);
        harmonicity = Some(full.harmonicity);
        if domain == DomainArg::Ball {
            rescale = Some(kernel.rescale_identity_residual(samples, seed)?);
        }
    } else {
        match check {
            CheckArg::Dirichlet => dirichlet = Some(kernel.dirichlet_residual(samples, seed)?),
            CheckArg::Symmetry => symmetry = Some(kernel.symmetry_residual(samples, seed)?),
            CheckArg::Gradient => grad_rel = Some(kernel.grad_fd_residual(samples, seed)?),
            CheckArg::Rescale => rescale = Some(kernel.rescale_identity_residual(samples, seed)?),
            CheckArg::All => unreachable!(),
        }
    }

    if let Some(v) = dirichlet {
        failures.extend(Failure::check("dirichlet", v, 1e-10));
    }
    if let Some(v) = symmetry {
        failures.extend(Failure::check("symmetry", v, 1e-10));
    }
    if let Some(v) = grad_rel {
        failures.extend(Failure::check("grad_rel", v, 1e-6));
    }
    if let Some(v) = rescale {
        failures.extend(Failure::check("rescale_identity", v, 1e-12));
    }
    if let Some(v) = min_green {
        if !(v > 0.0) {
            failures.push(Failure::flag(
                "green_positivity",
                format!("min sampled Green value {v:.6e} is not positive"),
            ));
        }
    }

    let report = json!({
        "config": config,
        "domain": domain_name(domain),
        "samples": samples,
        "dirichlet": dirichlet,
        "symmetry": symmetry,
        "min_green": min_green,
        "grad_rel": grad_rel,
        "harmonicity": harmonicity,
        "rescale_identity": rescale,
    });
    let parameters = json!({
        "N": n, "p": p,
        "domain": domain_name(domain),
        "check": check_name(check),
        "samples": samples,
        "seed": seed,
    });
    Ok(envelope("greens", parameters, report, failures))
}

#[allow(clippy::too_many_arguments)]
pub fn kr_critical(
    domain: DomainArg,
    k: usize,
    restarts: usize,
    weights: Option<&str>,
    tol: f64,
    n: usize,
    p: f64,
    seed: u64,
) -> Result<Envelope, CliError> {
    let config = ProblemConfig::new(n, p)?;
    let kernel = match domain {
        DomainArg::Ball => DomainKernel::unit_ball(config),
        DomainArg::Halfspace => DomainKernel::half_space(config),
    };
    let weights = match weights {
        None => vec![1.0; k],
        Some(text) => {
            let parsed: Result<Vec<f64>, _> = text.split(',').map(|t| t.trim().parse()).collect();
            let parsed =
                parsed.map_err(|_| CliError::Usage(format!("unparsable --weights `{text}`")))?;
            if parsed.len() != k {
                return Err(CliError::Usage(format!(
                    "--weights lists {} values but --k is {k}",
                    parsed.len()
                )));
            }
            parsed
        }
    };
    let search = find_critical(&kernel, &weights, restarts, tol, seed)?;

    let report = json!({
        "config": config,
        "domain": domain_name(domain),
        "weights": weights,
        "critical_points": search.critical_points,
        "restarts": search.restarts,
        "converged": search.converged,
        "escaped": search.escaped,
        "failed": search.failed,
    });
    let parameters = json!({
        "N": n, "p": p,
        "domain": domain_name(domain),
        "k": k,
        "restarts": restarts,
        "weights": report["weights"],
        "tol": tol,
        "seed": seed,
    });
    // An empty list is a legitimate outcome (some energies have no critical
    // point), so the search itself asserts nothing here.
    Ok(envelope("kr-critical", parameters, report, Vec::new()))
}

pub fn balance(
    mode: ModeArg,
    k: usize,
    fuzz: usize,
    n: usize,
    seed: u64,
) -> Result<Envelope, CliError> {
    let mode = match mode {
        ModeArg::Interior => BalanceMode::Interior,
        ModeArg::Boundary => BalanceMode::Boundary,
    };
    let tally = fuzz_certificates(mode, n, k, fuzz, seed)?;

    let mut failures = Vec::new();
    if tally.violations > 0 {
        failures.push(Failure::flag(
            "certificate_soundness",
            format!("{} of {} random configurations violated the certified bound", tally.violations, tally.trials),
        ));
    }
    if !(tally.min_certified_bound > 0.0) {
        failures.push(Failure::flag(
            "certificate_positivity",
            format!("smallest certified bound {:.6e} is not positive", tally.min_certified_bound),
        ));
    }

    let report = serde_json::to_value(&tally)?;
    let parameters = json!({
        "N": n,
        "mode": mode_name(mode),
        "k": k,
        "fuzz": fuzz,
        "seed": seed,
    });
    Ok(envelope("balance", parameters, report, failures))
}

pub fn solve(
    mu: f64,
    res: usize,
    seed_center: &str,
    dump: Option<&Path>,
    tol: f64,
    max_iter: usize,
    p: f64,
) -> Result<Envelope, CliError> {
    let config = ProblemConfig::new(3, p)?;
    let profile = shoot(&config, SHOOT_TOL)?;
    let grid = build_grid(res)?;
    let center = parse_center(seed_center)?;

    // Seed directly when the spike is comfortably resolvable; otherwise seed
    // at the largest comfortable mu and continue upward (the warm-start
    // ladder handles the under-resolved regime).
    let three_h = 3.0 * grid.h();
    let mu_max = (profile.r0 / three_h) * (profile.r0 / three_h);
    let outcome = if !(mu > 0.0) || !mu.is_finite() || mu <= 0.64 * mu_max {
        let seeded = seed_spike(&grid, center, &profile, mu)?;
        solve_semilinear(&seeded, &config, tol, max_iter)?
    } else {
        let mu_seed = 0.64 * mu_max;
        let seeded = seed_spike(&grid, center, &profile, mu_seed)?;
        let run = continue_in_mu(&seeded, &config, &profile, &[mu_seed, mu], tol, max_iter)?;
        match run.failure {
            None => SolveOutcome::Converged(run.fields.into_iter().last().expect("final field")),
            Some(fail) => SolveOutcome::Diverged {
                iterations: fail.iterations,
                residual: fail.residual,
            },
        }
    };

    let mut failures = Vec::new();
    let (outcome_name, field): (&str, Option<GridField>) = match outcome {
        SolveOutcome::Converged(f) => ("converged", Some(f)),
        SolveOutcome::TrivialBranch(f) => {
            failures.push(Failure::flag(
                "nontrivial_branch",
                "solve collapsed to the vanishing branch (max v < 1)".into(),
            ));
            ("trivial", Some(f))
        }
        SolveOutcome::Diverged {
            iterations,
            residual,
        } => {
            failures.push(Failure::flag(
                "convergence",
                format!("diverged after {iterations} iterations, residual {residual:.3e}"),
            ));
            ("diverged", None)
        }
    };

    let mut rinf = None;
    let mut spikes = Value::Null;
    let mut dump_path = None;
    if let Some(field) = &field {
        let r = residual_inf(field, &config);
        rinf = Some(r);
        if outcome_name == "converged" {
            failures.extend(Failure::check("residual_inf", r, tol));
        }
        spikes = serde_json::to_value(extract_spikes(field, &config, &profile, 0.1)?)?;
        if let Some(path) = dump {
            fs::write(path, encode_field(field))?;
            dump_path = Some(path.display().to_string());
        }
    }

    let report = json!({
        "config": config,
        "mu": mu,
        "res": res,
        "seed_center": center,
        "outcome": outcome_name,
        "residual_inf": rinf,
        "spikes": spikes,
        "dump": dump_path,
    });
    let parameters = json!({
        "p": p,
        "mu": mu,
        "res": res,
        "seed_center": center,
        "dump": dump.map(|d| d.display().to_string()),
        "tol": tol,
        "max_iter": max_iter,
    });
    Ok(envelope("solve", parameters, report, failures))
}

pub fn verify(
    field_path: &Path,
    all: bool,
    radius: f64,
    sigma: f64,
    p: f64,
) -> Result<Envelope, CliError> {
    if !all {
        return Err(CliError::Usage(
            "only --all verification is implemented; drop the flag or pass --all".into(),
        ));
    }
    let bytes = fs::read(field_path)?;
    let field = decode_field(&bytes)?;
    let config = ProblemConfig::new(3, p)?;
    let profile = shoot(&config, SHOOT_TOL)?;
    let kernel = DomainKernel::unit_ball(config);
    let w0c = profile.w0_center();

    let rinf = residual_inf(&field, &config);
    let spikes = extract_spikes(&field, &config, &profile, sigma)?;
    let (mass, expected_mass, z) = mass_quantization_check(&field, &spikes, &profile);
    let eps_r0 = field.epsilon() * profile.r0;

    let mut failures = Vec::new();
    let mut checks = serde_json::Map::new();
    checks.insert("residual_inf".into(), json!(rinf));
    checks.insert("spike_count".into(), json!(z));
    checks.insert(
        "quantization".into(),
        json!({
            "measured_mass": mass,
            "expected_mass": expected_mass,
            "unit_mass": profile.mass,
        }),
    );

    if z > 0 {
        let radius_worst = spikes
            .components
            .iter()
            .map(|c| c.bounding_radius)
            .fold(0.0f64, f64::max);
        let gap_cells = (radius_worst - eps_r0).abs() / field.grid.h();
        checks.insert(
            "plasma_radius".into(),
            json!({
                "measured": radius_worst,
                "eps_r0": eps_r0,
                "gap_cells": gap_cells,
            }),
        );
        failures.extend(Failure::check("plasma_radius_gap_cells", gap_cells, 1.0));

        let quant_rel = (mass - expected_mass).abs() / expected_mass;
        failures.extend(Failure::check("quantization_rel_err", quant_rel, 0.1));

        let far = farfield_remainder(&field, &spikes, &profile, &kernel, radius)?;
        let ratio = far.sup_remainder / far.leading_scale;
        checks.insert(
            "farfield".into(),
            json!({
                "radius": radius,
                "sup_remainder": far.sup_remainder,
                "sup_grad_remainder": far.sup_grad_remainder,
                "leading_scale": far.leading_scale,
                "ratio": ratio,
            }),
        );
        failures.extend(Failure::check("farfield_ratio", ratio, 0.1));

        let prof = local_profile_error(&field, &spikes.centers[0], &profile, 2.0 * profile.r0)?;
        checks.insert(
            "local_profile".into(),
            json!({
                "sup_error": prof,
                "fraction_of_w0_center": prof / w0c,
            }),
        );
        failures.extend(Failure::check("profile_fraction_of_w0", prof / w0c, 0.05));
    }

    let report = json!({
        "config": config,
        "mu": field.mu,
        "res": field.grid.res(),
        "checks": Value::Object(checks),
        "spikes": spikes,
    });
    let parameters = json!({
        "p": p,
        "field": field_path.display().to_string(),
        "radius": radius,
        "sigma": sigma,
    });
    Ok(envelope("verify", parameters, report, failures))
}

pub fn report_scan(out_dir: &Path) -> Result<Envelope, CliError> {
    let mut files: Vec<_> = match fs::read_dir(out_dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect(),
        Err(_) => Vec::new(), // missing store: nothing to scan
    };
    files.sort();

    let mut failures = Vec::new();
    let mut invalid = Vec::new();
    let mut valid = 0usize;
    for path in &files {
        let name = path.display().to_string();
        let verdict = fs::read_to_string(path)
            .map_err(CliError::from)
            .and_then(|text| Ok(serde_json::from_str::<Value>(&text)?))
            .and_then(|doc| crate::validate_envelope(&doc));
        match verdict {
            Ok(()) => valid += 1,
            Err(err) => {
                failures.push(Failure::flag("schema", format!("{name}: {err}")));
                invalid.push(json!({"file": name, "error": err.to_string()}));
            }
        }
    }

    let report = json!({
        "scanned": files.len(),
        "valid": valid,
        "invalid": invalid,
    });
    let parameters = json!({ "dir": out_dir.display().to_string() });
    Ok(envelope("report", parameters, report, failures))
}

fn parse_center(text: &str) -> Result<[f64; 3], CliError> {
    let parts: Result<Vec<f64>, _> = text.split(',').map(|t| t.trim().parse()).collect();
    let parts = parts.map_err(|_| CliError::Usage(format!("unparsable --seed-center `{text}`")))?;
    if parts.len() != 3 {
        return Err(CliError::Usage(format!(
            "--seed-center needs 3 coordinates, got {}",
            parts.len()
        )));
    }
    Ok([parts[0], parts[1], parts[2]])
}

fn domain_name(domain: DomainArg) -> &'static str {
    match domain {
        DomainArg::Ball => "ball",
        DomainArg::Halfspace => "halfspace",
    }
}

fn check_name(check: CheckArg) -> &'static str {
    match check {
        CheckArg::All => "all",
        CheckArg::Dirichlet => "dirichlet",
        CheckArg::Symmetry => "symmetry",
        CheckArg::Gradient => "gradient",
        CheckArg::Rescale => "rescale",
    }
}

fn mode_name(mode: BalanceMode) -> &'static str {
    match mode {
        BalanceMode::Interior => "interior",
        BalanceMode::Boundary => "boundary",
    }
}

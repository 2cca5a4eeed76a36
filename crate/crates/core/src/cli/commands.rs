use std::fs;
use std::io::BufReader;
use std::path::Path;
use std::sync::Arc;

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::{csv, density_csv, fmt_real, key_values, read_indexed_csv, write_atomic};
use crate::mixture::{
    entropy as weight_entropy, gibbs_weights, level_normalization, max_entropy, mean_energy,
    solve_beta, MixedProcess, StationaryProcess, WeightSequence,
};
use crate::observable::{Observable, Region};
use crate::operator::{default_family, StatOperator, TimeDepStatOperator};
use crate::process::{schroedinger_solve, LevelProcess};
use crate::sampler::{
    goodness_of_fit, sample_level_paths, sample_mixture_paths, sample_stationary_pinned,
    TrajectoryBatch,
};
use crate::spectral::{Domain, SpectralBasis};

pub(super) type CommandFn = fn(&RunConfig, &Path) -> Result<bool>;

pub(super) const SPECTRUM_KEYS: &[&str] = &[];
pub(super) const SIMULATE_KEYS: &[&str] = &[
    "process",
    "level",
    "times",
    "paths",
    "seed",
    "bins",
    "alpha",
    "weights",
    "weights_file",
    "probe_radius",
    "probe_time",
];
pub(super) const ENTROPY_KEYS: &[&str] = &["lambda", "solver_tol", "level_count"];
pub(super) const VERIFY_KEYS: &[&str] = &["level", "perturb", "probe_t"];
pub(super) const BRIDGE_KEYS: &[&str] = &["mu0_file", "mut_file", "solver_tol", "max_iter"];

/// Writes the manifest, then runs the command.
pub(super) fn execute(name: &str, config: &RunConfig, command: CommandFn) -> Result<bool> {
    let out = config.out_dir();
    fs::create_dir_all(&out)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", out.display())))?;
    let manifest = format!(
        "command={name}\nversion={}\nconfig_sha256={}\n{}",
        env!("CARGO_PKG_VERSION"),
        config.hash(),
        config.resolved()
    );
    write_atomic(&out.join("manifest.txt"), manifest.as_bytes())?;
    command(config, &out)
}

fn write(out: &Path, name: &str, text: &str) -> Result<()> {
    write_atomic(&out.join(name), text.as_bytes())
}

pub(super) fn spectrum(config: &RunConfig, out: &Path) -> Result<bool> {
    let basis = config.basis()?;
    let text = csv(
        "level,lambda,normalizer",
        basis.levels().iter().map(|l| {
            [
                l.index().to_string(),
                fmt_real(l.eigenvalue()),
                fmt_real(l.normalizer()),
            ]
        }),
    );
    write(out, "spectrum.csv", &text)?;
    print!("{text}");
    Ok(true)
}

fn weights_from(config: &RunConfig) -> Result<WeightSequence> {
    if let Some(path) = config.path("weights_file") {
        let file = fs::File::open(&path)
            .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
        return WeightSequence::from_csv(BufReader::new(file));
    }
    let w = config
        .reals("weights")?
        .ok_or_else(|| Error::Config("mixtures need `weights` or `weights_file`".into()))?;
    WeightSequence::new(w)
}

pub(super) fn simulate(config: &RunConfig, out: &Path) -> Result<bool> {
    let basis = config.basis()?;
    let kernel = config.kernel(Arc::clone(&basis))?;
    let horizon = config.horizon()?;
    let kind = config.string("process", "level");
    let n_paths = config.count("paths", 10_000)?;
    let seed = config.seed("seed", 0)?;
    let bins = config.count("bins", 10)?;
    let alpha = config.real("alpha", 0.01)?;
    let default_times = if kind == "stationary" {
        vec![horizon / 8.0, horizon / 2.0]
    } else {
        (0..=4).map(|k| horizon * k as f64 / 4.0).collect()
    };
    let times = config.reals("times")?.unwrap_or(default_times);

    type Density = Box<dyn Fn(f64, f64) -> f64>;
    let (batch, density): (TrajectoryBatch, Density) = match kind.as_str() {
        "level" => {
            let p = LevelProcess::positive_example(
                Arc::clone(&kernel),
                config.count("level", 0)?,
                horizon,
            )?;
            let batch = sample_level_paths(&p, &times, n_paths, seed)?;
            (batch, Box::new(move |x, t| p.marginal_density(x, t)))
        }
        "mixture" => {
            let w = weights_from(config)?;
            let family = (0..w.len())
                .map(|m| LevelProcess::positive_example(Arc::clone(&kernel), m, horizon))
                .collect::<Result<Vec<_>>>()?;
            let batch = sample_mixture_paths(&family, &w, &times, n_paths, seed)?;
            let mix = MixedProcess::new(family, w)?;
            (batch, Box::new(move |x, t| mix.marginal_density(x, t)))
        }
        "stationary" => {
            let batch = sample_stationary_pinned(&kernel, horizon, &times, n_paths, seed)?;
            let s = StationaryProcess::new(Arc::clone(&kernel), horizon)?;
            (batch, Box::new(move |x, _| s.marginal_density(x)))
        }
        other => {
            return Err(Error::Config(format!(
                "`process`: unknown kind `{other}` (level, mixture, stationary)"
            )))
        }
    };
    write(out, "trajectories.csv", &batch.to_csv())?;

    let mut report = vec![
        ("process", kind.clone()),
        ("descriptor", batch.descriptor.clone()),
        ("paths", n_paths.to_string()),
        ("seed", seed.to_string()),
    ];
    let mut lines = String::new();
    let mut all_pass = true;
    for (k, t) in times.iter().enumerate() {
        let fit = goodness_of_fit(&batch, &basis, |x| density(x, *t), *t, bins)?;
        let pass = fit.passes(alpha);
        all_pass &= pass;
        for (key, value) in [
            ("time", fmt_real(*t)),
            ("statistic", fmt_real(fit.statistic)),
            ("dof", fit.dof.to_string()),
            ("p_value", fmt_real(fit.p_value)),
            ("pass", pass.to_string()),
        ] {
            lines.push_str(&format!("fit.{k}.{key}={value}\n"));
        }
    }
    if let Some(radius) = config
        .reals("probe_radius")?
        .and_then(|v| v.first().copied())
    {
        let t = config.real("probe_time", times[0])?;
        let band = Region::band(basis.bounds().0, radius)?;
        let (p, se) = batch.fraction(t, band)?;
        let expected = band.integrate_area(&basis, |x| density(x, t));
        let pass = (p - expected).abs() <= 3.0 * se;
        all_pass &= pass;
        for (key, value) in [
            ("radius", fmt_real(radius)),
            ("time", fmt_real(t)),
            ("empirical", fmt_real(p)),
            ("standard_error", fmt_real(se)),
            ("expected", fmt_real(expected)),
            ("pass", pass.to_string()),
        ] {
            lines.push_str(&format!("probe.{key}={value}\n"));
        }
    }
    report.push(("all_pass", all_pass.to_string()));
    let text = key_values(report.iter().map(|(k, v)| (*k, v.clone()))) + &lines;
    write(out, "report.txt", &text)?;
    print!("{text}");
    Ok(all_pass)
}

pub(super) fn entropy(config: &RunConfig, out: &Path) -> Result<bool> {
    let basis = config.basis()?;
    let target = config.real_required("lambda")?;
    let tol = config.real("solver_tol", 1e-12)?;
    let level_count = config.count("level_count", basis.level_count())?;
    let params = solve_beta(&basis, target, tol, level_count)?;
    let s_max = max_entropy(&params, &basis, level_count)?;
    let weights = gibbs_weights(&basis, params.beta, level_count)?;
    let residual = mean_energy(&basis, params.beta, level_count)? - target;
    let direct = weight_entropy(&weights);
    let text = params.to_key_values(s_max)
        + &key_values([
            ("residual", fmt_real(residual)),
            ("entropy_direct", fmt_real(direct)),
            ("level_count", level_count.to_string()),
        ]);
    write(out, "gibbs.txt", &text)?;
    write(out, "weights.csv", &weights.to_csv())?;
    print!("{text}");
    Ok(true)
}

/// One row of the verification table.
struct Check {
    name: String,
    value: f64,
    tolerance: f64,
    status: &'static str,
}

impl Check {
    fn measured(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance,
            status: if value <= tolerance { "pass" } else { "fail" },
        }
    }

    fn from_result(name: &str, tolerance: f64, value: Result<f64>) -> Self {
        match value {
            Ok(v) => Check::measured(name, v, tolerance),
            Err(e) => {
                eprintln!("check {name}: {e}");
                Check {
                    name: name.into(),
                    value: f64::NAN,
                    tolerance,
                    status: "fail",
                }
            }
        }
    }
}

/// The configured basis with `f_1` replaced by `f_1 + eps f_0`, tabulated on
/// 801 equispaced points.
fn perturbed(basis: &SpectralBasis, eps: f64) -> Result<SpectralBasis> {
    let (lo, hi) = basis.bounds();
    let nodes: Vec<f64> = (0..=800)
        .map(|i| lo + (hi - lo) * i as f64 / 800.0)
        .collect();
    let mut pairs: Vec<(f64, Vec<f64>)> = basis
        .levels()
        .iter()
        .map(|l| (l.eigenvalue(), nodes.iter().map(|x| l.eval(*x)).collect()))
        .collect();
    if pairs.len() > 1 {
        let f0 = pairs[0].1.clone();
        for (v, g) in pairs[1].1.iter_mut().zip(&f0) {
            *v += eps * g;
        }
    }
    SpectralBasis::from_tabulated_unchecked(basis.domain(), nodes, pairs)
}

pub(super) fn verify(config: &RunConfig, out: &Path) -> Result<bool> {
    let mut basis = config.basis()?;
    let eps = config.real("perturb", 0.0)?;
    if eps != 0.0 {
        basis = Arc::new(perturbed(&basis, eps)?);
    }
    let kernel = config.kernel(Arc::clone(&basis))?;
    let horizon = config.horizon()?;
    let level = config.count("level", 1)?.min(kernel.truncation() - 1);
    let ortho_tol = if matches!(basis.domain(), Domain::Imported) || eps != 0.0 {
        crate::spectral::IMPORT_ORTHONORMALITY_TOL
    } else {
        crate::spectral::BUILTIN_ORTHONORMALITY_TOL
    };
    let (lo, hi) = basis.bounds();
    let probes: Vec<f64> = (0..5)
        .map(|k| lo + (hi - lo) * (k as f64 + 0.5) / 5.0)
        .collect();
    let quarter: Vec<f64> = (0..5).map(|k| horizon * k as f64 / 4.0).collect();
    let mut checks = Vec::new();

    checks.push(Check::measured(
        "orthonormality",
        basis.orthonormality_residual().0,
        ortho_tol,
    ));
    checks.push(Check::from_result(
        "partition_trace_identity",
        1e-8,
        (|| Ok((kernel.partition_function(horizon)? - kernel.diagonal_integral(horizon)?).abs()))(),
    ));
    let processes = [0, level]
        .iter()
        .map(|m| LevelProcess::positive_example(Arc::clone(&kernel), *m, horizon))
        .collect::<Result<Vec<_>>>();
    checks.push(Check::from_result(
        "probability_conservation",
        1e-8,
        processes.as_ref().map_err(clone_err).and_then(|ps| {
            let mut worst = 0.0_f64;
            for p in ps {
                for t in &quarter {
                    worst = worst.max((p.conservation(*t)? - 1.0).abs());
                }
            }
            Ok(worst)
        }),
    ));
    checks.push(Check::from_result(
        "transition_normalization",
        1e-6,
        processes.as_ref().map_err(clone_err).map(|ps| {
            let p = &ps[ps.len() - 1];
            let (s, t) = (0.25 * horizon, 0.75 * horizon);
            let mut worst = 0.0_f64;
            for x in &probes {
                let f =
                    basis.integrate_area(|y| p.forward_density(*x, s, y, t).unwrap_or(f64::NAN));
                let b =
                    basis.integrate_area(|y| p.backward_density(*x, t, y, s).unwrap_or(f64::NAN));
                worst = worst.max((f - 1.0).abs()).max((b - 1.0).abs());
            }
            worst
        }),
    ));
    checks.push(Check::from_result(
        "chapman_kolmogorov",
        1e-6,
        (|| {
            let (s, t) = (0.3 * horizon, 0.45 * horizon);
            let mut worst = 0.0_f64;
            for x in &probes {
                for y in &probes {
                    let composed = basis.integrate_area(|z| {
                        kernel.eval(*x, s, z).unwrap_or(f64::NAN)
                            * kernel.eval(z, t, *y).unwrap_or(f64::NAN)
                    });
                    worst = worst.max((composed - kernel.eval(*x, s + t, *y)?).abs());
                }
            }
            Ok(worst)
        })(),
    ));
    checks.push(Check::from_result(
        "level_normalization",
        1e-6,
        (|| {
            let top = 3.min(kernel.truncation() - 1);
            let mut worst = 0.0_f64;
            for m in 0..=top {
                worst = worst.max((level_normalization(&kernel, m, horizon)? - 1.0).abs());
            }
            Ok(worst)
        })(),
    ));
    let count = 3.min(kernel.truncation());
    let weights = WeightSequence::new(match count {
        1 => vec![1.0],
        2 => vec![0.6, 0.4],
        _ => vec![0.5, 0.3, 0.2],
    })?;
    let family = default_family(&kernel, count, horizon);
    checks.push(Check::from_result(
        "biorthonormality",
        1e-8,
        family.as_ref().map_err(clone_err).and_then(|fam| {
            let mut worst = 0.0_f64;
            for t in [0.0, 0.5 * horizon, horizon] {
                worst = worst.max(match TimeDepStatOperator::new(fam, weights.clone(), t) {
                    Ok(r) => r.biorthonormality(),
                    Err(Error::NotBiorthonormal { residual, .. }) => residual,
                    Err(e) => return Err(e),
                });
            }
            Ok(worst)
        }),
    ));
    checks.push(Check::from_result(
        "timedep_trace_expectation",
        1e-8,
        family.as_ref().map_err(clone_err).and_then(|fam| {
            let mix = MixedProcess::new(fam.clone(), weights.clone())?;
            let b = Observable::radius_squared();
            let mut worst = 0.0_f64;
            for t in &quarter {
                let r = TimeDepStatOperator::new(fam, weights.clone(), *t)?;
                worst = worst
                    .max((r.trace_rb(&b) - mix.expectation(&b, *t)?).abs())
                    .max((r.trace() - 1.0).abs());
            }
            Ok(worst)
        }),
    ));
    checks.push(Check::from_result(
        "gibbs_trace_expectation",
        1e-8,
        (|| {
            let w = gibbs_weights(&basis, horizon, kernel.truncation())?;
            let r = StatOperator::new(Arc::clone(&basis), w)?;
            let s = StationaryProcess::new(Arc::clone(&kernel), horizon)?;
            let mid = 0.5 * (lo + hi);
            let mut worst = (r.trace() - 1.0).abs();
            for b in [
                Observable::one(),
                Observable::radius_squared(),
                Observable::indicator(Region::band(lo, mid)?),
            ] {
                worst = worst.max((r.trace_rb(&b) - s.expectation(&b)).abs());
            }
            Ok(worst)
        })(),
    ));
    let probe_t = config.real("probe_t", 0.5 * kernel.t_min())?;
    checks.push(match kernel.eval(probes[0], probe_t, probes[1]) {
        Err(e @ Error::BelowMinimumTime { .. }) => {
            eprintln!("probe at t = {probe_t} refused: {e}");
            Check {
                name: "below_t_min_probe".into(),
                value: probe_t,
                tolerance: kernel.t_min(),
                status: "refused",
            }
        }
        Ok(_) => Check {
            name: "below_t_min_probe".into(),
            value: probe_t,
            tolerance: kernel.t_min(),
            status: "pass",
        },
        Err(e) => Check::from_result("below_t_min_probe", kernel.t_min(), Err(e)),
    });

    let table = csv(
        "check,value,tolerance,status",
        checks.iter().map(|c| {
            [
                c.name.clone(),
                fmt_real(c.value),
                fmt_real(c.tolerance),
                c.status.to_string(),
            ]
        }),
    );
    write(out, "verify.csv", &table)?;
    for c in &checks {
        println!(
            "{:<28} {:>24} {:>10.1e}  {}",
            c.name,
            fmt_real(c.value),
            c.tolerance,
            c.status
        );
    }
    Ok(checks.iter().all(|c| c.status != "fail"))
}

fn clone_err(e: &Error) -> Error {
    Error::Invariant(e.to_string())
}

fn read_density(path: &Path) -> Result<Vec<f64>> {
    let file = fs::File::open(path)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
    read_indexed_csv(BufReader::new(file), "node_index,value")
}

pub(super) fn bridge(config: &RunConfig, out: &Path) -> Result<bool> {
    let basis = config.basis()?;
    let kernel = config.kernel(Arc::clone(&basis))?;
    let horizon = config.horizon()?;
    let grid = csv(
        "node_index,coord,weight",
        basis
            .nodes()
            .iter()
            .zip(basis.area_weights())
            .enumerate()
            .map(|(i, (x, w))| [i.to_string(), fmt_real(*x), fmt_real(*w)]),
    );
    write(out, "grid.csv", &grid)?;
    let need = |key: &str| {
        config
            .path(key)
            .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    };
    let mu0 = read_density(&need("mu0_file")?)?;
    let mu_t = read_density(&need("mut_file")?)?;
    let tol = config.real("solver_tol", 1e-10)?;
    let max_iter = config.count("max_iter", 1000)?;
    let g = kernel.grid_matrix(horizon)?;
    let solution = schroedinger_solve(&g, basis.area_weights(), &mu0, &mu_t, tol, max_iter)?;
    write(out, "phi.csv", &density_csv(&solution.phi))?;
    write(out, "psi.csv", &density_csv(&solution.psi))?;
    write(
        out,
        "residuals.csv",
        &csv(
            "iteration,residual",
            solution
                .residuals
                .iter()
                .enumerate()
                .map(|(k, r)| [(k + 1).to_string(), fmt_real(*r)]),
        ),
    )?;
    let text = key_values([
        ("iterations", solution.iterations.to_string()),
        (
            "residual",
            fmt_real(solution.residuals.last().copied().unwrap_or(f64::NAN)),
        ),
    ]);
    write(out, "report.txt", &text)?;
    print!("{text}");
    Ok(true)
}

//! The four commands. Each returns its output as text; the binary decides
//! where it goes.

use geopid::controller::{certify_geometric, GainCertificate, Gains, LyapunovCoeffs};
use geopid::dynamics::{integrate, ClosedLoopState, Trajectory};
use geopid::error::GeoError;
use geopid::morse::{estimate_lambda_mu, find_d_critical, LambdaMu};
use geopid::systems::DEFAULT_CRITICAL_TOL;
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, Model, SystemConfig};
use crate::output::{float, float_list, svg_plot, Csv, KeyValues};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type CliResult<T> = Result<T, CliError>;

/// Command-line values that replace config entries.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub kp: Option<f64>,
    pub kd: Option<f64>,
    pub ki: Option<f64>,
    pub kappa: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut SystemConfig) -> CliResult<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(CliError::InvalidArgument(format!(
                    "--{name} must be positive, got {v}"
                )))
            }
        };
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(v)
            } else {
                Err(CliError::InvalidArgument(format!(
                    "--{name} must be finite"
                )))
            }
        };
        if let Some(v) = self.dt {
            cfg.sim.dt = positive("dt", v)?;
        }
        if let Some(v) = self.t_end {
            cfg.sim.t_end = positive("t-end", v)?;
        }
        if let Some(v) = self.kappa {
            cfg.gains.kappa = positive("kappa", v)?;
        }
        for (name, src, dst) in [
            ("kp", self.kp, &mut cfg.gains.kp),
            ("kd", self.kd, &mut cfg.gains.kd),
            ("ki", self.ki, &mut cfg.gains.ki),
        ] {
            if let Some(v) = src {
                *dst = finite(name, v)?;
            }
        }
        Ok(())
    }
}

fn gains_of(cfg: &SystemConfig) -> Gains<f64> {
    Gains::new(cfg.gains.kp, cfg.gains.kd, cfg.gains.ki)
}

/// Sampled λ and μ over the config region.
pub fn sampled_bounds(cfg: &SystemConfig, model: &Model) -> CliResult<LambdaMu<f64>> {
    let region = model.sampling_region(&cfg.region)?;
    Ok(estimate_lambda_mu(
        &model.morse,
        &model.system.metric,
        &model.system.dist,
        &region,
    )?)
}

/// λ and μ fed to the certificate: explicit values first, then config
/// reference values, then sampled estimates.
struct Bounds {
    lambda: f64,
    mu: f64,
    source: &'static str,
}

fn choose_bounds(
    cfg: &SystemConfig,
    sampled: &Result<LambdaMu<f64>, String>,
    lambda: Option<f64>,
    mu: Option<f64>,
) -> Result<Bounds, String> {
    if let (Some(l), Some(m)) = (lambda.or(cfg.gains.lambda), mu.or(cfg.gains.mu)) {
        let source = if lambda.is_some() || mu.is_some() {
            "argument"
        } else {
            "reference"
        };
        return Ok(Bounds {
            lambda: l,
            mu: m,
            source,
        });
    }
    let s = sampled.as_ref().map_err(Clone::clone)?;
    Ok(Bounds {
        lambda: lambda.or(cfg.gains.lambda).unwrap_or(s.lambda),
        mu: mu.or(cfg.gains.mu).unwrap_or(s.mu),
        source: "sampled",
    })
}

fn certificate_text(cert: &Result<GainCertificate<f64>, String>) -> String {
    match cert {
        Ok(c) if c.verdict.is_pass() => "PASS".into(),
        Ok(c) => format!("FAIL ({})", c.violations().join("; ")),
        Err(e) => format!("unavailable ({e})"),
    }
}

/// Everything `sim` reports besides the trajectory itself.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub system: String,
    pub gains: Gains<f64>,
    pub kappa: f64,
    pub dt: f64,
    pub t_end: f64,
    pub steps: usize,
    pub final_g: Vec<f64>,
    pub final_u: Vec<f64>,
    pub final_w: Vec<f64>,
    pub max_constraint_residual: f64,
    pub max_integral_residual: f64,
    pub w_monotone: bool,
    pub max_w_increase: f64,
    pub final_measure: f64,
    pub converged: bool,
    pub convergence_time: Option<f64>,
    pub certificate: String,
    pub bounds_source: String,
    pub lambda_used: Option<f64>,
    pub mu_used: Option<f64>,
    pub sampled: Result<(f64, f64), String>,
    pub reference: (Option<f64>, Option<f64>),
}

fn opt_float(v: Option<f64>) -> String {
    v.map_or_else(|| "none".into(), float)
}

impl RunSummary {
    pub fn to_text(&self) -> String {
        let mut kv = KeyValues::default();
        kv.push("system", &self.system);
        kv.push("kp", float(self.gains.kp));
        kv.push("kd", float(self.gains.kd));
        kv.push("ki", float(self.gains.ki));
        kv.push("kappa", float(self.kappa));
        kv.push("dt", float(self.dt));
        kv.push("t_end", float(self.t_end));
        kv.push("steps", self.steps);
        kv.push("final_g", float_list(&self.final_g));
        kv.push("final_u", float_list(&self.final_u));
        kv.push("final_w", float_list(&self.final_w));
        kv.push(
            "max_constraint_residual",
            float(self.max_constraint_residual),
        );
        kv.push("max_integral_residual", float(self.max_integral_residual));
        kv.push("w_monotone", self.w_monotone);
        kv.push("max_w_increase", float(self.max_w_increase));
        kv.push("final_convergence_measure", float(self.final_measure));
        kv.push("converged", self.converged);
        kv.push("convergence_time", opt_float(self.convergence_time));
        kv.push("certificate", &self.certificate);
        kv.push("certificate_bounds", &self.bounds_source);
        kv.push("lambda_used", opt_float(self.lambda_used));
        kv.push("mu_used", opt_float(self.mu_used));
        match &self.sampled {
            Ok((l, m)) => {
                kv.push("lambda_sampled", float(*l));
                kv.push("mu_sampled", float(*m));
            }
            Err(e) => {
                kv.push("lambda_sampled", format!("unavailable ({e})"));
                kv.push("mu_sampled", "unavailable");
            }
        }
        kv.push("lambda_reference", opt_float(self.reference.0));
        kv.push("mu_reference", opt_float(self.reference.1));
        kv.push(
            "lyapunov_coefficients",
            "alpha = ki/kd^2, beta = ki/kd, gamma = (ki^2 + ki kp kd)/kd^2, sigma = 2 kappa ki (Euclidean design reused)",
        );
        kv.finish()
    }
}

pub struct SimOutput {
    pub csv: String,
    pub summary: RunSummary,
    pub svg: Option<String>,
}

fn simulate(cfg: &SystemConfig, model: &Model) -> CliResult<Trajectory<f64>> {
    let gains = gains_of(cfg);
    let coeffs = LyapunovCoeffs::design(&gains, cfg.gains.kappa);
    let s0 = ClosedLoopState::at_rest(model.initial.clone(), model.system.rank());
    Ok(integrate(
        &model.system,
        &model.morse,
        &gains,
        &coeffs,
        &s0,
        cfg.sim.t_end,
        cfg.sim.dt,
    )?)
}

fn summarize(
    cfg: &SystemConfig,
    traj: &Trajectory<f64>,
    sampled: &Result<LambdaMu<f64>, String>,
    bounds: &Result<Bounds, String>,
) -> RunSummary {
    let gains = gains_of(cfg);
    let cert = bounds.as_ref().map_err(Clone::clone).and_then(|b| {
        certify_geometric(&gains, b.lambda, b.mu, cfg.gains.kappa).map_err(|e| e.to_string())
    });
    let last = traj.final_state();
    RunSummary {
        system: cfg.name().to_string(),
        gains,
        kappa: cfg.gains.kappa,
        dt: cfg.sim.dt,
        t_end: cfg.sim.t_end,
        steps: traj.len() - 1,
        final_g: last.g.coords().iter().copied().collect(),
        final_u: last.u.iter().copied().collect(),
        final_w: last.w.iter().copied().collect(),
        max_constraint_residual: traj.max_constraint_residual(),
        max_integral_residual: traj.max_integral_residual(),
        w_monotone: traj.lyapunov_non_increasing(1e-9),
        max_w_increase: traj.max_lyapunov_increase(),
        final_measure: traj.convergence_measure(traj.len() - 1),
        converged: traj.convergence_time().is_some(),
        convergence_time: traj.convergence_time(),
        certificate: certificate_text(&cert),
        bounds_source: bounds
            .as_ref()
            .map_or_else(|e| format!("unavailable ({e})"), |b| b.source.to_string()),
        lambda_used: bounds.as_ref().ok().map(|b| b.lambda),
        mu_used: bounds.as_ref().ok().map(|b| b.mu),
        sampled: sampled
            .as_ref()
            .map(|s| (s.lambda, s.mu))
            .map_err(Clone::clone),
        reference: (cfg.gains.lambda, cfg.gains.mu),
    }
}

fn trajectory_csv(model: &Model, traj: &Trajectory<f64>) -> String {
    let k = model.system.rank();
    let n = model.system.dim();
    let mut header = vec!["t".to_string()];
    header.extend(model.coordinate_names.iter().cloned());
    header.extend((1..=k).map(|i| format!("u{i}")));
    header.extend((1..=k).map(|i| format!("w{i}")));
    header.push("residual".into());
    header.push("W".into());
    header.extend((1..=n).map(|i| format!("f{i}")));
    let mut csv = Csv::new(&header);
    let mut row = Vec::with_capacity(header.len());
    for ((t, s), d) in traj.times.iter().zip(&traj.states).zip(&traj.diagnostics) {
        row.clear();
        row.push(*t);
        row.extend(s.g.coords().iter());
        row.extend(s.u.iter());
        row.extend(s.w.iter());
        row.push(d.constraint_residual);
        row.push(d.lyapunov);
        row.extend(d.force.iter());
        csv.row_floats(&row);
    }
    csv.finish()
}

fn trajectory_svg(cfg: &SystemConfig, model: &Model, traj: &Trajectory<f64>) -> String {
    let series: Vec<(String, Vec<f64>)> = model
        .coordinate_names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            (
                name.clone(),
                traj.states.iter().map(|s| s.g.get(i)).collect(),
            )
        })
        .collect();
    svg_plot(&format!("{} states", cfg.name()), &traj.times, &series)
}

pub fn cmd_sim(cfg: &SystemConfig, svg: bool) -> CliResult<SimOutput> {
    let model = cfg.build()?;
    let traj = simulate(cfg, &model)?;
    let sampled = sampled_bounds(cfg, &model).map_err(|e| e.to_string());
    let bounds = choose_bounds(cfg, &sampled, None, None);
    Ok(SimOutput {
        csv: trajectory_csv(&model, &traj),
        summary: summarize(cfg, &traj, &sampled, &bounds),
        svg: svg.then(|| trajectory_svg(cfg, &model, &traj)),
    })
}

fn certificate_report(kv: &mut KeyValues, cert: &GainCertificate<f64>) {
    kv.push("delta", float(cert.delta));
    kv.push("ki_bound", float(cert.ki_bound));
    kv.push("kp_bound", float(cert.kp_bound));
    for (name, m) in cert.margins.named() {
        kv.push(&format!("margin[{name}]"), float(m));
    }
    kv.push("verdict", cert.verdict);
    let v = cert.violations();
    kv.push(
        "violated",
        if v.is_empty() {
            "none".to_string()
        } else {
            v.join("; ")
        },
    );
}

/// Number of κ values tried by `gains --grid`.
pub const KAPPA_GRID: usize = 50;

pub fn cmd_gains(
    cfg: &SystemConfig,
    grid: bool,
    lambda: Option<f64>,
    mu: Option<f64>,
) -> CliResult<String> {
    for (name, v) in [("lambda", lambda), ("mu", mu)] {
        if let Some(v) = v {
            if !(v > 0.0 && v.is_finite()) {
                return Err(GeoError::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                ))
                .into());
            }
        }
    }
    let model = cfg.build()?;
    let sampled = sampled_bounds(cfg, &model).map_err(|e| e.to_string());
    let bounds = choose_bounds(cfg, &sampled, lambda, mu).map_err(CliError::InvalidArgument)?;
    let gains = gains_of(cfg);

    let mut kv = KeyValues::default();
    kv.push("system", cfg.name());
    kv.push("kp", float(gains.kp));
    kv.push("kd", float(gains.kd));
    kv.push("ki", float(gains.ki));
    kv.push(
        "lambda",
        format!("{} ({})", float(bounds.lambda), bounds.source),
    );
    kv.push("mu", format!("{} ({})", float(bounds.mu), bounds.source));
    if let Ok(s) = &sampled {
        kv.push("lambda_sampled", float(s.lambda));
        kv.push("mu_sampled", float(s.mu));
    }

    if !grid {
        kv.push("kappa", float(cfg.gains.kappa));
        let cert = certify_geometric(&gains, bounds.lambda, bounds.mu, cfg.gains.kappa)?;
        certificate_report(&mut kv, &cert);
        return Ok(kv.finish());
    }

    let upper = 2.0 / bounds.mu;
    let certs: Vec<GainCertificate<f64>> = (1..=KAPPA_GRID)
        .map(|i| {
            certify_geometric(
                &gains,
                bounds.lambda,
                bounds.mu,
                upper * i as f64 / (KAPPA_GRID + 1) as f64,
            )
        })
        .collect::<Result<_, _>>()?;
    let min_margin = |c: &GainCertificate<f64>| {
        c.margins
            .named()
            .iter()
            .map(|(_, m)| *m)
            .fold(f64::INFINITY, f64::min)
    };
    let mut table = Csv::new(&["kappa", "delta", "ki_margin", "kp_margin", "verdict"]);
    for c in &certs {
        table.row(&[
            float(c.kappa),
            float(c.delta),
            float(c.margins.ki_upper),
            float(c.margins.kp),
            c.verdict.to_string(),
        ]);
    }
    let best = certs
        .iter()
        .max_by(|a, b| min_margin(a).total_cmp(&min_margin(b)))
        .expect("non-empty grid");
    kv.push(
        "kappa_grid",
        format!("{KAPPA_GRID} values in (0, {})", float(upper)),
    );
    kv.push(
        "passing",
        certs.iter().filter(|c| c.verdict.is_pass()).count(),
    );
    kv.push("best_kappa", float(best.kappa));
    certificate_report(&mut kv, best);
    Ok(format!("{}\n{}", kv.finish(), table.finish()))
}

pub fn cmd_critical(cfg: &SystemConfig) -> CliResult<String> {
    let model = cfg.build()?;
    let region = model.sampling_region(&cfg.region)?;
    let found = find_d_critical(
        &model.morse,
        &model.system.metric,
        &model.system.dist,
        &region,
        DEFAULT_CRITICAL_TOL,
    )?;
    let mut kv = KeyValues::default();
    kv.push("system", cfg.name());
    kv.push("seeds", found.seeds);
    kv.push("unconverged_seeds", found.dropped);
    kv.push("points", found.points.len());
    kv.push("tolerance", float(DEFAULT_CRITICAL_TOL));

    let mut header: Vec<String> = model.coordinate_names.clone();
    header.push("residual".into());
    header.extend((1..=model.system.rank()).map(|i| format!("hessian_eig{i}")));
    header.push("signature".into());
    header.push("declared_minimum".into());
    let mut csv = Csv::new(&header);
    for p in &found.points {
        let mut cells: Vec<String> = p.point.coords().iter().map(|&x| float(x)).collect();
        cells.push(float(p.residual));
        cells.extend(p.hessian_eigenvalues.iter().map(|&e| float(e)));
        cells.push(p.signature.label().into());
        cells.push(p.is_declared_minimum.to_string());
        csv.row(&cells);
    }
    Ok(format!("{}\n{}", kv.finish(), csv.finish()))
}

/// `start:end:count` (inclusive, evenly spaced) or a single value.
#[derive(Debug, Clone, PartialEq)]
pub struct Range {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl Range {
    pub fn single(v: f64) -> Self {
        Self {
            start: v,
            end: v,
            count: 1,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.end - self.start) / (self.count - 1) as f64;
        (0..self.count)
            .map(|i| self.start + step * i as f64)
            .collect()
    }
}

impl std::str::FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| format!("'{t}' is not a number"))
        };
        match parts.as_slice() {
            [v] => Ok(Range::single(num(v)?)),
            [a, b, n] => {
                let count = n
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| format!("'{n}' is not a count"))?;
                if count == 0 {
                    return Err("count must be at least 1".into());
                }
                Ok(Range {
                    start: num(a)?,
                    end: num(b)?,
                    count,
                })
            }
            _ => Err(format!(
                "expected START:END:COUNT or a single value, found '{s}'"
            )),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SweepRanges {
    pub kp: Option<Range>,
    pub kd: Option<Range>,
    pub ki: Option<Range>,
}

pub fn cmd_sweep(cfg: &SystemConfig, ranges: &SweepRanges) -> CliResult<String> {
    let model = cfg.build()?;
    let sampled = sampled_bounds(cfg, &model).map_err(|e| e.to_string());
    let bounds = choose_bounds(cfg, &sampled, None, None);
    let pick = |r: &Option<Range>, v: f64| r.clone().unwrap_or(Range::single(v)).values();
    let (kps, kds, kis) = (
        pick(&ranges.kp, cfg.gains.kp),
        pick(&ranges.kd, cfg.gains.kd),
        pick(&ranges.ki, cfg.gains.ki),
    );
    let mut combos = Vec::with_capacity(kps.len() * kds.len() * kis.len());
    for &kp in &kps {
        for &kd in &kds {
            for &ki in &kis {
                combos.push((kp, kd, ki));
            }
        }
    }

    let rows: Vec<Vec<String>> = combos
        .par_iter()
        .map(|&(kp, kd, ki)| {
            let mut run = cfg.clone();
            run.gains.kp = kp;
            run.gains.kd = kd;
            run.gains.ki = ki;
            let (converged, time, measure, residual, monotone, status) =
                match simulate(&run, &model) {
                    Ok(traj) => {
                        let t = traj.convergence_time();
                        (
                            t.is_some().to_string(),
                            opt_float(t),
                            float(traj.convergence_measure(traj.len() - 1)),
                            float(traj.max_constraint_residual()),
                            traj.lyapunov_non_increasing(1e-9).to_string(),
                            "ok".to_string(),
                        )
                    }
                    Err(e) => {
                        let na = || "nan".to_string();
                        (
                            "false".into(),
                            "none".into(),
                            na(),
                            na(),
                            "false".into(),
                            format!("error: {e}"),
                        )
                    }
                };
            let cert = bounds.as_ref().map_err(Clone::clone).and_then(|b| {
                certify_geometric(&Gains::new(kp, kd, ki), b.lambda, b.mu, run.gains.kappa)
                    .map_err(|e| e.to_string())
            });
            let verdict = match &cert {
                Ok(c) => c.verdict.to_string(),
                Err(_) => "unavailable".into(),
            };
            vec![
                float(kp),
                float(kd),
                float(ki),
                converged,
                time,
                measure,
                residual,
                monotone,
                verdict,
                status,
            ]
        })
        .collect();

    let mut csv = Csv::new(&[
        "kp",
        "kd",
        "ki",
        "converged",
        "convergence_time",
        "final_measure",
        "max_constraint_residual",
        "w_monotone",
        "certificate",
        "status",
    ]);
    for r in &rows {
        csv.row(r);
    }
    Ok(csv.finish())
}

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Axis, ScenarioConfig};
use super::fit::{fit_rate, RateFit};
use crate::error::{Error, Result};
use crate::fields::catalog;
use crate::functionals::{discrepancy_report, r_a_check, DiscrepancyReport};
use crate::torus::TorusPoint;

/// One point of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub gamma: f64,
    pub t: f64,
    pub abscissa: f64,
    pub value: f64,
    /// Index into [`SweepResult::fits`].
    pub group: usize,
}

/// Rows of one swept quantity with a log-log fit of `|value|` against the
/// axis abscissa for every combination of the other parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub axis: Axis,
    pub quantity: String,
    pub rows: Vec<SweepRow>,
    /// `None` when a group has fewer than three points or a zero value.
    pub fits: Vec<Option<RateFit>>,
}

impl SweepResult {
    pub const CSV_HEADER: [&'static str; 10] = [
        "field", "epsilon", "gamma", "t", "axis", "abscissa", "quantity", "value", "slope", "stderr",
    ];

    pub fn write_csv<W: Write>(&self, field: &str, out: W) -> Result<()> {
        let f = |v: f64| format!("{v:.16e}");
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::CSV_HEADER)?;
        for r in &self.rows {
            let (slope, stderr) = match &self.fits[r.group] {
                Some(fit) => (f(fit.slope), f(fit.stderr)),
                None => (String::new(), String::new()),
            };
            w.write_record([
                field.to_string(),
                f(r.epsilon),
                f(r.gamma),
                f(r.t),
                self.axis.to_string(),
                f(r.abscissa),
                self.quantity.clone(),
                f(r.value),
                slope,
                stderr,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn quantity(r: &DiscrepancyReport, name: &str) -> f64 {
    match name {
        "D" => r.d,
        "I_eps_fd" => r.i_eps_fd,
        "I1" => r.i1,
        "I2" => r.i2,
        "I2_a_limit" => r.i2_a_limit,
        "singular_bound" => r.singular_bound,
        "eqfin_residual" => r.eqfin_residual,
        other => unreachable!("unvalidated sweep quantity {other}"),
    }
}

/// Groups the reports along `config.sweep_axis` and fits each group.
pub fn sweep_from_reports(config: &ScenarioConfig, reports: &[DiscrepancyReport]) -> Result<SweepResult> {
    let axis = config.sweep_axis;
    let key = |r: &DiscrepancyReport| {
        let v = [r.epsilon, r.gamma, r.t];
        let skip = match axis {
            Axis::Epsilon => 0,
            Axis::Gamma => 1,
            Axis::Time => 2,
        };
        (0..3)
            .filter(|&i| i != skip)
            .map(|i| v[i].to_bits())
            .collect::<Vec<_>>()
    };
    let mut groups: Vec<Vec<u64>> = Vec::new();
    let mut rows = Vec::with_capacity(reports.len());
    for r in reports {
        let k = key(r);
        let group = match groups.iter().position(|g| *g == k) {
            Some(g) => g,
            None => {
                groups.push(k);
                groups.len() - 1
            }
        };
        let along = match axis {
            Axis::Epsilon => r.epsilon,
            Axis::Gamma => r.gamma,
            Axis::Time => r.t,
        };
        rows.push(SweepRow {
            epsilon: r.epsilon,
            gamma: r.gamma,
            t: r.t,
            abscissa: axis.abscissa(along),
            value: quantity(r, &config.sweep_quantity),
            group,
        });
    }
    let mut fits = Vec::with_capacity(groups.len());
    for g in 0..groups.len() {
        let (x, y): (Vec<f64>, Vec<f64>) = rows
            .iter()
            .filter(|r| r.group == g)
            .map(|r| (r.abscissa, r.value.abs()))
            .unzip();
        fits.push(if x.len() >= 3 && y.iter().all(|&v| v > 0.0) {
            Some(fit_rate(&x, &y)?)
        } else {
            None
        });
    }
    Ok(SweepResult {
        axis,
        quantity: config.sweep_quantity.clone(),
        rows,
        fits,
    })
}

/// One report per `(ε, γ, t)` in list order (ε outermost).
pub fn scenario_reports(config: &ScenarioConfig) -> Result<Vec<DiscrepancyReport>> {
    let field = config.field.field();
    let (x, y) = config.flows();
    let mut out = Vec::new();
    for &eps in &config.epsilons {
        for &gamma in &config.gammas {
            let kernel = config.kernel(gamma)?;
            for &t in &config.times {
                log::info!("report: field {} ε={eps} γ={gamma} t={t}", config.field);
                let r = discrepancy_report(field, &x, &y, &kernel, &config.functional(eps, t))?;
                let values = [
                    r.d,
                    r.i_eps_fd,
                    r.i1,
                    r.i2,
                    r.i2_a_limit,
                    r.singular_bound,
                    r.eqfin_residual,
                ];
                if let Some(v) = values.iter().find(|v| !v.is_finite()) {
                    return Err(Error::Quadrature {
                        index: values.iter().position(|w| w.to_bits() == v.to_bits()).unwrap_or(0),
                    });
                }
                out.push(r);
            }
        }
    }
    Ok(out)
}

/// Largest divergence-identity residual at `config.spot_checks` seeded
/// random points off the jump set, for every configured `γ`.
pub fn spot_check(config: &ScenarioConfig) -> Result<f64> {
    let field = config.field.field();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < config.spot_checks {
        let x = TorusPoint::new([rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)])?;
        if field.jumps().iter().any(|j| j.offset(x.coords()).abs() < 1e-6) {
            continue;
        }
        for &gamma in &config.gammas {
            worst = worst.max(r_a_check(field, &config.kernel(gamma)?, &x, 128)?.abs());
        }
        done += 1;
    }
    Ok(worst)
}

/// Files written by [`run`] or [`sweep`].
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub reports: Vec<DiscrepancyReport>,
    pub sweep: SweepResult,
    pub files: Vec<PathBuf>,
    pub wall_time: f64,
}

fn meta(config: &ScenarioConfig, wall: f64, spot: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# rfl-core {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "# wall_time_s = {wall:.3}");
    let _ = writeln!(s, "# spot_check_divergence_residual = {spot:.3e}");
    s.push_str(&config.echo());
    s
}

fn write_file(dir: &Path, name: &str, write: impl FnOnce(&mut fs::File) -> Result<()>) -> Result<PathBuf> {
    let path = dir.join(name);
    let mut f = fs::File::create(&path)?;
    write(&mut f)?;
    Ok(path)
}

fn execute(config: &ScenarioConfig, with_report: bool) -> Result<RunOutput> {
    let start = Instant::now();
    let reports = scenario_reports(config)?;
    let sweep = sweep_from_reports(config, &reports)?;
    let spot = spot_check(config)?;
    let wall = start.elapsed().as_secs_f64();
    fs::create_dir_all(&config.output)?;
    let dir = config.output.as_path();
    let field = config.field.to_string();
    let mut files = Vec::new();
    if with_report {
        files.push(write_file(dir, "report.csv", |f| {
            DiscrepancyReport::write_csv(&reports, f)
        })?);
    }
    files.push(write_file(dir, "sweep.csv", |f| sweep.write_csv(&field, f))?);
    files.push(write_file(dir, "meta", |f| {
        Ok(f.write_all(meta(config, wall, spot).as_bytes())?)
    })?);
    Ok(RunOutput {
        reports,
        sweep,
        files,
        wall_time: wall,
    })
}

/// Runs the scenario and writes `report.csv`, `sweep.csv` and `meta` into
/// `config.output`.
pub fn run(config: &ScenarioConfig) -> Result<RunOutput> {
    execute(config, true)
}

/// Like [`run`] but writes only `sweep.csv` and `meta`.
pub fn sweep(config: &ScenarioConfig) -> Result<RunOutput> {
    execute(config, false)
}

/// Loads and validates a scenario file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(ScenarioConfig::parse(&text)?)
}

/// The field catalog as an aligned text table.
pub fn catalog_table() -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<3} {:<13} {:<58} jumps (k, level, eta, xi, sigma)",
        "id", "class", "description"
    );
    for f in catalog() {
        let jumps: Vec<String> = f
            .jumps()
            .iter()
            .map(|j| {
                format!(
                    "k=({},{}) c={} eta=({:.4},{:.4}) xi=({:.4},{:.4}) sigma={}",
                    j.k[0], j.k[1], j.level, j.eta[0], j.eta[1], j.xi[0], j.xi[1], j.sigma
                )
            })
            .collect();
        let jumps = if jumps.is_empty() {
            "-".to_string()
        } else {
            jumps.join("; ")
        };
        let _ = writeln!(
            s,
            "{:<3} {:<13} {:<58} {jumps}",
            f.id.to_string(),
            f.classification.to_string(),
            f.description
        );
    }
    s
}

//! Figure datasets, density sizing and gain summaries for the symmetric
//! two-vehicle setup.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::region::{baseline_regions, fmt_sig, region_polygon, sym_rate_direct, BaselineRegions, RegionPolygon};
use crate::state::{toy_model_joint, Geometry};

/// Velocities shown in the region figure, km/h.
pub const FIG3_VELOCITIES: [f64; 4] = [0.0, 60.0, 90.0, 144.0];
/// Velocities read off the figure rather than stated in the text.
pub const FIG3_INFERRED: [f64; 1] = [90.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub lambda: f64,
    pub rb: f64,
    pub ts: f64,
    pub fig3_velocities: Vec<f64>,
    pub fig4_velocities: Vec<f64>,
    pub targets: Vec<f64>,
    /// Upper end of the density bracket, per km².
    pub lambda_hi: f64,
    /// Absolute precision of the density search.
    pub density_tol: f64,
    /// Target rate for the savings figure in the gain report.
    pub gain_target: f64,
    pub gain_velocity: f64,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            lambda: 4.0,
            rb: 0.2,
            ts: 10.0,
            fig3_velocities: FIG3_VELOCITIES.to_vec(),
            fig4_velocities: (0..=32).map(|i| 5.0 * i as f64).collect(),
            targets: vec![0.3, 0.4, 0.45],
            lambda_hi: 50.0,
            density_tol: 1e-4,
            gain_target: 0.4,
            gain_velocity: 60.0,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn geometry(&self) -> Result<Geometry> {
        Geometry::new(self.lambda, self.rb, self.ts)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry()?;
        for (name, grid) in [
            ("fig3_velocities", &self.fig3_velocities),
            ("fig4_velocities", &self.fig4_velocities),
        ] {
            if grid.is_empty() || grid.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::Config(format!("{name} must be nonempty and nonnegative")));
            }
        }
        if self.targets.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
            return Err(Error::Config("targets must lie in (0, 1)".into()));
        }
        if !(self.lambda_hi > 0.0 && self.density_tol > 0.0) {
            return Err(Error::Config("lambda_hi and density_tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig3Curve {
    pub velocity: f64,
    /// Velocity taken from the figure, not the text.
    pub inferred: bool,
    pub sym_rate: f64,
    pub polygon: RegionPolygon,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fig3Dataset {
    pub geometry: Geometry,
    pub curves: Vec<Fig3Curve>,
    pub baselines: BaselineRegions,
}

pub fn fig3_regions(config: &ExperimentConfig) -> Result<Fig3Dataset> {
    config.validate()?;
    let geom = config.geometry()?;
    let mut curves = Vec::new();
    for &v in &config.fig3_velocities {
        let joint = toy_model_joint(&geom, &[v, v])?;
        let polygon = region_polygon(&joint)?;
        curves.push(Fig3Curve {
            velocity: v,
            inferred: FIG3_INFERRED.contains(&v),
            sym_rate: polygon.symmetric_rate(),
            polygon,
        });
    }
    // Both baselines depend only on the state marginals, not on velocity.
    let baselines = baseline_regions(&toy_model_joint(&geom, &[0.0, 0.0])?)?;
    Ok(Fig3Dataset {
        geometry: geom,
        curves,
        baselines,
    })
}

/// Symmetric rate of the toy model at density `lambda`.
pub fn sym_rate_at(template: &Geometry, lambda: f64, velocity: f64) -> Result<f64> {
    let geom = Geometry::new(lambda, template.rb, template.ts)?;
    Ok(sym_rate_direct(&toy_model_joint(&geom, &[velocity, velocity])?)?.0)
}

/// Grid points used to check that the rate grows with density.
const MONOTONE_GRID: usize = 51;

/// Smallest density reaching `target` at `velocity`, to `tol` in λ.
pub fn min_density(target: f64, velocity: f64, template: &Geometry, lambda_hi: f64, tol: f64) -> Result<f64> {
    if target <= 0.0 {
        return Ok(0.0);
    }
    if !(target < 1.0) {
        return Err(Error::Config(format!("target {target} must be below 1")));
    }
    let rate = |l: f64| sym_rate_at(template, l, velocity);

    let mut prev = f64::NEG_INFINITY;
    for i in 0..MONOTONE_GRID {
        let l = lambda_hi * i as f64 / (MONOTONE_GRID - 1) as f64;
        let r = rate(l)?;
        if r < prev - 1e-12 {
            return Err(Error::NonMonotone(l));
        }
        prev = r;
    }
    let rate_hi = prev;
    if rate_hi < target {
        return Err(Error::UnreachableTarget {
            target,
            lambda_hi,
            rate_hi,
        });
    }

    let (mut lo, mut hi) = (0.0, lambda_hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if rate(mid)? >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fig4Row {
    pub velocity: f64,
    pub target: f64,
    pub lambda_min: f64,
}

/// Density curves for every target over the velocity grid. Velocities are
/// evaluated on separate threads.
pub fn fig4_curves(config: &ExperimentConfig) -> Result<Vec<Fig4Row>> {
    config.validate()?;
    let geom = config.geometry()?;
    let per_velocity: Vec<Result<Vec<Fig4Row>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = config
            .fig4_velocities
            .iter()
            .map(|&v| {
                let geom = &geom;
                scope.spawn(move || {
                    config
                        .targets
                        .iter()
                        .map(|&t| {
                            Ok(Fig4Row {
                                velocity: v,
                                target: t,
                                lambda_min: min_density(t, v, geom, config.lambda_hi, config.density_tol)?,
                            })
                        })
                        .collect()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("density thread panicked"))
            .collect()
    });
    let mut rows = Vec::new();
    for r in per_velocity {
        rows.extend(r?);
    }
    rows.sort_by(|a, b| a.target.total_cmp(&b.target).then(a.velocity.total_cmp(&b.velocity)));
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainReport {
    pub lambda: f64,
    pub velocity: f64,
    pub r_mixed: f64,
    pub r_fb: f64,
    /// `100 (R_mixed / R_FB - 1)`.
    pub gain_percent: f64,
    pub target: f64,
    pub lambda_min_mixed: f64,
    pub lambda_min_fb: f64,
    /// `100 (1 - lambda_min_mixed / lambda_min_fb)`.
    pub savings_percent: f64,
}

pub fn gain_report(geom: &Geometry, velocity: f64, target: f64, lambda_hi: f64, tol: f64) -> Result<GainReport> {
    let joint = toy_model_joint(geom, &[velocity, velocity])?;
    let r_mixed = sym_rate_direct(&joint)?.0;
    let r_fb = sym_rate_direct(&joint.feedback_only())?.0;
    let fb_velocity = geom.decorrelation_velocity();
    let lambda_min_mixed = min_density(target, velocity, geom, lambda_hi, tol)?;
    let lambda_min_fb = min_density(target, fb_velocity, geom, lambda_hi, tol)?;
    Ok(GainReport {
        lambda: geom.lambda,
        velocity,
        r_mixed,
        r_fb,
        gain_percent: 100.0 * (r_mixed / r_fb - 1.0),
        target,
        lambda_min_mixed,
        lambda_min_fb,
        savings_percent: if lambda_min_fb > 0.0 {
            100.0 * (1.0 - lambda_min_mixed / lambda_min_fb)
        } else {
            0.0
        },
    })
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| Error::Io {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Seconds since the Unix epoch, for output metadata.
pub fn timestamp() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Writes `fig3.csv`, `fig3_baselines.csv` and `fig3_meta.json`.
pub fn write_fig3(dir: &Path, data: &Fig3Dataset, digits: usize, stamp: bool) -> Result<Vec<PathBuf>> {
    let mut csv = String::from("velocity,R1,R2\n");
    for c in &data.curves {
        for &(r1, r2) in &c.polygon.vertices {
            csv.push_str(&format!(
                "{},{},{}\n",
                fmt_sig(c.velocity, digits),
                fmt_sig(r1, digits),
                fmt_sig(r2, digits)
            ));
        }
    }
    let mut base = String::from("baseline,R1,R2\n");
    for (name, poly) in [
        ("feedback_only", &data.baselines.feedback_only),
        ("tdma", &data.baselines.tdma),
    ] {
        for &(r1, r2) in &poly.vertices {
            base.push_str(&format!("{name},{},{}\n", fmt_sig(r1, digits), fmt_sig(r2, digits)));
        }
    }
    let mut meta = serde_json::json!({
        "geometry": data.geometry,
        "curves": data.curves.iter().map(|c| serde_json::json!({
            "velocity": c.velocity,
            "inferred": c.inferred,
            "sym_rate": c.sym_rate,
        })).collect::<Vec<_>>(),
    });
    if stamp {
        meta["generated_at"] = timestamp().into();
    }
    let paths = [
        dir.join("fig3.csv"),
        dir.join("fig3_baselines.csv"),
        dir.join("fig3_meta.json"),
    ];
    write_file(&paths[0], &csv)?;
    write_file(&paths[1], &base)?;
    write_file(&paths[2], &(serde_json::to_string_pretty(&meta)? + "\n"))?;
    Ok(paths.to_vec())
}

pub fn write_fig4(dir: &Path, rows: &[Fig4Row], digits: usize) -> Result<PathBuf> {
    let mut csv = String::from("velocity,target,lambda_min\n");
    for r in rows {
        csv.push_str(&format!(
            "{},{},{}\n",
            fmt_sig(r.velocity, digits),
            fmt_sig(r.target, digits),
            fmt_sig(r.lambda_min, digits)
        ));
    }
    let path = dir.join("fig4.csv");
    write_file(&path, &csv)?;
    Ok(path)
}

pub fn write_gains(dir: &Path, report: &GainReport, stamp: bool) -> Result<PathBuf> {
    let mut v = serde_json::to_value(report)?;
    if stamp {
        v["generated_at"] = timestamp().into();
    }
    let path = dir.join("gains.json");
    write_file(&path, &(serde_json::to_string_pretty(&v)? + "\n"))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn geom() -> Geometry {
        Geometry::new(4.0, 0.2, 10.0).unwrap()
    }

    #[test]
    fn fig3_dataset() {
        let d = fig3_regions(&ExperimentConfig::default()).unwrap();
        assert_eq!(d.curves.len(), 4);
        assert_abs_diff_eq!(d.curves[0].sym_rate, 0.317034, epsilon = 1e-6);
        assert_abs_diff_eq!(d.curves[1].sym_rate, 0.280707, epsilon = 1e-6);
        assert!(d.curves[2].inferred && !d.curves[1].inferred);
        let fb = &d.curves[3].polygon;
        assert!(fb.contains_region(&d.baselines.feedback_only, 1e-12));
        assert!(d.baselines.feedback_only.contains_region(fb, 1e-12));
    }

    #[test]
    fn density_examples() {
        let fb = min_density(0.4, 144.0, &geom(), 50.0, 1e-4).unwrap();
        // Root of (1 - x^2) / (2 + x) = 0.4.
        let x: f64 = (-0.4 + (0.16f64 + 4.0 * 0.2).sqrt()) / 2.0;
        let exact = -x.ln() / geom().ball_area();
        assert!((fb - exact).abs() <= 1e-4, "{fb} vs {exact}");
        assert_abs_diff_eq!(fb, 9.85, epsilon = 0.1);
        let mixed = min_density(0.4, 60.0, &geom(), 50.0, 1e-4).unwrap();
        assert_abs_diff_eq!(mixed, 8.20, epsilon = 0.1);
        assert_eq!(min_density(0.0, 60.0, &geom(), 50.0, 1e-4).unwrap(), 0.0);
    }

    #[test]
    fn unreachable_target() {
        let e = min_density(0.45, 144.0, &geom(), 5.0, 1e-4).unwrap_err();
        assert!(matches!(e, Error::UnreachableTarget { .. }));
    }

    #[test]
    fn gains() {
        let g = gain_report(&geom(), 60.0, 0.4, 50.0, 1e-4).unwrap();
        assert_abs_diff_eq!(g.gain_percent, 15.32, epsilon = 0.05);
        assert_abs_diff_eq!(g.savings_percent, 16.6, epsilon = 0.5);
        let z = gain_report(&geom(), 150.0, 0.4, 50.0, 1e-4).unwrap();
        assert_abs_diff_eq!(z.gain_percent, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn density_falls_with_lower_velocity() {
        let cfg = ExperimentConfig {
            targets: vec![0.4],
            fig4_velocities: vec![0.0, 40.0, 80.0, 120.0, 160.0],
            ..Default::default()
        };
        let rows = fig4_curves(&cfg).unwrap();
        for w in rows.windows(2) {
            assert!(w[0].lambda_min <= w[1].lambda_min + 1e-4);
        }
    }

    #[test]
    fn config_validation() {
        let bad = ExperimentConfig {
            targets: vec![1.2],
            ..Default::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let bad = ExperimentConfig {
            fig4_velocities: vec![],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn writers_produce_files() {
        let dir = tempfile::tempdir().unwrap();
        let d = fig3_regions(&ExperimentConfig::default()).unwrap();
        let paths = write_fig3(dir.path(), &d, 6, false).unwrap();
        let text = std::fs::read_to_string(&paths[0]).unwrap();
        assert!(text.starts_with("velocity,R1,R2\n"));
        let meta = std::fs::read_to_string(&paths[2]).unwrap();
        assert!(!meta.contains("generated_at"));
        let rows = [Fig4Row {
            velocity: 60.0,
            target: 0.4,
            lambda_min: 8.19552,
        }];
        let p = write_fig4(dir.path(), &rows, 6).unwrap();
        assert_eq!(
            std::fs::read_to_string(p).unwrap(),
            "velocity,target,lambda_min\n60,0.4,8.19552\n"
        );
    }
}

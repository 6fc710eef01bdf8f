//! Config-driven pipeline behind the `helmono` command line.
//!
//! `gen` writes the synthetic data set into an output directory; `beta`,
//! `reconstruct` and `render` read it back from there. Every directory holds
//! a `meta.json` that echoes the full configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::dtilde_count;
use crate::forward::{add_noise, compute_s_on, compute_v_on, Scenario, SensitivityStack};
use crate::io;
use crate::linalg::SymMatrix;
use crate::mesh::{build_disk_mesh, TriMesh};
use crate::monotonicity::{compute_beta_map, negative_count_field, BetaMap};
use crate::reconstruct::{extract_support, solve, upper_bounds, Component, ReconProblem, SolverSettings, StopReason, Variant};

pub const MESH_FINE: &str = "mesh_fine.json";
pub const MESH_INV: &str = "mesh_inv.json";
pub const V_CSV: &str = "V.csv";
pub const VDELTA_CSV: &str = "Vdelta.csv";
pub const STACK_BIN: &str = "S.bin";
pub const META_JSON: &str = "meta.json";
pub const BETA_CSV: &str = "beta.csv";
pub const NEGCOUNT_CSV: &str = "negcount.csv";
pub const RECON_CSV: &str = "recon.csv";
pub const RECON_JSON: &str = "recon.json";
pub const DTILDE_CSV: &str = "dtilde.csv";

pub const BETA_HEADER: &str = "pixel,centroid_x,centroid_y,beta";
pub const NEGCOUNT_HEADER: &str = "pixel,centroid_x,centroid_y,negative_count";
pub const RECON_HEADER: &str = "pixel,centroid_x,centroid_y,a,upper_bound,in_support";
const PIXEL_PREFIX: &str = "pixel,centroid_x,centroid_y,";

/// Largest raster edge accepted by [`cmd_render`].
pub const MAX_RESOLUTION: usize = 8192;

/// Non-physics settings of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    pub out_dir: PathBuf,
    #[serde(default = "default_variant")]
    pub variant: Variant,
    /// Contrast for the negative-count field written by `beta`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Radii swept by `dtilde`.
    #[serde(default = "default_r0_sweep")]
    pub r0_sweep: Vec<f64>,
    /// Mesh size for `dtilde`.
    #[serde(default = "default_dtilde_h")]
    pub dtilde_h: f64,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    /// Support threshold as a fraction of `max u`.
    #[serde(default = "default_support_fraction")]
    pub support_fraction: f64,
    #[serde(default)]
    pub solver: SolverSettings,
}

fn default_variant() -> Variant {
    Variant::EigsumPenalized
}
fn default_r0_sweep() -> Vec<f64> {
    (1..=10).rev().map(|i| i as f64 / 10.0).collect()
}
fn default_dtilde_h() -> f64 {
    0.05
}
fn default_resolution() -> usize {
    256
}
fn default_support_fraction() -> f64 {
    0.5
}

/// A TOML document with a `[scenario]` table (every physics parameter
/// explicit) and a `[run]` table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub run: RunSettings,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::invalid(format!("config: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::invalid(format!("config {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        let r = &self.run;
        if r.r0_sweep.is_empty() || r.r0_sweep.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
            return Err(Error::invalid("r0_sweep needs values in (0, 1]"));
        }
        if !(0.01..=0.5).contains(&r.dtilde_h) {
            return Err(Error::invalid("dtilde_h outside [0.01, 0.5]"));
        }
        check_resolution(r.resolution)?;
        if !(r.support_fraction > 0.0 && r.support_fraction <= 1.0) {
            return Err(Error::invalid("support_fraction must lie in (0, 1]"));
        }
        if let Some(a) = r.alpha {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(Error::invalid("alpha must be finite and nonnegative"));
            }
        }
        Ok(())
    }
}

fn check_resolution(res: usize) -> Result<()> {
    if res == 0 || res > MAX_RESOLUTION {
        return Err(Error::invalid(format!("resolution must lie in 1..={MAX_RESOLUTION}")));
    }
    Ok(())
}

/// Contents of `meta.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Meta {
    pub noise_seed: u64,
    /// `‖V − Vᵀ‖_F / ‖V‖_F` before symmetrization.
    pub asymmetry: f64,
    pub n: usize,
    pub m: usize,
    pub forward_triangles: usize,
    pub k: f64,
    pub q0: f64,
    pub v_norm: f64,
    /// Noise level as a fraction of `‖V‖_F`.
    pub delta_rel: f64,
    /// Frobenius norm of the added perturbation.
    pub delta_abs: f64,
    pub config: RunConfig,
}

impl Meta {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(META_JSON);
        serde_json::from_str(&io::read_to_string(&path)?)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    /// Absolute noise level for a relative one, defaulting to the generated one.
    pub fn delta_abs(&self, delta_rel: Option<f64>) -> Result<f64> {
        match delta_rel {
            None => Ok(self.delta_abs),
            Some(d) if d >= 0.0 && d.is_finite() => Ok(d * self.v_norm),
            Some(_) => Err(Error::invalid("delta must be nonnegative")),
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn centroid_cells(mesh: &TriMesh<f64>, m: usize) -> [String; 3] {
    let c = mesh.centroid(m);
    [m.to_string(), io::fmt_f64(c[0]), io::fmt_f64(c[1])]
}

/// Summary of a `gen` run.
#[derive(Clone, Debug)]
pub struct GenOutput {
    pub meta: Meta,
    pub v: SymMatrix<f64>,
    pub vdelta: SymMatrix<f64>,
}

/// Simulates `V`, `V^δ` and the sensitivity stack and writes them with both
/// meshes into `run.out_dir`.
pub fn cmd_gen(cfg: &RunConfig) -> Result<GenOutput> {
    cfg.validate()?;
    let sc = &cfg.scenario;
    let dir = &cfg.run.out_dir;
    let fine = sc.forward_mesh::<f64>()?;
    let inv = sc.inversion_mesh::<f64>()?;
    let meas = compute_v_on(sc, &fine)?;
    let stack = compute_s_on(sc, &inv)?;
    let v_norm = meas.v.frobenius_norm();
    let delta_abs = sc.delta * v_norm;
    let vdelta = add_noise(&meas.v, delta_abs, sc.noise_seed)?;
    log::info!(
        "gen: N = {}, M = {}, asymmetry {:.3e}, |V|_F = {:.6e}",
        sc.basis_size(),
        inv.num_triangles(),
        meas.asymmetry,
        v_norm
    );
    let meta = Meta {
        noise_seed: sc.noise_seed,
        asymmetry: meas.asymmetry,
        n: sc.basis_size(),
        m: inv.num_triangles(),
        forward_triangles: fine.num_triangles(),
        k: sc.k,
        q0: sc.q0,
        v_norm,
        delta_rel: sc.delta,
        delta_abs,
        config: cfg.clone(),
    };
    ensure_dir(dir)?;
    io::write_file(&dir.join(MESH_FINE), fine.to_json().as_bytes())?;
    io::write_file(&dir.join(MESH_INV), inv.to_json().as_bytes())?;
    io::write_matrix_csv(&dir.join(V_CSV), &meas.v)?;
    io::write_matrix_csv(&dir.join(VDELTA_CSV), &vdelta)?;
    io::write_stack(&dir.join(STACK_BIN), &stack)?;
    io::write_file(&dir.join(META_JSON), to_json(&meta).as_bytes())?;
    Ok(GenOutput { meta, v: meas.v, vdelta })
}

/// `d(q̃)` for each radius; `None` where the operator is near-singular.
pub fn cmd_dtilde(k: f64, q0: f64, qmax: f64, r0_list: &[f64], mesh_h: f64) -> Result<Vec<(f64, Option<usize>)>> {
    let mesh = build_disk_mesh::<f64>(mesh_h)?;
    r0_list
        .iter()
        .map(|&r0| match dtilde_count(k, q0, qmax, r0, &mesh) {
            Ok(c) => Ok((r0, Some(c))),
            Err(Error::NearResonance { .. }) => {
                log::warn!("dtilde: near resonance at r0 = {r0}");
                Ok((r0, None))
            }
            Err(e) => Err(e),
        })
        .collect()
}

/// Writes `r0,count` rows, with `-1` marking a near-resonant radius.
pub fn write_dtilde_csv(path: &Path, rows: &[(f64, Option<usize>)]) -> Result<()> {
    let mut s = String::from("r0,count\n");
    for (r0, c) in rows {
        let c = c.map_or(-1, |c| c as i64);
        s.push_str(&format!("{r0},{c}\n"));
    }
    io::write_file(path, s.as_bytes())
}

/// Everything `beta` and `reconstruct` read back from a data directory.
pub struct DataSet {
    pub meta: Meta,
    pub vdelta: SymMatrix<f64>,
    pub stack: SensitivityStack<f64>,
    pub mesh: TriMesh<f64>,
}

impl DataSet {
    pub fn load(dir: &Path) -> Result<Self> {
        let meta = Meta::load(dir)?;
        let vdelta = io::read_matrix_csv(&dir.join(VDELTA_CSV))?;
        let stack = io::read_stack(&dir.join(STACK_BIN))?;
        let mesh_path = dir.join(MESH_INV);
        let mesh = TriMesh::from_json(&io::read_to_string(&mesh_path)?)?;
        if stack.dim() != vdelta.dim() || stack.dim() != meta.n {
            return Err(Error::Format(format!(
                "{}: basis size {} does not match V^delta ({}) or meta ({})",
                dir.display(),
                stack.dim(),
                vdelta.dim(),
                meta.n
            )));
        }
        if stack.len() != mesh.num_triangles() || stack.len() != meta.m {
            return Err(Error::Format(format!(
                "{}: {} sensitivity blocks for {} inversion triangles",
                dir.display(),
                stack.len(),
                mesh.num_triangles()
            )));
        }
        Ok(DataSet { meta, vdelta, stack, mesh })
    }
}

/// Per-pixel bounds `β_m` written to `beta.csv`; with `alpha`, also the
/// negative-eigenvalue counts of `V^δ − αS_m + δI` in `negcount.csv`.
pub fn cmd_beta(dir: &Path, delta_rel: Option<f64>, d: Option<usize>, alpha: Option<f64>) -> Result<BetaMap<f64>> {
    let ds = DataSet::load(dir)?;
    let delta = ds.meta.delta_abs(delta_rel)?;
    let d = d.unwrap_or(ds.meta.config.scenario.d_tilde);
    let map = compute_beta_map(&ds.vdelta, &ds.stack, delta, d)?;
    let [closed, capped, fallback] = map.method_counts();
    log::info!("beta: {closed} closed form, {capped} capped, {fallback} regularized bisection");
    let mesh = &ds.mesh;
    io::write_pixel_csv(
        &dir.join(BETA_CSV),
        BETA_HEADER,
        map.values.iter().enumerate().map(|(m, &b)| {
            let mut row = centroid_cells(mesh, m).to_vec();
            row.push(io::fmt_f64(b));
            row
        }),
    )?;
    if let Some(alpha) = alpha {
        let counts = negative_count_field(&ds.vdelta, &ds.stack, alpha, delta)?;
        io::write_pixel_csv(
            &dir.join(NEGCOUNT_CSV),
            NEGCOUNT_HEADER,
            counts.iter().enumerate().map(|(m, &c)| {
                let mut row = centroid_cells(mesh, m).to_vec();
                row.push(c.to_string());
                row
            }),
        )?;
    }
    Ok(map)
}

/// Contents of `recon.json`.
#[derive(Clone, Debug, Serialize)]
pub struct ReconSummary {
    pub variant: Variant,
    pub delta_rel: Option<f64>,
    pub delta_abs: f64,
    pub contrast_bound: f64,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub support_fraction: f64,
    pub support_pixels: usize,
    pub components: Vec<ComponentSummary>,
    pub settings: SolverSettings,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComponentSummary {
    pub pixels: usize,
    pub area: f64,
    pub centroid: [f64; 2],
}

impl From<&Component> for ComponentSummary {
    fn from(c: &Component) -> Self {
        ComponentSummary {
            pixels: c.pixels.len(),
            area: c.area,
            centroid: c.centroid,
        }
    }
}

/// Solves the box-constrained problem with the bounds from `beta.csv` and
/// writes `recon.csv` and `recon.json`. Returns `EmptySupport` after
/// writing when no pixel passes the threshold.
pub fn cmd_reconstruct(dir: &Path, delta_rel: Option<f64>, variant: Option<Variant>) -> Result<ReconSummary> {
    let ds = DataSet::load(dir)?;
    let run = &ds.meta.config.run;
    let sc = &ds.meta.config.scenario;
    let delta = ds.meta.delta_abs(delta_rel)?;
    let variant = variant.unwrap_or(run.variant);
    let beta = io::read_pixel_column(&dir.join(BETA_CSV), BETA_HEADER, "beta")?;
    if beta.len() != ds.stack.len() {
        return Err(Error::Format(format!(
            "{}: {} rows for {} pixels",
            BETA_CSV,
            beta.len(),
            ds.stack.len()
        )));
    }
    let contrast_bound = sc.q_min_assumed - sc.q0;
    let upper = upper_bounds(contrast_bound, &beta);
    let problem = ReconProblem::new(ds.vdelta, ds.stack, upper, delta, variant, run.solver)?;
    let result = solve(&problem)?;
    if !result.converged {
        log::warn!("reconstruct: iteration cap reached without convergence");
    }
    let support = match extract_support(&result, &ds.mesh, run.support_fraction) {
        Ok(s) => Some(s),
        Err(Error::EmptySupport) => None,
        Err(e) => return Err(e),
    };
    let mask = support.as_ref().map_or_else(|| vec![false; result.coefficients.len()], |s| s.mask.clone());
    io::write_pixel_csv(
        &dir.join(RECON_CSV),
        RECON_HEADER,
        (0..mask.len()).map(|m| {
            let mut row = centroid_cells(&ds.mesh, m).to_vec();
            row.push(io::fmt_f64(result.coefficients[m]));
            row.push(io::fmt_f64(result.upper[m]));
            row.push(if mask[m] { "1" } else { "0" }.to_string());
            row
        }),
    )?;
    let summary = ReconSummary {
        variant,
        delta_rel: delta_rel.or(Some(ds.meta.delta_rel)),
        delta_abs: delta,
        contrast_bound,
        objective: result.objective,
        iterations: result.iterations,
        converged: result.converged,
        stop_reason: result.stop_reason,
        support_fraction: run.support_fraction,
        support_pixels: mask.iter().filter(|&&b| b).count(),
        components: support.as_ref().map_or_else(Vec::new, |s| s.components.iter().map(Into::into).collect()),
        settings: run.solver,
    };
    io::write_file(&dir.join(RECON_JSON), to_json(&summary).as_bytes())?;
    if support.is_none() {
        return Err(Error::EmptySupport);
    }
    Ok(summary)
}

/// Gray raster with the value scale that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    pub resolution: usize,
    /// Row-major, top row first; `255` is white.
    pub gray: Vec<u8>,
    pub max_value: f64,
}

/// Contents of the render sidecar.
#[derive(Clone, Debug, Serialize)]
pub struct RenderScale {
    pub width: usize,
    pub height: usize,
    pub column: String,
    pub min_value: f64,
    pub max_value: f64,
    /// How a value maps to a gray byte inside the disk.
    pub mapping: String,
    pub exterior: u8,
}

/// Rasterizes a per-triangle field over `[-1, 1]²`. Intensity `v / max`
/// darkens the pixel linearly (full intensity is black); raster points
/// outside the mesh stay white.
pub fn rasterize(mesh: &TriMesh<f64>, values: &[f64], resolution: usize) -> Result<Raster> {
    check_resolution(resolution)?;
    if values.len() != mesh.num_triangles() {
        return Err(Error::DimensionMismatch(format!(
            "{} values for {} triangles",
            values.len(),
            mesh.num_triangles()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Format("field contains non-finite values".into()));
    }
    let max_value = values.iter().copied().fold(0.0, f64::max);
    let res = resolution;
    let cell = 2.0 / res as f64;
    let to_index = |c: f64| ((c + 1.0) / cell - 0.5).clamp(0.0, (res - 1) as f64);
    let mut gray = vec![255u8; res * res];
    let mut filled = vec![false; res * res];
    for (t, &v) in values.iter().enumerate() {
        let p = mesh.vertices(t);
        let (xmin, xmax) = (p[0][0].min(p[1][0]).min(p[2][0]), p[0][0].max(p[1][0]).max(p[2][0]));
        let (ymin, ymax) = (p[0][1].min(p[1][1]).min(p[2][1]), p[0][1].max(p[1][1]).max(p[2][1]));
        let intensity = if max_value > 0.0 { (v / max_value).clamp(0.0, 1.0) } else { 0.0 };
        let byte = (255.0 * (1.0 - intensity)).round() as u8;
        for i in to_index(xmin).floor() as usize..=to_index(xmax).ceil() as usize {
            // rows run from y = 1 down to y = -1
            for j in to_index(-ymax).floor() as usize..=to_index(-ymin).ceil() as usize {
                let idx = j * res + i;
                if filled[idx] {
                    continue;
                }
                let x = -1.0 + (i as f64 + 0.5) * cell;
                let y = 1.0 - (j as f64 + 0.5) * cell;
                if inside(p, x, y) {
                    gray[idx] = byte;
                    filled[idx] = true;
                }
            }
        }
    }
    Ok(Raster { resolution, gray, max_value })
}

fn inside(p: [[f64; 2]; 3], x: f64, y: f64) -> bool {
    let cross = |a: [f64; 2], b: [f64; 2]| (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0]);
    cross(p[0], p[1]) >= 0.0 && cross(p[1], p[2]) >= 0.0 && cross(p[2], p[0]) >= 0.0
}

/// Binary PPM (`P6`) with equal RGB channels.
pub fn raster_to_ppm(r: &Raster) -> Vec<u8> {
    let mut out = format!("P6\n{0} {0}\n255\n", r.resolution).into_bytes();
    out.reserve(3 * r.gray.len());
    for &g in &r.gray {
        out.extend_from_slice(&[g, g, g]);
    }
    out
}

/// Reads one column of a per-pixel CSV; `None` picks the last column.
pub fn read_field(path: &Path, column: Option<&str>) -> Result<(String, Vec<f64>)> {
    let text = io::read_to_string(path)?;
    let header = text.lines().next().unwrap_or_default().trim().to_string();
    if !header.starts_with(PIXEL_PREFIX) {
        return Err(Error::Format(format!("{}: not a per-pixel CSV", path.display())));
    }
    let name = match column {
        Some(c) => c.to_string(),
        None => header.rsplit(',').next().unwrap_or_default().to_string(),
    };
    let values = io::read_pixel_column(path, &header, &name)?;
    Ok((name, values))
}

/// Renders `field` on `mesh` to `out` (PPM) and `out` with extension
/// `json` (value scale).
pub fn cmd_render(field: &Path, column: Option<&str>, mesh_path: &Path, out: &Path, resolution: usize) -> Result<Raster> {
    check_resolution(resolution)?;
    let mesh = TriMesh::from_json(&io::read_to_string(mesh_path)?)?;
    let (name, values) = read_field(field, column)?;
    let raster = rasterize(&mesh, &values, resolution).map_err(|e| match e {
        Error::DimensionMismatch(m) => Error::Format(format!("{} vs {}: {m}", field.display(), mesh_path.display())),
        e => e,
    })?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    io::write_file(out, &raster_to_ppm(&raster))?;
    let scale = RenderScale {
        width: resolution,
        height: resolution,
        column: name,
        min_value: 0.0,
        max_value: raster.max_value,
        mapping: "gray = round(255 * (1 - clamp(value / max_value, 0, 1)))".into(),
        exterior: 255,
    };
    io::write_file(&out.with_extension("json"), to_json(&scale).as_bytes())?;
    Ok(raster)
}

/// Process exit code for an error: 2 configuration, 3 resonance,
/// 4 data format or I/O, 5 empty support, 1 other numerical failures.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidInput(_) | Error::DegenerateTriangle { .. } => 2,
        Error::NearResonance { .. } | Error::BackgroundResonance { .. } => 3,
        Error::Format(_) | Error::Io { .. } | Error::DimensionMismatch(_) => 4,
        Error::EmptySupport => 5,
        Error::NotPositiveDefinite { .. }
        | Error::SingularFactor { .. }
        | Error::AsymmetryTooLarge(_)
        | Error::SemidefiniteSensitivity { .. } => 1,
    }
}

/// Short machine-readable name of an error.
pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::InvalidInput(_) => "invalid_input",
        Error::DimensionMismatch(_) => "dimension_mismatch",
        Error::NotPositiveDefinite { .. } => "not_positive_definite",
        Error::SingularFactor { .. } => "singular_factor",
        Error::DegenerateTriangle { .. } => "degenerate_triangle",
        Error::NearResonance { .. } => "near_resonance",
        Error::BackgroundResonance { .. } => "background_resonance",
        Error::AsymmetryTooLarge(_) => "asymmetry_too_large",
        Error::SemidefiniteSensitivity { .. } => "semidefinite_sensitivity",
        Error::EmptySupport => "empty_support",
        Error::Format(_) => "format",
        Error::Io { .. } => "io",
    }
}

/// One line for standard error: `error kind=<kind> code=<code> message=<json string>`.
pub fn error_line(e: &Error) -> String {
    format!(
        "error kind={} code={} message={}",
        error_kind(e),
        exit_code(e),
        serde_json::to_string(&e.to_string()).expect("string serializes")
    )
}

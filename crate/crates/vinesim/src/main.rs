//! Command-line entry point. Subcommands reproduce the characterization
//! curves and demonstrations: `force-curve`, `flux-map`, `gamma-vs-flux`,
//! `verify-kinematics`, `simulate` and `fit`.
//!
//! Exit codes: 0 success, 1 usage, 2 validation, 3 solver failure.
//! Failures print a single machine-readable JSON line on stderr.

use clap::{Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use vinesim::calib::{self, FitFamily, MeasurementTable};
use vinesim::engine;
use vinesim::geom::Vec2;
use vinesim::heatfield::{self, Bounds};
use vinesim::kinematics;
use vinesim::output::{fmt_g9, write_csv, RunManifest};
use vinesim::ppam;
use vinesim::scene::SceneFile;
use vinesim::svg::{contour_svg, SvgDocument};
use vinesim::thermo;

#[derive(Parser)]
#[command(name = "vinesim", version, about = "Thermotropic vine-robot simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Svg,
    Both,
}

impl Format {
    fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }
    fn svg(self) -> bool {
        matches!(self, Format::Svg | Format::Both)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Force vs contraction ratio at several temperatures.
    ForceCurve {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Comma-separated temperatures in K.
        #[arg(long, default_value = "315,325")]
        temps: String,
        #[arg(long, default_value_t = 50)]
        samples: usize,
    },
    /// Flux field sampled on a grid, with optional isoflux contours.
    FluxMap {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// x0,y0,x1,y1 in m.
        #[arg(long, default_value = "-1,-1,1,1")]
        bounds: String,
        /// nx,ny cells.
        #[arg(long, default_value = "100,100")]
        resolution: String,
        /// Comma-separated contour levels, W/m^2.
        #[arg(long, default_value = "50,100,200,400,800")]
        levels: String,
    },
    /// Contraction ratio required for the spine balance force, vs flux.
    GammaVsFlux {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long, default_value_t = 5.0)]
        flux_min: f64,
        #[arg(long, default_value_t = 1500.0)]
        flux_max: f64,
        #[arg(long, default_value_t = 60)]
        samples: usize,
    },
    /// Trapezoidal-chain shape for fixed side contractions.
    VerifyKinematics {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long, default_value_t = 0.163)]
        gamma1: f64,
        #[arg(long, default_value_t = 0.0)]
        gamma2: f64,
        #[arg(long, default_value_t = 5)]
        segments: usize,
    },
    /// Run the growth-and-steer simulation.
    Simulate {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
    /// Fit a decay family to a measurement table.
    Fit {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        family: FamilyArg,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FamilyArg {
    InverseSquare,
    Exponential,
    PowerLaw,
}

impl From<FamilyArg> for FitFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::InverseSquare => FitFamily::InverseSquare,
            FamilyArg::Exponential => FitFamily::Exponential,
            FamilyArg::PowerLaw => FitFamily::PowerLaw,
        }
    }
}

enum AppError {
    Validation(String),
    Solver(String),
}

impl AppError {
    fn exit_code(&self) -> i32 {
        match self {
            AppError::Validation(_) => 2,
            AppError::Solver(_) => 3,
        }
    }
    fn kind(&self) -> &'static str {
        match self {
            AppError::Validation(_) => "validation",
            AppError::Solver(_) => "solver",
        }
    }
    fn message(&self) -> &str {
        match self {
            AppError::Validation(m) | AppError::Solver(m) => m,
        }
    }
}

fn validation<E: std::fmt::Display>(e: E) -> AppError {
    AppError::Validation(e.to_string())
}

fn solver<E: std::fmt::Display>(e: E) -> AppError {
    AppError::Solver(e.to_string())
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap handles --help/--version as "errors" with success exit
            if e.use_stderr() {
                eprintln!("{e}");
                std::process::exit(1);
            }
            print!("{e}");
            std::process::exit(0);
        }
    };
    if let Err(e) = dispatch(cli.cmd) {
        eprintln!(
            "{}",
            serde_json::json!({ "error": e.message(), "kind": e.kind() })
        );
        std::process::exit(e.exit_code());
    }
}

struct LoadedScene {
    file: SceneFile,
    manifest: RunManifest,
}

fn load_scene(subcommand: &str, path: &Path, out: &Path) -> Result<LoadedScene, AppError> {
    let bytes = std::fs::read(path).map_err(validation)?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| AppError::Validation("scene file is not UTF-8".into()))?;
    let file = SceneFile::parse(&text).map_err(validation)?;
    std::fs::create_dir_all(out).map_err(validation)?;
    let echo = serde_json::to_value(&file).map_err(validation)?;
    Ok(LoadedScene {
        file,
        manifest: RunManifest::new(subcommand, path, &bytes, echo),
    })
}

fn finish(mut loaded: LoadedScene, out: &Path, outputs: Vec<PathBuf>) -> Result<(), AppError> {
    loaded.manifest.outputs = outputs
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    loaded.manifest.write(out).map_err(validation)?;
    for p in &outputs {
        println!("wrote {}", p.display());
    }
    println!("wrote {}", out.join("manifest.json").display());
    Ok(())
}

fn parse_list(s: &str, expected: usize, what: &str) -> Result<Vec<f64>, AppError> {
    let vals: Result<Vec<f64>, _> = s.split(',').map(|t| t.trim().parse::<f64>()).collect();
    let vals = vals.map_err(|e| AppError::Validation(format!("bad {what} '{s}': {e}")))?;
    if expected > 0 && vals.len() != expected {
        return Err(AppError::Validation(format!(
            "{what} needs {expected} comma-separated values, got {}",
            vals.len()
        )));
    }
    Ok(vals)
}

/// Plain x/y chart: data polyline scaled into a unit-ish viewbox.
fn chart_svg(series: &[(String, Vec<(f64, f64)>)]) -> Result<String, AppError> {
    let all: Vec<(f64, f64)> = series.iter().flat_map(|(_, pts)| pts.iter().copied()).collect();
    if all.is_empty() {
        return Err(AppError::Validation("empty chart".into()));
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in &all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let sx = if x1 > x0 { 1.0 / (x1 - x0) } else { 1.0 };
    let sy = if y1 > y0 { 1.0 / (y1 - y0) } else { 1.0 };
    let mut doc = SvgDocument::new(Vec2::new(-0.05, -0.05), Vec2::new(1.05, 1.05));
    let palette = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a"];
    for (i, (_, pts)) in series.iter().enumerate() {
        let mapped: Vec<Vec2> = pts
            .iter()
            .map(|&(x, y)| Vec2::new((x - x0) * sx, (y - y0) * sy))
            .collect();
        doc.polyline(&mapped, palette[i % palette.len()], 0.004)
            .map_err(validation)?;
    }
    Ok(doc.render())
}

fn scene_overlay(
    doc: &mut SvgDocument,
    scene: &heatfield::HeatScene,
    marker_radius: f64,
) -> Result<(), AppError> {
    for occ in &scene.occluders {
        doc.polygon(&occ.polygon, "#888888", 0.6).map_err(validation)?;
    }
    for h in &scene.heaters {
        doc.circle(h.position, marker_radius, "#d73027");
    }
    Ok(())
}

fn dispatch(cmd: Cmd) -> Result<(), AppError> {
    match cmd {
        Cmd::ForceCurve {
            scene,
            out,
            format,
            temps,
            samples,
        } => force_curve(&scene, &out, format, &temps, samples),
        Cmd::FluxMap {
            scene,
            out,
            format,
            bounds,
            resolution,
            levels,
        } => flux_map(&scene, &out, format, &bounds, &resolution, &levels),
        Cmd::GammaVsFlux {
            scene,
            out,
            format,
            flux_min,
            flux_max,
            samples,
        } => gamma_vs_flux(&scene, &out, format, flux_min, flux_max, samples),
        Cmd::VerifyKinematics {
            scene,
            out,
            format,
            gamma1,
            gamma2,
            segments,
        } => verify_kinematics(&scene, &out, format, gamma1, gamma2, segments),
        Cmd::Simulate { scene, out, format } => simulate(&scene, &out, format),
        Cmd::Fit { table, out, family } => fit(&table, &out, family.into()),
    }
}

fn force_curve(
    scene_path: &Path,
    out: &Path,
    format: Format,
    temps: &str,
    samples: usize,
) -> Result<(), AppError> {
    let loaded = load_scene("force-curve", scene_path, out)?;
    let robot = &loaded.file.robot;
    let temp_list = parse_list(temps, 0, "temps")?;
    if temp_list.is_empty() || samples < 2 {
        return Err(AppError::Validation("need >= 1 temperature and >= 2 samples".into()));
    }
    let gamma_zf = ppam::zero_force_gamma(robot.actuator.l_over_r()).map_err(solver)?;
    let pressures: Vec<f64> = temp_list
        .iter()
        .map(|&t| thermo::gauge_pressure(t, &robot.fluid, robot.fluid.fill_volume))
        .collect::<Result<_, _>>()
        .map_err(validation)?;
    let mut rows = Vec::new();
    let mut series: Vec<(String, Vec<(f64, f64)>)> = temp_list
        .iter()
        .map(|t| (format!("{t} K"), Vec::new()))
        .collect();
    for i in 0..samples {
        let gamma = ppam::GAMMA_FLOOR
            + (gamma_zf - ppam::GAMMA_FLOOR) * i as f64 / (samples - 1) as f64;
        let mut row = vec![fmt_g9(gamma)];
        for (k, &p_g) in pressures.iter().enumerate() {
            let f = ppam::force(p_g, &robot.actuator, gamma).map_err(solver)?;
            series[k].1.push((gamma, f));
            row.push(fmt_g9(f));
        }
        rows.push(row);
    }
    let header = std::iter::once("gamma".to_string())
        .chain(temp_list.iter().map(|t| format!("force_{t}K")))
        .collect::<Vec<_>>()
        .join(",");
    let mut outputs = Vec::new();
    if format.csv() {
        let path = out.join("force_curve.csv");
        write_csv(&path, &header, rows).map_err(validation)?;
        outputs.push(path);
    }
    if format.svg() {
        let path = out.join("force_curve.svg");
        std::fs::write(&path, chart_svg(&series)?).map_err(validation)?;
        outputs.push(path);
    }
    finish(loaded, out, outputs)
}

fn flux_map(
    scene_path: &Path,
    out: &Path,
    format: Format,
    bounds: &str,
    resolution: &str,
    levels: &str,
) -> Result<(), AppError> {
    let loaded = load_scene("flux-map", scene_path, out)?;
    let b = parse_list(bounds, 4, "bounds")?;
    let res = parse_list(resolution, 2, "resolution")?;
    let levels = parse_list(levels, 0, "levels")?;
    let rect = Bounds {
        min: Vec2::new(b[0], b[1]),
        max: Vec2::new(b[2], b[3]),
    };
    let grid = heatfield::isoflux_grid(&loaded.file.scene, rect, res[0] as usize, res[1] as usize)
        .map_err(validation)?;
    let mut outputs = Vec::new();
    if format.csv() {
        let mut rows = Vec::with_capacity(grid.values.len());
        for row in 0..grid.ny {
            for col in 0..grid.nx {
                let p = grid.cell_center(col, row);
                rows.push(vec![fmt_g9(p.x), fmt_g9(p.y), fmt_g9(grid.at(col, row))]);
            }
        }
        let path = out.join("flux_map.csv");
        write_csv(&path, "x,y,flux", rows).map_err(validation)?;
        outputs.push(path);
    }
    if format.svg() {
        let path = out.join("flux_map.svg");
        std::fs::write(&path, contour_svg(&grid, &levels).map_err(validation)?)
            .map_err(validation)?;
        outputs.push(path);
    }
    finish(loaded, out, outputs)
}

fn gamma_vs_flux(
    scene_path: &Path,
    out: &Path,
    format: Format,
    flux_min: f64,
    flux_max: f64,
    samples: usize,
) -> Result<(), AppError> {
    let loaded = load_scene("gamma-vs-flux", scene_path, out)?;
    let robot = &loaded.file.robot;
    if samples < 2 || flux_min < 0.0 || flux_max <= flux_min {
        return Err(AppError::Validation("need samples >= 2 and 0 <= flux_min < flux_max".into()));
    }
    let ambient = loaded.file.scene.ambient_temp;
    let f_req = robot.spine.spam_equilibrium_force();
    let node = thermo::ThermalNode {
        area: robot.actuator.fiber_length * robot.actuator.layflat_width,
        emissivity: robot.thermal.emissivity,
        absorptivity: robot.thermal.absorptivity,
        loss_coeff: robot.thermal.loss_coeff,
        heat_capacity: None,
        temperature: ambient,
    };
    let mut rows = Vec::new();
    let mut pts = Vec::new();
    for i in 0..samples {
        let q = flux_min + (flux_max - flux_min) * i as f64 / (samples - 1) as f64;
        let t = thermo::equilibrium_temp(q, &node, ambient, robot.thermal.mode).map_err(solver)?;
        let p_g = thermo::gauge_pressure(t, &robot.fluid, robot.fluid.fill_volume)
            .map_err(validation)?;
        let gamma = if p_g <= 0.0 {
            0.0
        } else {
            match ppam::gamma_from_force(f_req, p_g, &robot.actuator) {
                Ok(g) => g,
                Err(ppam::PpamError::UnreachableForce { .. }) => 0.0,
                Err(e) => return Err(solver(e)),
            }
        };
        rows.push(vec![fmt_g9(q), fmt_g9(gamma)]);
        pts.push((q, gamma));
    }
    let mut outputs = Vec::new();
    if format.csv() {
        let path = out.join("gamma_vs_flux.csv");
        write_csv(&path, "flux,gamma", rows).map_err(validation)?;
        outputs.push(path);
    }
    if format.svg() {
        let path = out.join("gamma_vs_flux.svg");
        std::fs::write(&path, chart_svg(&[("gamma".into(), pts)])?).map_err(validation)?;
        outputs.push(path);
    }
    finish(loaded, out, outputs)
}

fn verify_kinematics(
    scene_path: &Path,
    out: &Path,
    format: Format,
    gamma1: f64,
    gamma2: f64,
    segments: usize,
) -> Result<(), AppError> {
    let loaded = load_scene("verify-kinematics", scene_path, out)?;
    if segments == 0 {
        return Err(AppError::Validation("segments must be >= 1".into()));
    }
    let chain = loaded.file.robot.chain;
    let gammas = vec![(gamma1, gamma2); segments];
    let thetas = kinematics::segment_angles(&gammas, &chain).map_err(solver)?;
    let thetas_cc =
        kinematics::segment_angles_constant_curvature(&gammas, &chain).map_err(solver)?;
    let pose = kinematics::chain_pose(&gammas, &thetas, &chain).map_err(solver)?;
    let mut outputs = Vec::new();
    if format.csv() {
        let angle_rows = (0..segments)
            .map(|i| {
                vec![
                    (i + 1).to_string(),
                    fmt_g9(thetas[i].to_degrees()),
                    fmt_g9(thetas_cc[i].to_degrees()),
                ]
            })
            .collect::<Vec<_>>();
        let apath = out.join("angles.csv");
        write_csv(&apath, "interface,theta_deg,theta_constant_curvature_deg", angle_rows)
            .map_err(validation)?;
        outputs.push(apath);

        let pose_rows = pose
            .side1
            .iter()
            .zip(&pose.side2)
            .enumerate()
            .map(|(i, (p1, p2))| {
                vec![
                    i.to_string(),
                    fmt_g9(p1.x),
                    fmt_g9(p1.y),
                    fmt_g9(p2.x),
                    fmt_g9(p2.y),
                ]
            })
            .collect::<Vec<_>>();
        let ppath = out.join("pose.csv");
        write_csv(&ppath, "index,x1,y1,x2,y2", pose_rows).map_err(validation)?;
        outputs.push(ppath);
    }
    if format.svg() {
        let all: Vec<&Vec2> = pose.side1.iter().chain(&pose.side2).collect();
        let pad = chain.d;
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in all {
            x0 = x0.min(p.x);
            x1 = x1.max(p.x);
            y0 = y0.min(p.y);
            y1 = y1.max(p.y);
        }
        let mut doc = SvgDocument::new(
            Vec2::new(x0 - pad, y0 - pad),
            Vec2::new(x1 + pad, y1 + pad),
        );
        doc.polyline(&pose.side1, "#d95f02", 0.002).map_err(validation)?;
        doc.polyline(&pose.side2, "#1b9e77", 0.002).map_err(validation)?;
        let path = out.join("pose.svg");
        std::fs::write(&path, doc.render()).map_err(validation)?;
        outputs.push(path);
    }
    finish(loaded, out, outputs)
}

fn simulate(scene_path: &Path, out: &Path, format: Format) -> Result<(), AppError> {
    let loaded = load_scene("simulate", scene_path, out)?;
    let SceneFile { scene, robot, sim } = loaded.file.clone();
    let trajectory = engine::run(&scene, &robot, sim.dt, sim.t_end, sim.sample_every)
        .map_err(solver)?;
    let mut outputs = Vec::new();
    if format.csv() {
        let mut rows = Vec::new();
        for s in &trajectory.samples {
            for (i, seg) in s.segments.iter().enumerate() {
                rows.push(vec![
                    fmt_g9(s.time),
                    i.to_string(),
                    fmt_g9(s.side1[i + 1].x),
                    fmt_g9(s.side1[i + 1].y),
                    fmt_g9(s.side2[i + 1].x),
                    fmt_g9(s.side2[i + 1].y),
                    fmt_g9(seg.temp_1),
                    fmt_g9(seg.temp_2),
                    fmt_g9(seg.gamma_1),
                    fmt_g9(seg.gamma_2),
                ]);
            }
        }
        let path = out.join("trajectory.csv");
        write_csv(&path, "time,index,x1,y1,x2,y2,T1,T2,gamma1,gamma2", rows)
            .map_err(validation)?;
        outputs.push(path);
    }
    if format.svg() {
        let pad = 0.2;
        let mut pts: Vec<Vec2> = scene.heaters.iter().map(|h| h.position).collect();
        for s in &trajectory.samples {
            pts.extend(s.side1.iter().copied());
            pts.extend(s.side2.iter().copied());
        }
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for p in &pts {
            x0 = x0.min(p.x);
            x1 = x1.max(p.x);
            y0 = y0.min(p.y);
            y1 = y1.max(p.y);
        }
        for (k, s) in trajectory.samples.iter().enumerate() {
            let mut doc = SvgDocument::new(
                Vec2::new(x0 - pad, y0 - pad),
                Vec2::new(x1 + pad, y1 + pad),
            );
            scene_overlay(&mut doc, &scene, 0.01)?;
            doc.polyline(&s.side1, "#d95f02", 0.005).map_err(validation)?;
            doc.polyline(&s.side2, "#1b9e77", 0.005).map_err(validation)?;
            let path = out.join(format!("frame_{k:04}.svg"));
            std::fs::write(&path, doc.render()).map_err(validation)?;
            outputs.push(path);
        }
    }
    let last = trajectory.samples.last().unwrap();
    let bearing = engine::tip_bearing_error(last, scene.heaters[0].position).to_degrees();
    let summary = format!("final_tip_bearing_error_deg={}\n", fmt_g9(bearing));
    let spath = out.join("summary.txt");
    std::fs::write(&spath, &summary).map_err(validation)?;
    outputs.push(spath);
    print!("{summary}");
    finish(loaded, out, outputs)
}

fn fit(table_path: &Path, out: &Path, family: FitFamily) -> Result<(), AppError> {
    let bytes = std::fs::read(table_path).map_err(validation)?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| AppError::Validation("table is not UTF-8".into()))?;
    let table =
        MeasurementTable::parse_csv(&text, &table_path.display().to_string()).map_err(validation)?;
    let result = calib::fit_decay(&table, family).map_err(validation)?;
    std::fs::create_dir_all(out).map_err(validation)?;
    let json = serde_json::json!({
        "family": format!("{:?}", result.family),
        "params": result.params,
        "rss": result.rss,
        "residuals": result.residuals,
    });
    let fpath = out.join("fit.json");
    std::fs::write(&fpath, serde_json::to_string_pretty(&json).map_err(validation)? + "\n")
        .map_err(validation)?;
    let mut manifest = RunManifest::new("fit", table_path, &bytes, serde_json::Value::Null);
    manifest.outputs = vec!["fit.json".into()];
    manifest.write(out).map_err(validation)?;
    println!("wrote {}", fpath.display());
    println!("params: {:?} rss: {}", result.params, result.rss);
    Ok(())
}

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cardioem::driver::{self, FieldData, RunConfig, Scenario};
use cardioem::geometry::{generate_idealized_lv, read_mesh, refine_octree, write_mesh, HexMesh, RuleBasedFibers};
use cardioem::mechanics::Mechanics;
use cardioem::refconfig::{reference_configuration, verify_recovery};
use cardioem::units::mmhg_to_pa;
use cardioem::Error;

/// Exit status by failure class.
const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 3;
const EXIT_SOLVER: u8 = 4;
const EXIT_IO: u8 = 5;

#[derive(Parser)]
#[command(name = "cardioem", version, about = "Cardiac electromechanics of an idealized left ventricle")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults are used for missing keys.
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set time.beats=3`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the coarse ventricle mesh, optionally with its refinement.
    MeshGen {
        #[arg(long)]
        out: PathBuf,
        /// Also write the refined mesh at the configured depth.
        #[arg(long)]
        fine_out: Option<PathBuf>,
        /// Also write a VTK view of the coarse mesh.
        #[arg(long)]
        vtk: Option<PathBuf>,
    },
    /// Write fiber, sheet and normal directions at the mesh vertices (VTK).
    Fibers {
        #[arg(long)]
        out: PathBuf,
    },
    /// Recover the stress-free reference of a mesh loaded at a given pressure.
    Unload {
        #[arg(long)]
        pressure_mmhg: f64,
        /// Recovered mesh (mm).
        #[arg(long)]
        out: PathBuf,
        /// JSON report with the iteration history.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the electromechanics simulation and write series, report and fields.
    Run {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        beats: Option<usize>,
        #[arg(long)]
        dt_s: Option<f64>,
    },
    /// Run a baseline and its decreased and increased variants.
    Scenario {
        #[arg(long, value_enum)]
        kind: ScenarioKind,
        /// Relative change; defaults to 0.5, 0.15 and 0.35 for preload,
        /// afterload and contractility.
        #[arg(long)]
        rel: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the invariant checks of the configured model.
    Check {
        /// Write the results as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Print the effective configuration as TOML.
    Config,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioKind {
    Preload,
    Afterload,
    Contractility,
}

impl ScenarioKind {
    fn scenario(self, rel: Option<f64>) -> Scenario {
        match self {
            ScenarioKind::Preload => Scenario::Preload(rel.unwrap_or(0.5)),
            ScenarioKind::Afterload => Scenario::Afterload(rel.unwrap_or(0.15)),
            ScenarioKind::Contractility => Scenario::Contractility(rel.unwrap_or(0.35)),
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Config(_) | Error::Parse { .. } | Error::InvalidInput(_) | Error::Unsupported(_) => EXIT_CONFIG,
        Error::Io { .. } => EXIT_IO,
        _ => EXIT_SOLVER,
    }
}

fn parse_value(text: &str) -> toml::Value {
    let doc = format!("v = {text}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(text.into())),
        Err(_) => toml::Value::String(text.into()),
    }
}

fn load_config(common: &Common) -> Result<RunConfig, Error> {
    let base = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if common.overrides.is_empty() {
        return Ok(base);
    }
    let text = base.to_toml_string()?;
    let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    for item in &common.overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {item:?} is not KEY=VALUE")))?;
        let parts: Vec<&str> = key.trim().split('.').collect();
        let (last, path) = parts.split_last().expect("split yields at least one part");
        let mut t = &mut table;
        for p in path {
            t = t
                .entry(p.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("{key}: {p} is not a table")))?;
        }
        t.insert(last.to_string(), parse_value(value.trim()));
    }
    RunConfig::from_toml_str(&toml::to_string(&table).map_err(|e| Error::Config(e.to_string()))?)
}

fn coarse_mesh(cfg: &RunConfig) -> Result<HexMesh, Error> {
    match &cfg.geometry.mesh_file {
        Some(p) => read_mesh(p),
        None => generate_idealized_lv(&cfg.geometry.shape, &cfg.geometry.resolution),
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn run(cli: Cli) -> Result<u8, Error> {
    let mut cfg = load_config(&cli.common)?;
    match cli.cmd {
        Command::MeshGen { out, fine_out, vtk } => {
            let mesh = coarse_mesh(&cfg)?;
            write_mesh(&mesh, &out)?;
            println!("{}: {} vertices, {} cells", out.display(), mesh.n_vertices(), mesh.n_cells());
            if let Some(path) = vtk {
                driver::write_vtk(&path, "coarse mesh", &mesh, &[], &[])?;
            }
            if let Some(path) = fine_out {
                let nested = refine_octree(&mesh, cfg.geometry.refinement_depth)?;
                write_mesh(&nested.fine, &path)?;
                println!("{}: {} vertices, {} cells", path.display(), nested.fine.n_vertices(), nested.fine.n_cells());
            }
        }
        Command::Fibers { out } => {
            let mesh = coarse_mesh(&cfg)?;
            let fibers = RuleBasedFibers::for_mesh(&mesh, cfg.geometry.fibers)?;
            let frames = fibers.at_vertices(&mesh);
            let arrays = ["fiber", "sheet", "normal"]
                .iter()
                .enumerate()
                .map(|(k, name)| FieldData::Vector(name.to_string(), frames.iter().flat_map(|f| f.dir(k)).collect()))
                .collect::<Vec<_>>();
            driver::write_vtk(&out, "fibers", &mesh, &arrays, &[])?;
            println!("{}: {} vertices", out.display(), mesh.n_vertices());
        }
        Command::Unload {
            pressure_mmhg,
            out,
            report,
        } => {
            let mesh = coarse_mesh(&cfg)?;
            let fibers = RuleBasedFibers::for_mesh(&mesh, cfg.geometry.fibers)?;
            let mech = Mechanics::new(Arc::new(mesh.clone()), &fibers, cfg.mechanics)?;
            let p = mmhg_to_pa(pressure_mmhg);
            let rec = reference_configuration(&mech, p, None, &cfg.init.recovery)?;
            let ratio = if rec.converged {
                Some(verify_recovery(&mech, &rec, p, None, &cfg.newton)?)
            } else {
                None
            };
            if let Some(path) = report {
                let json = serde_json::json!({
                    "pressure_mmhg": pressure_mmhg,
                    "converged": rec.converged,
                    "verified_ratio": ratio,
                    "parameters": cfg.init.recovery,
                    "history": rec.report,
                });
                write_text(&path, &serde_json::to_string_pretty(&json).expect("report is serializable"))?;
            }
            if !rec.converged {
                eprintln!("reference recovery did not converge (ratio {:.3e})", rec.report.final_ratio);
                return Ok(EXIT_SOLVER);
            }
            let mut recovered = mesh;
            recovered.vertices = rec.x0.iter().map(|x| x.map(|c| c * 1e3)).collect();
            write_mesh(&recovered, &out)?;
            println!(
                "{}: recovered in {} outer / {} fixed-point iterations, ratio {:.3e}",
                out.display(),
                rec.report.outer_iterations,
                rec.report.fixed_point_iterations,
                ratio.unwrap_or(f64::NAN)
            );
        }
        Command::Run { out, beats, dt_s } => {
            if let Some(b) = beats {
                cfg.time.beats = b;
                cfg.time.t_end_s = None;
            }
            if let Some(dt) = dt_s {
                cfg.time.dt_s = dt;
            }
            cfg.validate()?;
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            write_text(&out.join("config.toml"), &cfg.to_toml_string()?)?;
            let series = driver::run_to_dir(cfg, &out)?;
            for b in &series.beats {
                println!(
                    "beat {}: EDV {} mL, ESV {} mL, SV {} mL, max p_LV {:.2} mmHg",
                    b.beat,
                    fmt_opt(b.edv),
                    fmt_opt(b.esv),
                    fmt_opt(b.stroke_volume()),
                    b.max_p_lv
                );
            }
            println!("{} samples written to {}", series.samples.len(), out.display());
        }
        Command::Scenario { kind, rel, out } => {
            let report = driver::run_scenario(&cfg, &kind.scenario(rel))?;
            for r in &report.results {
                println!(
                    "{}: SV {} mL, EDV {} mL, ESV {} mL, max p_LV {:.2} mmHg, EDP {} mmHg",
                    r.label,
                    fmt_opt(r.stroke_volume),
                    fmt_opt(r.edv),
                    fmt_opt(r.esv),
                    r.max_p_lv,
                    fmt_opt(r.edp)
                );
            }
            driver::write_json(&report, &out)?;
        }
        Command::Check { json } => {
            let checks = driver::run_checks(&cfg)?;
            for c in &checks {
                println!("[{}] {}: {}", if c.passed { "pass" } else { "FAIL" }, c.name, c.detail);
            }
            if let Some(path) = json {
                driver::write_json(&checks, &path)?;
            }
            if checks.iter().any(|c| !c.passed) {
                return Ok(EXIT_CHECK_FAILED);
            }
        }
        Command::Config => print!("{}", cfg.to_toml_string()?),
    }
    Ok(0)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".into(), |v| format!("{v:.2}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            let mut msg = e.to_string();
            eprintln!("error: {msg}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                let text = s.to_string();
                if !msg.contains(&text) {
                    eprintln!("  caused by: {text}");
                }
                msg = text;
                src = s.source();
            }
            ExitCode::from(exit_code(&e))
        }
    }
}

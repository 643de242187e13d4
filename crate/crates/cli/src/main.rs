use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ots_core::error::Error;
use ots_core::five_bar::{mode_scan, PlanarPose};
use ots_core::io::{format_summary, read_trajectory, ReportTable, Robot, RobotKind, RunConfig};
use ots_core::model::{alpha, indices_at, jacobians, IndexKind, Pose, RobotModel, Unit};
use ots_core::planner::{interpolate, run_offline, run_online_sim, Disturbance, PlantOptions, RunReport, Waypoint};
use ots_core::screw::{IndexPair, LimbPair};
use ots_core::spatial::{validate_convention, SpatialPose};

const TABLE2: &str = include_str!("../presets/table2.csv");
const TABLE5: &str = include_str!("../presets/table5.csv");
const TABLE6: &str = include_str!("../presets/table6.csv");

const EXIT_USAGE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_CONVENTION: u8 = 4;

#[derive(Parser)]
#[command(name = "ots-avoid", version, about = "Type II singularity avoidance with output twist screw angles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan a singularity-free trajectory offline.
    PlanOffline(RunArgs),
    /// Run the planner against a simulated plant and tracker.
    SimulateOnline(OnlineArgs),
    /// Print every index pair, α and det J_D at one pose.
    Indices(IndicesArgs),
    /// Tabulate indices along a trajectory without avoidance.
    Scan(ScanArgs),
    /// Check the kinematic convention against the reference singular pose.
    ValidateConvention(ValidateArgs),
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct ModelSource {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use built-in defaults for this robot (5r or 3ups_rpu).
    #[arg(long)]
    robot: Option<String>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct TrajectorySource {
    /// Trajectory CSV: header, then t and pose coordinates (m, deg).
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Bundled trajectory: table2, table5 or table6.
    #[arg(long)]
    preset: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    model: ModelSource,
    #[command(flatten)]
    trajectory: TrajectorySource,
    /// Report CSV to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OnlineArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Add a pose offset to measurements: T0 T1 followed by one offset per pose coordinate (m, deg).
    #[arg(long, num_args = 3.., allow_negative_numbers = true, value_name = "T0 T1 D")]
    disturb: Option<Vec<f64>>,
    /// Enable tracker noise (0.5 mm on lengths) unless the config sets its own level.
    #[arg(long)]
    noise: bool,
    /// First-order actuator lag, s.
    #[arg(long)]
    lag: Option<f64>,
    /// Noise seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct IndicesArgs {
    #[command(flatten)]
    model: ModelSource,
    /// Comma-separated pose (m, deg).
    #[arg(long, allow_hyphen_values = true)]
    pose: String,
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    model: ModelSource,
    #[command(flatten)]
    trajectory: TrajectorySource,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sample time, s; the configured t_s when omitted.
    #[arg(long)]
    step: Option<f64>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    model: ModelSource,
    /// Largest index value accepted at the singular pose, deg.
    #[arg(long)]
    threshold: Option<f64>,
}

enum Failure {
    Usage(String),
    Infeasible(String),
    Convention(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Parse(_) | Error::Trajectory(_) | Error::Io(_) => Failure::Usage(e.to_string()),
            other => Failure::Infeasible(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

fn load_config(src: &ModelSource) -> CliResult<RunConfig> {
    match (&src.config, &src.robot) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
            Ok(RunConfig::from_toml(&text)?)
        }
        (None, Some(name)) => Ok(RunConfig::defaults(RobotKind::parse(name)?)),
        (None, None) => Err(Failure::Usage("either --config or --robot is required".into())),
    }
}

fn load_waypoints(src: &TrajectorySource, model: &dyn RobotModel) -> CliResult<Vec<Waypoint>> {
    match (&src.trajectory, &src.preset) {
        (Some(path), _) => {
            let f = File::open(path).map_err(|e| Failure::Usage(format!("cannot open {}: {e}", path.display())))?;
            Ok(read_trajectory(f, model)?)
        }
        (None, Some(name)) => {
            let text = match name.as_str() {
                "table2" => TABLE2,
                "table5" => TABLE5,
                "table6" => TABLE6,
                other => return Err(Failure::Usage(format!("unknown preset '{other}'"))),
            };
            Ok(read_trajectory(text.as_bytes(), model)?)
        }
        (None, None) => Err(Failure::Usage("either --trajectory or --preset is required".into())),
    }
}

fn parse_pose(text: &str, model: &dyn RobotModel) -> CliResult<Pose> {
    let vals: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::Usage(format!("pose '{text}' is not a comma-separated list of numbers")))?;
    if vals.len() != model.dof() {
        return Err(Failure::Usage(format!("pose needs {} values, got {}", model.dof(), vals.len())));
    }
    Ok(Pose::from_slice(&convert_in(&vals, model.pose_units())))
}

fn convert_in(vals: &[f64], units: &[Unit]) -> Vec<f64> {
    vals.iter()
        .zip(units)
        .map(|(v, u)| match u {
            Unit::Length => *v,
            Unit::Angle => v.to_radians(),
        })
        .collect()
}

fn write_report(report: &RunReport, out: &Path) -> CliResult<()> {
    let f = File::create(out).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", out.display())))?;
    ReportTable::from_report(report).write(BufWriter::new(f))?;
    Ok(())
}

fn finish_run(report: RunReport, out: &Path) -> CliResult<()> {
    write_report(&report, out)?;
    print!("{}", format_summary(&report, &report.summary()));
    match report.aborted {
        Some(e) => Err(Failure::Infeasible(format!("run stopped early: {e}"))),
        None => Ok(()),
    }
}

fn plan_offline(args: &RunArgs) -> CliResult<()> {
    let cfg = load_config(&args.model)?;
    let robot = cfg.robot()?;
    let model = robot.model();
    let waypoints = load_waypoints(&args.trajectory, model)?;
    let report = run_offline(model, &cfg.avoidance()?, &waypoints)?;
    finish_run(report, &args.out)
}

fn simulate_online(args: &OnlineArgs) -> CliResult<()> {
    let cfg = load_config(&args.run.model)?;
    let robot = cfg.robot()?;
    let model = robot.model();
    let waypoints = load_waypoints(&args.run.trajectory, model)?;
    let mut plant: PlantOptions = cfg.plant();
    if args.noise && plant.noise_length == 0.0 {
        plant.noise_length = PlantOptions::TRACKER_SIGMA;
    }
    if let Some(lag) = args.lag {
        plant.lag = lag;
    }
    if let Some(seed) = args.seed {
        plant.seed = seed;
    }
    if let Some(d) = &args.disturb {
        if d.len() != 2 + model.dof() {
            return Err(Failure::Usage(format!(
                "--disturb needs T0 T1 and {} offsets, got {} values",
                model.dof(),
                d.len()
            )));
        }
        if d[0] > d[1] {
            return Err(Failure::Usage(format!("--disturb window [{}, {}] is reversed", d[0], d[1])));
        }
        plant.disturbance = Some(Disturbance {
            t0: d[0],
            t1: d[1],
            offset: convert_in(&d[2..], model.pose_units()),
        });
    }
    let report = run_online_sim(model, &cfg.avoidance()?, &waypoints, &plant)?;
    finish_run(report, &args.run.out)
}

fn pair_value(p: &IndexPair) -> String {
    p.value.map(|v| format!("{:.6}", v.to_degrees())).unwrap_or_else(|| "undefined".into())
}

fn indices(args: &IndicesArgs) -> CliResult<()> {
    let cfg = load_config(&args.model)?;
    let robot = cfg.robot()?;
    let model = robot.model();
    let pose = parse_pose(&args.pose, model)?;
    let iv = indices_at(model, &pose)?;
    let a = alpha(model, &pose)?;
    let j = jacobians(model, &pose)?;
    let mut out = io::stdout().lock();
    for p in &iv.theta {
        writeln!(out, "theta_{}_{} = {}", p.pair.i + 1, p.pair.j + 1, pair_value(p))?;
    }
    for p in &iv.omega {
        writeln!(out, "omega_{}_{} = {}", p.pair.i + 1, p.pair.j + 1, pair_value(p))?;
    }
    let kind = match model.index_kind() {
        IndexKind::Theta => "theta",
        IndexKind::Omega => "omega",
    };
    writeln!(out, "alpha = {:.6} ({kind} pair {})", a.value.to_degrees(), a.pair)?;
    writeln!(out, "det_jd = {:e}", j.det_forward)?;
    Ok(())
}

fn scan(args: &ScanArgs) -> CliResult<()> {
    let cfg = load_config(&args.model)?;
    let robot = cfg.robot()?;
    let model = robot.model();
    let waypoints = load_waypoints(&args.trajectory, model)?;
    let step = match args.step {
        Some(s) => s,
        None => cfg.avoidance()?.t_s,
    };
    let samples = interpolate(&waypoints, step)?;
    let sink: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Usage(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    let pairs: Vec<LimbPair> = (0..model.dof())
        .flat_map(|i| (i + 1..model.dof()).map(move |j| LimbPair::new(i, j)))
        .collect();
    let mut header = vec!["t".to_string()];
    header.extend(model.pose_labels().iter().map(|s| s.to_string()));
    for name in ["theta", "omega"] {
        header.extend(pairs.iter().map(|p| format!("{name}_{}_{}", p.i + 1, p.j + 1)));
    }
    header.extend(["alpha", "pair", "det_jd"].iter().map(|s| s.to_string()));
    w.write_record(&header).map_err(csv_failure)?;
    for (t, pose) in &samples {
        let mut row = vec![t.to_string()];
        row.extend(pose.iter().zip(model.pose_units()).map(|(v, u)| match u {
            Unit::Length => v.to_string(),
            Unit::Angle => v.to_degrees().to_string(),
        }));
        let iv = indices_at(model, pose)?;
        for list in [&iv.theta, &iv.omega] {
            row.extend(list.iter().map(|p| p.value.map(|v| v.to_degrees().to_string()).unwrap_or_default()));
        }
        let a = alpha(model, pose)?;
        row.push(a.value.to_degrees().to_string());
        row.push(format!("{}-{}", a.pair.i + 1, a.pair.j + 1));
        row.push(jacobians(model, pose)?.det_forward.to_string());
        w.write_record(&row).map_err(csv_failure)?;
    }
    w.flush()?;
    Ok(())
}

/// Published singular poses and the index threshold each robot must reach there.
fn validate(args: &ValidateArgs) -> CliResult<()> {
    let cfg = load_config(&args.model)?;
    let robot = cfg.robot()?;
    let mut out = io::stdout().lock();
    match robot {
        Robot::FiveBar(m) => {
            let threshold = args.threshold.unwrap_or(1.0).to_radians();
            let singular = PlanarPose::new(-0.03, 0.05);
            let mut passed = None;
            for (mode, th) in mode_scan(&m.geometry, &singular) {
                match th {
                    Ok(v) => {
                        let ok = v < threshold;
                        writeln!(out, "{} theta_1_2 = {:.4} deg {}", mode.id(), v.to_degrees(), verdict(ok))?;
                        if ok && passed.is_none() {
                            passed = Some(mode);
                        }
                    }
                    Err(e) => writeln!(out, "{} unreachable: {e}", mode.id())?,
                }
            }
            match passed {
                Some(mode) => {
                    writeln!(out, "frozen working_mode = {}", mode.id())?;
                    Ok(())
                }
                None => Err(Failure::Convention(format!(
                    "no working mode reaches theta_1_2 < {:.3} deg at (-0.03, 0.05)",
                    threshold.to_degrees()
                ))),
            }
        }
        Robot::Spatial(m) => {
            let threshold = args.threshold.unwrap_or(2.0).to_radians();
            let deg = f64::to_radians;
            let start = SpatialPose::new(0.038, 0.640, deg(1.14), deg(3.64));
            let singular = SpatialPose::new(0.016, 0.707, deg(8.619), deg(18.15));
            let (checks, first) =
                validate_convention(m.layout.geometry, &start, &singular, LimbPair::limbs(3, 4), threshold)?;
            for c in &checks {
                let a = c
                    .alpha
                    .map(|(v, p)| format!("{:.4} deg at {p}", v.to_degrees()))
                    .unwrap_or_else(|| "undefined".into());
                let x = c.crossing.map(|u| format!("{u:.4}")).unwrap_or_else(|| "none".into());
                writeln!(out, "{} min omega = {a}, det_jd crossing = {x} {}", c.variant, verdict(c.passed))?;
            }
            match first {
                Some(v) => {
                    writeln!(out, "frozen convention = {}", v.id)?;
                    if v.id != m.layout.variant.id {
                        writeln!(out, "note: configured convention is {}", m.layout.variant.id)?;
                    }
                    Ok(())
                }
                None => Err(Failure::Convention(
                    "no convention variant reaches the singular pose with pair (3,4)".into(),
                )),
            }
        }
    }
}

fn csv_failure(e: csv::Error) -> Failure {
    Failure::Usage(e.to_string())
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::PlanOffline(a) => plan_offline(a),
        Command::SimulateOnline(a) => simulate_online(a),
        Command::Indices(a) => indices(a),
        Command::Scan(a) => scan(a),
        Command::ValidateConvention(a) => validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Infeasible(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_INFEASIBLE)
        }
        Err(Failure::Convention(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_CONVENTION)
        }
    }
}

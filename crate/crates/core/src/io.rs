//! Run configuration (TOML), trajectory CSV and report CSV.
//!
//! Every angle that crosses a file boundary is in degrees; lengths are metres.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::avoidance::{AvoidanceConfig, Mode};
use crate::error::{Error, Result};
use crate::five_bar::{FiveBar, FiveBarGeometry, WorkingMode};
use crate::model::{JointLimit, RobotModel, Unit};
use crate::planner::{PlantOptions, RunReport, Summary, Waypoint};
use crate::screw::LimbPair;
use crate::spatial::{ConventionVariant, Spatial, SpatialGeometry};

fn to_display(v: f64, unit: Unit) -> f64 {
    match unit {
        Unit::Length => v,
        Unit::Angle => v.to_degrees(),
    }
}

fn from_display(v: f64, unit: Unit) -> f64 {
    match unit {
        Unit::Length => v,
        Unit::Angle => v.to_radians(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RobotKind {
    #[serde(rename = "5r")]
    FiveBar,
    #[serde(rename = "3ups_rpu")]
    Spatial,
}

impl RobotKind {
    pub fn parse(s: &str) -> Result<RobotKind> {
        match s {
            "5r" => Ok(RobotKind::FiveBar),
            "3ups_rpu" => Ok(RobotKind::Spatial),
            other => Err(Error::Config(format!("unknown robot '{other}', expected 5r or 3ups_rpu"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiveBarSection {
    pub r10: Option<f64>,
    pub r20: Option<f64>,
    pub r11: Option<f64>,
    pub r21: Option<f64>,
    pub r12: Option<f64>,
    pub r22: Option<f64>,
    pub working_mode: Option<String>,
}

/// Spatial geometry overrides; `beta_*` in degrees.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialSection {
    pub r1: Option<f64>,
    pub r2: Option<f64>,
    pub r3: Option<f64>,
    pub beta_fd: Option<f64>,
    pub beta_fi: Option<f64>,
    pub ds: Option<f64>,
    pub rm1: Option<f64>,
    pub rm2: Option<f64>,
    pub rm3: Option<f64>,
    pub beta_md: Option<f64>,
    pub beta_mi: Option<f64>,
    pub convention: Option<String>,
}

/// `lim_alpha` in degrees.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AvoidanceSection {
    pub t_s: Option<f64>,
    pub v_d: Option<f64>,
    pub lim_alpha: Option<f64>,
}

/// Per-actuator limits in display units.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsSection {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

/// Plant options; `noise_angle` in degrees.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnlineSection {
    pub measurement_rate: Option<f64>,
    pub lag: Option<f64>,
    pub noise_length: Option<f64>,
    pub noise_angle: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub robot: RobotKind,
    #[serde(default)]
    pub five_bar: FiveBarSection,
    #[serde(default)]
    pub spatial: SpatialSection,
    #[serde(default)]
    pub avoidance: AvoidanceSection,
    pub limits: Option<LimitsSection>,
    #[serde(default)]
    pub online: OnlineSection,
}

/// A configured robot model.
#[derive(Debug, Clone, PartialEq)]
pub enum Robot {
    FiveBar(FiveBar),
    Spatial(Spatial),
}

impl Robot {
    pub fn model(&self) -> &dyn RobotModel {
        match self {
            Robot::FiveBar(m) => m,
            Robot::Spatial(m) => m,
        }
    }
}

impl RunConfig {
    pub fn defaults(robot: RobotKind) -> Self {
        RunConfig {
            robot,
            five_bar: FiveBarSection::default(),
            spatial: SpatialSection::default(),
            avoidance: AvoidanceSection::default(),
            limits: None,
            online: OnlineSection::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn robot(&self) -> Result<Robot> {
        let robot = match self.robot {
            RobotKind::FiveBar => {
                let s = &self.five_bar;
                let d = FiveBarGeometry::default();
                let g = FiveBarGeometry {
                    r10: s.r10.unwrap_or(d.r10),
                    r20: s.r20.unwrap_or(d.r20),
                    r11: s.r11.unwrap_or(d.r11),
                    r21: s.r21.unwrap_or(d.r21),
                    r12: s.r12.unwrap_or(d.r12),
                    r22: s.r22.unwrap_or(d.r22),
                };
                let mode = match &s.working_mode {
                    Some(id) => WorkingMode::from_id(id)?,
                    None => WorkingMode::default(),
                };
                let mut m = FiveBar::new(g, mode)?;
                if let Some(l) = self.limits(&m)? {
                    m = m.with_limits([l[0], l[1]]);
                }
                Robot::FiveBar(m)
            }
            RobotKind::Spatial => {
                let s = &self.spatial;
                let d = SpatialGeometry::default();
                let deg = |v: Option<f64>, dflt: f64| v.map(f64::to_radians).unwrap_or(dflt);
                let g = SpatialGeometry {
                    r1: s.r1.unwrap_or(d.r1),
                    r2: s.r2.unwrap_or(d.r2),
                    r3: s.r3.unwrap_or(d.r3),
                    beta_fd: deg(s.beta_fd, d.beta_fd),
                    beta_fi: deg(s.beta_fi, d.beta_fi),
                    ds: s.ds.unwrap_or(d.ds),
                    rm1: s.rm1.unwrap_or(d.rm1),
                    rm2: s.rm2.unwrap_or(d.rm2),
                    rm3: s.rm3.unwrap_or(d.rm3),
                    beta_md: deg(s.beta_md, d.beta_md),
                    beta_mi: deg(s.beta_mi, d.beta_mi),
                };
                let variant = match &s.convention {
                    Some(id) => ConventionVariant::by_id(id)?,
                    None => ConventionVariant::default(),
                };
                let mut m = Spatial::new(g, variant)?;
                if let Some(l) = self.limits(&m)? {
                    m = m.with_limits([l[0], l[1], l[2], l[3]]);
                }
                Robot::Spatial(m)
            }
        };
        Ok(robot)
    }

    fn limits(&self, model: &dyn RobotModel) -> Result<Option<Vec<JointLimit>>> {
        let Some(l) = &self.limits else { return Ok(None) };
        let f = model.dof();
        if l.min.len() != f || l.max.len() != f {
            return Err(Error::Config(format!("limits need {f} min and {f} max values")));
        }
        let units = model.joint_units();
        let out = (0..f)
            .map(|k| JointLimit::new(from_display(l.min[k], units[k]), from_display(l.max[k], units[k])))
            .collect::<Result<Vec<_>>>()?;
        Ok(Some(out))
    }

    pub fn avoidance(&self) -> Result<AvoidanceConfig> {
        let d = match self.robot {
            RobotKind::FiveBar => AvoidanceConfig::five_bar(),
            RobotKind::Spatial => AvoidanceConfig::spatial(),
        };
        let a = &self.avoidance;
        let cfg = AvoidanceConfig {
            t_s: a.t_s.unwrap_or(d.t_s),
            v_d: a.v_d.unwrap_or(d.v_d),
            lim_alpha: a.lim_alpha.map(f64::to_radians).unwrap_or(d.lim_alpha),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn plant(&self) -> PlantOptions {
        let d = PlantOptions::default();
        let o = &self.online;
        PlantOptions {
            measurement_rate: o.measurement_rate.unwrap_or(d.measurement_rate),
            lag: o.lag.unwrap_or(d.lag),
            noise_length: o.noise_length.unwrap_or(d.noise_length),
            noise_angle: o.noise_angle.map(f64::to_radians).unwrap_or(d.noise_angle),
            seed: o.seed.unwrap_or(d.seed),
            disturbance: None,
        }
    }
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("{what}: '{s}' is not a number")))
}

/// Reads `t,coord1,...` rows after a header; angles in degrees.
pub fn read_trajectory<R: Read>(reader: R, model: &dyn RobotModel) -> Result<Vec<Waypoint>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let width = 1 + model.dof();
    let header_len = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?.len();
    if header_len == 0 {
        return Err(Error::Trajectory("trajectory file is empty".into()));
    }
    if header_len != width {
        return Err(Error::Trajectory(format!(
            "expected {width} columns (t + {} pose coordinates), header has {header_len}",
            model.dof()
        )));
    }
    let units = model.pose_units();
    let mut out = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        if rec.len() != width {
            return Err(Error::Trajectory(format!("row {} has {} columns, expected {width}", n + 1, rec.len())));
        }
        let t = parse_f64(&rec[0], "t")?;
        let pose: Vec<f64> = (0..model.dof())
            .map(|k| parse_f64(&rec[k + 1], "pose").map(|v| from_display(v, units[k])))
            .collect::<Result<_>>()?;
        out.push(Waypoint::new(t, &pose));
    }
    if out.is_empty() {
        return Err(Error::Trajectory("trajectory has no waypoints".into()));
    }
    Ok(out)
}

pub fn write_trajectory<W: Write>(writer: W, model: &dyn RobotModel, waypoints: &[Waypoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["t".to_string()];
    header.extend(model.pose_labels().iter().map(|s| s.to_string()));
    w.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
    let units = model.pose_units();
    for wp in waypoints {
        let mut row = vec![wp.t.to_string()];
        row.extend(wp.pose.iter().zip(units).map(|(v, u)| to_display(*v, *u).to_string()));
        w.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// One report row in file units (degrees for angles).
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRecord {
    pub t: f64,
    pub t_meas: f64,
    pub x_r: Vec<f64>,
    pub x_m: Vec<f64>,
    pub x_d: Vec<f64>,
    pub q_r: Vec<f64>,
    pub q_d: Vec<f64>,
    pub alpha_r: f64,
    pub alpha_m: f64,
    pub alpha_d: Option<f64>,
    pub pair_m: LimbPair,
    pub det_jd_r: f64,
    pub det_jd_d: f64,
    pub delta_l: Vec<i64>,
    pub mode: Mode,
    pub no_improvement: bool,
    pub return_blocked: bool,
    pub measurement_trigger: bool,
    pub step_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub pose_labels: Vec<String>,
    pub joint_labels: Vec<String>,
    pub records: Vec<ReportRecord>,
}

impl ReportTable {
    pub fn from_report(report: &RunReport) -> Self {
        let pu = &report.pose_units;
        let ju = &report.joint_units;
        let conv = |v: &[f64], units: &[Unit]| -> Vec<f64> {
            v.iter().zip(units).map(|(x, u)| to_display(*x, *u)).collect()
        };
        let records = report
            .rows
            .iter()
            .map(|r| ReportRecord {
                t: r.t,
                t_meas: r.t_meas,
                x_r: conv(&r.x_r, pu),
                x_m: conv(&r.x_m, pu),
                x_d: conv(&r.x_d, pu),
                q_r: conv(&r.q_r, ju),
                q_d: conv(&r.q_d, ju),
                alpha_r: r.alpha_r.to_degrees(),
                alpha_m: r.alpha_m.to_degrees(),
                alpha_d: r.alpha_d.map(f64::to_degrees),
                pair_m: r.pair_m,
                det_jd_r: r.det_jd_r,
                det_jd_d: r.det_jd_d,
                delta_l: r.delta_l.clone(),
                mode: r.mode,
                no_improvement: r.no_improvement,
                return_blocked: r.return_blocked,
                measurement_trigger: r.measurement_trigger,
                step_time: r.step_time,
            })
            .collect();
        ReportTable {
            pose_labels: report.pose_labels.clone(),
            joint_labels: report.joint_labels.clone(),
            records,
        }
    }

    /// Column names in file order.
    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string(), "t_meas".to_string()];
        for prefix in ["r", "m", "d"] {
            h.extend(self.pose_labels.iter().map(|l| format!("{l}_{prefix}")));
        }
        for prefix in ["r", "d"] {
            h.extend(self.joint_labels.iter().map(|l| format!("{l}_{prefix}")));
        }
        h.extend(
            ["alpha_r", "alpha_m", "alpha_d", "pair_m", "det_jd_r", "det_jd_d"]
                .iter()
                .map(|s| s.to_string()),
        );
        h.extend((1..=self.joint_labels.len()).map(|k| format!("dl_{k}")));
        h.extend(
            ["mode", "no_improvement", "return_blocked", "measurement_trigger", "step_time"]
                .iter()
                .map(|s| s.to_string()),
        );
        h
    }

    pub fn write<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.header()).map_err(|e| Error::Io(e.to_string()))?;
        for r in &self.records {
            let mut row: Vec<String> = vec![r.t.to_string(), r.t_meas.to_string()];
            for v in [&r.x_r, &r.x_m, &r.x_d, &r.q_r, &r.q_d] {
                row.extend(v.iter().map(|x| x.to_string()));
            }
            row.push(r.alpha_r.to_string());
            row.push(r.alpha_m.to_string());
            row.push(r.alpha_d.map(|a| a.to_string()).unwrap_or_default());
            row.push(format!("{}-{}", r.pair_m.i + 1, r.pair_m.j + 1));
            row.push(r.det_jd_r.to_string());
            row.push(r.det_jd_d.to_string());
            row.extend(r.delta_l.iter().map(|d| d.to_string()));
            row.push(r.mode.to_string());
            for b in [r.no_improvement, r.return_blocked, r.measurement_trigger] {
                row.push(u8::from(b).to_string());
            }
            row.push(r.step_time.to_string());
            w.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Parses a report written by [`ReportTable::write`].
    pub fn read<R: Read>(reader: R, pose_dim: usize, joint_dim: usize) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::Parse(e.to_string()))?
            .iter()
            .map(|s| s.to_string())
            .collect();
        let width = 2 + 3 * pose_dim + 2 * joint_dim + 6 + joint_dim + 5;
        if header.len() != width {
            return Err(Error::Parse(format!("report header has {} columns, expected {width}", header.len())));
        }
        let strip = |s: &str, suffix: &str| -> Result<String> {
            s.strip_suffix(suffix)
                .map(str::to_string)
                .ok_or_else(|| Error::Parse(format!("unexpected column '{s}'")))
        };
        let pose_labels = header[2..2 + pose_dim]
            .iter()
            .map(|s| strip(s, "_r"))
            .collect::<Result<Vec<_>>>()?;
        let j0 = 2 + 3 * pose_dim;
        let joint_labels = header[j0..j0 + joint_dim]
            .iter()
            .map(|s| strip(s, "_r"))
            .collect::<Result<Vec<_>>>()?;
        let table = ReportTable {
            pose_labels,
            joint_labels,
            records: Vec::new(),
        };
        if table.header() != header {
            return Err(Error::Parse("report header does not match the expected column order".into()));
        }

        let mut records = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            let mut it = rec.iter();
            let mut next = || it.next().ok_or_else(|| Error::Parse("short report row".into()));
            let mut num = |what: &str| -> Result<f64> { parse_f64(next()?, what) };
            let t = num("t")?;
            let t_meas = num("t_meas")?;
            let mut vecs = Vec::with_capacity(5);
            for dim in [pose_dim, pose_dim, pose_dim, joint_dim, joint_dim] {
                vecs.push((0..dim).map(|_| num("coordinate")).collect::<Result<Vec<_>>>()?);
            }
            let alpha_r = num("alpha_r")?;
            let alpha_m = num("alpha_m")?;
            let ad = next()?;
            let alpha_d = if ad.is_empty() { None } else { Some(parse_f64(ad, "alpha_d")?) };
            let pair_m = parse_pair(next()?)?;
            let det_jd_r = parse_f64(next()?, "det_jd_r")?;
            let det_jd_d = parse_f64(next()?, "det_jd_d")?;
            let delta_l = (0..joint_dim)
                .map(|_| {
                    let s = next()?;
                    s.parse::<i64>().map_err(|_| Error::Parse(format!("dl: '{s}' is not an integer")))
                })
                .collect::<Result<Vec<_>>>()?;
            let mode = Mode::parse(next()?)?;
            let mut flag = || -> Result<bool> {
                match next()? {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    other => Err(Error::Parse(format!("flag '{other}' is not 0 or 1"))),
                }
            };
            let no_improvement = flag()?;
            let return_blocked = flag()?;
            let measurement_trigger = flag()?;
            let step_time = parse_f64(next()?, "step_time")?;
            let mut vecs = vecs.into_iter();
            records.push(ReportRecord {
                t,
                t_meas,
                x_r: vecs.next().unwrap_or_default(),
                x_m: vecs.next().unwrap_or_default(),
                x_d: vecs.next().unwrap_or_default(),
                q_r: vecs.next().unwrap_or_default(),
                q_d: vecs.next().unwrap_or_default(),
                alpha_r,
                alpha_m,
                alpha_d,
                pair_m,
                det_jd_r,
                det_jd_d,
                delta_l,
                mode,
                no_improvement,
                return_blocked,
                measurement_trigger,
                step_time,
            });
        }
        Ok(ReportTable { records, ..table })
    }
}

fn parse_pair(s: &str) -> Result<LimbPair> {
    let (a, b) = s
        .split_once('-')
        .ok_or_else(|| Error::Parse(format!("pair '{s}' is not of the form i-j")))?;
    let i: usize = a.parse().map_err(|_| Error::Parse(format!("bad pair '{s}'")))?;
    let j: usize = b.parse().map_err(|_| Error::Parse(format!("bad pair '{s}'")))?;
    if i == 0 || j <= i {
        return Err(Error::Parse(format!("bad pair '{s}'")));
    }
    Ok(LimbPair::limbs(i, j))
}

/// Human-readable summary block, one `key = value` per line, display units.
pub fn format_summary(report: &RunReport, s: &Summary) -> String {
    let units: Vec<&str> = report
        .joint_units
        .iter()
        .map(|u| match u {
            Unit::Length => "m",
            Unit::Angle => "deg",
        })
        .collect();
    let unit = if units.iter().all(|u| *u == units[0]) { units[0] } else { "mixed" };
    let disp = |v: f64| match report.joint_units.first() {
        Some(Unit::Angle) => v.to_degrees(),
        _ => v,
    };
    let mut out = String::new();
    out.push_str("{\n");
    out.push_str(&format!("  robot = {}\n", report.robot));
    out.push_str(&format!("  ticks = {}\n", s.ticks));
    out.push_str(&format!("  t_l_ms = {:.4}\n", s.t_l * 1e3));
    out.push_str(&format!("  delta_q_{unit} = {:.6}\n", disp(s.delta_q)));
    out.push_str(&format!("  delta_qdot_{unit}_per_s = {:.6}\n", disp(s.delta_qdot)));
    let devs: Vec<String> = s.max_deviation.iter().map(|v| format!("{:.6}", disp(*v))).collect();
    out.push_str(&format!("  max_deviation_{unit} = [{}]\n", devs.join(", ")));
    out.push_str(&format!("  max_abs_delta_l = {:?}\n", s.max_abs_delta_l));
    out.push_str(&format!("  final_delta_l = {:?}\n", s.final_delta_l));
    out.push_str(&format!(
        "  ticks_avoid_hold_return = [{}, {}, {}]\n",
        s.avoid_ticks, s.hold_ticks, s.return_ticks
    ));
    if let Some(e) = &report.aborted {
        out.push_str(&format!("  aborted = {e}\n"));
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = RunConfig::from_toml("robot = \"5r\"\n").unwrap();
        assert_eq!(cfg.avoidance().unwrap(), AvoidanceConfig::five_bar());
        let Robot::FiveBar(m) = cfg.robot().unwrap() else { panic!("wrong robot") };
        assert_eq!(m.geometry, FiveBarGeometry::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("robot = \"5r\"\nspeed = 3\n").is_err());
        assert!(RunConfig::from_toml("robot = \"delta\"\n").is_err());
    }

    #[test]
    fn degrees_are_converted() {
        let cfg = RunConfig::from_toml("robot = \"3ups_rpu\"\n[avoidance]\nlim_alpha = 3.0\n").unwrap();
        assert!((cfg.avoidance().unwrap().lim_alpha - 3f64.to_radians()).abs() < 1e-15);
    }

    #[test]
    fn limits_need_matching_length() {
        let cfg = RunConfig::from_toml("robot = \"5r\"\n[limits]\nmin = [-90.0]\nmax = [90.0]\n").unwrap();
        assert!(matches!(cfg.robot(), Err(Error::Config(_))));
    }

    #[test]
    fn pair_parsing() {
        assert_eq!(parse_pair("3-4").unwrap(), LimbPair::new(2, 3));
        assert!(parse_pair("4-3").is_err());
        assert!(parse_pair("0-1").is_err());
        assert!(parse_pair("34").is_err());
    }
}

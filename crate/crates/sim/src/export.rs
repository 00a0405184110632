//! CSV and SVG output of a run.
//!
//! CSV columns, in order:
//!
//! `time, step, leg, trajectory, incline_deg, phase, sag_theta, sag_L,
//! front_theta, front_L, torque, y_des, events`
//!
//! plus a trailing `mpc_latency_us` column when requested. Latency is
//! wall-clock and left out by default so that repeated runs produce
//! identical files. Floats use 17 significant digits.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use alip_core::textfmt::format_float;

use crate::sim::{event, RunLog};
use crate::SimError;

pub const CSV_HEADER: [&str; 13] = [
    "time",
    "step",
    "leg",
    "trajectory",
    "incline_deg",
    "phase",
    "sag_theta",
    "sag_L",
    "front_theta",
    "front_L",
    "torque",
    "y_des",
    "events",
];
pub const LATENCY_COLUMN: &str = "mpc_latency_us";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SimError + '_ {
    move |source| SimError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path, e: csv::Error) -> SimError {
    SimError::Io { path: path.to_path_buf(), source: e.into() }
}

pub fn write_csv<W: Write>(log: &RunLog, out: W, with_latency: bool) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = CSV_HEADER.to_vec();
    if with_latency {
        header.push(LATENCY_COLUMN);
    }
    w.write_record(&header)?;
    for t in &log.ticks {
        let mut row = vec![
            format_float(t.time),
            t.step.to_string(),
            t.leg().to_string(),
            log.trajectory_name(t.traj_index).to_string(),
            format_float(t.incline_deg),
            format_float(t.phase_time),
            format_float(t.sagittal.theta),
            format_float(t.sagittal.momentum),
            format_float(t.frontal.theta),
            format_float(t.frontal.momentum),
            format_float(t.torque),
            format_float(t.y_des),
            event::describe(t.events),
        ];
        if with_latency {
            row.push(format!("{:.3}", t.latency_us));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn export_csv(log: &RunLog, path: impl AsRef<Path>, with_latency: bool) -> Result<(), SimError> {
    let path = path.as_ref();
    if log.ticks.is_empty() {
        return Err(SimError::EmptyLog);
    }
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    write_csv(log, std::io::BufWriter::new(file), with_latency).map_err(|e| csv_err(path, e))
}

const WIDTH: f64 = 1000.0;
const PANEL: f64 = 260.0;
const MARGIN: f64 = 60.0;
const MAX_POINTS: usize = 4000;

struct Panel {
    top: f64,
    lo: f64,
    hi: f64,
    t_end: f64,
}

impl Panel {
    fn x(&self, t: f64) -> f64 {
        MARGIN + (WIDTH - 2.0 * MARGIN) * t / self.t_end
    }

    fn y(&self, v: f64) -> f64 {
        self.top + PANEL * (self.hi - v) / (self.hi - self.lo)
    }

    fn polyline(&self, svg: &mut String, points: impl Iterator<Item = (f64, f64)>, color: &str) {
        let mut d = String::new();
        for (t, v) in points {
            let _ = write!(d, "{:.2},{:.2} ", self.x(t), self.y(v));
        }
        let _ = writeln!(svg, r#"<polyline fill="none" stroke="{color}" stroke-width="1" points="{}"/>"#, d.trim_end());
    }

    fn frame(&self, svg: &mut String, title: &str) {
        let _ = writeln!(
            svg,
            r#"<rect x="{MARGIN}" y="{}" width="{}" height="{PANEL}" fill="none" stroke="black"/>"#,
            self.top,
            WIDTH - 2.0 * MARGIN
        );
        let _ = writeln!(svg, r#"<text x="{MARGIN}" y="{}" font-size="14">{title}</text>"#, self.top - 8.0);
        for v in [self.lo, self.hi] {
            let _ = writeln!(svg, r#"<text x="4" y="{:.1}" font-size="11">{v:.1}</text>"#, self.y(v) + 4.0);
        }
    }
}

/// Two stacked panels: ankle torque with the saturation band, and
/// sagittal/frontal momentum.
pub fn render_svg(log: &RunLog) -> Result<String, SimError> {
    if log.ticks.is_empty() {
        return Err(SimError::EmptyLog);
    }
    let stride = log.ticks.len().div_ceil(MAX_POINTS);
    let ticks: Vec<_> = log.ticks.iter().step_by(stride).collect();
    let t_end = log.ticks.last().map_or(1.0, |t| t.time).max(1e-9);
    let limit = log.torque_limit;
    let height = 2.0 * PANEL + 3.0 * MARGIN;

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" font-family="sans-serif">"#);
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);

    let torque = Panel { top: MARGIN, lo: -1.2 * limit, hi: 1.2 * limit, t_end };
    let _ = writeln!(
        svg,
        r##"<rect x="{MARGIN}" y="{:.2}" width="{}" height="{:.2}" fill="#e8f0ff"/>"##,
        torque.y(limit),
        WIDTH - 2.0 * MARGIN,
        torque.y(-limit) - torque.y(limit)
    );
    for v in [limit, -limit] {
        let _ = writeln!(
            svg,
            r#"<line x1="{MARGIN}" x2="{}" y1="{y:.2}" y2="{y:.2}" stroke="red" stroke-dasharray="6 4"/>"#,
            WIDTH - MARGIN,
            y = torque.y(v)
        );
    }
    torque.polyline(&mut svg, ticks.iter().map(|t| (t.time, t.torque)), "black");
    torque.frame(&mut svg, &format!("{}: ankle torque [N m], limit ±{limit}", log.scenario));

    let (lo, hi) = ticks
        .iter()
        .flat_map(|t| [t.sagittal.momentum, t.frontal.momentum])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let pad = 0.05 * (hi - lo).max(1e-6);
    let momentum = Panel { top: 2.0 * MARGIN + PANEL, lo: lo - pad, hi: hi + pad, t_end };
    momentum.polyline(&mut svg, ticks.iter().map(|t| (t.time, t.sagittal.momentum)), "#1f77b4");
    momentum.polyline(&mut svg, ticks.iter().map(|t| (t.time, t.frontal.momentum)), "#ff7f0e");
    momentum.frame(&mut svg, "momentum [kg m^2/s]: sagittal (blue), frontal (orange)");
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="12">time [s], 0 to {t_end:.2}</text>"#,
        WIDTH / 2.0 - 60.0,
        height - 15.0
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn emit_plot(log: &RunLog, path: impl AsRef<Path>) -> Result<(), SimError> {
    let path = path.as_ref();
    let svg = render_svg(log)?;
    std::fs::write(path, svg).map_err(io_err(path))
}

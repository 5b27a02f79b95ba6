//! Plot-ready columnar text emission with a fixed column order and
//! deterministic formatting.

use std::io::Write;
use std::path::Path;

use unicycle_motion::geom::ConvexSet;
use unicycle_motion::predict::MotionPrediction;

pub const TRAJECTORY_HEADER: &str = "time x y theta v w psi dist_goal safedist s";

#[derive(Debug, Clone, Copy)]
pub struct TrajectoryRow {
    pub time: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub w: f64,
    pub psi: f64,
    pub dist_goal: f64,
    pub safedist: f64,
    pub s: f64,
}

fn num(v: f64) -> String {
    format!("{v:.12e}")
}

pub fn write_trajectory(path: &Path, rows: &[TrajectoryRow]) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{TRAJECTORY_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{} {} {} {} {} {} {} {} {} {}",
            num(r.time),
            num(r.x),
            num(r.y),
            num(r.theta),
            num(r.v),
            num(r.w),
            num(r.psi),
            num(r.dist_goal),
            num(r.safedist),
            num(r.s),
        )?;
    }
    Ok(())
}

/// One prediction set as a single line: time, method, shape kind, then the
/// shape data (center-radius for disks, vertex list otherwise).
pub fn prediction_record(t: f64, prediction: &MotionPrediction) -> String {
    let mut line = format!("{} {}", num(t), prediction.method.name());
    match &prediction.body {
        ConvexSet::Disk(d) => {
            line.push_str(&format!(
                " disk {} {} {}",
                num(d.center.x),
                num(d.center.y),
                num(d.radius)
            ));
        }
        ConvexSet::Polygon(verts) => {
            line.push_str(" polygon");
            for v in verts {
                line.push_str(&format!(" {} {}", num(v.x), num(v.y)));
            }
        }
        ConvexSet::ConeHull { apex, disk } => {
            line.push_str(&format!(
                " cone {} {} {} {} {}",
                num(apex.x),
                num(apex.y),
                num(disk.center.x),
                num(disk.center.y),
                num(disk.radius)
            ));
        }
        ConvexSet::PointChain(pts) => {
            line.push_str(" chain");
            for v in pts {
                line.push_str(&format!(" {} {}", num(v.x), num(v.y)));
            }
        }
    }
    line
}

pub fn write_predictions(path: &Path, records: &[(f64, MotionPrediction)]) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "# time method kind data")?;
    for (t, m) in records {
        writeln!(out, "{}", prediction_record(*t, m))?;
    }
    Ok(())
}

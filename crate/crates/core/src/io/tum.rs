//! TUM trajectory format: one `t tx ty tz qx qy qz qw` line per pose, nine
//! significant digits. 2D poses embed in the z = 0 plane with a yaw-only
//! quaternion.

use crate::error::{Error, Result};
use crate::geom;
use crate::graph::Pose;
use nalgebra::DVector;

/// Rounds to nine significant digits; printing the result with `{}` then
/// yields the shortest faithful decimal.
fn sig9(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    let exp = v.abs().log10().floor() as i32;
    let scale = 10f64.powi(8 - exp);
    (v * scale).round() / scale
}

fn fmt9(v: f64) -> String {
    format!("{}", sig9(v))
}

/// Writes a trajectory with strictly increasing timestamps.
pub fn write_tum(trajectory: &[(f64, Pose)]) -> Result<String> {
    let mut out = String::new();
    let mut prev: Option<f64> = None;
    for (t, pose) in trajectory {
        if let Some(p) = prev {
            if *t <= p {
                return Err(Error::InvalidTrajectory(format!(
                    "timestamps must be strictly increasing ({p} then {t})"
                )));
            }
        }
        prev = Some(*t);
        let (tx, ty, tz) = match pose.dim() {
            2 => (pose.translation[0], pose.translation[1], 0.0),
            _ => (
                pose.translation[0],
                pose.translation[1],
                pose.translation[2],
            ),
        };
        let q = geom::quat_of_rotation(&pose.rotation);
        out.push_str(&format!(
            "{:.9} {} {} {} {} {} {} {}\n",
            t,
            fmt9(tx),
            fmt9(ty),
            fmt9(tz),
            fmt9(q[0]),
            fmt9(q[1]),
            fmt9(q[2]),
            fmt9(q[3]),
        ));
    }
    Ok(out)
}

/// Reads a TUM trajectory. `dim` selects how poses are reconstructed: 2 keeps
/// (x, y) and the yaw of the quaternion, 3 keeps everything.
pub fn parse_tum(text: &str, dim: usize) -> Result<Vec<(f64, Pose)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<f64> = line
            .split_whitespace()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::parse(lineno + 1, format!("invalid number '{s}'")))
            })
            .collect::<Result<_>>()?;
        if fields.len() != 8 {
            return Err(Error::parse(
                lineno + 1,
                format!("expected 8 fields, found {}", fields.len()),
            ));
        }
        let rot3 = geom::rot3_of_quat(fields[4], fields[5], fields[6], fields[7]);
        let pose = match dim {
            2 => {
                let yaw = rot3[(1, 0)].atan2(rot3[(0, 0)]);
                Pose::new(
                    geom::rot2(yaw),
                    DVector::from_vec(vec![fields[1], fields[2]]),
                )
            }
            _ => Pose::new(
                rot3,
                DVector::from_vec(vec![fields[1], fields[2], fields[3]]),
            ),
        };
        out.push((fields[0], pose));
    }
    Ok(out)
}

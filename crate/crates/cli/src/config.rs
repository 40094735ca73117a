//! Flat key-value mission config with `[section]` headers. No quoting, no
//! nesting: `key = value` lines, `#` comments.

use cpgo::solver::{BlockRule, SolverOptions};
use cpgo::synth::{MissionSpec, NoiseModel, TrajectoryShape};
use std::collections::BTreeMap;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

type Sections = BTreeMap<String, BTreeMap<String, String>>;

fn parse_sections(text: &str) -> Result<Sections, ConfigError> {
    let mut out: Sections = BTreeMap::new();
    let mut current = String::from("");
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.starts_with('[') && line.ends_with(']') {
            current = line[1..line.len() - 1].trim().to_string();
            out.entry(current.clone()).or_default();
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError(format!(
                "line {}: expected 'key = value', got '{line}'",
                lineno + 1
            )));
        };
        out.entry(current.clone())
            .or_default()
            .insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(out)
}

fn get_parsed<T: std::str::FromStr>(
    sections: &Sections,
    section: &str,
    key: &str,
) -> Result<Option<T>, ConfigError> {
    match sections.get(section).and_then(|s| s.get(key)) {
        None => Ok(None),
        Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
            ConfigError(format!("[{section}] {key}: cannot parse '{raw}'"))
        }),
    }
}

/// Mission spec plus solver options from config text.
pub fn parse_config(text: &str) -> Result<(MissionSpec, SolverOptions), ConfigError> {
    let sections = parse_sections(text)?;
    for name in sections.keys() {
        if !matches!(name.as_str(), "" | "mission" | "noise" | "solver") {
            return Err(ConfigError(format!("unknown section [{name}]")));
        }
    }

    let shape = match sections
        .get("mission")
        .and_then(|s| s.get("shape"))
        .map(String::as_str)
        .unwrap_or("line")
    {
        "line" => TrajectoryShape::Line,
        "ring" => TrajectoryShape::Ring,
        "grid" => TrajectoryShape::Grid,
        other => {
            return Err(ConfigError(format!(
                "[mission] shape: '{other}' is not one of line|ring|grid"
            )))
        }
    };
    let rot_stddev: f64 = get_parsed(&sections, "noise", "rot_stddev")?.unwrap_or(0.0);
    let trans_stddev: f64 = get_parsed(&sections, "noise", "trans_stddev")?.unwrap_or(0.0);
    if rot_stddev < 0.0 || trans_stddev < 0.0 {
        return Err(ConfigError("[noise] stddevs must be >= 0".into()));
    }
    let spec = MissionSpec {
        dim: get_parsed(&sections, "mission", "dim")?.unwrap_or(2),
        num_robots: get_parsed(&sections, "mission", "robots")?.unwrap_or(2),
        poses_per_robot: get_parsed(&sections, "mission", "poses_per_robot")?.unwrap_or(20),
        trajectory_shape: shape,
        intra_loop_period: get_parsed(&sections, "mission", "intra_loop_period")?.unwrap_or(5),
        inter_overlap: get_parsed(&sections, "mission", "inter_overlap")?.unwrap_or(0.3),
        noise: NoiseModel {
            rot_stddev,
            trans_stddev,
            seed: get_parsed(&sections, "noise", "seed")?.unwrap_or(0),
        },
    };

    let block_rule = match sections
        .get("solver")
        .and_then(|s| s.get("block_rule"))
        .map(String::as_str)
        .unwrap_or("round-robin")
    {
        "round-robin" => BlockRule::RoundRobin,
        "greedy-gradient" => BlockRule::GreedyGradient,
        other => {
            return Err(ConfigError(format!(
                "[solver] block_rule: '{other}' is not round-robin|greedy-gradient"
            )))
        }
    };
    let solver = SolverOptions {
        r_init: get_parsed(&sections, "solver", "r_init")?,
        r_max: get_parsed(&sections, "solver", "r_max")?,
        grad_tol: get_parsed(&sections, "solver", "grad_tol")?,
        max_sweeps: get_parsed(&sections, "solver", "max_sweeps")?.unwrap_or(1000),
        inner_steps: get_parsed(&sections, "solver", "inner_steps")?.unwrap_or(5),
        block_rule,
        seed: get_parsed(&sections, "solver", "seed")?.unwrap_or(0),
    };
    Ok((spec, solver))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let (spec, solver) = parse_config("[mission]\nrobots = 3\n").unwrap();
        assert_eq!(spec.num_robots, 3);
        assert_eq!(spec.poses_per_robot, 20);
        assert_eq!(solver.max_sweeps, 1000);
    }

    #[test]
    fn full_config_round_trips_values() {
        let text = "\
[mission]
dim = 3
robots = 2
poses_per_robot = 40
shape = ring
intra_loop_period = 8
inter_overlap = 0.5

[noise]
rot_stddev = 0.03
trans_stddev = 0.05
seed = 7

[solver]
max_sweeps = 123
inner_steps = 9
";
        let (spec, solver) = parse_config(text).unwrap();
        assert_eq!(spec.dim, 3);
        assert_eq!(spec.poses_per_robot, 40);
        assert_eq!(spec.noise.seed, 7);
        assert_eq!(solver.max_sweeps, 123);
        assert_eq!(solver.inner_steps, 9);
    }

    #[test]
    fn bad_values_are_reported() {
        assert!(parse_config("[mission]\ndim = two\n").is_err());
        assert!(parse_config("[mystery]\nx = 1\n").is_err());
        assert!(parse_config("[noise]\nrot_stddev = -0.1\n").is_err());
        assert!(parse_config("no equals sign").is_err());
    }
}

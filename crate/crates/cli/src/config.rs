//! Run configuration files.
//!
//! One `key = value` per line; `#` starts a comment. Values are numbers,
//! `true`/`false`, bare words, vectors `[1, 2, 3]` or matrices with rows
//! separated by `;` as in `[1, 0; 0, 1]`. `A` and `B` may instead name a
//! file (relative to the config file) holding one matrix row per line.
//!
//! | key | meaning |
//! |-----|---------|
//! | `preset` | `single_integrator` or `aircraft_pitch`; fills in every problem key |
//! | `A`, `B` | dynamics `x_{k+1} = A x_k + B u_k` |
//! | `basis` | only `quadratic_diag` |
//! | `state_weights`, `control_weights` | diagonal weights used for generation |
//! | `x0`, `horizon` | initial state and final time index |
//! | `delta` | symmetric box `[-delta, delta]` on every control |
//! | `lower`, `upper` | explicit box |
//! | `unconstrained` | `true` drops the box |
//! | `normalization` | value `a` of the pinned parameter (default 1) |
//! | `fixed_index` | one-based index of the pinned parameter (default 1) |
//! | `rank_tol`, `activity_tol`, `solver_tol` | tolerances |
//! | `fallback` | report the minimum-norm solution when not unique |
//! | `deltas` | box half-widths for `sweep` |
//! | `horizons` | horizons for `compare` |

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use ioc_core::presets::{self, PITCH_SWEEP_DELTAS};
use ioc_core::{ConstraintSet, EstimatorOptions, LqProblem, Matrix, ParameterNormalization, SolverOptions, Vector};

const KEYS: &[&str] = &[
    "preset",
    "A",
    "B",
    "basis",
    "state_weights",
    "control_weights",
    "x0",
    "horizon",
    "delta",
    "lower",
    "upper",
    "unconstrained",
    "normalization",
    "fixed_index",
    "rank_tol",
    "activity_tol",
    "solver_tol",
    "fallback",
    "deltas",
    "horizons",
];

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Scalar(f64),
    Bool(bool),
    Word(String),
    Rows(Vec<Vec<f64>>),
}

#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    value: Value,
}

/// Everything a subcommand needs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: LqProblem,
    pub normalization: ParameterNormalization,
    pub estimator: EstimatorOptions,
    pub solver: SolverOptions,
    pub deltas: Vec<f64>,
    pub horizons: Vec<usize>,
}

/// Raw key/value pairs, kept until presets and overrides are resolved.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    entries: HashMap<String, Entry>,
    dir: PathBuf,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, dir).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str, dir: PathBuf) -> Result<Self> {
        let mut entries = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| anyhow!("line {line}: expected `key = value`"))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                bail!("line {line}: unknown key `{key}`");
            }
            let value = parse_value(value.trim()).map_err(|e| anyhow!("line {line}: {key}: {e}"))?;
            if let Some(prev) = entries.insert(key.to_string(), Entry { line, value }) {
                bail!("line {line}: `{key}` already set on line {}", prev.line);
            }
        }
        Ok(ConfigFile { entries, dir })
    }

    fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }

    fn scalar(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|e| match &e.value {
                Value::Scalar(v) => Ok(*v),
                _ => Err(anyhow!("line {}: `{key}` must be a number", e.line)),
            })
            .transpose()
    }

    fn positive(&self, key: &str) -> Result<Option<f64>> {
        let v = self.scalar(key)?;
        if let Some(v) = v {
            if !(v > 0.0) {
                bail!(
                    "line {}: `{key}` must be positive, got {v}",
                    self.get(key).unwrap().line
                );
            }
        }
        Ok(v)
    }

    fn count(&self, key: &str) -> Result<Option<usize>> {
        let Some(v) = self.scalar(key)? else {
            return Ok(None);
        };
        if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
            bail!(
                "line {}: `{key}` must be a non-negative integer, got {v}",
                self.get(key).unwrap().line
            );
        }
        Ok(Some(v as usize))
    }

    fn flag(&self, key: &str) -> Result<Option<bool>> {
        self.get(key)
            .map(|e| match &e.value {
                Value::Bool(b) => Ok(*b),
                _ => Err(anyhow!("line {}: `{key}` must be true or false", e.line)),
            })
            .transpose()
    }

    fn word(&self, key: &str) -> Result<Option<(usize, &str)>> {
        self.get(key)
            .map(|e| match &e.value {
                Value::Word(w) => Ok((e.line, w.as_str())),
                _ => Err(anyhow!("line {}: `{key}` must be a name", e.line)),
            })
            .transpose()
    }

    fn vector(&self, key: &str) -> Result<Option<Vector>> {
        self.get(key)
            .map(|e| match &e.value {
                Value::Rows(rows) if rows.len() == 1 => Ok(Vector::from_column_slice(&rows[0])),
                Value::Scalar(v) => Ok(Vector::from_element(1, *v)),
                _ => Err(anyhow!("line {}: `{key}` must be a vector like [1, 2]", e.line)),
            })
            .transpose()
    }

    fn matrix(&self, key: &str) -> Result<Option<Matrix>> {
        let Some(e) = self.get(key) else {
            return Ok(None);
        };
        let rows = match &e.value {
            Value::Rows(rows) => rows.clone(),
            Value::Scalar(v) => vec![vec![*v]],
            Value::Word(path) => {
                let file = self.dir.join(path);
                let text = fs::read_to_string(&file)
                    .with_context(|| format!("line {}: reading `{key}` from {}", e.line, file.display()))?;
                text.lines()
                    .enumerate()
                    .filter(|(_, l)| !l.trim().is_empty())
                    .map(|(i, l)| parse_row(l).map_err(|err| anyhow!("{}:{}: {err}", file.display(), i + 1)))
                    .collect::<Result<_>>()?
            }
            Value::Bool(_) => bail!("line {}: `{key}` must be a matrix", e.line),
        };
        to_matrix(&rows)
            .map_err(|err| anyhow!("line {}: `{key}`: {err}", e.line))
            .map(Some)
    }

    /// Resolves presets, defaults and command-line overrides into a [`RunConfig`].
    pub fn resolve(&self, preset_override: Option<&str>) -> Result<RunConfig> {
        let preset = match preset_override {
            Some(name) => Some(name.to_string()),
            None => self.word("preset")?.map(|(_, w)| w.to_string()),
        };
        if let Some((line, basis)) = self.word("basis")? {
            if basis != "quadratic_diag" {
                bail!("line {line}: unsupported basis `{basis}` (only quadratic_diag)");
            }
        }
        let base = match preset.as_deref() {
            Some("single_integrator") => Some(presets::single_integrator()),
            Some("aircraft_pitch") => Some(presets::aircraft_pitch(0.09)?),
            Some(other) => {
                bail!("unknown preset `{other}` (expected single_integrator or aircraft_pitch)")
            }
            None => None,
        };
        let missing = |key: &str| anyhow!("`{key}` is required when no preset is given");
        let a = match (self.matrix("A")?, &base) {
            (Some(a), _) => a,
            (None, Some(p)) => p.a.clone(),
            (None, None) => return Err(missing("A")),
        };
        let b = match (self.matrix("B")?, &base) {
            (Some(b), _) => b,
            (None, Some(p)) => p.b.clone(),
            (None, None) => return Err(missing("B")),
        };
        let pick = |key: &str, from_preset: Option<Vector>| -> Result<Vector> {
            self.vector(key)?.or(from_preset).ok_or_else(|| missing(key))
        };
        let state_weights = pick("state_weights", base.as_ref().map(|p| p.state_weights.clone()))?;
        let control_weights = pick("control_weights", base.as_ref().map(|p| p.control_weights.clone()))?;
        let x0 = pick("x0", base.as_ref().map(|p| p.x0.clone()))?;
        let horizon = match (self.count("horizon")?, &base) {
            (Some(h), _) => h,
            (None, Some(p)) => p.horizon,
            (None, None) => return Err(missing("horizon")),
        };
        let m = b.ncols();
        let constraints = self.constraints(m, base.as_ref().map(|p| p.constraints.clone()))?;
        let problem = LqProblem {
            a,
            b,
            state_weights,
            control_weights,
            x0,
            horizon,
            constraints,
        };
        problem.validate()?;

        let value = self.positive("normalization")?.unwrap_or(1.0);
        let fixed = self.count("fixed_index")?.unwrap_or(1);
        if fixed == 0 {
            bail!(
                "line {}: `fixed_index` is one-based",
                self.get("fixed_index").unwrap().line
            );
        }
        let normalization = ParameterNormalization::new(value, fixed - 1)?;

        let mut estimator = EstimatorOptions::default();
        if let Some(tol) = self.positive("rank_tol")? {
            estimator.rank_tol = tol;
        }
        if let Some(fallback) = self.flag("fallback")? {
            estimator.pseudoinverse_fallback = fallback;
        }
        let mut solver = SolverOptions::default();
        if let Some(tol) = self.positive("solver_tol")? {
            solver.tol = tol;
        }
        let deltas = match self.vector("deltas")? {
            Some(d) => d.iter().copied().collect(),
            None => PITCH_SWEEP_DELTAS.to_vec(),
        };
        let horizons = match self.vector("horizons")? {
            Some(h) => h
                .iter()
                .map(|&v| {
                    if v >= 1.0 && v.fract() == 0.0 {
                        Ok(v as usize)
                    } else {
                        Err(anyhow!(
                            "line {}: horizons must be positive integers",
                            self.get("horizons").unwrap().line
                        ))
                    }
                })
                .collect::<Result<_>>()?,
            None => vec![100, 1000, 10000],
        };
        Ok(RunConfig {
            problem,
            normalization,
            estimator,
            solver,
            deltas,
            horizons,
        })
    }

    fn constraints(&self, m: usize, from_preset: Option<ConstraintSet>) -> Result<ConstraintSet> {
        let unconstrained = self.flag("unconstrained")?.unwrap_or(false);
        let delta = self.scalar("delta")?;
        let lower = self.vector("lower")?;
        let upper = self.vector("upper")?;
        let given = [unconstrained, delta.is_some(), lower.is_some() || upper.is_some()];
        if given.iter().filter(|g| **g).count() > 1 {
            bail!("give at most one of `unconstrained = true`, `delta`, or `lower`/`upper`");
        }
        let set = if unconstrained {
            ConstraintSet::unconstrained(m)
        } else if let Some(delta) = delta {
            if delta.is_infinite() {
                ConstraintSet::unconstrained(m)
            } else {
                ConstraintSet::symmetric(m, delta)?
            }
        } else if lower.is_some() || upper.is_some() {
            let lower = lower.unwrap_or_else(|| Vector::from_element(m, f64::NEG_INFINITY));
            let upper = upper.unwrap_or_else(|| Vector::from_element(m, f64::INFINITY));
            ConstraintSet::boxed(lower, upper)?
        } else {
            from_preset.unwrap_or_else(|| ConstraintSet::unconstrained(m))
        };
        match self.positive("activity_tol")? {
            Some(tol) => Ok(set.with_activity_tolerance(tol)?),
            None => Ok(set),
        }
    }
}

fn parse_value(s: &str) -> Result<Value> {
    if s.is_empty() {
        bail!("missing value");
    }
    if let Some(inner) = s.strip_prefix('[') {
        let inner = inner.strip_suffix(']').ok_or_else(|| anyhow!("unterminated `[`"))?;
        let rows = inner.split(';').map(parse_row).collect::<Result<Vec<_>>>()?;
        return Ok(Value::Rows(rows));
    }
    match s {
        "true" => return Ok(Value::Bool(true)),
        "false" => return Ok(Value::Bool(false)),
        _ => {}
    }
    if let Ok(v) = s.parse::<f64>() {
        if v.is_nan() {
            bail!("NaN is not allowed");
        }
        return Ok(Value::Scalar(v));
    }
    if s.chars()
        .next()
        .is_some_and(|c| c.is_ascii_digit() || c == '-' || c == '+')
    {
        bail!("`{s}` is not a number");
    }
    Ok(Value::Word(s.to_string()))
}

fn parse_row(row: &str) -> Result<Vec<f64>> {
    let cells: Vec<&str> = row
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|c| !c.is_empty())
        .collect();
    if cells.is_empty() {
        bail!("empty row");
    }
    cells
        .iter()
        .map(|c| match c.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(anyhow!("`{c}` is not a finite number")),
        })
        .collect()
}

fn to_matrix(rows: &[Vec<f64>]) -> Result<Matrix> {
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        bail!("rows have different lengths");
    }
    Ok(Matrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ConfigFile> {
        ConfigFile::parse(text, PathBuf::new())
    }

    #[test]
    fn preset_expands_to_reference_values() {
        let cfg = parse("preset = aircraft_pitch\n").unwrap().resolve(None).unwrap();
        assert_eq!(cfg.problem, presets::aircraft_pitch(0.09).unwrap());
        let cfg = parse("preset = single_integrator\n").unwrap().resolve(None).unwrap();
        assert_eq!(cfg.problem, presets::single_integrator());
    }

    #[test]
    fn explicit_problem_and_overrides() {
        let text = "\
# two states
A = [1, 0.1; 0, 1]
B = [0; 0.1]
state_weights = [1, 1]
control_weights = [2]
x0 = [1, 0]
horizon = 20
delta = 0.5
normalization = 2
fixed_index = 3
rank_tol = 1e-10
fallback = true
";
        let cfg = parse(text).unwrap().resolve(None).unwrap();
        assert_eq!(cfg.problem.a, Matrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]));
        assert_eq!(cfg.problem.horizon, 20);
        assert_eq!(cfg.problem.constraints.upper()[0], 0.5);
        assert_eq!(cfg.normalization.pinned(), 2);
        assert_eq!(cfg.normalization.value(), 2.0);
        assert_eq!(cfg.estimator.rank_tol, 1e-10);
        assert!(cfg.estimator.pseudoinverse_fallback);
    }

    #[test]
    fn overrides_on_top_of_a_preset() {
        let cfg = parse("preset = aircraft_pitch\nunconstrained = true\nhorizon = 40\n")
            .unwrap()
            .resolve(None)
            .unwrap();
        assert!(!cfg.problem.constraints.is_bounded());
        assert_eq!(cfg.problem.horizon, 40);
    }

    #[test]
    fn errors_name_the_line() {
        let err = parse("preset = aircraft_pitch\n\nhorizon = ten\n")
            .unwrap()
            .resolve(None)
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 3"), "{err}");
        let err = parse("x0 = [1, 2\n").unwrap_err().to_string();
        assert!(err.contains("line 1"), "{err}");
        let err = parse("colour = red\n").unwrap_err().to_string();
        assert!(err.contains("unknown key"), "{err}");
        let err = parse("horizon = 3\nhorizon = 4\n").unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("line 1"), "{err}");
        let err = parse("preset = single_integrator\nrank_tol = -1\n")
            .unwrap()
            .resolve(None)
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 2") && err.contains("positive"), "{err}");
        let err = parse("A = [1, 2; 3]\n").unwrap().resolve(None).unwrap_err().to_string();
        assert!(err.contains("different lengths"), "{err}");
    }

    #[test]
    fn missing_problem_keys_are_reported() {
        let err = parse("A = [1]\n").unwrap().resolve(None).unwrap_err().to_string();
        assert!(err.contains("`B` is required"), "{err}");
    }

    #[test]
    fn conflicting_boxes_are_rejected() {
        assert!(parse("preset = aircraft_pitch\ndelta = 0.1\nunconstrained = true\n")
            .unwrap()
            .resolve(None)
            .is_err());
    }

    #[test]
    fn matrix_from_file() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.txt"), "0.9 0\n0 0.8\n").unwrap();
        let cfg_path = dir.path().join("run.cfg");
        fs::write(
            &cfg_path,
            "A = a.txt\nB = [1; 0]\nstate_weights = [1, 1]\ncontrol_weights = [1]\nx0 = [1, 1]\nhorizon = 5\n",
        )
        .unwrap();
        let cfg = ConfigFile::load(&cfg_path).unwrap().resolve(None).unwrap();
        assert_eq!(cfg.problem.a[(1, 1)], 0.8);
    }
}

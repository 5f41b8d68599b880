//! `key = value` configuration files.
//!
//! ```text
//! # comment
//! seed = 7                    # experiment keys: top level only
//! samples = 100000
//! budget = 1e4
//! grid = 10, 1, 10, 10
//! workers = 4
//! out = results/run
//!
//! kind = flat                 # flat | revolution | perturbed
//! n = 2
//! disc_radius = 1
//! circle_length = 6.283185307179586
//! trapped_budget = 2000
//!
//! [other]                     # further named specs, same spec keys
//! kind = revolution
//! bump.amplitude = 0.05
//! bump.epsilon = 0.2
//! bump.shift = 0.25
//! ```
//!
//! Perturbed specs take the flat keys plus `perturbation.amplitude`,
//! `perturbation.radius` and `perturbation.center` (comma separated).
//! Keys may appear once per section; unknown keys are errors.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use super::{BumpProfile, FlatProduct, ManifoldSpec, Perturbation};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentConfig {
    /// Specs in file order; the unnamed top-level spec (if any) is called `""`.
    pub specs: Vec<(String, ManifoldSpec)>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub budget: Option<f64>,
    pub grid: Option<Vec<usize>>,
    pub workers: Option<usize>,
    pub out: Option<String>,
}

impl ExperimentConfig {
    pub fn spec(&self, name: &str) -> Option<&ManifoldSpec> {
        self.specs.iter().find(|(n, _)| n == name).map(|(_, s)| s)
    }

    /// The first spec in the file.
    pub fn primary(&self) -> Option<&ManifoldSpec> {
        self.specs.first().map(|(_, s)| s)
    }
}

const SPEC_KEYS: &[&str] = &[
    "kind",
    "n",
    "disc_radius",
    "circle_length",
    "trapped_budget",
    "bump.amplitude",
    "bump.epsilon",
    "bump.shift",
    "perturbation.amplitude",
    "perturbation.radius",
    "perturbation.center",
];

const EXPERIMENT_KEYS: &[&str] = &["seed", "samples", "budget", "grid", "workers", "out"];

#[derive(Default)]
struct Section {
    name: String,
    line: usize,
    entries: BTreeMap<String, (usize, String)>,
}

impl Section {
    fn get(&self, key: &str) -> Option<&(usize, String)> {
        self.entries.get(key)
    }

    fn num(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some((line, v)) => parse_f64(v, *line),
        }
    }

    fn required(&self, key: &str) -> Result<f64> {
        match self.get(key) {
            None => Err(Error::Config {
                line: self.line,
                msg: format!("section '{}' needs `{key}`", self.name),
            }),
            Some((line, v)) => parse_f64(v, *line),
        }
    }

    /// Line of `key`, falling back to the section header.
    fn line_of(&self, key: &str) -> usize {
        self.get(key).map_or(self.line, |(l, _)| *l)
    }

    fn build(&self) -> Result<ManifoldSpec> {
        let Some((kline, kind)) = self.get("kind") else {
            return Err(Error::Config {
                line: self.line,
                msg: format!("section '{}' has no `kind`", self.name),
            });
        };
        let at = |key: &str| {
            let line = self.line_of(key);
            move |e: Error| match e {
                Error::InvalidParameter(msg) => Error::Config { line, msg },
                other => other,
            }
        };
        let allowed: &[&str] = match kind.as_str() {
            "flat" => &["kind", "n", "disc_radius", "circle_length", "trapped_budget"],
            "revolution" => &["kind", "trapped_budget", "bump.amplitude", "bump.epsilon", "bump.shift"],
            "perturbed" => &[
                "kind",
                "n",
                "disc_radius",
                "circle_length",
                "trapped_budget",
                "perturbation.amplitude",
                "perturbation.radius",
                "perturbation.center",
            ],
            other => {
                return Err(Error::Config {
                    line: *kline,
                    msg: format!("unknown kind '{other}' (expected flat, revolution or perturbed)"),
                })
            }
        };
        for (key, (line, _)) in &self.entries {
            if !allowed.contains(&key.as_str()) {
                return Err(Error::Config {
                    line: *line,
                    msg: format!("key `{key}` does not apply to kind = {kind}"),
                });
            }
        }
        let flat = || -> Result<FlatProduct> {
            let n = match self.get("n") {
                None => 2,
                Some((line, v)) => v.parse::<usize>().map_err(|e| Error::Config {
                    line: *line,
                    msg: format!("n = '{v}': {e}"),
                })?,
            };
            FlatProduct::new(n, self.num("disc_radius", 1.0)?, self.num("circle_length", TAU)?)
                .map_err(at("n"))
        };
        let spec = match kind.as_str() {
            "flat" => ManifoldSpec::flat(flat()?),
            "revolution" => {
                let profile = BumpProfile::new(
                    self.num("bump.shift", 0.0)?,
                    self.num("bump.epsilon", 0.2)?,
                    self.num("bump.amplitude", 0.0)?,
                );
                let line = ["bump.shift", "bump.epsilon", "bump.amplitude"]
                    .iter()
                    .map(|k| self.line_of(k))
                    .filter(|l| *l != self.line)
                    .max()
                    .unwrap_or(*kline);
                ManifoldSpec::revolution(profile.map_err(|e| match e {
                    Error::InvalidParameter(msg) => Error::Config { line, msg },
                    other => other,
                })?)
            }
            _ => {
                let base = flat()?;
                let center = match self.get("perturbation.center") {
                    None => vec![0.0; base.n],
                    Some((line, v)) => parse_list(v, *line, |s, l| parse_f64(s, l))?,
                };
                let p = Perturbation {
                    amplitude: self.required("perturbation.amplitude")?,
                    radius: self.required("perturbation.radius")?,
                    center,
                };
                ManifoldSpec::perturbed(base, p).map_err(at("perturbation.radius"))?
            }
        };
        match self.get("trapped_budget") {
            None => Ok(spec),
            Some((line, v)) => spec.with_budget(parse_f64(v, *line)?).map_err(at("trapped_budget")),
        }
    }
}

fn parse_f64(v: &str, line: usize) -> Result<f64> {
    v.trim().parse::<f64>().map_err(|e| Error::Config {
        line,
        msg: format!("'{v}' is not a number: {e}"),
    })
}

fn parse_list<T>(v: &str, line: usize, f: impl Fn(&str, usize) -> Result<T>) -> Result<Vec<T>> {
    v.split(',').map(|s| f(s.trim(), line)).collect()
}

fn parse_int<T: std::str::FromStr>(v: &str, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.trim().parse::<T>().map_err(|e| Error::Config {
        line,
        msg: format!("'{v}' is not a non-negative integer: {e}"),
    })
}

pub fn parse(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    let mut sections = vec![Section::default()];
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest.strip_suffix(']').map(str::trim).ok_or_else(|| Error::Config {
                line,
                msg: "section header must look like [name]".into(),
            })?;
            if name.is_empty() || sections.iter().any(|s| s.name == name) {
                return Err(Error::Config {
                    line,
                    msg: format!("section name '{name}' is empty or repeated"),
                });
            }
            sections.push(Section {
                name: name.to_string(),
                line,
                entries: BTreeMap::new(),
            });
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
            line,
            msg: format!("expected `key = value`, found '{content}'"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if value.is_empty() {
            return Err(Error::Config {
                line,
                msg: format!("`{key}` has no value"),
            });
        }
        let top = sections.len() == 1;
        if EXPERIMENT_KEYS.contains(&key) {
            if !top {
                return Err(Error::Config {
                    line,
                    msg: format!("experiment key `{key}` must come before any [section]"),
                });
            }
            match key {
                "seed" => cfg.seed = Some(parse_int(value, line)?),
                "samples" => cfg.samples = Some(parse_int(value, line)?),
                "budget" => cfg.budget = Some(parse_f64(value, line)?),
                "grid" => cfg.grid = Some(parse_list(value, line, parse_int)?),
                "workers" => cfg.workers = Some(parse_int(value, line)?),
                _ => cfg.out = Some(value.to_string()),
            }
            continue;
        }
        if !SPEC_KEYS.contains(&key) {
            return Err(Error::Config {
                line,
                msg: format!("unknown key `{key}`"),
            });
        }
        let section = sections.last_mut().expect("default section");
        if section.entries.insert(key.to_string(), (line, value.to_string())).is_some() {
            return Err(Error::Config {
                line,
                msg: format!("duplicate key `{key}`"),
            });
        }
    }
    for s in &sections {
        if s.name.is_empty() && s.entries.is_empty() {
            continue;
        }
        cfg.specs.push((s.name.clone(), s.build()?));
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_file() {
        let text = "\
# demo
seed = 7
samples = 1000
grid = 10, 1, 10, 10
kind = flat
n = 3

[b]
kind = revolution
bump.amplitude = 0.05
bump.epsilon = 0.2
bump.shift = 0.25  # trailing comment
";
        let c = parse(text).unwrap();
        assert_eq!(c.seed, Some(7));
        assert_eq!(c.grid, Some(vec![10, 1, 10, 10]));
        assert_eq!(c.primary().unwrap(), &ManifoldSpec::preset("flat-d3s1").unwrap());
        assert_eq!(c.spec("b").unwrap().profile().unwrap().shift, 0.25);
    }

    #[test]
    fn perturbed_and_budget() {
        let c = parse(
            "kind = perturbed\nperturbation.amplitude = 0.05\nperturbation.radius = 0.5\nperturbation.center = 0.1, 0\n",
        )
        .unwrap();
        assert_eq!(c.primary().unwrap(), &ManifoldSpec::preset("perturbed-d2s1").unwrap());
        let c = parse("kind = flat\ntrapped_budget = 50\n").unwrap();
        assert_eq!(c.primary().unwrap().trapped_budget(), 50.0);
    }

    fn err_line(text: &str) -> (usize, String) {
        match parse(text) {
            Err(Error::Config { line, msg }) => (line, msg),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn errors_carry_line_numbers_and_constraints() {
        let (l, m) = err_line("kind = revolution\nbump.epsilon = 0.3\n");
        assert_eq!(l, 2);
        assert!(m.contains("0 < epsilon < 1/4"), "{m}");
        let (l, m) = err_line("kind = revolution\nbump.epsilon = 0.2\n\nbump.shift = 0.7\n");
        assert_eq!(l, 4);
        assert!(m.contains("(-1 + 2*epsilon, 1 - 2*epsilon)"), "{m}");
        assert_eq!(err_line("kind = flat\ncolour = red\n").0, 2);
        assert_eq!(err_line("kind = flat\nn = two\n").0, 2);
        assert_eq!(err_line("kind = flat\nn = 2\nn = 3\n").0, 3);
        assert_eq!(err_line("kind = flat\njust words\n").0, 2);
        assert_eq!(err_line("kind = flat\n[x]\nseed = 1\n").0, 3);
        assert_eq!(err_line("kind = flat\nbump.shift = 0\n").0, 2);
        assert_eq!(err_line("kind = torus\n").0, 1);
        let (l, m) = err_line("kind = perturbed\nperturbation.amplitude = 0.1\nperturbation.radius = 0.99\n");
        assert_eq!(l, 3);
        assert!(m.contains("vanish"), "{m}");
    }
}

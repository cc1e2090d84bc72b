//! Parameter resolution (defaults < config file < flags) and the small spec
//! languages for laws and sets.

use bcaplab::lattice::{make_step_law, StepKind, StepLaw};
use bcaplab::offspring::{make_offspring, OffspringKind, OffspringLaw};
use bcaplab::point::{self, MAX_D};
use bcaplab::riesz::DiscretizedCompact;
use bcaplab::sets::LatticeSet;
use bcaplab::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use std::path::Path;

pub fn load_config(path: Option<&Path>) -> Result<toml::Table> {
    match path {
        None => Ok(toml::Table::new()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Validation(format!("cannot read config {}: {e}", p.display())))?;
            text.parse::<toml::Table>()
                .map_err(|e| Error::Validation(format!("config {}: {e}", p.display())))
        }
    }
}

fn to_json(v: &toml::Value) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

/// Top-level keys known to `P` act as shared settings; the `[section]` table
/// must only hold keys of `P`; non-null flags win.
pub fn resolve<P: Default + Serialize + DeserializeOwned>(section: &str, cfg: &toml::Table, flags: impl Serialize) -> Result<P> {
    let defaults = serde_json::to_value(P::default()).unwrap();
    let known = defaults.as_object().cloned().unwrap_or_default();
    let mut merged = Map::new();
    for (k, v) in cfg {
        if !v.is_table() && known.contains_key(k) {
            merged.insert(k.clone(), to_json(v));
        }
    }
    if let Some(v) = cfg.get(section) {
        let t = v.as_table().ok_or_else(|| Error::Validation(format!("config entry [{section}] must be a table")))?;
        for (k, v) in t {
            merged.insert(k.clone(), to_json(v));
        }
    }
    if let Value::Object(f) = serde_json::to_value(flags).unwrap() {
        for (k, v) in f {
            if !v.is_null() {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| Error::Validation(format!("[{section}] {e}")))
}

fn bad<T>(msg: String) -> Result<T> {
    Err(Error::Validation(msg))
}

fn floats(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Validation(format!("not a number: {t:?}"))))
        .collect()
}

fn ints(s: &str) -> Result<Vec<i32>> {
    s.split(',')
        .map(|t| t.trim().parse::<i32>().map_err(|_| Error::Validation(format!("not an integer: {t:?}"))))
        .collect()
}

/// Bytes of every file a spec reads, so cache keys follow file contents.
#[derive(Default)]
pub struct Sources(pub Vec<u8>);

impl Sources {
    fn read(&mut self, path: &str) -> Result<String> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Validation(format!("cannot read {path}: {e}")))?;
        self.0.extend_from_slice(path.as_bytes());
        self.0.extend_from_slice(text.as_bytes());
        Ok(text)
    }
}

/// binary_critical | geometric_half | poisson_trunc[:k_max] | custom:p0,p1,...
pub fn offspring(spec: &str) -> Result<OffspringLaw> {
    let (kind, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let kind = match kind {
        "binary_critical" => OffspringKind::BinaryCritical,
        "geometric_half" => OffspringKind::GeometricHalf,
        "poisson_trunc" => OffspringKind::PoissonTrunc,
        "custom" => OffspringKind::Custom,
        _ => return bad(format!("unknown offspring law {kind:?}")),
    };
    make_offspring(kind, &floats(rest)?)
}

/// simple | lazy_simple | custom:<file> with lines "z_1 ... z_d p"
pub fn step(spec: &str, d: usize, src: &mut Sources) -> Result<StepLaw> {
    match spec.split_once(':') {
        None if spec == "simple" => make_step_law(StepKind::Simple, d, None),
        None if spec == "lazy_simple" => make_step_law(StepKind::LazySimple, d, None),
        Some(("custom", path)) => {
            let text = src.read(path)?;
            let mut support = Vec::new();
            for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
                let parts: Vec<&str> = line.split_whitespace().collect();
                if parts.len() != d + 1 {
                    return bad(format!("step file line {line:?} needs {d} coordinates and a probability"));
                }
                let z = parts[..d]
                    .iter()
                    .map(|t| t.parse::<i32>().map_err(|_| Error::Validation(format!("bad coordinate {t:?}"))))
                    .collect::<Result<Vec<_>>>()?;
                let p = parts[d].parse::<f64>().map_err(|_| Error::Validation(format!("bad probability {:?}", parts[d])))?;
                support.push((z, p));
            }
            make_step_law(StepKind::Custom, d, Some(&support))
        }
        _ => bad(format!("unknown step law {spec:?}")),
    }
}

fn lattice_point(s: &str, d: usize) -> Result<point::Point> {
    let v = ints(s)?;
    match v.len() {
        1 if v[0] == 0 => Ok([0; MAX_D]),
        n if n == d => Ok(point::from_slice(&v)),
        _ => bad(format!("point {s:?} must have {d} coordinates (or be 0)")),
    }
}

/// point:<x> | ball:<r>[@<center>] | file:<path> with one point per line
pub fn lattice_set(spec: &str, d: usize, src: &mut Sources) -> Result<LatticeSet> {
    let (kind, rest) = spec.split_once(':').ok_or_else(|| Error::Validation(format!("set spec {spec:?} needs kind:args")))?;
    match kind {
        "point" => LatticeSet::single(d, lattice_point(rest, d)?),
        "ball" => {
            let (r, c) = rest.split_once('@').unwrap_or((rest, "0"));
            let r: f64 = r.parse().map_err(|_| Error::Validation(format!("bad radius {r:?}")))?;
            LatticeSet::ball(d, r, &lattice_point(c, d)?)
        }
        "file" => {
            let text = src.read(rest)?;
            let pts = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(|l| ints(&l.split_whitespace().collect::<Vec<_>>().join(",")))
                .collect::<Result<Vec<_>>>()?;
            LatticeSet::from_coords(d, &pts)
        }
        _ => bad(format!("unknown set kind {kind:?}")),
    }
}

pub fn axis_point(d: usize, v: &[i32]) -> Result<point::Point> {
    if v.len() != d {
        return bad(format!("point {v:?} must have {d} coordinates"));
    }
    Ok(point::from_slice(v))
}

/// ball:<r>[@<c>] | sphere:<r>[@<c>] | box:<lo>;<hi> | file:<path>
pub fn compact(spec: &str, d: usize, h: f64, src: &mut Sources) -> Result<DiscretizedCompact> {
    let (kind, rest) = spec.split_once(':').ok_or_else(|| Error::Validation(format!("set spec {spec:?} needs kind:args")))?;
    let center = |c: &str| -> Result<Vec<f64>> {
        let v = floats(c)?;
        match v.len() {
            1 if v[0] == 0.0 => Ok(vec![0.0; d]),
            n if n == d => Ok(v),
            _ => bad(format!("center {c:?} must have {d} coordinates (or be 0)")),
        }
    };
    let radius_center = |rest: &str| -> Result<(f64, Vec<f64>)> {
        let (r, c) = rest.split_once('@').unwrap_or((rest, "0"));
        Ok((r.parse().map_err(|_| Error::Validation(format!("bad radius {r:?}")))?, center(c)?))
    };
    match kind {
        "ball" => {
            let (r, c) = radius_center(rest)?;
            DiscretizedCompact::ball(d, &c, r, h)
        }
        "sphere" => {
            let (r, c) = radius_center(rest)?;
            DiscretizedCompact::sphere(d, &c, r, h)
        }
        "box" => {
            let (lo, hi) = rest.split_once(';').ok_or_else(|| Error::Validation("box spec is box:<lo>;<hi>".into()))?;
            DiscretizedCompact::cuboid(d, &floats(lo)?, &floats(hi)?, h)
        }
        "file" => {
            let text = src.read(rest)?;
            let pts = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(|l| floats(&l.split_whitespace().collect::<Vec<_>>().join(",")))
                .collect::<Result<Vec<_>>>()?;
            DiscretizedCompact::from_points(d, pts, h, rest)
        }
        _ => bad(format!("unknown set kind {kind:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Default, Serialize, serde::Deserialize, Debug, PartialEq)]
    #[serde(default, deny_unknown_fields)]
    struct P {
        d: usize,
        seed: u64,
        name: String,
    }

    #[derive(Serialize)]
    struct F {
        seed: Option<u64>,
    }

    #[test]
    fn flags_beat_sections_beat_top_level() {
        let cfg: toml::Table = "d = 5\nseed = 2\nother = 1\n[x]\nseed = 3\nname = \"a\"\n".parse().unwrap();
        let p: P = resolve("x", &cfg, F { seed: None }).unwrap();
        assert_eq!(p, P { d: 5, seed: 3, name: "a".into() });
        let p: P = resolve("x", &cfg, F { seed: Some(9) }).unwrap();
        assert_eq!(p.seed, 9);
        let bad: toml::Table = "[x]\nsede = 3\n".parse().unwrap();
        assert!(resolve::<P>("x", &bad, F { seed: None }).is_err());
    }

    #[test]
    fn specs() {
        let mut s = Sources::default();
        assert_eq!(lattice_set("ball:1", 5, &mut s).unwrap().len(), 11);
        assert_eq!(lattice_set("point:0", 5, &mut s).unwrap().len(), 1);
        assert!(lattice_set("point:1,2", 5, &mut s).is_err());
        assert!(offspring("custom:0.4,0.1,0.5").is_err());
        assert_eq!(offspring("poisson_trunc:10").unwrap().pmf().len(), 11);
        assert!(step("simple", 5, &mut s).is_ok());
        assert_eq!(compact("box:0,0;1,0.5", 2, 0.25, &mut s).unwrap().len(), 15);
    }
}

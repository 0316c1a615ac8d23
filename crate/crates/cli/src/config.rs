//! Run configuration: a flat `key = value` file overlaid by command-line flags of the same name.

use anyhow::{anyhow, bail, Context, Result};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const KEYS: &[&str] = &[
    "M",
    "N",
    "root-index",
    "sector",
    "tol-root",
    "tol-residual",
    "seed",
    "out",
    "cache-dir",
    "max-sector-dim",
    "identity",
    "tuples",
];

pub const DEFAULT_MAX_SECTOR_DIM: usize = 5000;

/// Sectors are given as S^z values (`1/2`, `-3/2`, `0`) or `all`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SectorSel {
    All,
    TwoSz(Vec<i64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub sites: Vec<usize>,
    pub orders: Vec<u32>,
    pub root_index: u32,
    pub sectors: SectorSel,
    pub tol_root: f64,
    pub tol_residual: f64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub max_sector_dim: usize,
    pub identity: Option<String>,
    pub tuples: usize,
}

pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| anyhow!("config line {}: expected key = value", i + 1))?;
        let k = k.trim();
        if !KEYS.contains(&k) {
            bail!("config line {}: unknown key {k:?}", i + 1);
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// `3,5,7`, `2..8` (inclusive) or a mix.
pub fn parse_list<T: std::str::FromStr + Copy + Into<u64> + TryFrom<u64>>(s: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let num = |x: &str| x.trim().parse::<T>().map_err(|_| anyhow!("not a nonnegative integer: {x:?}"));
        if let Some((a, b)) = part.split_once("..") {
            let (a, b): (u64, u64) = (num(a)?.into(), num(b)?.into());
            if a > b {
                bail!("empty range {part}");
            }
            for x in a..=b {
                out.push(T::try_from(x).map_err(|_| anyhow!("out of range"))?);
            }
        } else {
            out.push(num(part)?);
        }
    }
    if out.is_empty() {
        bail!("empty list");
    }
    Ok(out)
}

pub fn parse_sz(s: &str) -> Result<i64> {
    let s = s.trim();
    let two = match s.split_once('/') {
        Some((num, "2")) => num.trim().parse::<i64>()?,
        Some(_) => bail!("S^z must be an integer or a half-integer k/2: {s:?}"),
        None => 2 * s.parse::<i64>()?,
    };
    Ok(two)
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if !(v.is_finite() && v > 0.0) {
        bail!("{key} must be positive, got {v}");
    }
    Ok(v)
}

impl RunConfig {
    /// Merge file values with flag values (flags win) over command defaults.
    pub fn resolve(merged: &BTreeMap<String, String>, defaults: &BTreeMap<&str, &str>) -> Result<Self> {
        let get = |k: &str| merged.get(k).map(String::as_str).or_else(|| defaults.get(k).copied());
        let need = |k: &str| get(k).ok_or_else(|| anyhow!("--{k} is required for this command"));
        let sites: Vec<usize> = parse_list::<u32>(need("M")?).context("--M")?.into_iter().map(|x| x as usize).collect();
        let orders = parse_list::<u32>(need("N")?).context("--N")?;
        let sectors = match get("sector").unwrap_or("all") {
            "all" => SectorSel::All,
            s => SectorSel::TwoSz(s.split(',').map(parse_sz).collect::<Result<_>>().context("--sector")?),
        };
        let num = |k: &str, d: &str| -> Result<f64> {
            let v = get(k).unwrap_or(d);
            v.parse::<f64>().with_context(|| format!("--{k}: {v:?}"))
        };
        let int = |k: &str, d: &str| -> Result<u64> {
            let v = get(k).unwrap_or(d);
            v.parse::<u64>().with_context(|| format!("--{k}: {v:?}"))
        };
        let max_sector_dim = int("max-sector-dim", &DEFAULT_MAX_SECTOR_DIM.to_string())? as usize;
        if max_sector_dim == 0 {
            bail!("--max-sector-dim must be positive");
        }
        let cfg = RunConfig {
            sites,
            orders,
            root_index: int("root-index", "1")? as u32,
            sectors,
            tol_root: positive("tol-root", num("tol-root", "1e-7")?)?,
            tol_residual: positive("tol-residual", num("tol-residual", "1e-9")?)?,
            seed: int("seed", "20240611")?,
            out: get("out").map(PathBuf::from),
            cache_dir: get("cache-dir").map(PathBuf::from),
            max_sector_dim,
            identity: get("identity").map(str::to_string),
            tuples: int("tuples", "5")?.max(1) as usize,
        };
        Ok(cfg)
    }

    pub fn densest_sector(sites: usize) -> u128 {
        let k = sites / 2;
        (0..k as u128).fold(1u128, |acc, j| acc * (sites as u128 - j) / (j + 1))
    }

    /// The first (M, dim) whose densest S^z sector exceeds the cap.
    pub fn over_budget(&self) -> Option<(usize, u128)> {
        self.sites
            .iter()
            .map(|&m| (m, Self::densest_sector(m)))
            .find(|&(_, d)| d > self.max_sector_dim as u128)
    }
}

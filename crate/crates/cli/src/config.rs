//! Experiment configuration files.
//!
//! A config is a TOML document naming the experiment `kind` plus the
//! sections that kind reads:
//!
//! | kind                    | section       |
//! |-------------------------|---------------|
//! | `tandem-sweep`          | `[grid]`      |
//! | `allocation-dump`       | `[grid]`      |
//! | `tandem-both`           | `[tandem]`    |
//! | `analytic-vs-localswap` | `[uniform]`   |
//! | `constrained-study`     | `[embedding]` |
//! | `shell-density`         | `[embedding]` |
//!
//! `[localswap]` and `[netduel]` tune the algorithms wherever they run.
//! Relative file names resolve against the config file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use simcache::scenarios::Method;
use simcache::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    TandemSweep,
    AllocationDump,
    TandemBoth,
    AnalyticVsLocalswap,
    ConstrainedStudy,
    ShellDensity,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::TandemSweep => "tandem-sweep",
            Kind::AllocationDump => "allocation-dump",
            Kind::TandemBoth => "tandem-both",
            Kind::AnalyticVsLocalswap => "analytic-vs-localswap",
            Kind::ConstrainedStudy => "constrained-study",
            Kind::ShellDensity => "shell-density",
        }
    }

    fn section(self) -> &'static str {
        match self {
            Kind::TandemSweep | Kind::AllocationDump => "grid",
            Kind::TandemBoth => "tandem",
            Kind::AnalyticVsLocalswap => "uniform",
            Kind::ConstrainedStudy | Kind::ShellDensity => "embedding",
        }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub name: Option<String>,
    /// Output directory; relative paths go under the output root.
    pub output: Option<PathBuf>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Sweep points run concurrently.
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default)]
    pub localswap: LocalSwapSection,
    #[serde(default)]
    pub netduel: NetDuelSection,
    pub grid: Option<GridSection>,
    pub tandem: Option<TandemSection>,
    pub uniform: Option<UniformSection>,
    pub embedding: Option<EmbeddingSection>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct LocalSwapSection {
    pub max_sweeps: usize,
}

impl Default for LocalSwapSection {
    fn default() -> Self {
        LocalSwapSection { max_sweeps: 200 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct NetDuelSection {
    pub window: usize,
    pub margin: f64,
    pub requests: usize,
    pub independent_nodes: bool,
}

impl Default for NetDuelSection {
    fn default() -> Self {
        NetDuelSection {
            window: 500,
            margin: 0.05,
            requests: 1_000_000,
            independent_nodes: true,
        }
    }
}

/// Gaussian-grid tandem (leaf arrivals only).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSection {
    pub side: usize,
    pub k: usize,
    pub repository_cost: f64,
    pub gamma: f64,
    pub sigmas: Vec<f64>,
    pub h: Vec<f64>,
    pub algorithms: Vec<Method>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            side: 100,
            k: 100,
            repository_cost: 1000.0,
            gamma: 1.0,
            sigmas: Vec::new(),
            h: Vec::new(),
            algorithms: Method::ALL.to_vec(),
        }
    }
}

/// Continuous tandem with arrivals at both caches.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct TandemSection {
    /// `region_id,rate` CSV; without it a Gaussian grid profile is used.
    pub profile_file: Option<PathBuf>,
    pub side: usize,
    pub sigma: f64,
    pub k_leaf: f64,
    /// Omitted for an unbounded parent.
    pub k_parent: Option<f64>,
    pub gamma: f64,
    pub beta_parent: Vec<f64>,
    pub h: Vec<f64>,
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for TandemSection {
    fn default() -> Self {
        TandemSection {
            profile_file: None,
            side: 100,
            sigma: 12.5,
            k_leaf: 100.0,
            k_parent: Some(100.0),
            gamma: 1.0,
            beta_parent: vec![1.0],
            h: Vec::new(),
            tolerance: 1e-10,
            max_sweeps: 2000,
        }
    }
}

/// Uniform demand on a torus, LocalSwap against the analytic tandem.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct UniformSection {
    /// Radius of the diamonds that tile the torus.
    pub ball_radius: usize,
    pub gammas: Vec<f64>,
    /// Hop costs `0, …, 2·r^γ` in this many equal steps plus one.
    pub points: usize,
    /// Forwarded share of leaf traffic below which a point counts as
    /// not forwarding.
    pub onset_share: f64,
}

impl Default for UniformSection {
    fn default() -> Self {
        UniformSection {
            ball_radius: 5,
            gammas: Vec::new(),
            points: 21,
            onset_share: 0.01,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BarycenterMode {
    Weighted,
    Unweighted,
}

/// Embedding catalog (from files or the clustered generator) and the
/// tandem placed over it.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingSection {
    pub items_file: Option<PathBuf>,
    pub events_file: Option<PathBuf>,
    pub items: usize,
    pub dim: usize,
    pub clusters: usize,
    pub spread: f64,
    pub sigma: f64,
    pub decay: f64,
    pub events: usize,
    pub generator_seed: u64,
    pub barycenter: BarycenterMode,
    pub k_leaf: usize,
    pub k_parent: usize,
    pub h: f64,
    pub repository_cost: f64,
    pub gamma: f64,
    /// Explicit split distances; when empty, `d_star_points` evenly spaced
    /// feasible values are used.
    pub d_star: Vec<f64>,
    pub d_star_points: usize,
    pub shell_width: f64,
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        let g = simcache::workload::ClusteredSpec::default();
        EmbeddingSection {
            items_file: None,
            events_file: None,
            items: g.items,
            dim: g.dim,
            clusters: g.clusters,
            spread: g.spread,
            sigma: g.sigma,
            decay: g.decay,
            events: g.events,
            generator_seed: g.seed,
            barycenter: BarycenterMode::Weighted,
            k_leaf: 100,
            k_parent: 100,
            h: 1.0,
            repository_cost: 100.0,
            gamma: 1.0,
            d_star: Vec::new(),
            d_star_points: 6,
            shell_width: 1.0,
        }
    }
}

const TOP_KEYS: &[&str] = &[
    "kind",
    "name",
    "output",
    "seeds",
    "workers",
    "localswap",
    "netduel",
    "grid",
    "tandem",
    "uniform",
    "embedding",
];

fn section_keys(section: &str) -> &'static [&'static str] {
    match section {
        "localswap" => &["max_sweeps"],
        "netduel" => &["window", "margin", "requests", "independent_nodes"],
        "grid" => &["side", "k", "repository_cost", "gamma", "sigmas", "h", "algorithms"],
        "tandem" => &[
            "profile_file",
            "side",
            "sigma",
            "k_leaf",
            "k_parent",
            "gamma",
            "beta_parent",
            "h",
            "tolerance",
            "max_sweeps",
        ],
        "uniform" => &["ball_radius", "gammas", "points", "onset_share"],
        "embedding" => &[
            "items_file",
            "events_file",
            "items",
            "dim",
            "clusters",
            "spread",
            "sigma",
            "decay",
            "events",
            "generator_seed",
            "barycenter",
            "k_leaf",
            "k_parent",
            "h",
            "repository_cost",
            "gamma",
            "d_star",
            "d_star_points",
            "shell_width",
        ],
        _ => &[],
    }
}

/// A validated config together with where it came from.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub path: PathBuf,
    pub text: String,
}

impl LoadedConfig {
    pub fn base_dir(&self) -> &Path {
        self.path.parent().unwrap_or(Path::new("."))
    }

    pub fn resolve(&self, file: &Path) -> PathBuf {
        if file.is_absolute() {
            file.to_path_buf()
        } else {
            self.base_dir().join(file)
        }
    }
}

fn line_at(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

struct Diagnostics<'a> {
    path: &'a Path,
    text: &'a str,
    /// Line of each `section.key` (and of each section header as `section`).
    lines: BTreeMap<String, usize>,
    out: Vec<String>,
}

impl Diagnostics<'_> {
    fn at(&mut self, line: usize, msg: impl std::fmt::Display) {
        self.out.push(format!("{}:{line}: {msg}", self.path.display()));
    }

    fn line_of(&self, key: &str) -> usize {
        self.lines
            .get(key)
            .or_else(|| key.split('.').next().and_then(|s| self.lines.get(s)))
            .copied()
            .unwrap_or(1)
    }

    fn err(&mut self, key: &str, msg: impl std::fmt::Display) {
        let line = self.line_of(key);
        self.at(line, msg);
    }

    /// Records key lines and flags unknown keys, one diagnostic each.
    fn scan(&mut self) -> bool {
        use toml::de::{DeTable, DeValue};
        let doc = match DeTable::parse(self.text) {
            Ok(d) => d,
            Err(e) => {
                let line = e.span().map_or(1, |s| line_at(self.text, s.start));
                self.at(line, e.message().trim());
                return false;
            }
        };
        for (key, value) in doc.get_ref() {
            let name = key.get_ref().to_string();
            let line = line_at(self.text, key.span().start);
            self.lines.insert(name.clone(), line);
            if !TOP_KEYS.contains(&name.as_str()) {
                self.at(line, format!("unknown key `{name}`"));
                continue;
            }
            if let DeValue::Table(t) = value.get_ref() {
                let allowed = section_keys(&name);
                for (k, _) in t {
                    let sub = k.get_ref().to_string();
                    let l = line_at(self.text, k.span().start);
                    self.lines.insert(format!("{name}.{sub}"), l);
                    if !allowed.contains(&sub.as_str()) {
                        self.at(l, format!("unknown key `{name}.{sub}`"));
                    }
                }
            }
        }
        true
    }
}

fn check_file(d: &mut Diagnostics<'_>, base: &Path, key: &str, file: &Option<PathBuf>) {
    if let Some(f) = file {
        let p = if f.is_absolute() { f.clone() } else { base.join(f) };
        if !p.is_file() {
            d.err(key, format!("`{key}` refers to a missing file: {}", p.display()));
        }
    }
}

fn semantic(d: &mut Diagnostics<'_>, c: &ExperimentConfig, base: &Path) {
    if c.seeds.is_empty() {
        d.err("seeds", "`seeds` must list at least one seed");
    }
    if c.workers == 0 {
        d.err("workers", "`workers` must be at least 1");
    }
    if c.localswap.max_sweeps == 0 {
        d.err("localswap.max_sweeps", "`localswap.max_sweeps` must be at least 1");
    }
    if c.netduel.window == 0 {
        d.err("netduel.window", "`netduel.window` must be at least 1");
    }
    if !(c.netduel.margin >= 0.0) {
        d.err("netduel.margin", "`netduel.margin` must be >= 0");
    }
    // dangling references are reported wherever they appear
    if let Some(t) = &c.tandem {
        check_file(d, base, "tandem.profile_file", &t.profile_file);
    }
    if let Some(e) = &c.embedding {
        check_file(d, base, "embedding.items_file", &e.items_file);
        check_file(d, base, "embedding.events_file", &e.events_file);
    }
    let section = c.kind.section();
    let present = match section {
        "grid" => c.grid.is_some(),
        "tandem" => c.tandem.is_some(),
        "uniform" => c.uniform.is_some(),
        _ => c.embedding.is_some(),
    };
    if !present {
        d.err("kind", format!("kind `{}` needs a [{section}] section", c.kind.name()));
        return;
    }
    let positive = |d: &mut Diagnostics<'_>, key: &str, v: f64| {
        if !(v > 0.0) || !v.is_finite() {
            d.err(key, format!("`{key}` must be positive, got {v}"));
        }
    };
    let non_negative = |d: &mut Diagnostics<'_>, key: &str, vs: &[f64]| {
        if let Some(v) = vs.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            d.err(key, format!("`{key}` values must be finite and >= 0, got {v}"));
        }
    };
    match c.kind {
        Kind::TandemSweep | Kind::AllocationDump => {
            let g = c.grid.as_ref().expect("checked");
            if g.sigmas.is_empty() {
                d.err("grid.sigmas", "missing sweep grid `grid.sigmas`");
            }
            if g.h.is_empty() {
                d.err("grid.h", "missing sweep grid `grid.h`");
            }
            if g.algorithms.is_empty() {
                d.err("grid.algorithms", "`grid.algorithms` must name at least one method");
            }
            for s in &g.sigmas {
                positive(d, "grid.sigmas", *s);
            }
            non_negative(d, "grid.h", &g.h);
            if g.side == 0 || g.k == 0 {
                d.err("grid", "`grid.side` and `grid.k` must be at least 1");
            }
            if 2 * g.k > g.side * g.side {
                d.err("grid.k", "two caches of `grid.k` slots exceed the catalog");
            }
        }
        Kind::TandemBoth => {
            let t = c.tandem.as_ref().expect("checked");
            if t.h.is_empty() {
                d.err("tandem.h", "missing sweep grid `tandem.h`");
            }
            if t.beta_parent.is_empty() {
                d.err("tandem.beta_parent", "missing sweep grid `tandem.beta_parent`");
            }
            non_negative(d, "tandem.h", &t.h);
            non_negative(d, "tandem.beta_parent", &t.beta_parent);
            positive(d, "tandem.k_leaf", t.k_leaf);
            if let Some(k) = t.k_parent {
                positive(d, "tandem.k_parent", k);
            }
            if t.profile_file.is_none() {
                positive(d, "tandem.sigma", t.sigma);
            }
        }
        Kind::AnalyticVsLocalswap => {
            let u = c.uniform.as_ref().expect("checked");
            if u.gammas.is_empty() {
                d.err("uniform.gammas", "missing sweep grid `uniform.gammas`");
            }
            non_negative(d, "uniform.gammas", &u.gammas);
            if u.points < 2 {
                d.err("uniform.points", "`uniform.points` must be at least 2");
            }
            if u.ball_radius == 0 {
                d.err("uniform.ball_radius", "`uniform.ball_radius` must be at least 1");
            }
        }
        Kind::ConstrainedStudy | Kind::ShellDensity => {
            let e = c.embedding.as_ref().expect("checked");
            if e.items_file.is_some() != e.events_file.is_some() {
                d.err("embedding", "`items_file` and `events_file` go together");
            }
            positive(d, "embedding.shell_width", e.shell_width);
            if c.kind == Kind::ConstrainedStudy {
                if e.d_star.is_empty() && e.d_star_points == 0 {
                    d.err("embedding.d_star", "missing sweep grid `embedding.d_star` (or `d_star_points`)");
                }
                if e.k_leaf == 0 || e.k_parent == 0 {
                    d.err("embedding", "`k_leaf` and `k_parent` must be at least 1");
                }
            }
        }
    }
}

/// Checks a config without touching any file it names; all problems are
/// reported together, each prefixed with `path:line:`.
pub fn validate_text(text: &str, path: &Path) -> Result<ExperimentConfig, Error> {
    let mut d = Diagnostics {
        path,
        text,
        lines: BTreeMap::new(),
        out: Vec::new(),
    };
    if !d.scan() {
        return Err(Error::Config(d.out));
    }
    let config = match toml::from_str::<ExperimentConfig>(text) {
        Ok(c) => Some(c),
        Err(e) => {
            // unknown keys were already listed; serde only stops at the first
            // type problem
            let line = e.span().map_or(1, |s| line_at(text, s.start));
            d.at(line, e.message().trim());
            None
        }
    };
    if let Some(c) = &config {
        semantic(&mut d, c, path.parent().unwrap_or(Path::new(".")));
    }
    match config {
        Some(c) if d.out.is_empty() => Ok(c),
        _ => Err(Error::Config(d.out)),
    }
}

pub fn validate_config(path: &Path) -> Result<LoadedConfig, Error> {
    let text = std::fs::read_to_string(path)?;
    let config = validate_text(&text, path)?;
    Ok(LoadedConfig {
        config,
        path: path.to_path_buf(),
        text,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diags(text: &str) -> Vec<String> {
        match validate_text(text, Path::new("c.toml")) {
            Err(Error::Config(d)) => d,
            other => panic!("expected diagnostics, got {other:?}"),
        }
    }

    #[test]
    fn valid_sweep() {
        let c = validate_text(
            "kind = \"tandem-sweep\"\n[grid]\nsigmas = [50.0, 12.5]\nh = [0, 1, 2]\n",
            Path::new("c.toml"),
        )
        .unwrap();
        assert_eq!(c.grid.unwrap().algorithms.len(), 4);
        assert_eq!(c.seeds, vec![1]);
    }

    #[test]
    fn unknown_keys_listed_individually() {
        let d = diags("kind = \"tandem-sweep\"\ncolour = 1\n[grid]\nsigmas = [1.0]\nh = [0]\nshape = 2\nsize = 3\n");
        assert_eq!(d.len(), 3, "{d:?}");
        assert_eq!(d[0], "c.toml:2: unknown key `colour`");
        assert_eq!(d[1], "c.toml:6: unknown key `grid.shape`");
        assert_eq!(d[2], "c.toml:7: unknown key `grid.size`");
    }

    #[test]
    fn missing_sweep_grid_is_named() {
        let d = diags("kind = \"tandem-sweep\"\n[grid]\nsigmas = [1.0]\n");
        assert_eq!(d, vec!["c.toml:2: missing sweep grid `grid.h`".to_string()]);
    }

    #[test]
    fn dangling_file_is_named() {
        let d = diags("kind = \"shell-density\"\n[embedding]\nitems_file = \"nope.csv\"\nevents_file = \"nope2.csv\"\n");
        assert_eq!(d.len(), 2);
        assert!(d[0].starts_with("c.toml:3: `embedding.items_file` refers to a missing file"));
    }

    #[test]
    fn type_errors_carry_lines() {
        let d = diags("kind = \"tandem-sweep\"\n[grid]\nsigmas = \"wide\"\nh = [0]\n");
        assert_eq!(d.len(), 1);
        assert!(d[0].starts_with("c.toml:3:"), "{d:?}");
    }

    #[test]
    fn syntax_errors_carry_lines() {
        let d = diags("kind = \"tandem-sweep\"\n[grid\n");
        assert!(d[0].starts_with("c.toml:2:"), "{d:?}");
    }
}

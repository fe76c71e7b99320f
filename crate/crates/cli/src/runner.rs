//! Runs an experiment config: independent sweep points on a bounded worker
//! pool, rows merged in config order, one CSV per table plus a JSON
//! manifest.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};
use simcache::continuum::{tandem_both_solve, RegionProfile, TandemSpec};
use simcache::model::{Allocation, ObjectSpace};
use simcache::offline::{constrained_local_swap, local_swap, RequestSource, StopRule};
use simcache::online::NetDuelConfig;
use simcache::scenarios::{
    barycenter_split, d_star_grid, discrete_onset, forwarded_share, onset_sweep, EmbeddingTandem, GridTandem,
    MethodSettings, TorusTandem, LEAF, PARENT,
};
use simcache::workload::{
    clustered_catalog, gaussian_grid_rates, ingest_embedding_trace, shell_density, Barycenter, ClusteredSpec,
    EmbeddingCatalog, RequestTrace,
};
use simcache::{Error, Result};

use crate::config::{BarycenterMode, EmbeddingSection, ExperimentConfig, Kind, LoadedConfig};

/// Environment variable naming the root for relative output directories.
pub const OUTPUT_ROOT_VAR: &str = "SIMCACHE_OUT";

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR).map_or_else(|| PathBuf::from("."), PathBuf::from)
}

pub fn output_dir(loaded: &LoadedConfig) -> PathBuf {
    let c = &loaded.config;
    let rel = c.output.clone().unwrap_or_else(|| {
        PathBuf::from(c.name.clone().unwrap_or_else(|| {
            loaded
                .path
                .file_stem()
                .map_or_else(|| "experiment".into(), |s| s.to_string_lossy().into_owned())
        }))
    });
    if rel.is_absolute() {
        rel
    } else {
        output_root().join(rel)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PointRecord {
    pub key: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub kind: &'static str,
    pub config_path: String,
    pub config_hash: String,
    pub version: &'static str,
    pub seeds: Vec<u64>,
    pub started_unix: u64,
    pub finished_unix: u64,
    /// The config with every default filled in.
    pub config: ExperimentConfig,
    pub points: Vec<PointRecord>,
    pub files: Vec<String>,
    pub notes: Vec<String>,
}

#[derive(Debug)]
pub struct RunReport {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

impl RunReport {
    pub fn failed(&self) -> usize {
        self.manifest.points.iter().filter(|p| !p.ok).count()
    }
}

pub fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Runs `f` over `jobs` with at most `workers` threads; results keep job order.
pub fn run_pool<J: Sync, R: Send>(jobs: &[J], workers: usize, f: impl Fn(&J) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, jobs.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let r = f(&jobs[i]);
                slots.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

struct Table {
    name: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&str]) -> Self {
        Table {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn write(&self, dir: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(dir.join(&self.name))?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Context<'a> {
    loaded: &'a LoadedConfig,
    hash: String,
    dir: PathBuf,
    points: Vec<PointRecord>,
    tables: Vec<Table>,
    notes: Vec<String>,
}

impl Context<'_> {
    fn config(&self) -> &ExperimentConfig {
        &self.loaded.config
    }

    fn short_hash(&self) -> String {
        self.hash[..12].to_string()
    }

    fn settings(&self, seed: u64) -> MethodSettings {
        let c = self.config();
        MethodSettings {
            seed,
            max_sweeps: c.localswap.max_sweeps,
            netduel: NetDuelConfig {
                window: c.netduel.window,
                margin: c.netduel.margin,
                independent_nodes: c.netduel.independent_nodes,
                ..NetDuelConfig::default()
            },
            netduel_requests: c.netduel.requests,
        }
    }

    fn record<T>(&mut self, key: String, r: &Result<T>) {
        match r {
            Ok(_) => self.points.push(PointRecord {
                key,
                ok: true,
                error: None,
            }),
            Err(e) => {
                log::error!("{key}: {e}");
                self.points.push(PointRecord {
                    key,
                    ok: false,
                    error: Some(e.to_string()),
                });
            }
        }
    }
}

/// Runs every point of the config and writes its artifacts. A failing
/// point is recorded in the manifest and the run carries on.
pub fn run_experiment(loaded: &LoadedConfig) -> Result<RunReport> {
    let started = now();
    let dir = output_dir(loaded);
    std::fs::create_dir_all(&dir)?;
    let mut ctx = Context {
        loaded,
        hash: config_hash(&loaded.text),
        dir: dir.clone(),
        points: Vec::new(),
        tables: Vec::new(),
        notes: Vec::new(),
    };
    match loaded.config.kind {
        Kind::TandemSweep => tandem_sweep(&mut ctx, false)?,
        Kind::AllocationDump => tandem_sweep(&mut ctx, true)?,
        Kind::TandemBoth => tandem_both(&mut ctx)?,
        Kind::AnalyticVsLocalswap => analytic_vs_localswap(&mut ctx)?,
        Kind::ConstrainedStudy => constrained_study(&mut ctx)?,
        Kind::ShellDensity => shells(&mut ctx)?,
    }
    let mut files: Vec<String> = ctx.tables.iter().map(|t| t.name.clone()).collect();
    for t in &ctx.tables {
        t.write(&dir)?;
    }
    files.extend(
        std::fs::read_dir(&dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n.starts_with("allocation_") || n.starts_with("weights_")),
    );
    files.sort();
    files.dedup();
    let manifest = Manifest {
        kind: loaded.config.kind.name(),
        config_path: loaded.path.display().to_string(),
        config_hash: ctx.hash.clone(),
        version: env!("CARGO_PKG_VERSION"),
        seeds: loaded.config.seeds.clone(),
        started_unix: started,
        finished_unix: now(),
        config: loaded.config.clone(),
        points: ctx.points,
        files,
        notes: ctx.notes,
    };
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(RunReport { dir, manifest })
}

fn tandem_sweep(ctx: &mut Context<'_>, dump: bool) -> Result<()> {
    let c = ctx.config().clone();
    let g = c.grid.as_ref().expect("validated");
    ctx.notes.push(format!(
        "cache sizes are not given for the grid experiments; using k = {} slots per cache, repository {} hops away",
        g.k, g.repository_cost
    ));
    let mut jobs = Vec::new();
    for &sigma in &g.sigmas {
        for &h in &g.h {
            for &seed in &c.seeds {
                for &m in &g.algorithms {
                    jobs.push((sigma, h, seed, m));
                }
            }
        }
    }
    let dir = ctx.dir.clone();
    let settings: Vec<MethodSettings> = c.seeds.iter().map(|&s| ctx.settings(s)).collect();
    let results = run_pool(&jobs, c.workers, |&(sigma, h, seed, m)| -> Result<f64> {
        let sc = GridTandem {
            side: g.side,
            sigma,
            k: g.k,
            h,
            repository_cost: g.repository_cost,
            gamma: g.gamma,
        };
        let inst = sc.instance()?;
        let si = c.seeds.iter().position(|&s| s == seed).expect("seed from config");
        let run = sc.run(&inst, m, &settings[si])?;
        if dump {
            let rates = sc.rates()?;
            let name = format!("allocation_{m}_sigma{sigma}_h{h}_seed{seed}.csv");
            let mut w = csv::Writer::from_path(dir.join(name))?;
            w.write_record(["object", "x", "y", "rate", "owner", "stored"])?;
            for o in 0..inst.objects() {
                let stored = match &run.allocation {
                    Some(a) => {
                        let at = |n| a.contains(&simcache::model::Approximizer::new(o, n));
                        match (at(LEAF), at(PARENT)) {
                            (true, true) => "both",
                            (true, false) => "leaf",
                            (false, true) => "parent",
                            _ => "",
                        }
                    }
                    None => "",
                };
                w.write_record([
                    o.to_string(),
                    (o % g.side).to_string(),
                    (o / g.side).to_string(),
                    rates[o].to_string(),
                    run.owners[o].name().to_string(),
                    stored.to_string(),
                ])?;
            }
            w.flush()?;
        }
        Ok(run.cost)
    });
    let mut t = Table::new(
        if dump { "allocation_costs.csv" } else { "sweep.csv" },
        &["algorithm", "h", "sigma", "seed", "cost", "config_hash"],
    );
    for (&(sigma, h, seed, m), r) in jobs.iter().zip(results) {
        if let Ok(cost) = &r {
            t.rows.push(vec![
                m.to_string(),
                h.to_string(),
                sigma.to_string(),
                seed.to_string(),
                cost.to_string(),
                ctx.short_hash(),
            ]);
        }
        ctx.record(format!("{m} sigma={sigma} h={h} seed={seed}"), &r);
    }
    ctx.tables.push(t);
    Ok(())
}

fn tandem_both(ctx: &mut Context<'_>) -> Result<()> {
    let c = ctx.config().clone();
    let t = c.tandem.as_ref().expect("validated");
    let profile = match &t.profile_file {
        Some(f) => {
            let p = ctx.loaded.resolve(f);
            RegionProfile::from_csv(std::fs::File::open(&p)?, &p)?
        }
        None => RegionProfile::new(gaussian_grid_rates(t.side, t.sigma, 1.0)?)?,
    };
    let mut jobs = Vec::new();
    for &b in &t.beta_parent {
        for &h in &t.h {
            jobs.push((b, h));
        }
    }
    let dir = ctx.dir.clone();
    let results = run_pool(&jobs, c.workers, |&(beta, h)| -> Result<_> {
        let spec = TandemSpec {
            k_leaf: t.k_leaf,
            k_parent: t.k_parent,
            h,
            beta_parent: beta,
            gamma: t.gamma,
            profile: profile.clone(),
        };
        let sol = tandem_both_solve(&spec, t.tolerance, t.max_sweeps)?;
        let mut w = csv::Writer::from_path(dir.join(format!("weights_beta{beta}_h{h}.csv")))?;
        w.write_record(["region", "rate", "w_leaf"])?;
        for (i, (&rate, &wl)) in profile.rates().iter().zip(&sol.weights).enumerate() {
            w.write_record([i.to_string(), rate.to_string(), wl.to_string()])?;
        }
        w.flush()?;
        let forwarded: f64 = profile.rates().iter().zip(&sol.weights).map(|(l, w)| l * (1.0 - w)).sum();
        Ok((sol, forwarded))
    });
    let mut table = Table::new(
        "tandem_both.csv",
        &["beta_parent", "h", "cost", "forwarded_rate", "kkt_residual", "converged", "config_hash"],
    );
    for (&(beta, h), r) in jobs.iter().zip(results) {
        if let Ok((sol, fwd)) = &r {
            table.rows.push(vec![
                beta.to_string(),
                h.to_string(),
                sol.cost.to_string(),
                fwd.to_string(),
                sol.kkt_residual.to_string(),
                sol.converged.to_string(),
                ctx.short_hash(),
            ]);
        }
        ctx.record(format!("beta_parent={beta} h={h}"), &r);
    }
    ctx.tables.push(table);
    Ok(())
}

fn analytic_vs_localswap(ctx: &mut Context<'_>) -> Result<()> {
    let c = ctx.config().clone();
    let u = c.uniform.as_ref().expect("validated");
    let mut jobs = Vec::new();
    let mut spaces: Vec<ObjectSpace<f64>> = Vec::new();
    let mut grids = Vec::new();
    for (gi, &gamma) in u.gammas.iter().enumerate() {
        let base = TorusTandem::new(u.ball_radius, gamma, 0.0);
        spaces.push(base.space()?);
        let hs = onset_sweep(base.analytic()?.onset, u.points);
        for (i, &h) in hs.iter().enumerate() {
            for &seed in &c.seeds {
                jobs.push((gi, i, h, seed));
            }
        }
        grids.push(hs);
    }
    ctx.notes.push(format!(
        "uniform demand on a {0}x{0} norm-1 torus tiled exactly by radius-{1} diamonds, {0} slots per cache",
        TorusTandem::new(u.ball_radius, 1.0, 0.0).side(),
        u.ball_radius
    ));
    let results = run_pool(&jobs, c.workers, |&(gi, _, h, seed)| -> Result<_> {
        let sc = TorusTandem::new(u.ball_radius, u.gammas[gi], h);
        let inst = sc.instance_with(spaces[gi].clone())?;
        let ls = local_swap(
            &inst,
            &Allocation::new(),
            RequestSource::Emulated { seed },
            StopRule::Converged {
                max_sweeps: c.localswap.max_sweeps,
            },
        )?;
        let share = forwarded_share(&inst, &ls.allocation)?;
        Ok((sc.analytic()?, ls.cost, share))
    });
    let mut curve = Table::new(
        "curve.csv",
        &[
            "gamma",
            "h",
            "analytic_cost",
            "localswap_cost",
            "relative_gap",
            "forwarded_share",
            "seed",
            "config_hash",
        ],
    );
    let mut shares: Vec<Vec<Vec<Option<f64>>>> = grids
        .iter()
        .map(|hs| vec![vec![None; c.seeds.len()]; hs.len()])
        .collect();
    for (&(gi, i, h, seed), r) in jobs.iter().zip(results) {
        let gamma = u.gammas[gi];
        if let Ok((an, cost, share)) = &r {
            curve.rows.push(vec![
                gamma.to_string(),
                h.to_string(),
                an.cost.to_string(),
                cost.to_string(),
                (cost / an.cost - 1.0).to_string(),
                share.to_string(),
                seed.to_string(),
                ctx.short_hash(),
            ]);
            let si = c.seeds.iter().position(|&s| s == seed).expect("seed from config");
            shares[gi][i][si] = Some(*share);
        }
        ctx.record(format!("gamma={gamma} h={h} seed={seed}"), &r);
    }
    let mut onset = Table::new(
        "onset.csv",
        &["gamma", "seed", "analytic_onset", "localswap_onset", "grid_step", "config_hash"],
    );
    for (gi, &gamma) in u.gammas.iter().enumerate() {
        let an = TorusTandem::new(u.ball_radius, gamma, 0.0).analytic()?.onset;
        let hs = &grids[gi];
        for (si, seed) in c.seeds.iter().enumerate() {
            let col: Option<Vec<f64>> = shares[gi].iter().map(|row| row[si]).collect();
            let found = col.and_then(|s| discrete_onset(hs, &s, u.onset_share));
            onset.rows.push(vec![
                gamma.to_string(),
                seed.to_string(),
                an.to_string(),
                found.map_or_else(|| "none".into(), |h| h.to_string()),
                (hs[1] - hs[0]).to_string(),
                ctx.short_hash(),
            ]);
        }
    }
    ctx.tables.push(curve);
    ctx.tables.push(onset);
    Ok(())
}

/// Catalog and trace from the configured files or the generator.
pub fn load_catalog(loaded: &LoadedConfig, e: &EmbeddingSection) -> Result<(EmbeddingCatalog, RequestTrace)> {
    let weighting = match e.barycenter {
        BarycenterMode::Weighted => Barycenter::Weighted,
        BarycenterMode::Unweighted => Barycenter::Unweighted,
    };
    match (&e.items_file, &e.events_file) {
        (Some(i), Some(ev)) => ingest_embedding_trace(&loaded.resolve(i), &loaded.resolve(ev), LEAF, weighting),
        _ => {
            let spec = ClusteredSpec {
                items: e.items,
                dim: e.dim,
                clusters: e.clusters,
                spread: e.spread,
                sigma: e.sigma,
                decay: e.decay,
                events: e.events,
                seed: e.generator_seed,
            };
            let (mut cat, trace) = clustered_catalog(&spec, LEAF)?;
            cat.set_weighting(weighting);
            Ok((cat, trace))
        }
    }
}

fn constrained_study(ctx: &mut Context<'_>) -> Result<()> {
    let c = ctx.config().clone();
    let e = c.embedding.as_ref().expect("validated");
    let (cat, _) = load_catalog(ctx.loaded, e)?;
    let tandem = EmbeddingTandem {
        k_leaf: e.k_leaf,
        k_parent: e.k_parent,
        h: e.h,
        repository_cost: e.repository_cost,
        gamma: e.gamma,
    };
    let inst = tandem.instance(&cat)?;
    let d_stars = if e.d_star.is_empty() {
        d_star_grid(&cat, e.k_leaf, e.k_parent, e.d_star_points)?
    } else {
        e.d_star.clone()
    };
    let mut jobs: Vec<(Option<f64>, u64)> = Vec::new();
    for &seed in &c.seeds {
        jobs.push((None, seed));
        for &d in &d_stars {
            jobs.push((Some(d), seed));
        }
    }
    let results = run_pool(&jobs, c.workers, |&(d, seed)| -> Result<f64> {
        let source = RequestSource::Emulated { seed };
        let stop = StopRule::Converged {
            max_sweeps: c.localswap.max_sweeps,
        };
        let r = match d {
            None => local_swap(&inst, &Allocation::new(), source, stop)?,
            Some(d) => {
                let f = barycenter_split(&cat, d);
                constrained_local_swap(&inst, &Allocation::new(), source, stop, &f)?
            }
        };
        Ok(r.cost)
    });
    let mut base = std::collections::BTreeMap::new();
    for (&(d, seed), r) in jobs.iter().zip(&results) {
        if let (None, Ok(cost)) = (d, r) {
            base.insert(seed, *cost);
        }
    }
    let mut t = Table::new("constrained.csv", &["d_star", "seed", "cost", "relative_gap", "config_hash"]);
    for (&(d, seed), r) in jobs.iter().zip(results) {
        if let Ok(cost) = &r {
            let gap = base.get(&seed).map_or_else(|| "".into(), |b| (cost / b - 1.0).to_string());
            t.rows.push(vec![
                d.map_or_else(|| "none".into(), |d| d.to_string()),
                seed.to_string(),
                cost.to_string(),
                gap,
                ctx.short_hash(),
            ]);
        }
        let key = match d {
            Some(d) => format!("d_star={d} seed={seed}"),
            None => format!("unconstrained seed={seed}"),
        };
        ctx.record(key, &r);
    }
    ctx.tables.push(t);
    Ok(())
}

fn shells(ctx: &mut Context<'_>) -> Result<()> {
    let e = ctx.config().embedding.clone().expect("validated");
    let r = load_catalog(ctx.loaded, &e).and_then(|(cat, trace)| shell_density(&cat, &trace, e.shell_width));
    let mut t = Table::new("shells.csv", &["inner", "outer", "items", "requests", "density", "config_hash"]);
    if let Ok(shells) = &r {
        for s in shells {
            t.rows.push(vec![
                s.inner.to_string(),
                s.outer.to_string(),
                s.items.to_string(),
                s.requests.to_string(),
                s.density.to_string(),
                ctx.short_hash(),
            ]);
        }
    }
    ctx.record("shells".into(), &r);
    ctx.tables.push(t);
    r.map(|_| ()).or_else(|e| match e {
        // nothing else to run; the manifest carries the failure
        Error::Io(_) | Error::Parse { .. } => Err(e),
        _ => Ok(()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_keeps_job_order() {
        let jobs: Vec<usize> = (0..50).collect();
        let out = run_pool(&jobs, 4, |&j| j * 2);
        assert_eq!(out, (0..50).map(|j| j * 2).collect::<Vec<_>>());
    }

    #[test]
    fn hash_is_sha256() {
        assert_eq!(
            config_hash("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}

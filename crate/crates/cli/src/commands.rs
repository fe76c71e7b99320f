//! One-shot commands: placement on an instance file, continuum solves on a
//! region profile, and online NetDuel on a trace.

use std::path::PathBuf;

use serde::Serialize;
use serde_json::json;
use simcache::continuum::{
    chain_threshold_solve, equidepth_tree_solve, single_cache_opt, tandem_both_solve, ChainSpec, EquiDepthTree,
    RegionProfile, TandemSpec,
};
use simcache::model::{write_allocation, Allocation, Demand, Instance, NodeId, ObjectId};
use simcache::offline::{
    brute_force_optimal, cascade_place, cascade_place_constrained, constrained_local_swap,
    greedy_place_constrained, local_swap, BruteLimits, RequestSource, StopRule,
};
use simcache::online::{netduel_run, NetDuelConfig};
use simcache::workload::RequestTrace;
use simcache::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PlaceAlgorithm {
    Greedy,
    Localswap,
    Cascade,
    Bruteforce,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stop {
    /// Visit every request class `--max-iters` times.
    Sweeps,
    /// Process `--max-iters` requests.
    Iters,
    /// Run until locally optimal, at most `--max-iters` passes per phase.
    Converged,
}

#[derive(Clone, Debug)]
pub struct PlaceArgs {
    pub algorithm: PlaceAlgorithm,
    pub instance: PathBuf,
    pub seed: u64,
    pub max_iters: usize,
    pub stop: Stop,
    pub constraint_d_star: Option<f64>,
    pub out: PathBuf,
}

/// Fails with the offending path instead of a bare OS error.
fn require(path: &std::path::Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{}: no such file", path.display())))
    }
}

/// Sizes as JSON, unbounded levels as the string "inf".
fn sizes_json(k: &[f64]) -> serde_json::Value {
    k.iter()
        .map(|&k| if k.is_finite() { json!(k) } else { json!("inf") })
        .collect()
}

/// Rate-weighted barycenter of the object points.
fn weighted_barycenter(inst: &Instance<f64>) -> Result<Vec<f64>> {
    let points = inst
        .space()
        .points()
        .ok_or_else(|| Error::InvalidConstraint("a distance split needs object coordinates".into()))?;
    let Demand::Discrete(entries) = inst.demand() else {
        return Err(Error::InvalidConstraint("a distance split needs per-object demand".into()));
    };
    let mut center = vec![0.0; points.dim()];
    let mut total = 0.0;
    for e in entries {
        for (c, x) in center.iter_mut().zip(points.point(e.object)) {
            *c += e.rate * x;
        }
        total += e.rate;
    }
    if !(total > 0.0) {
        return Err(Error::InvalidConstraint("demand has no mass".into()));
    }
    center.iter_mut().for_each(|c| *c /= total);
    Ok(center)
}

/// The first cache admits objects closer than `d_star` to the barycenter;
/// every other cache admits the rest.
pub fn distance_split(inst: &Instance<f64>, d_star: f64) -> Result<impl Fn(NodeId, ObjectId) -> bool + Sync> {
    if !d_star.is_finite() || d_star < 0.0 {
        return Err(Error::InvalidConstraint(format!("split distance must be non-negative, got {d_star}")));
    }
    let center = weighted_barycenter(inst)?;
    let points = inst.space().points().expect("checked above");
    let near: Vec<bool> = (0..points.len())
        .map(|o| points.metric().distance(points.point(o), &center) < d_star)
        .collect();
    let first = *inst
        .caches()
        .first()
        .ok_or_else(|| Error::InvalidConstraint("instance has no caches".into()))?;
    Ok(move |node: NodeId, object: ObjectId| if node == first { near[object] } else { !near[object] })
}

#[derive(Debug, Serialize)]
pub struct PlaceReport {
    pub algorithm: PlaceAlgorithm,
    pub instance: String,
    pub seed: u64,
    pub stop: Stop,
    pub max_iters: usize,
    pub constraint_d_star: Option<f64>,
    pub cost: f64,
    pub swaps: Option<usize>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub stored: usize,
}

pub fn place(args: &PlaceArgs) -> Result<PlaceReport> {
    require(&args.instance)?;
    let inst = simcache::model::load_instance(&args.instance)?;
    let stop = match args.stop {
        Stop::Sweeps => StopRule::Sweeps(args.max_iters),
        Stop::Iters => StopRule::Iterations(args.max_iters),
        Stop::Converged => StopRule::Converged {
            max_sweeps: args.max_iters,
        },
    };
    let source = RequestSource::Emulated { seed: args.seed };
    let split = args.constraint_d_star.map(|d| distance_split(&inst, d)).transpose()?;
    let admissible = split.as_ref().map(|f| f as &(dyn Fn(NodeId, ObjectId) -> bool + Sync));
    let (allocation, cost, swaps, iterations, converged) = match args.algorithm {
        PlaceAlgorithm::Greedy => {
            let r = greedy_place_constrained(&inst, admissible)?;
            (r.allocation, r.cost, None, None, None)
        }
        PlaceAlgorithm::Localswap => {
            let r = match admissible {
                Some(a) => constrained_local_swap(&inst, &Allocation::new(), source, stop, a)?,
                None => local_swap(&inst, &Allocation::new(), source, stop)?,
            };
            (r.allocation, r.cost, Some(r.swaps.len()), Some(r.iterations), Some(r.converged))
        }
        PlaceAlgorithm::Cascade => {
            let r = match admissible {
                Some(a) => cascade_place_constrained(&inst, a, args.seed, args.max_iters)?,
                None => cascade_place(&inst, args.seed, args.max_iters)?,
            };
            let cost = r.cost();
            (
                r.swap.allocation,
                cost,
                Some(r.swap.swaps.len()),
                Some(r.swap.iterations),
                Some(r.swap.converged),
            )
        }
        PlaceAlgorithm::Bruteforce => {
            if admissible.is_some() {
                return Err(Error::InvalidConstraint(
                    "exhaustive search does not take a placement constraint".into(),
                ));
            }
            let (a, c) = brute_force_optimal(&inst, BruteLimits::default())?;
            (a, c, None, None, None)
        }
    };
    std::fs::create_dir_all(&args.out)?;
    write_allocation(&allocation, std::fs::File::create(args.out.join("allocation.csv"))?)?;
    let report = PlaceReport {
        algorithm: args.algorithm,
        instance: args.instance.display().to_string(),
        seed: args.seed,
        stop: args.stop,
        max_iters: args.max_iters,
        constraint_d_star: args.constraint_d_star,
        cost,
        swaps,
        iterations,
        converged,
        stored: allocation.len(),
    };
    std::fs::write(args.out.join("run.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum ContModel {
    Single,
    Chain,
    Tree,
    Tandem,
}

#[derive(Clone, Debug)]
pub struct ContArgs {
    pub model: ContModel,
    pub profile: PathBuf,
    pub gamma: f64,
    /// Cache sizes from the leaf up; infinite means unbounded.
    pub k: Vec<f64>,
    /// Retrieval cost to each level from the leaf; for the tandem the single
    /// leaf-to-parent cost.
    pub h: Vec<f64>,
    pub beta_parent: f64,
    pub leaf_scales: Vec<f64>,
    pub tolerance: f64,
    pub max_sweeps: usize,
}

fn size(k: f64) -> Option<f64> {
    k.is_finite().then_some(k)
}

pub fn cont(args: &ContArgs) -> Result<serde_json::Value> {
    require(&args.profile)?;
    let file = std::fs::File::open(&args.profile)?;
    let profile = RegionProfile::from_csv(file, &args.profile)?;
    let chain = || -> Result<ChainSpec> {
        if args.k.len() != args.h.len() {
            return Err(Error::InvalidInput(format!(
                "{} sizes but {} hop costs; give one of each per level",
                args.k.len(),
                args.h.len()
            )));
        }
        ChainSpec::new(args.k.iter().map(|&k| size(k)).collect(), args.h.clone(), args.gamma)
    };
    let one = |v: &[f64], what: &str| -> Result<f64> {
        match v {
            [x] => Ok(*x),
            _ => Err(Error::InvalidInput(format!("expected exactly one {what}, got {}", v.len()))),
        }
    };
    Ok(match args.model {
        ContModel::Single => {
            let s = single_cache_opt(&profile, one(&args.k, "cache size")?, args.gamma)?;
            json!({ "model": "single", "gamma": args.gamma, "solution": s })
        }
        ContModel::Chain => {
            let s = chain_threshold_solve(&profile, &chain()?)?;
            json!({ "model": "chain", "gamma": args.gamma, "k": sizes_json(&args.k), "h": args.h, "solution": s })
        }
        ContModel::Tree => {
            let tree = EquiDepthTree::new(chain()?, args.leaf_scales.clone())?;
            let s = equidepth_tree_solve(&profile, &tree)?;
            json!({ "model": "tree", "gamma": args.gamma, "k": sizes_json(&args.k), "h": args.h,
                    "leaf_scales": args.leaf_scales, "solution": s })
        }
        ContModel::Tandem => {
            let (k_leaf, k_parent) = match args.k.as_slice() {
                [l] => (*l, None),
                [l, p] => (*l, size(*p)),
                _ => return Err(Error::InvalidInput("the tandem takes a leaf size and optionally a parent size".into())),
            };
            let spec = TandemSpec {
                k_leaf,
                k_parent,
                h: one(&args.h, "leaf-to-parent cost")?,
                beta_parent: args.beta_parent,
                gamma: args.gamma,
                profile,
            };
            let s = tandem_both_solve(&spec, args.tolerance, args.max_sweeps)?;
            json!({ "model": "tandem", "gamma": args.gamma, "k_leaf": k_leaf, "k_parent": k_parent.map_or(json!("inf"), |k| json!(k)),
                    "h": spec.h, "beta_parent": spec.beta_parent, "solution": s })
        }
    })
}

#[derive(Clone, Debug)]
pub struct OnlineArgs {
    pub instance: PathBuf,
    pub trace: PathBuf,
    pub window: usize,
    pub margin: f64,
    pub seed: u64,
    pub requests: Option<usize>,
    pub out: PathBuf,
}

pub fn online(args: &OnlineArgs) -> Result<serde_json::Value> {
    require(&args.instance)?;
    require(&args.trace)?;
    let inst = simcache::model::load_instance(&args.instance)?;
    let ingress = inst.caches().first().copied().unwrap_or(0);
    let mut trace = RequestTrace::load(&args.trace, ingress)?;
    if let Some(n) = args.requests {
        trace.events.truncate(n);
    }
    let config = NetDuelConfig {
        window: args.window,
        margin: args.margin,
        ..NetDuelConfig::default()
    };
    let run = netduel_run(&inst, &Allocation::new(), &trace, config.clone())?;
    std::fs::create_dir_all(&args.out)?;
    write_allocation(&run.allocation, std::fs::File::create(args.out.join("allocation.csv"))?)?;
    let mut w = csv::Writer::from_path(args.out.join("series.csv"))?;
    w.write_record(["window", "requests", "mean_cost"])?;
    for p in &run.series {
        w.write_record([p.window.to_string(), p.requests.to_string(), p.mean_cost.to_string()])?;
    }
    w.flush()?;
    let report = json!({
        "instance": args.instance.display().to_string(),
        "trace": args.trace.display().to_string(),
        "requests": trace.len(),
        "seed": args.seed,
        "config": config,
        "final_cost": run.final_cost,
        "swaps": run.swaps.len(),
        "stored": run.allocation.len(),
    });
    std::fs::write(args.out.join("run.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

/// 1 for bad input or configuration, 2 for failures while running.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidInput(_)
        | Error::InvalidInstance(_)
        | Error::InvalidConstraint(_)
        | Error::Parse { .. }
        | Error::Config(_)
        | Error::Csv(_)
        | Error::Json(_)
        | Error::UnsupportedTopology(_)
        | Error::CombinatorialSize { .. } => 1,
        Error::Io(e) if e.kind() == std::io::ErrorKind::NotFound => 1,
        _ => 2,
    }
}

pub fn default_out(sub: &str) -> PathBuf {
    crate::runner::output_root().join(sub)
}

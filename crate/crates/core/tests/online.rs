mod common;

use common::random_float_instance;
use proptest::prelude::*;
use simcache::model::{total_cost, Allocation, Instance, NodeId};
use simcache::offline::greedy_place;
use simcache::online::{netduel_run, DuelStatus, NetDuel, NetDuelConfig, VirtualRule};
use simcache::scenarios::{discrete_run, GridTandem, Method, MethodSettings};
use simcache::workload::{sample_trace, Horizon, RequestTrace};

fn trace_for(inst: &Instance<f64>, n: usize, seed: u64) -> RequestTrace {
    sample_trace(inst.demand(), Horizon::Requests(n), seed).unwrap()
}

fn short_windows() -> NetDuelConfig {
    NetDuelConfig {
        window: 20,
        report_every: 100,
        ..NetDuelConfig::default()
    }
}

#[test]
fn same_trace_same_run() {
    let inst = random_float_instance(8);
    let t = trace_for(&inst, 5_000, 8);
    let a = netduel_run(&inst, &Allocation::new(), &t, short_windows()).unwrap();
    let b = netduel_run(&inst, &Allocation::new(), &t, short_windows()).unwrap();
    assert_eq!(a.allocation, b.allocation);
    assert_eq!(a.swaps, b.swaps);
    assert_eq!(a.series, b.series);
    assert!(!a.swaps.is_empty());
}

#[test]
fn disabled_duels_keep_the_start() {
    let inst = random_float_instance(12);
    let init = greedy_place(&inst).unwrap().allocation;
    let t = trace_for(&inst, 3_000, 1);
    for cfg in [
        NetDuelConfig {
            rule: VirtualRule::Disabled,
            ..short_windows()
        },
        NetDuelConfig {
            margin: f64::INFINITY,
            ..short_windows()
        },
    ] {
        let run = netduel_run(&inst, &init, &t, cfg).unwrap();
        assert!(run.swaps.is_empty());
        assert_eq!(run.allocation, init);
        assert_eq!(run.final_cost, total_cost(&inst, &init).unwrap());
    }
}

#[test]
fn empty_trace_is_rejected() {
    let inst = random_float_instance(1);
    let empty = RequestTrace::default();
    assert!(netduel_run(&inst, &Allocation::new(), &empty, NetDuelConfig::default()).is_err());
}

#[test]
fn long_run_approaches_local_swap() {
    let g = GridTandem::new(11, 2.5, 6, 1.0);
    let inst = g.instance().unwrap();
    let settings = MethodSettings {
        netduel_requests: 300_000,
        ..MethodSettings::default()
    };
    let ls = total_cost(&inst, &discrete_run(&inst, Method::LocalSwap, &settings).unwrap()).unwrap();
    let nd = total_cost(&inst, &discrete_run(&inst, Method::NetDuel, &settings).unwrap()).unwrap();
    assert!(nd <= 1.1 * ls, "netduel {nd} vs localswap {ls}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn duels_respect_capacity_windows_and_margin(seed in any::<u64>()) {
        let inst = random_float_instance(seed);
        let cfg = NetDuelConfig { window: 7, margin: 0.1, ..NetDuelConfig::default() };
        let mut policy = NetDuel::new(&inst, &Allocation::new(), cfg.clone()).unwrap();
        let mut seen = vec![0u64; inst.nodes()];
        for e in &trace_for(&inst, 1_500, seed).events {
            let before: Vec<Vec<_>> = (0..inst.nodes()).map(|v| policy.slots(v).to_vec()).collect();
            let route = inst.route(e.object, e.ingress).unwrap();
            for s in &route.stops {
                seen[s.node] += 1;
            }
            let out = policy.on_request(e.object, e.ingress).unwrap();
            for ev in &out.swaps {
                prop_assert!(ev.virtual_saving > (1.0 + cfg.margin) * ev.real_saving);
                let node: NodeId = ev.node;
                let pos = policy.slots(node).iter().position(|s| s.real == Some(ev.inserted)).unwrap();
                let old = &before[node][pos];
                prop_assert_eq!(old.status, DuelStatus::Dueling);
                prop_assert_eq!(old.challenger, Some(ev.inserted));
                prop_assert_eq!(old.real, ev.evicted);
                prop_assert_eq!(old.window_start + cfg.window as u64, seen[node]);
            }
            prop_assert!(policy.allocation().is_feasible(inst.topology(), inst.objects()));
        }
    }
}

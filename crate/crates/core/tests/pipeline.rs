//! Cross-module checks: networks survive the text format, grid routes feed the
//! rate recursion and the receivers, and the schedule agrees with the layout.

use backhaul_core::network::{build_network, parse_network, write_network, ChannelModel, NetworkParams, Path};
use backhaul_core::rate_core::{network_rate, run_recursion, run_recursion_on, QuantizationPolicy};
use backhaul_core::receivers::{receiver_ladder, receiver_network_rate, ReceiverKind};
use backhaul_core::routing::{establish_paths, evaluate_routed_network, ClusterGrid, RoutedScheme, RoutingMetric};
use backhaul_core::schedule::{build_schedule, known_interference_set, RelayId};
use backhaul_core::Error;

const POLICIES: [QuantizationPolicy; 4] = [
    QuantizationPolicy::NoiseLevel,
    QuantizationPolicy::StageDepth,
    QuantizationPolicy::WynerZiv,
    QuantizationPolicy::Optimal,
];

#[test]
fn text_round_trip_preserves_rates() {
    for model in [
        ChannelModel::DenseIid,
        ChannelModel::SparseWyner { alpha: 0.56 },
        ChannelModel::ClusterGrid {
            relays_per_cluster: 3,
            phase_seed: 11,
        },
    ] {
        let params = NetworkParams::new(3, 2, 100.0, model);
        let net = build_network(&params, 42).unwrap();
        let back = parse_network(&write_network(&net)).unwrap().into_network(100.0).unwrap();
        assert_eq!(back.seed(), 42);
        for policy in &POLICIES {
            assert_eq!(network_rate(&net, policy).unwrap(), network_rate(&back, policy).unwrap());
        }
        assert_eq!(
            receiver_network_rate(&net, ReceiverKind::Mmse).unwrap(),
            receiver_network_rate(&back, ReceiverKind::Mmse).unwrap()
        );
    }
}

#[test]
fn grid_model_matches_compact_layout() {
    let grid = ClusterGrid::standard(3, 4, 2, 100.0, 7).unwrap();
    let params = NetworkParams::new(
        2,
        3,
        100.0,
        ChannelModel::ClusterGrid {
            relays_per_cluster: 4,
            phase_seed: 7,
        },
    );
    let net = build_network(&params, 0).unwrap();
    let layout = grid.compact_layout().unwrap();
    for path in Path::BOTH {
        let hops = grid.stage_matrices(&layout[path.index()]).unwrap();
        let direct = run_recursion_on(&hops, 1.0, &QuantizationPolicy::WynerZiv).unwrap();
        let via_net = run_recursion(&net, path, &QuantizationPolicy::WynerZiv).unwrap();
        assert_eq!(direct.rates(), via_net.rates());
    }
}

#[test]
fn routed_networks_order_policies_and_receivers() {
    for seed in 0..5 {
        let grid = ClusterGrid::standard(3, 4, 4, 1000.0, seed).unwrap();
        let state = establish_paths(&grid, RoutingMetric::ReceivedPower, 10, 1e-6).unwrap();
        let rate = |p: QuantizationPolicy| evaluate_routed_network(&state, &grid, &RoutedScheme::OptimizedQmf(p)).unwrap();
        let opt = rate(QuantizationPolicy::Optimal);
        for p in [QuantizationPolicy::NoiseLevel, QuantizationPolicy::StageDepth, QuantizationPolicy::WynerZiv] {
            assert!(opt >= rate(p.clone()) - 1e-9, "seed {seed}, {p}");
        }
        assert!(opt > evaluate_routed_network(&state, &grid, &RoutedScheme::Mr).unwrap());
    }
}

#[test]
fn receivers_on_every_model() {
    for model in [ChannelModel::DenseIid, ChannelModel::SparseWyner { alpha: 0.3 }] {
        let net = build_network(&NetworkParams::new(3, 2, 100.0, model), 5).unwrap();
        for path in Path::BOTH {
            let ml = receiver_ladder(&net, path, ReceiverKind::MlQuantized).unwrap().source_rate();
            for kind in [ReceiverKind::integer_forcing(), ReceiverKind::Mmse, ReceiverKind::Zf] {
                let r = receiver_ladder(&net, path, kind).unwrap().source_rate();
                assert!((0.0..=ml + 1e-9).contains(&r), "{kind:?}: {r} vs ml {ml}");
            }
        }
    }
}

#[test]
fn schedule_interference_matches_layout() {
    let log = build_schedule(3, 3, 12).unwrap();
    for t in 4..=12 {
        for path in Path::BOTH {
            let known = known_interference_set(&log, t, path).unwrap();
            let slot = log.slot(t).unwrap();
            for relay in &known {
                assert!(slot.transmitting.contains_key(relay));
                // next stage of the same path, or the same stage of the other path
                let adjacent = slot.receiving.iter().filter(|rx| rx.path == path).any(|rx| {
                    (relay.path == path && relay.stage == rx.stage + 1) || (relay.path != path && relay.stage == rx.stage)
                });
                assert!(adjacent, "{relay} at slot {t}");
            }
        }
    }
    let r = RelayId::new(Path::Second, 2, 1);
    assert_eq!(r.to_string(), "R(2,2,1)");
}

#[test]
fn infeasible_parameters_surface_as_errors() {
    let err = ClusterGrid::standard(3, 1, 2, 10.0, 0).unwrap_err();
    assert!(matches!(err, Error::Parameter { .. }));
    let err = build_network(&NetworkParams::new(0, 2, 10.0, ChannelModel::DenseIid), 0).unwrap_err();
    assert!(matches!(err, Error::Parameter { .. }));
}

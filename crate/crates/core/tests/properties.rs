use proptest::prelude::*;
use proptest::sample::subsequence;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tqc_core::circuit::{has_errors, parse_circuit, validate_circuit, Circuit, GateOp, Parity, QubitDecl};
use tqc_core::compiler::{compile, compile_source, lower_circuit, Layout, CNOT_PP_SOURCE, DISTILLATION_SOURCE, IDENTITY_SOURCE};
use tqc_core::geometry::{
    bounding_box, occupied_cells, temporal_extent, volume, BraidGeometry, CellCoord, EndKind,
};
use tqc_core::obj::export_obj;
use tqc_core::optimizer::{apply_move, random_legal_move};
use tqc_core::resources::{estimate, ResourceParams};
use tqc_core::scene::{read_scene, write_scene};
use tqc_core::semantics::{random_state, GateMatrix};
use tqc_core::topology::compute_signature;

const SOURCES: [&str; 3] = [IDENTITY_SOURCE, CNOT_PP_SOURCE, DISTILLATION_SOURCE];

fn op_strategy(n: usize) -> impl Strategy<Value = GateOp> {
    let q = move || (0..n).prop_map(|i| format!("q{i}"));
    prop_oneof![
        q().prop_map(GateOp::InitZ),
        q().prop_map(GateOp::InitX),
        q().prop_map(GateOp::MeasZ),
        q().prop_map(GateOp::MeasX),
        q().prop_map(GateOp::Identity),
        q().prop_map(GateOp::InjectY),
        (0..n, 1..n).prop_map(move |(c, off)| GateOp::Cnot {
            control: format!("q{c}"),
            target: format!("q{}", (c + off) % n),
        }),
        (0..n, subsequence((1..n).collect::<Vec<_>>(), 1..=(n - 1).min(3))).prop_map(move |(c, offs)| {
            GateOp::MultiTargetCnot {
                control: format!("q{c}"),
                targets: offs.iter().map(|o| format!("q{}", (c + o) % n)).collect(),
            }
        }),
    ]
}

fn circuit_strategy() -> impl Strategy<Value = Circuit> {
    (2usize..6).prop_flat_map(|n| {
        let decls = proptest::collection::vec(any::<bool>(), n).prop_map(|ps| {
            ps.into_iter()
                .enumerate()
                .map(|(i, d)| QubitDecl { id: format!("q{i}"), parity: if d { Parity::Dual } else { Parity::Primal } })
                .collect::<Vec<_>>()
        });
        let steps = proptest::collection::vec(proptest::collection::vec(op_strategy(n), 1..4), 0..6);
        // a step touches each qubit at most once
        let steps = steps.prop_map(|steps| {
            steps
                .into_iter()
                .map(|ops| {
                    let mut seen = std::collections::BTreeSet::new();
                    ops.into_iter().filter(|op| op.qubits().iter().all(|q| seen.insert(q.to_string()))).collect()
                })
                .collect()
        });
        (decls, steps).prop_map(|(declarations, steps)| Circuit { declarations, steps })
    })
}

fn walked(src: &str, seed: u64, steps: usize) -> BraidGeometry {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = compile_source(src).unwrap();
    for _ in 0..steps {
        let Some(m) = random_legal_move(&g, &mut rng, false) else { break };
        g = apply_move(&g, &m).unwrap();
    }
    g
}

#[test]
fn bundled_sources_validate_cleanly() {
    for src in SOURCES {
        let c = parse_circuit(src).unwrap();
        assert!(!has_errors(&validate_circuit(&c)));
    }
}

#[test]
fn init_and_meas_give_caps_and_io_gives_boundaries() {
    use tqc_core::geometry::BoundaryKind::{Input, Output};
    let ends = |g: &BraidGeometry, trace: &str| g.strand(&g.qubit_map[trace].0).unwrap().ends.clone();
    let cap = |e: &EndKind| matches!(e, EndKind::Cap(_));

    let id = compile_source(IDENTITY_SOURCE).unwrap();
    assert!(ends(&id, "q0").iter().all(cap));

    let cnot = compile_source(CNOT_PP_SOURCE).unwrap();
    assert_eq!(ends(&cnot, "t"), [EndKind::Boundary(Input), EndKind::Boundary(Output)]);
    let c_in = ends(&cnot, "c.in0");
    assert!(c_in[0] == EndKind::Boundary(Input) && cap(&c_in[1]));
    let c = ends(&cnot, "c");
    assert!(cap(&c[0]) && c[1] == EndKind::Boundary(Output));
    assert!(ends(&cnot, "c.dual0").iter().all(cap));

    let dc = parse_circuit(DISTILLATION_SOURCE).unwrap();
    let d = compile(&dc).unwrap();
    for trace in d.qubit_map.keys() {
        let e = ends(&d, trace);
        assert_eq!(e[1] == EndKind::Boundary(Output), dc.is_output(trace), "{trace}");
        assert!(cap(&e[1]) || dc.is_output(trace), "{trace}");
        assert!(cap(&e[0]) || e[0] == EndKind::Injection, "{trace}");
    }
}

#[test]
fn expanded_cnot_matches_three_braids_on_one_control() {
    let expanded = compute_signature(&compile_source(CNOT_PP_SOURCE).unwrap()).unwrap();
    let src = "qubit d dual\nqubit a primal\nqubit b primal\nqubit e primal\n\ninitx d\ninitz a\ninitz b\ninitz e\n\nid d\n\nmcnot d a b e\n\nmeasx d\nmeasz a\nmeasz b\nmeasz e\n";
    let braided = compute_signature(&compile_source(src).unwrap()).unwrap();
    let row = |s: &tqc_core::topology::TopologySignature| {
        let mut v: Vec<i64> = s.linking.iter().map(|r| r[0]).collect();
        v.sort();
        v
    };
    assert_eq!(expanded.dual.len(), 1);
    assert_eq!(row(&expanded), row(&braided));
}

#[test]
fn cnot_mesh_has_one_cube_per_cell() {
    let g = compile_source(CNOT_PP_SOURCE).unwrap();
    let cells = occupied_cells(&g, Parity::Primal).len() + occupied_cells(&g, Parity::Dual).len();
    let text = export_obj(&g);
    assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 8 * cells);
    assert_eq!(text.lines().filter(|l| l.starts_with("f ")).count(), 6 * cells);
    assert!(text.contains("g primal\n") && text.contains("g dual\n"));
}

#[test]
fn resource_ratio_of_bundled_compaction() {
    let g = compile_source(CNOT_PP_SOURCE).unwrap();
    let plan = tqc_core::scene::read_plan(tqc_core::optimizer::CNOT_COMPACT_PLAN.as_bytes()).unwrap();
    let c = tqc_core::optimizer::run_plan(&g, &plan).unwrap();
    let p = ResourceParams::default();
    let (a, b) = (estimate(&g, &p).unwrap(), estimate(&c, &p).unwrap());
    assert_eq!(a.total_physical_qubits * 16, b.total_physical_qubits * 126);
    assert!((a.wall_clock_seconds / b.wall_clock_seconds - 3.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn render_parse_round_trip(c in circuit_strategy()) {
        let text = c.render();
        prop_assert_eq!(parse_circuit(&text).unwrap(), c);
    }

    #[test]
    fn gates_preserve_norm(seed in any::<u64>(), q in 0usize..3, which in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = random_state(3, &mut rng);
        let out = match which {
            0 => s.apply_single(&GateMatrix::h(), q).unwrap(),
            1 => s.apply_single(&GateMatrix::p(), q).unwrap(),
            2 => s.apply_single(&GateMatrix::t(), q).unwrap(),
            _ => s.apply_cnot(q, (q + 1) % 3).unwrap(),
        };
        prop_assert!((out.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn volume_bounds_and_translation(seed in any::<u64>(), k in 0usize..3, dx in -50i64..50, dy in -50i64..50, dt in -50i64..50) {
        let g = walked(SOURCES[k], seed, 30);
        let moved = g.translate(CellCoord::new(dx, dy, dt));
        prop_assert_eq!(volume(&moved), volume(&g));
        prop_assert_eq!(compute_signature(&moved).unwrap(), compute_signature(&g).unwrap());
        let union: std::collections::BTreeSet<CellCoord> =
            occupied_cells(&g, Parity::Primal).union(&occupied_cells(&g, Parity::Dual)).copied().collect();
        prop_assert!(volume(&g) >= union.len() as u64);
        prop_assert!(temporal_extent(&g) <= volume(&g));
        prop_assert!(bounding_box(&g).is_some());
    }

    #[test]
    fn quarter_turns_keep_signature(seed in any::<u64>(), k in 0usize..3, turns in 1usize..4) {
        let g = walked(SOURCES[k], seed, 20);
        let mut r = g.clone();
        for _ in 0..turns {
            r = r.rotate90(0, 1);
        }
        prop_assert_eq!(compute_signature(&r).unwrap(), compute_signature(&g).unwrap());
    }

    #[test]
    fn capped_loops_keep_signature_under_any_turn(seed in any::<u64>(), axes in 0usize..3) {
        let g = walked(IDENTITY_SOURCE, seed, 20);
        let (a, b) = [(0, 2), (1, 2), (0, 1)][axes];
        prop_assert_eq!(compute_signature(&g.rotate90(a, b)).unwrap(), compute_signature(&g).unwrap());
    }

    #[test]
    fn signature_ignores_lane_order(perm in Just((0..2i64).collect::<Vec<_>>()).prop_shuffle(), gap in 5i64..9) {
        let c = parse_circuit(CNOT_PP_SOURCE).unwrap();
        let rows: Vec<i64> = perm.iter().map(|p| p * gap).collect();
        let g = lower_circuit(&c, &Layout::from_rows(&c, &rows)).unwrap();
        prop_assert_eq!(compute_signature(&g).unwrap(), compute_signature(&compile(&c).unwrap()).unwrap());
    }

    #[test]
    fn distillation_signature_ignores_lane_spacing(pitch in 1i64..4, shift in -10i64..10) {
        let c = parse_circuit(DISTILLATION_SOURCE).unwrap();
        let rows: Vec<i64> = (0..c.num_qubits() as i64).map(|i| i * pitch + shift).collect();
        let g = lower_circuit(&c, &Layout::from_rows(&c, &rows)).unwrap();
        prop_assert_eq!(compute_signature(&g).unwrap(), compute_signature(&compile(&c).unwrap()).unwrap());
    }

    #[test]
    fn scene_round_trip(seed in any::<u64>(), k in 0usize..3) {
        let g = walked(SOURCES[k], seed, 25);
        let bytes = write_scene(&g);
        let back = read_scene(&bytes).unwrap();
        prop_assert_eq!(write_scene(&back), bytes);
        prop_assert_eq!(back, g);
    }

    #[test]
    fn resources_scale(d in 1u64..6, q in 1u64..40, ct in 1e-9f64..1e-3, k in 0usize..3) {
        let g = compile_source(SOURCES[k]).unwrap();
        let base = estimate(&g, &ResourceParams { d: 1, qubits_per_unit_cell: 1, cycle_time: ct }).unwrap();
        let e = estimate(&g, &ResourceParams { d, qubits_per_unit_cell: q, cycle_time: ct }).unwrap();
        prop_assert_eq!(e.total_physical_qubits, base.total_physical_qubits * d * d * d * q);
        prop_assert_eq!(e.unit_cells, volume(&g) * d * d * d);
        prop_assert!((e.wall_clock_seconds - base.wall_clock_seconds * d as f64).abs() <= 1e-12 * e.wall_clock_seconds);
        let other = compile_source(SOURCES[(k + 1) % 3]).unwrap();
        let o1 = estimate(&other, &ResourceParams { d: 1, qubits_per_unit_cell: 1, cycle_time: ct }).unwrap();
        let od = estimate(&other, &ResourceParams { d, qubits_per_unit_cell: q, cycle_time: ct }).unwrap();
        prop_assert_eq!(e.total_physical_qubits * o1.total_physical_qubits, od.total_physical_qubits * base.total_physical_qubits);
    }
}

//! Beam search for a short compaction plan of the canonical CNOT.
//!
//! Usage: cargo run --release --example search_plan -- [width] [out.json]

use std::collections::HashSet;

use tqc_core::compiler::{compile_source, CNOT_PP_SOURCE};
use tqc_core::geometry::{temporal_extent, volume, BraidGeometry};
use tqc_core::optimizer::{apply_move, evaluate_moves, potential, Move, MovePlan, PlanStep, Potential};
use tqc_core::scene::write_plan;

fn key(g: &BraidGeometry) -> Vec<Vec<tqc_core::geometry::CellCoord>> {
    g.strands.iter().map(|s| s.path.clone()).collect()
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let width: usize = args.get(1).map(|s| s.parse().expect("width")).unwrap_or(50);
    let out = args.get(2).cloned().unwrap_or_else(|| "cnot_compact_plan.json".into());

    let g = compile_source(CNOT_PP_SOURCE).expect("template compiles");
    let mut beam: Vec<(BraidGeometry, Vec<Move>)> = vec![(g.clone(), Vec::new())];
    let mut seen = HashSet::from([key(&g)]);
    let mut best: (Potential, Vec<Move>) = (potential(&g), Vec::new());
    let mut stale = 0;
    while !beam.is_empty() && stale < 40 {
        stale += 1;
        let mut kids: Vec<(Potential, usize, Move)> = Vec::new();
        for (i, (st, _)) in beam.iter().enumerate() {
            kids.extend(evaluate_moves(st, false).into_iter().map(|(m, p)| (p, i, m)));
        }
        kids.sort();
        let mut next = Vec::new();
        for (p, i, m) in kids {
            if next.len() >= width {
                break;
            }
            let ng = apply_move(&beam[i].0, &m).expect("enumerated moves are legal");
            if !seen.insert(key(&ng)) {
                continue;
            }
            let mut path = beam[i].1.clone();
            path.push(m);
            if p < best.0 {
                best = (p, path.clone());
                stale = 0;
            }
            next.push((ng, path));
        }
        beam = next;
    }

    let mut plan = MovePlan::default();
    let mut cur = g;
    for m in best.1 {
        let before = volume(&cur);
        cur = apply_move(&cur, &m).expect("replay");
        plan.steps.push(PlanStep {
            mv: m,
            volume_before: before,
            volume_after: volume(&cur),
            temporal_extent_after: temporal_extent(&cur),
        });
    }
    std::fs::write(&out, write_plan(&plan)).expect("write plan");
    println!("{} steps, volume {}, temporal extent {}", plan.steps.len(), volume(&cur), temporal_extent(&cur));
}

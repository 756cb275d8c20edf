//! Acceptance run: one line per criterion, nonzero exit if any fails.

use std::path::Path;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tqc_core::cli::run_with;
use tqc_core::compiler::{compile_source, CNOT_PP_SOURCE, DISTILLATION_SOURCE, IDENTITY_SOURCE};
use tqc_core::geometry::{temporal_extent, volume, BraidGeometry};
use tqc_core::optimizer::{apply_move, compact, random_legal_move, run_plan, CompactionConfig, Strategy, CNOT_COMPACT_PLAN};
use tqc_core::scene::{read_plan, read_scene, write_scene};
use tqc_core::semantics::{random_state, verify_cnot_identity, Basis};
use tqc_core::topology::{compute_signature, linking_number, linking_number_along, ClosedLoop};

struct Outcome {
    ok: bool,
    detail: String,
}

fn check(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { ok, detail: detail.into() }
}

fn within(limit: Duration, start: Instant) -> (bool, String) {
    let e = start.elapsed();
    (e <= limit, format!("{:.2}s of {}s", e.as_secs_f64(), limit.as_secs()))
}

fn volumes() -> Outcome {
    let start = Instant::now();
    let id = compile_source(IDENTITY_SOURCE).unwrap();
    let cnot = compile_source(CNOT_PP_SOURCE).unwrap();
    let distill = compile_source(DISTILLATION_SOURCE).unwrap();
    let qubits = tqc_core::circuit::parse_circuit(DISTILLATION_SOURCE).unwrap().num_qubits();
    let v = [volume(&id), volume(&cnot), volume(&distill)];
    let (fast, t) = within(Duration::from_secs(1), start);
    check(v == [6, 126, 384] && qubits == 16 && fast, format!("volumes {v:?}, distillation qubits {qubits}, {t}"))
}

fn bundled_compaction() -> Outcome {
    let start = Instant::now();
    let g = compile_source(CNOT_PP_SOURCE).unwrap();
    let plan = read_plan(CNOT_COMPACT_PLAN.as_bytes()).unwrap();
    let r = match run_plan(&g, &plan) {
        Ok(r) => r,
        Err(e) => return check(false, e.to_string()),
    };
    let same = compute_signature(&g).unwrap() == compute_signature(&r).unwrap();
    let (v0, v1) = (volume(&g), volume(&r));
    let (t0, t1) = (temporal_extent(&g), temporal_extent(&r));
    // exact rationals: v0/v1 == 63/8 and t0/t1 == 3
    let ratios = v0 * 8 == 63 * v1 && t0 == 3 * t1;
    let (fast, t) = within(Duration::from_secs(1), start);
    check(
        v1 == 16 && t1 == 2 && ratios && same && fast,
        format!("volume {v0} -> {v1}, extent {t0} -> {t1}, signature equal {same}, {t}"),
    )
}

fn automated_compaction() -> Outcome {
    let g = compile_source(CNOT_PP_SOURCE).unwrap();
    let sig = compute_signature(&g).unwrap();
    let start = Instant::now();
    let (greedy, _) = compact(&g, &CompactionConfig::default()).unwrap();
    let (gfast, gt) = within(Duration::from_secs(10), start);
    let start = Instant::now();
    let cfg = CompactionConfig { strategy: Strategy::Anneal, ..CompactionConfig::default() };
    let (anneal, _) = compact(&g, &cfg).unwrap();
    let (afast, at) = within(Duration::from_secs(60), start);
    let same = compute_signature(&greedy).unwrap() == sig && compute_signature(&anneal).unwrap() == sig;
    let (vg, va) = (volume(&greedy), volume(&anneal));
    check(
        vg <= 64 && va <= 32 && gfast && afast && same,
        format!("greedy {vg} ({gt}), anneal {va} ({at}), signatures preserved {same}"),
    )
}

fn semantics() -> Outcome {
    let report = verify_cnot_identity();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    for _ in 0..3 {
        let s = random_state(2, &mut rng);
        for (q, basis) in [(0, Basis::Z), (1, Basis::X)] {
            let p1 = s.probability(q, basis, 1).unwrap();
            let shots = 10_000;
            let ones = (0..shots).filter(|_| s.measure_qubit(q, basis, &mut rng).unwrap().0 == 1).count();
            worst = worst.max((ones as f64 / shots as f64 - p1).abs());
        }
    }
    let amp_sum: f64 = random_state(3, &mut rng).amplitudes().iter().map(Complex64::norm_sqr).sum();
    check(
        report.passed(1e-10) && report.inputs_checked == 24 && report.branches_checked == 96 && worst < 0.02,
        format!(
            "{} inputs, {} branches, max deviation {:.1e}, sampling error {worst:.4}, norm {amp_sum:.12}",
            report.inputs_checked, report.branches_checked, report.max_deviation
        ),
    )
}

fn random_loop(rng: &mut ChaCha8Rng, parity: tqc_core::circuit::Parity) -> ClosedLoop {
    use rand::Rng;
    use tqc_core::geometry::CellCoord;
    loop {
        let k = rng.gen_range(2..=4);
        let way: Vec<CellCoord> =
            (0..k).map(|_| CellCoord::new(rng.gen_range(0..5), rng.gen_range(0..5), rng.gen_range(0..5))).collect();
        let mut walk = vec![way[0]];
        for i in 0..k {
            let target = way[(i + 1) % k];
            let order = [[0, 1, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]][rng.gen_range(0..4)];
            for a in order {
                let mut cur = *walk.last().unwrap();
                while cur.axis(a) != target.axis(a) {
                    cur = cur.offset(a, (target.axis(a) - cur.axis(a)).signum());
                    walk.push(cur);
                }
            }
        }
        walk.pop();
        let mut seen = std::collections::HashSet::new();
        if walk.len() >= 4 && walk.iter().all(|c| seen.insert(*c)) {
            return ClosedLoop { label: parity.to_string(), parity, points: walk, end_labels: vec![] };
        }
    }
}

fn topology() -> Outcome {
    use tqc_core::circuit::Parity;
    use tqc_core::geometry::CellCoord;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut agree = true;
    let mut split_zero = true;
    for _ in 0..200 {
        let a = random_loop(&mut rng, Parity::Primal);
        let b = random_loop(&mut rng, Parity::Dual);
        let v: Vec<i64> = (0..3).map(|ax| linking_number_along(&a, &b, ax).unwrap()).collect();
        agree &= v[0] == v[1] && v[1] == v[2];
        let far = ClosedLoop { points: b.points.iter().map(|c| c.offset(0, 20)).collect(), ..b.clone() };
        split_zero &= linking_number(&a, &far) == Ok(0);
    }
    let pts = |v: &[[i64; 3]]| v.iter().map(|&p| CellCoord::from(p)).collect::<Vec<_>>();
    let ha = ClosedLoop {
        label: "a".into(),
        parity: Parity::Primal,
        points: pts(&[[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]]),
        end_labels: vec![],
    };
    let hb = ClosedLoop {
        label: "b".into(),
        parity: Parity::Dual,
        points: pts(&[[0, 0, -1], [0, 0, 0], [1, 0, 0], [1, 0, -1]]),
        end_labels: vec![],
    };
    let hopf = linking_number(&ha, &hb).map(i64::abs) == Ok(1);

    let braided = tqc_core::compiler::instantiate_template(
        tqc_core::compiler::TemplateKind::BraidedCnot,
        CellCoord::new(0, 0, 0),
        &["c", "t"],
    )
    .map(|t| t.fragments);
    let braided_ok = match braided {
        Ok(g) => compute_signature(&g).map(|s| s.linking.iter().flatten().all(|v| v.abs() == 1)).unwrap_or(false),
        Err(_) => false,
    };

    let mut walks_ok = true;
    for src in [IDENTITY_SOURCE, CNOT_PP_SOURCE, DISTILLATION_SOURCE] {
        let mut g: BraidGeometry = compile_source(src).unwrap();
        let sig = compute_signature(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1000);
        for _ in 0..1000 {
            let Some(m) = random_legal_move(&g, &mut rng, false) else { break };
            match apply_move(&g, &m) {
                Ok(next) => g = next,
                Err(_) => {
                    walks_ok = false;
                    break;
                }
            }
        }
        walks_ok &= compute_signature(&g).unwrap() == sig;
    }
    let (fast, t) = within(Duration::from_secs(30), start);
    check(
        agree && split_zero && hopf && braided_ok && walks_ok && fast,
        format!(
            "axes agree {agree}, split zero {split_zero}, hopf {hopf}, braided |L|=1 {braided_ok}, walks {walks_ok}, {t}"
        ),
    )
}

fn cli(args: &[&str]) -> (i32, Vec<u8>) {
    let argv: Vec<String> = std::iter::once("tqc").chain(args.iter().copied()).map(String::from).collect();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run_with(&argv, &mut out, &mut err);
    (code, out)
}

fn determinism() -> Outcome {
    let templates = Path::new(env!("CARGO_MANIFEST_DIR")).join("templates");
    let scenes = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenes");
    let mut runs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let p = |n: &str| dir.path().join(n).to_string_lossy().into_owned();
        let src = templates.join("cnot_pp.tqc").to_string_lossy().into_owned();
        let plan = templates.join("cnot_compact_plan.json").to_string_lossy().into_owned();
        let mut codes = vec![cli(&["compile", &src, "-o", &p("s.json")]).0];
        codes.push(cli(&["optimize", &p("s.json"), "-o", &p("g.json"), "--emit-plan", &p("gp.json")]).0);
        codes.push(
            cli(&["optimize", &p("s.json"), "-o", &p("a.json"), "--strategy", "anneal", "--seed", "4", "--max-iter", "50000", "--emit-plan", &p("ap.json")]).0,
        );
        codes.push(cli(&["optimize", &p("s.json"), "--plan", &plan, "-o", &p("c.json")]).0);
        let files: Vec<Vec<u8>> =
            ["s.json", "g.json", "gp.json", "a.json", "ap.json", "c.json"].iter().map(|n| std::fs::read(p(n)).unwrap()).collect();
        runs.push((codes, files));
    }
    let identical = runs[0] == runs[1] && runs[0].0.iter().all(|&c| c == 0);
    let mut round_trip = true;
    let mut count = 0;
    for entry in std::fs::read_dir(&scenes).unwrap() {
        let bytes = std::fs::read(entry.unwrap().path()).unwrap();
        let doc = tqc_core::scene::read_scene_document(&bytes).unwrap();
        round_trip &= tqc_core::scene::write_scene_document(&doc) == bytes;
        let g = read_scene(&bytes).unwrap();
        round_trip &= read_scene(&write_scene(&g)).unwrap() == g;
        count += 1;
    }
    check(identical && round_trip && count > 0, format!("repeat runs identical {identical}, {count} bundled scenes round-trip {round_trip}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 6] = [
        ("1 volume regression", volumes),
        ("2 bundled compaction plan", bundled_compaction),
        ("3 automated compaction", automated_compaction),
        ("4 semantics oracle", semantics),
        ("5 topology properties", topology),
        ("6 determinism and round-trip", determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let o = f();
        println!("{} criterion {name}: {}", if o.ok { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.ok);
    }
    if failed > 0 {
        eprintln!("{failed} criteria failed");
        std::process::exit(1);
    }
}

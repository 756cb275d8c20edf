//! Compaction by unit local isotopies.
//!
//! Moves act on chains: the strands of one trace joined through their caps.
//! A slide takes a straight run of chain vertices one cell sideways. At each
//! end of the run the neighbouring vertex is either reused (when it already
//! sits where the moved run begins) or kept as a connector. The rectangle
//! swept by the run must not meet any opposite-parity curve, and the cells
//! it lands on must be free of same-parity curves, closures included.

use std::collections::{HashMap, HashSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::Parity;
use crate::geometry::{BraidGeometry, CellCoord, EndKind};
use crate::topology::{closure_paths, compute_signature, Segment, TopologyError, TopologySignature};

pub const PLAN_FORMAT_VERSION: u32 = 1;

/// Bundled plan taking the canonical CNOT to volume 16.
pub const CNOT_COMPACT_PLAN: &str = include_str!("../templates/cnot_compact_plan.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "+x")]
    PlusX,
    #[serde(rename = "-x")]
    MinusX,
    #[serde(rename = "+y")]
    PlusY,
    #[serde(rename = "-y")]
    MinusY,
    #[serde(rename = "+t")]
    PlusT,
    #[serde(rename = "-t")]
    MinusT,
}

impl Direction {
    pub const ALL: [Direction; 6] =
        [Direction::PlusX, Direction::MinusX, Direction::PlusY, Direction::MinusY, Direction::PlusT, Direction::MinusT];

    pub fn axis(self) -> usize {
        self as usize / 2
    }

    pub fn sign(self) -> i64 {
        if self as usize % 2 == 0 {
            1
        } else {
            -1
        }
    }

    pub fn vector(self) -> CellCoord {
        CellCoord::new(0, 0, 0).offset(self.axis(), self.sign())
    }

    pub fn opposite(self) -> Direction {
        Direction::ALL[(self as usize) ^ 1]
    }

    pub fn between(from: CellCoord, to: CellCoord) -> Option<Direction> {
        let a = from.unit_axis(to)?;
        let s = to.axis(a) - from.axis(a);
        Some(Direction::ALL[2 * a + usize::from(s < 0)])
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = ["+x", "-x", "+y", "-y", "+t", "-t"][*self as usize];
        f.write_str(s)
    }
}

/// Chain indices run along strand `a` from its start, then back along `b`,
/// except when only the start is capped, where `b` comes first, reversed.
/// Traces without caps give one chain per strand, named by strand id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Move {
    SegmentSlide { trace: String, start: usize, len: usize, direction: Direction },
    CornerCancel { trace: String, index: usize },
    BoundaryTrim { trace: String, end: usize },
}

impl Move {
    pub fn trace(&self) -> &str {
        match self {
            Move::SegmentSlide { trace, .. } | Move::CornerCancel { trace, .. } | Move::BoundaryTrim { trace, .. } => {
                trace
            }
        }
    }
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Move::SegmentSlide { trace, start, len, direction } => {
                write!(f, "slide {trace}[{start}+{len}] {direction}")
            }
            Move::CornerCancel { trace, index } => write!(f, "corner-cancel {trace}[{index}]"),
            Move::BoundaryTrim { trace, end } => write!(f, "trim {trace} end {end}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("no trace `{0}`")]
    UnknownTrace(String),
    #[error("illegal move `{mv}`: {reason}")]
    Illegal { mv: Move, reason: String },
    #[error("move `{mv}` changed the signature\nbefore:\n{before}after:\n{after}")]
    SignatureMismatch { mv: Move, before: Box<TopologySignature>, after: Box<TopologySignature> },
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("plan step {step}: {source}")]
    PlanStep { step: usize, source: Box<OptimizeError> },
    #[error("plan step {step}: recorded volume {recorded}, replay gives {actual}")]
    PlanMismatch { step: usize, recorded: u64, actual: u64 },
    #[error("plan format version {0} is not supported")]
    Version(u32),
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Cycle,
    /// `a` then reversed `b`, joined by the end-1 cap.
    AThenB,
    /// Reversed `b` then `a`, joined by the end-0 cap.
    BThenA,
    Single,
}

#[derive(Debug, Clone)]
struct Chain {
    id: String,
    qubit: String,
    parity: Parity,
    layout: Layout,
    strands: (String, String),
    verts: Vec<CellCoord>,
    /// `caps[k]` names the cap on the edge from vertex `k` to `k + 1`.
    caps: Vec<Option<u8>>,
    ends: [Option<EndKind>; 2],
}

impl Chain {
    fn closed(&self) -> bool {
        self.layout == Layout::Cycle
    }

    fn strand_paths(&self) -> Vec<(String, Vec<CellCoord>)> {
        let split = |want: u8| self.caps.iter().position(|c| *c == Some(want)).expect("cap edge present");
        let rev = |v: &[CellCoord]| v.iter().rev().copied().collect::<Vec<_>>();
        let (a, b) = (&self.strands.0, &self.strands.1);
        match self.layout {
            Layout::Cycle | Layout::AThenB => {
                let k = split(1);
                vec![(a.clone(), self.verts[..=k].to_vec()), (b.clone(), rev(&self.verts[k + 1..]))]
            }
            Layout::BThenA => {
                let k = split(0);
                vec![(b.clone(), rev(&self.verts[..=k])), (a.clone(), self.verts[k + 1..].to_vec())]
            }
            Layout::Single => vec![(a.clone(), self.verts.clone())],
        }
    }
}

fn build_chains(g: &BraidGeometry) -> Vec<Chain> {
    let mut out = Vec::new();
    for (q, (ia, ib)) in &g.qubit_map {
        let (Some(a), Some(b)) = (g.strand(ia), g.strand(ib)) else { continue };
        let capped = |e: usize| matches!(a.ends[e], EndKind::Cap(_));
        let rev = |v: &[CellCoord]| v.iter().rev().copied().collect::<Vec<_>>();
        let base = |layout, verts: Vec<CellCoord>, ends| Chain {
            id: q.clone(),
            qubit: q.clone(),
            parity: a.parity,
            layout,
            strands: (ia.clone(), ib.clone()),
            caps: vec![None; verts.len()],
            verts,
            ends,
        };
        match (capped(0), capped(1)) {
            (true, true) => {
                let mut c = base(Layout::Cycle, [a.path.clone(), rev(&b.path)].concat(), [None, None]);
                c.caps[a.path.len() - 1] = Some(1);
                let n = c.verts.len();
                c.caps[n - 1] = Some(0);
                out.push(c);
            }
            (false, true) => {
                let ends = [Some(a.ends[0].clone()), Some(b.ends[0].clone())];
                let mut c = base(Layout::AThenB, [a.path.clone(), rev(&b.path)].concat(), ends);
                c.caps[a.path.len() - 1] = Some(1);
                out.push(c);
            }
            (true, false) => {
                let ends = [Some(b.ends[1].clone()), Some(a.ends[1].clone())];
                let mut c = base(Layout::BThenA, [rev(&b.path), a.path.clone()].concat(), ends);
                c.caps[b.path.len() - 1] = Some(0);
                out.push(c);
            }
            (false, false) => {
                for s in [a, b] {
                    let mut c = base(Layout::Single, s.path.clone(), [Some(s.ends[0].clone()), Some(s.ends[1].clone())]);
                    c.id = s.id.clone();
                    c.strands = (s.id.clone(), String::new());
                    out.push(c);
                }
            }
        }
    }
    out.sort_by(|x, y| x.id.cmp(&y.id));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Owner {
    Chain(usize),
    /// Closure of a trace; `column` is the xy of the strand end the leg leaves from.
    Closure { chain_qubit: usize, column: (i64, i64) },
}

/// Everything needed to judge moves on one geometry.
struct Context {
    chains: Vec<Chain>,
    index: HashMap<String, usize>,
    /// Segments by parity (index 0 primal, 1 dual), strands and closures.
    segments: [Vec<Segment>; 2],
    cells: HashMap<(Parity, CellCoord), Vec<Owner>>,
    qubits: Vec<String>,
}

fn pidx(p: Parity) -> usize {
    match p {
        Parity::Primal => 0,
        Parity::Dual => 1,
    }
}

fn seg_between(a: CellCoord, b: CellCoord, p: Parity) -> Segment {
    Segment { from: a.doubled(p), to: b.doubled(p) }
}

impl Context {
    fn new(g: &BraidGeometry) -> Context {
        let chains = build_chains(g);
        let index = chains.iter().enumerate().map(|(i, c)| (c.id.clone(), i)).collect();
        let mut qubits: Vec<String> = g.qubit_map.keys().cloned().collect();
        qubits.sort();
        let mut segments: [Vec<Segment>; 2] = [Vec::new(), Vec::new()];
        let mut cells: HashMap<(Parity, CellCoord), Vec<Owner>> = HashMap::new();
        for (i, c) in chains.iter().enumerate() {
            let n = c.verts.len();
            let edges = if c.closed() { n } else { n.saturating_sub(1) };
            for k in 0..edges {
                segments[pidx(c.parity)].push(seg_between(c.verts[k], c.verts[(k + 1) % n], c.parity));
            }
            for &v in &c.verts {
                cells.entry((c.parity, v)).or_default().push(Owner::Chain(i));
            }
        }
        for (q, parity, pts) in closure_paths(g) {
            let qi = qubits.binary_search(&q).expect("closure of a known trace");
            for w in pts.windows(2) {
                segments[pidx(parity)].push(seg_between(w[0], w[1], parity));
            }
            let legs = [pts[0], pts[pts.len() - 1]];
            for w in pts.windows(2) {
                let axis = (0..3).find(|&k| w[0].axis(k) != w[1].axis(k));
                let Some(axis) = axis else { continue };
                let (lo, hi) = (w[0].axis(axis).min(w[1].axis(axis)), w[0].axis(axis).max(w[1].axis(axis)));
                for v in lo..=hi {
                    let c = w[0].with_axis(axis, v);
                    if legs.contains(&c) {
                        continue;
                    }
                    let column = legs
                        .iter()
                        .find(|e| e.x == c.x && e.y == c.y)
                        .map(|e| (e.x, e.y))
                        .unwrap_or((i64::MIN, i64::MIN));
                    let owners = cells.entry((parity, c)).or_default();
                    let o = Owner::Closure { chain_qubit: qi, column };
                    if !owners.contains(&o) {
                        owners.push(o);
                    }
                }
            }
        }
        Context { chains, index, segments, cells, qubits }
    }
}

/// The result of a slide on one chain, before obstacle checks.
struct Slid {
    verts: Vec<CellCoord>,
    caps: Vec<Option<u8>>,
    landed: Vec<CellCoord>,
    swept: ([i64; 3], [i64; 3]),
    /// Set when the run holds a chain end that carries a boundary.
    moved_end: Option<CellCoord>,
}

fn slide_chain(
    c: &Chain,
    start: usize,
    len: usize,
    d: Direction,
    relax_injection: bool,
) -> Result<Slid, String> {
    let n = c.verts.len();
    if len == 0 || start >= n {
        return Err("run out of range".into());
    }
    if c.closed() {
        if len + 2 > n {
            return Err("run too long for the cycle".into());
        }
    } else if start + len > n {
        return Err("run out of range".into());
    }
    let at = |k: usize| (start + k) % n;
    let run: Vec<CellCoord> = (0..len).map(|k| c.verts[at(k)]).collect();
    if len >= 2 {
        let axis = run[0].unit_axis(run[1]).ok_or("broken chain")?;
        for w in run.windows(2) {
            if w[0].unit_axis(w[1]) != Some(axis) || (w[1].axis(axis) - w[0].axis(axis)) != (run[1].axis(axis) - run[0].axis(axis)) {
                return Err("run is not straight".into());
            }
        }
        if axis == d.axis() {
            return Err("direction is along the run".into());
        }
    }
    let has_p = c.closed() || start > 0;
    let has_s = c.closed() || start + len < n;
    if len == 1 && has_p && has_s {
        return Err("single interior vertex cannot slide".into());
    }
    let mut moved_end = None;
    for (present, end) in [(has_p, 0usize), (has_s, 1usize)] {
        if present {
            continue;
        }
        match &c.ends[end] {
            Some(EndKind::Injection) if !relax_injection => return Err("injection ends are anchored".into()),
            Some(EndKind::Boundary(_)) => {
                if d.axis() != 2 {
                    return Err("boundary ends move only along t".into());
                }
                moved_end = Some(if end == 0 { c.verts[0] } else { c.verts[n - 1] });
            }
            _ => {}
        }
    }
    if n == 1 {
        return Ok(Slid {
            verts: vec![c.verts[0].add(d.vector())],
            caps: vec![None],
            landed: vec![c.verts[0].add(d.vector())],
            swept: sweep_box(&run, d, c.parity),
            moved_end,
        });
    }

    let dv = d.vector();
    let mut moved: Vec<(CellCoord, Option<u8>)> = (0..len).map(|k| (run[k].add(dv), c.caps[at(k)])).collect();
    // vertices outside the run, in chain order after the run (cycle) or split (open)
    let (mut before, mut after): (Vec<(CellCoord, Option<u8>)>, Vec<(CellCoord, Option<u8>)>) = if c.closed() {
        (((start + len)..(start + n)).map(|i| (c.verts[i % n], c.caps[i % n])).collect(), Vec::new())
    } else {
        (
            (0..start).map(|i| (c.verts[i], c.caps[i])).collect(),
            ((start + len)..n).map(|i| (c.verts[i], c.caps[i])).collect(),
        )
    };
    let s_vertex = if c.closed() { before.first().map(|v| v.0) } else { after.first().map(|v| v.0) };
    let mut tail: Vec<(CellCoord, Option<u8>)> = Vec::new();
    let mut merged_end = false;
    if has_s {
        let last = len - 1;
        if s_vertex == Some(run[last].add(dv)) {
            if let Some(f) = moved[last].1 {
                if last == 0 || moved[last - 1].1.is_some() {
                    return Err("would remove a cap edge".into());
                }
                moved[last - 1].1 = Some(f);
            }
            merged_end = true;
        } else {
            tail.push((run[last], moved[last].1));
            moved[last].1 = None;
        }
    }
    let mut section: Vec<(CellCoord, Option<u8>)> = Vec::new();
    let mut merged_start = false;
    if has_p {
        let p = before.last_mut().expect("predecessor");
        if p.0 == run[0].add(dv) {
            if p.1.is_some() && moved[0].1.is_some() {
                return Err("would remove a cap edge".into());
            }
            p.1 = p.1.or(moved[0].1);
            merged_start = true;
        } else {
            section.push((run[0], None));
        }
    }
    let lo = usize::from(merged_start);
    let hi = len - usize::from(merged_end);
    if lo > hi {
        return Err("degenerate run".into());
    }
    let landed: Vec<CellCoord> = moved[lo..hi].iter().map(|v| v.0).collect();
    section.extend_from_slice(&moved[lo..hi]);
    section.extend(tail);

    let seq: Vec<(CellCoord, Option<u8>)> = if c.closed() {
        let mut s = std::mem::take(&mut before);
        s.extend(section);
        let k = s.iter().position(|v| v.1 == Some(0)).expect("start cap");
        let n = s.len();
        s.rotate_left((k + 1) % n);
        s
    } else {
        let mut s = std::mem::take(&mut before);
        s.extend(section);
        s.append(&mut after);
        s
    };
    let m = seq.len();
    for k in 0..m {
        if seq[k].1.is_some() && seq[k].0.unit_axis(seq[(k + 1) % m].0) == Some(2) {
            return Err("cap would run along t".into());
        }
    }
    let mut seen = HashSet::with_capacity(seq.len());
    if !seq.iter().all(|v| seen.insert(v.0)) {
        return Err("chain would cross itself".into());
    }
    Ok(Slid {
        verts: seq.iter().map(|v| v.0).collect(),
        caps: seq.iter().map(|v| v.1).collect(),
        landed,
        swept: sweep_box(&run, d, c.parity),
        moved_end,
    })
}

fn sweep_box(run: &[CellCoord], d: Direction, p: Parity) -> ([i64; 3], [i64; 3]) {
    let mut lo = [i64::MAX; 3];
    let mut hi = [i64::MIN; 3];
    for v in run.iter().flat_map(|&v| [v, v.add(d.vector())]) {
        let q = v.doubled(p);
        for a in 0..3 {
            lo[a] = lo[a].min(q[a]);
            hi[a] = hi[a].max(q[a]);
        }
    }
    (lo, hi)
}

fn box_hits(s: &Segment, lo: [i64; 3], hi: [i64; 3]) -> bool {
    (0..3).all(|a| s.lo(a) <= hi[a] && lo[a] <= s.hi(a))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Slide {
    chain: usize,
    start: usize,
    len: usize,
    d: Direction,
}

impl Context {
    fn check(&self, s: Slide, relax_injection: bool) -> Result<Slid, String> {
        let c = &self.chains[s.chain];
        let out = slide_chain(c, s.start, s.len, s.d, relax_injection)?;
        let (lo, hi) = out.swept;
        let other = pidx(c.parity.opposite());
        if self.segments[other].iter().any(|seg| box_hits(seg, lo, hi)) {
            return Err("swept region meets an opposite-parity defect".into());
        }
        let qi = self.qubits.binary_search(&c.qubit).ok();
        for v in &out.landed {
            for o in self.cells.get(&(c.parity, *v)).map(Vec::as_slice).unwrap_or(&[]) {
                match *o {
                    Owner::Chain(i) if i == s.chain => {}
                    Owner::Chain(_) => return Err(format!("cell {v} is occupied")),
                    Owner::Closure { chain_qubit, column } => {
                        let own_leg = Some(chain_qubit) == qi
                            && out.moved_end.is_some_and(|e| (e.x, e.y) == column && (v.x, v.y) == column);
                        if !own_leg {
                            return Err(format!("cell {v} lies on a closure"));
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    fn to_move(&self, s: Slide) -> Move {
        let c = &self.chains[s.chain];
        let n = c.verts.len();
        let trace = c.id.clone();
        if s.len == 1 && !c.closed() && n > 1 {
            let (end, nb) = if s.start == 0 { (0, c.verts[1]) } else { (1, c.verts[n - 2]) };
            if s.start == 0 || s.start == n - 1 {
                let v = c.verts[s.start];
                if v.add(s.d.vector()) == nb {
                    return Move::BoundaryTrim { trace, end };
                }
            }
        }
        if s.len == 2 {
            let has_p = c.closed() || s.start > 0;
            let has_s = c.closed() || s.start + 2 < n;
            if has_p && has_s {
                let p = c.verts[(s.start + n - 1) % n];
                let q = c.verts[(s.start + 2) % n];
                let dv = s.d.vector();
                if p == c.verts[s.start].add(dv) && q == c.verts[(s.start + 1) % n].add(dv) {
                    return Move::CornerCancel { trace, index: s.start };
                }
            }
        }
        Move::SegmentSlide { trace, start: s.start, len: s.len, direction: s.d }
    }

    fn resolve(&self, m: &Move) -> Result<Slide, OptimizeError> {
        let chain = *self.index.get(m.trace()).ok_or_else(|| OptimizeError::UnknownTrace(m.trace().to_string()))?;
        let c = &self.chains[chain];
        let n = c.verts.len();
        let illegal = |reason: &str| OptimizeError::Illegal { mv: m.clone(), reason: reason.to_string() };
        Ok(match m {
            Move::SegmentSlide { start, len, direction, .. } => Slide { chain, start: *start, len: *len, d: *direction },
            Move::CornerCancel { index, .. } => {
                if *index >= n || n < 4 {
                    return Err(illegal("index out of range"));
                }
                let p = c.verts[(index + n - 1) % n];
                let d = Direction::between(c.verts[*index], p).ok_or_else(|| illegal("not a corner"))?;
                Slide { chain, start: *index, len: 2, d }
            }
            Move::BoundaryTrim { end, .. } => {
                if c.closed() || n < 2 || *end > 1 {
                    return Err(illegal("no open end to trim"));
                }
                let (v, nb, start) = if *end == 0 { (c.verts[0], c.verts[1], 0) } else { (c.verts[n - 1], c.verts[n - 2], n - 1) };
                let d = Direction::between(v, nb).ok_or_else(|| illegal("broken chain"))?;
                Slide { chain, start, len: 1, d }
            }
        })
    }

    fn candidates(&self) -> Vec<Slide> {
        let mut out = Vec::new();
        for (ci, c) in self.chains.iter().enumerate() {
            let n = c.verts.len();
            for start in 0..n {
                let max_len = if c.closed() { n.saturating_sub(2) } else { n - start };
                let mut len = 1;
                while len <= max_len {
                    if len >= 2 {
                        let a = c.verts[(start + len - 2) % n];
                        let b = c.verts[(start + len - 1) % n];
                        let axis0 = c.verts[start].unit_axis(c.verts[(start + 1) % n]);
                        let s0 = c.verts[(start + 1) % n].sub(c.verts[start]);
                        if a.unit_axis(b) != axis0 || b.sub(a) != s0 {
                            break;
                        }
                    }
                    for d in Direction::ALL {
                        out.push(Slide { chain: ci, start, len, d });
                    }
                    len += 1;
                }
            }
        }
        out
    }

    fn apply(&self, g: &BraidGeometry, s: Slide, slid: Slid) -> BraidGeometry {
        let mut c = self.chains[s.chain].clone();
        c.verts = slid.verts;
        c.caps = slid.caps;
        let mut out = g.clone();
        let idx = out.strand_index().into_iter().map(|(k, v)| (k.to_string(), v)).collect::<HashMap<_, _>>();
        for (id, path) in c.strand_paths() {
            out.strands[idx[&id]].path = path;
        }
        out
    }
}

/// Every legal move on `g`, sorted by trace id then run position.
pub fn enumerate_moves(g: &BraidGeometry) -> Vec<Move> {
    enumerate_moves_with(g, false)
}

pub fn enumerate_moves_with(g: &BraidGeometry, relax_injection: bool) -> Vec<Move> {
    let ctx = Context::new(g);
    let mut out: Vec<Move> = ctx
        .candidates()
        .into_iter()
        .filter(|s| ctx.check(*s, relax_injection).is_ok())
        .map(|s| ctx.to_move(s))
        .collect();
    out.sort();
    out.dedup();
    out
}

/// Legal moves paired with the potential each would reach, in move order.
pub fn evaluate_moves(g: &BraidGeometry, relax_injection: bool) -> Vec<(Move, Potential)> {
    let ctx = Context::new(g);
    let mut out: Vec<(Move, Potential)> =
        scored_moves(&ctx, relax_injection).into_iter().map(|(p, s, _)| (ctx.to_move(s), p)).collect();
    out.sort();
    out.dedup();
    out
}

/// Cells newly occupied by `m`.
pub fn swept_region(g: &BraidGeometry, m: &Move) -> Result<Vec<CellCoord>, OptimizeError> {
    let ctx = Context::new(g);
    let s = ctx.resolve(m)?;
    let slid = slide_chain(&ctx.chains[s.chain], s.start, s.len, s.d, true)
        .map_err(|reason| OptimizeError::Illegal { mv: m.clone(), reason })?;
    Ok(slid.landed)
}

fn apply_unchecked(g: &BraidGeometry, m: &Move, relax_injection: bool) -> Result<BraidGeometry, OptimizeError> {
    let ctx = Context::new(g);
    let s = ctx.resolve(m)?;
    let slid = ctx.check(s, relax_injection).map_err(|reason| OptimizeError::Illegal { mv: m.clone(), reason })?;
    Ok(ctx.apply(g, s, slid))
}

/// Apply a legal move and confirm the signature did not change.
pub fn apply_move(g: &BraidGeometry, m: &Move) -> Result<BraidGeometry, OptimizeError> {
    apply_move_with(g, m, false)
}

pub fn apply_move_with(g: &BraidGeometry, m: &Move, relax_injection: bool) -> Result<BraidGeometry, OptimizeError> {
    let before = compute_signature(g)?;
    let out = apply_unchecked(g, m, relax_injection)?;
    let after = compute_signature(&out)?;
    if before != after {
        return Err(OptimizeError::SignatureMismatch { mv: m.clone(), before: Box::new(before), after: Box::new(after) });
    }
    Ok(out)
}

/// Lexicographic objective: volume, temporal extent, cells on the box faces,
/// total path length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Potential {
    pub volume: u64,
    pub temporal_extent: u64,
    pub face_cells: u64,
    pub length: u64,
}

fn potential_of<'a>(cells: impl Iterator<Item = &'a CellCoord> + Clone) -> Potential {
    let mut lo = [i64::MAX; 3];
    let mut hi = [i64::MIN; 3];
    let mut length = 0u64;
    for c in cells.clone() {
        length += 1;
        for a in 0..3 {
            lo[a] = lo[a].min(c.axis(a));
            hi[a] = hi[a].max(c.axis(a));
        }
    }
    if length == 0 {
        return Potential { volume: 0, temporal_extent: 0, face_cells: 0, length: 0 };
    }
    let ext: Vec<u64> = (0..3).map(|a| (hi[a] - lo[a] + 1) as u64).collect();
    let mut face_cells = 0;
    for c in cells {
        for a in 0..3 {
            face_cells += u64::from(c.axis(a) == lo[a]) + u64::from(c.axis(a) == hi[a]);
        }
    }
    Potential { volume: ext.iter().product(), temporal_extent: ext[2], face_cells, length }
}

pub fn potential(g: &BraidGeometry) -> Potential {
    potential_of(g.strands.iter().flat_map(|s| s.path.iter()))
}

impl Context {
    fn potential_after(&self, chain: usize, verts: &[CellCoord]) -> Potential {
        let others = self.chains.iter().enumerate().filter(|(i, _)| *i != chain).flat_map(|(_, c)| c.verts.iter());
        potential_of(others.chain(verts.iter()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Greedy,
    Anneal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactionConfig {
    pub strategy: Strategy,
    pub seed: u64,
    pub max_iterations: usize,
    pub initial_temperature: f64,
    pub decay: f64,
    pub volume_weight: f64,
    pub temporal_weight: f64,
    pub face_weight: f64,
    pub length_weight: f64,
    pub relax_injection: bool,
}

impl Default for CompactionConfig {
    fn default() -> Self {
        CompactionConfig {
            strategy: Strategy::Greedy,
            seed: 0,
            max_iterations: 400_000,
            initial_temperature: 1.0,
            decay: 0.999_988_5,
            volume_weight: 1.0,
            temporal_weight: 1.0,
            face_weight: 0.5,
            length_weight: 0.05,
            relax_injection: false,
        }
    }
}

impl CompactionConfig {
    pub fn validate(&self) -> Result<(), OptimizeError> {
        if self.max_iterations == 0 {
            return Err(OptimizeError::Config("max_iterations must be positive".into()));
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(OptimizeError::Config("decay must lie in (0, 1)".into()));
        }
        if self.initial_temperature.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(OptimizeError::Config("initial temperature must be positive".into()));
        }
        Ok(())
    }

    fn energy(&self, p: &Potential) -> f64 {
        self.volume_weight * p.volume as f64
            + self.temporal_weight * p.temporal_extent as f64
            + self.face_weight * p.face_cells as f64
            + self.length_weight * p.length as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanStep {
    #[serde(rename = "move")]
    pub mv: Move,
    pub volume_before: u64,
    pub volume_after: u64,
    pub temporal_extent_after: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MovePlan {
    pub format_version: u32,
    #[serde(default)]
    pub relax_injection: bool,
    pub steps: Vec<PlanStep>,
}

impl Default for MovePlan {
    fn default() -> Self {
        MovePlan { format_version: PLAN_FORMAT_VERSION, relax_injection: false, steps: Vec::new() }
    }
}

impl MovePlan {
    pub fn volumes(&self) -> Vec<u64> {
        self.steps.iter().map(|s| s.volume_after).collect()
    }
}

fn record(plan: &mut MovePlan, mv: Move, before: &Potential, after: &Potential) {
    plan.steps.push(PlanStep {
        mv,
        volume_before: before.volume,
        volume_after: after.volume,
        temporal_extent_after: after.temporal_extent,
    });
}

pub fn compact(g: &BraidGeometry, cfg: &CompactionConfig) -> Result<(BraidGeometry, MovePlan), OptimizeError> {
    cfg.validate()?;
    let mut plan = MovePlan { relax_injection: cfg.relax_injection, ..MovePlan::default() };
    let signature = compute_signature(g)?;
    let result = match cfg.strategy {
        Strategy::Greedy => greedy(g, cfg, &mut plan),
        Strategy::Anneal => anneal(g, cfg, &mut plan),
    }?;
    let after = compute_signature(&result)?;
    if after != signature {
        return Err(OptimizeError::SignatureMismatch {
            mv: plan.steps.last().map(|s| s.mv.clone()).unwrap_or(Move::BoundaryTrim { trace: String::new(), end: 0 }),
            before: Box::new(signature),
            after: Box::new(after),
        });
    }
    Ok((result, plan))
}

/// All legal slides on `ctx` with the potential each would reach.
fn scored_moves(ctx: &Context, relax: bool) -> Vec<(Potential, Slide, Slid)> {
    ctx.candidates()
        .into_iter()
        .filter_map(|s| {
            let slid = ctx.check(s, relax).ok()?;
            Some((ctx.potential_after(s.chain, &slid.verts), s, slid))
        })
        .collect()
}

fn greedy(g: &BraidGeometry, cfg: &CompactionConfig, plan: &mut MovePlan) -> Result<BraidGeometry, OptimizeError> {
    let mut cur = g.clone();
    let mut cur_p = potential(&cur);
    for _ in 0..cfg.max_iterations {
        let ctx = Context::new(&cur);
        let mut best: Option<(Potential, Move, Slide, Slid)> = None;
        for (p, s, slid) in scored_moves(&ctx, cfg.relax_injection) {
            if p >= cur_p {
                continue;
            }
            let mv = ctx.to_move(s);
            let better = match &best {
                None => true,
                Some((bp, bm, ..)) => (p, &mv) < (*bp, bm),
            };
            if better {
                best = Some((p, mv, s, slid));
            }
        }
        let Some((p, mv, s, slid)) = best else { break };
        let next = ctx.apply(&cur, s, slid);
        record(plan, mv, &cur_p, &p);
        cur = next;
        cur_p = p;
    }
    Ok(cur)
}

fn anneal(g: &BraidGeometry, cfg: &CompactionConfig, plan: &mut MovePlan) -> Result<BraidGeometry, OptimizeError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut trail = MovePlan::default();
    let mut cur = greedy(g, cfg, &mut trail)?;
    let mut cur_p = potential(&cur);
    let mut best = (cur_p, cur.clone(), trail.steps.len());
    let mut temperature = cfg.initial_temperature;
    let mut ctx = Context::new(&cur);
    let mut cands = ctx.candidates();
    for _ in 0..cfg.max_iterations {
        if cands.is_empty() {
            break;
        }
        let s = cands[rng.gen_range(0..cands.len())];
        let draw: f64 = rng.gen();
        temperature *= cfg.decay;
        let Ok(slid) = ctx.check(s, cfg.relax_injection) else { continue };
        let p = ctx.potential_after(s.chain, &slid.verts);
        let delta = cfg.energy(&p) - cfg.energy(&cur_p);
        if delta > 0.0 && draw >= (-delta / temperature).exp() {
            continue;
        }
        let mv = ctx.to_move(s);
        cur = ctx.apply(&cur, s, slid);
        record(&mut trail, mv, &cur_p, &p);
        cur_p = p;
        ctx = Context::new(&cur);
        cands = ctx.candidates();
        if cur_p < best.0 {
            best = (cur_p, cur.clone(), trail.steps.len());
        }
    }
    trail.steps.truncate(best.2);
    let out = greedy(&best.1, cfg, &mut trail)?;
    plan.steps = trail.steps;
    Ok(out)
}

/// Replay a plan, checking each move and the recorded volumes.
pub fn run_plan(g: &BraidGeometry, p: &MovePlan) -> Result<BraidGeometry, OptimizeError> {
    if p.format_version != PLAN_FORMAT_VERSION {
        return Err(OptimizeError::Version(p.format_version));
    }
    let signature = compute_signature(g)?;
    let mut cur = g.clone();
    for (k, step) in p.steps.iter().enumerate() {
        let before = crate::geometry::volume(&cur);
        if before != step.volume_before {
            return Err(OptimizeError::PlanMismatch { step: k, recorded: step.volume_before, actual: before });
        }
        cur = apply_unchecked(&cur, &step.mv, p.relax_injection)
            .map_err(|e| OptimizeError::PlanStep { step: k, source: Box::new(e) })?;
        let after = crate::geometry::volume(&cur);
        if after != step.volume_after {
            return Err(OptimizeError::PlanMismatch { step: k, recorded: step.volume_after, actual: after });
        }
    }
    let after = compute_signature(&cur)?;
    if after != signature {
        return Err(OptimizeError::SignatureMismatch {
            mv: p.steps.last().map(|s| s.mv.clone()).expect("a plan that changes the signature has steps"),
            before: Box::new(signature),
            after: Box::new(after),
        });
    }
    Ok(cur)
}

/// A uniformly chosen legal move, or `None` when there is none.
pub fn random_legal_move<R: Rng + ?Sized>(g: &BraidGeometry, rng: &mut R, relax_injection: bool) -> Option<Move> {
    let ctx = Context::new(g);
    let cands = ctx.candidates();
    if cands.is_empty() {
        return None;
    }
    for _ in 0..64 {
        let s = cands[rng.gen_range(0..cands.len())];
        if ctx.check(s, relax_injection).is_ok() {
            return Some(ctx.to_move(s));
        }
    }
    let legal: Vec<Slide> = cands.into_iter().filter(|s| ctx.check(*s, relax_injection).is_ok()).collect();
    if legal.is_empty() {
        None
    } else {
        Some(ctx.to_move(legal[rng.gen_range(0..legal.len())]))
    }
}

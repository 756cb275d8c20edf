//! Lowering circuits to braid geometries.
//!
//! Each step `k` occupies a slab of layers starting at `T_k`. Most steps are
//! one layer tall; a step containing a primal-primal cnot is six. A qubit's
//! defect pair lies along x inside its lane and runs along t for its lifetime.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::{has_errors, parse_circuit, validate_circuit, Circuit, Diagnostic, GateOp, Parity};
use crate::geometry::{
    extents, validate_geometry, AnnotationSite, BoundaryKind, BraidGeometry, CellCoord, EndKind, OpAnnotation,
    Strand,
};
use crate::topology::{close_loops_partial, Segment};

pub const IDENTITY_SOURCE: &str = include_str!("../templates/identity.tqc");
pub const CNOT_PP_SOURCE: &str = include_str!("../templates/cnot_pp.tqc");
pub const DISTILLATION_SOURCE: &str = include_str!("../templates/distill_15to1.tqc");

/// Rows between an expanded cnot's dual ancilla and the lower of its operands.
pub const EXPANDED_CNOT_DUAL_STANDOFF: i64 = 4;
pub const EXPANDED_CNOT_LAYERS: i64 = 6;

#[derive(Debug, Error)]
pub enum CompileError {
    #[error("circuit has errors:\n{}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Diagnostic>),
    #[error("no lane assigned to qubit `{0}`")]
    MissingLane(String),
    #[error("layout collision: {0}")]
    LayoutCollision(String),
    #[error("step {step}: cannot lower `{op}`: {reason}")]
    Unexpandable { step: usize, op: String, reason: String },
    #[error("unknown template kind `{0}`")]
    UnknownKind(String),
    #[error("template {kind} expects {expected} operand(s), got {got}")]
    BadOperands { kind: TemplateKind, expected: String, got: usize },
    #[error("template source failed to parse: {0}")]
    Source(#[from] crate::circuit::ParseError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Lane {
    pub x: i64,
    pub y: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub lanes: BTreeMap<String, Lane>,
    pub pitch: i64,
}

/// x-columns a pair occupies on the shared grid.
fn footprint(parity: Parity, lane: Lane) -> (i64, i64) {
    match parity {
        Parity::Primal => (lane.x, lane.x + 1),
        Parity::Dual => (lane.x + 1, lane.x + 2),
    }
}

fn strand_x(parity: Parity, lane: Lane) -> (i64, i64) {
    footprint(parity, lane)
}

impl Layout {
    /// Lanes stacked along y in declaration order, `pitch` rows apart.
    pub fn round_robin(c: &Circuit, pitch: i64) -> Layout {
        let lanes =
            c.declarations.iter().enumerate().map(|(i, d)| (d.id.clone(), Lane { x: 0, y: i as i64 * pitch })).collect();
        Layout { lanes, pitch }
    }

    /// Lanes at x = 0 on the given rows, one per declaration.
    pub fn from_rows(c: &Circuit, rows: &[i64]) -> Layout {
        let lanes = c.declarations.iter().zip(rows).map(|(d, &y)| (d.id.clone(), Lane { x: 0, y })).collect();
        Layout { lanes, pitch: 1 }
    }

    pub fn check(&self, c: &Circuit) -> Result<(), CompileError> {
        let mut placed: Vec<(&str, Parity, Lane)> = Vec::new();
        for d in &c.declarations {
            let lane = *self.lanes.get(&d.id).ok_or_else(|| CompileError::MissingLane(d.id.clone()))?;
            let (lo, hi) = footprint(d.parity, lane);
            for (other, op, ol) in &placed {
                let (olo, ohi) = footprint(*op, *ol);
                if ol.y == lane.y && lo <= ohi && olo <= hi {
                    return Err(CompileError::LayoutCollision(format!(
                        "lanes of `{}` and `{other}` overlap in row {}",
                        d.id, lane.y
                    )));
                }
            }
            placed.push((&d.id, d.parity, lane));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Start {
    Input,
    Cap,
    Injection,
}

#[derive(Debug, Clone)]
struct Trace {
    name: String,
    parity: Parity,
    lane: Lane,
    a: Vec<CellCoord>,
    b: Vec<CellCoord>,
    start: Start,
    end: Option<EndKind>,
    last_braid: Option<i64>,
}

impl Trace {
    fn open(name: &str, parity: Parity, lane: Lane, t: i64, start: Start) -> Trace {
        let (xa, xb) = strand_x(parity, lane);
        Trace {
            name: name.to_string(),
            parity,
            lane,
            a: vec![CellCoord::new(xa, lane.y, t)],
            b: vec![CellCoord::new(xb, lane.y, t)],
            start,
            end: None,
            last_braid: None,
        }
    }

    fn extend_to(&mut self, t: i64) {
        for s in [&mut self.a, &mut self.b] {
            let last = *s.last().expect("non-empty");
            for tt in last.t + 1..=t {
                s.push(CellCoord::new(last.x, last.y, tt));
            }
        }
    }
}

struct Excursion {
    control: usize,
    targets: Vec<usize>,
    tb: i64,
    x: i64,
    rows: (i64, i64),
    step: usize,
    op: String,
}

struct Lowering {
    traces: Vec<Trace>,
    live: BTreeMap<String, usize>,
    annotations: Vec<(usize, AnnotationKind, usize, String)>,
    excursions: Vec<Excursion>,
    expansions: usize,
}

#[derive(Debug, Clone, Copy)]
enum AnnotationKind {
    Cap(usize),
    Layer(i64),
}

impl Lowering {
    fn open(&mut self, q: &str, parity: Parity, lane: Lane, t: i64, start: Start) -> usize {
        self.traces.push(Trace::open(q, parity, lane, t, start));
        let id = self.traces.len() - 1;
        self.live.insert(q.to_string(), id);
        id
    }

    fn trace(&self, q: &str) -> usize {
        self.live[q]
    }

    fn close(&mut self, id: usize, t: i64, end: EndKind) {
        let tr = &mut self.traces[id];
        tr.extend_to(t);
        tr.end = Some(end);
        let name = tr.name.clone();
        self.live.remove(&name);
    }

    fn annotate(&mut self, trace: usize, kind: AnnotationKind, step: usize, op: String) {
        self.annotations.push((trace, kind, step, op));
    }

    fn unexpandable(step: usize, op: &GateOp, reason: impl Into<String>) -> CompileError {
        CompileError::Unexpandable { step, op: op.to_string(), reason: reason.into() }
    }

    /// Loop the first strand of `control` around the second strand of every
    /// target in the plane `t = tb`.
    fn braid(&mut self, control: usize, targets: &[usize], tb: i64, step: usize, op: &GateOp) -> Result<(), CompileError> {
        let d = &self.traces[control];
        if d.parity != Parity::Dual {
            return Err(Self::unexpandable(step, op, "braid control must be dual"));
        }
        let start_t = d.a[0].t;
        if start_t > tb - 1 {
            return Err(Self::unexpandable(step, op, "dual control needs a layer before the braid"));
        }
        if d.last_braid == Some(tb - 1) {
            return Err(Self::unexpandable(step, op, "dual control braided in the previous layer"));
        }
        let (xd, yd) = (d.lane.x, d.lane.y);
        let mut up = false;
        let mut down = false;
        let mut y_far = yd;
        for &t in targets {
            let tr = &self.traces[t];
            if tr.lane.x != xd {
                return Err(Self::unexpandable(step, op, format!("target `{}` is not in the control's column", tr.name)));
            }
            if tr.lane.y > yd {
                up = true;
                y_far = y_far.max(tr.lane.y);
            } else {
                down = true;
            }
        }
        if up && down {
            return Err(Self::unexpandable(step, op, "targets lie on both sides of the control"));
        }
        if down {
            y_far = targets.iter().map(|&t| self.traces[t].lane.y).min().expect("targets") - 1;
        }
        let d = &mut self.traces[control];
        d.extend_to(tb - 1);
        let ax = d.a.last().expect("non-empty").x;
        let s = if up { 1 } else { -1 };
        d.a.push(CellCoord::new(ax - 1, yd, tb - 1));
        let mut y = yd;
        d.a.push(CellCoord::new(ax - 1, y, tb));
        while y != y_far {
            y += s;
            d.a.push(CellCoord::new(ax - 1, y, tb));
        }
        loop {
            d.a.push(CellCoord::new(ax, y, tb));
            if y == yd {
                break;
            }
            y -= s;
        }
        d.extend_to(tb);
        d.last_braid = Some(tb);
        for &t in targets {
            self.traces[t].extend_to(tb);
        }
        let rows = if up { (yd + 1, y_far) } else { (y_far + 1, yd) };
        self.excursions.push(Excursion {
            control,
            targets: targets.to_vec(),
            tb,
            x: xd + 1,
            rows,
            step,
            op: op.to_string(),
        });
        self.annotate(control, AnnotationKind::Layer(tb), step, op.to_string());
        Ok(())
    }

    fn expand_cnot(&mut self, c: &str, t: &str, t0: i64, step: usize, op: &GateOp) -> Result<(), CompileError> {
        let (ci, ti) = (self.trace(c), self.trace(t));
        let (lc, lt) = (self.traces[ci].lane, self.traces[ti].lane);
        if lc.x != lt.x {
            return Err(Self::unexpandable(step, op, "operands must share a column"));
        }
        let k = self.expansions;
        self.expansions += 1;
        let in_name = format!("{c}.in{k}");
        let dual_name = format!("{c}.dual{k}");

        self.traces[ci].name = in_name.clone();
        self.live.remove(c);
        self.live.insert(in_name.clone(), ci);
        self.traces[ci].extend_to(t0);
        self.traces[ti].extend_to(t0);

        let anc_lane = Lane { x: lc.x, y: lc.y.max(lt.y) + 1 };
        let ai = self.open(c, Parity::Primal, anc_lane, t0, Start::Cap);
        self.annotate(ai, AnnotationKind::Cap(0), step, format!("initz {c}"));
        let dual_lane = Lane { x: lc.x, y: lc.y.min(lt.y) - EXPANDED_CNOT_DUAL_STANDOFF };
        let di = self.open(&dual_name, Parity::Dual, dual_lane, t0, Start::Cap);
        self.annotate(di, AnnotationKind::Cap(0), step, format!("initx {dual_name}"));

        self.braid(di, &[ci, ti, ai], t0 + 2, step, op)?;

        self.close(di, t0 + 4, EndKind::Cap(String::new()));
        self.annotate(di, AnnotationKind::Cap(1), step, format!("measx {dual_name}"));
        self.close(ci, t0 + 4, EndKind::Cap(String::new()));
        self.annotate(ci, AnnotationKind::Cap(1), step, format!("measz {in_name}"));
        Ok(())
    }

    fn check_piercings(&self, g: &BraidGeometry, uid_of: &BTreeMap<String, usize>) -> Result<(), CompileError> {
        if self.excursions.is_empty() {
            return Ok(());
        }
        let (loops, excluded) =
            close_loops_partial(g).map_err(|e| CompileError::LayoutCollision(e.to_string()))?;
        let mut curves: Vec<(usize, Vec<Segment>)> = Vec::new();
        for l in loops.iter().filter(|l| l.parity == Parity::Primal) {
            curves.push((uid_of[&l.label], l.segments()));
        }
        for q in &excluded {
            let (ia, ib) = &g.qubit_map[q];
            let mut segs = Vec::new();
            for id in [ia, ib] {
                let s = g.strand(id).expect("validated");
                if s.parity != Parity::Primal {
                    continue;
                }
                segs.extend(s.path.windows(2).map(|w| Segment {
                    from: w[0].doubled(s.parity),
                    to: w[1].doubled(s.parity),
                }));
            }
            curves.push((uid_of[q], segs));
        }
        for e in &self.excursions {
            let (x2, tmid) = (2 * e.x, 2 * e.tb + 1);
            let (ylo, yhi) = (2 * e.rows.0 - 1, 2 * e.rows.1 + 1);
            for (uid, segs) in &curves {
                let hits = segs
                    .iter()
                    .filter(|s| {
                        s.axis() == 2
                            && s.from[0] == x2
                            && s.from[1] > ylo
                            && s.from[1] < yhi
                            && s.lo(2) < tmid
                            && s.hi(2) > tmid
                    })
                    .count();
                let expected = usize::from(e.targets.contains(uid));
                if hits != expected {
                    return Err(CompileError::LayoutCollision(format!(
                        "step {}: braid `{}` of `{}` passes {} time(s) around `{}`",
                        e.step, e.op, self.traces[e.control].name, hits, self.traces[*uid].name
                    )));
                }
            }
        }
        Ok(())
    }
}

fn step_height(c: &Circuit, step: &[GateOp]) -> i64 {
    let expanded = step.iter().any(|op| {
        matches!(op, GateOp::Cnot { control, target }
            if c.parity_of(control) == Some(Parity::Primal) && c.parity_of(target) == Some(Parity::Primal))
    });
    if expanded {
        EXPANDED_CNOT_LAYERS
    } else {
        1
    }
}

/// First layer of every step, plus the total layer count.
pub fn step_layers(c: &Circuit) -> (Vec<i64>, i64) {
    let mut starts = Vec::with_capacity(c.steps.len());
    let mut t = 0;
    for step in &c.steps {
        starts.push(t);
        t += step_height(c, step);
    }
    (starts, t)
}

pub fn lower_circuit(c: &Circuit, layout: &Layout) -> Result<BraidGeometry, CompileError> {
    let diags = validate_circuit(c);
    if has_errors(&diags) {
        return Err(CompileError::Invalid(diags));
    }
    layout.check(c)?;
    let (starts, total) = step_layers(c);
    let t_last = (total - 1).max(0);

    let mut lw = Lowering {
        traces: Vec::new(),
        live: BTreeMap::new(),
        annotations: Vec::new(),
        excursions: Vec::new(),
        expansions: 0,
    };
    let mut lanes: BTreeMap<&str, Lane> = layout.lanes.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    for d in &c.declarations {
        if c.is_input(&d.id) {
            lw.open(&d.id, d.parity, lanes[d.id.as_str()], 0, Start::Input);
        }
    }
    for (k, step) in c.steps.iter().enumerate() {
        let t0 = starts[k];
        for op in step {
            match op {
                GateOp::InitZ(q) | GateOp::InitX(q) | GateOp::InjectY(q) => {
                    let parity = c.parity_of(q).expect("validated");
                    let start = if matches!(op, GateOp::InjectY(_)) { Start::Injection } else { Start::Cap };
                    let id = lw.open(q, parity, lanes[q.as_str()], t0, start);
                    let kind = if start == Start::Cap { AnnotationKind::Cap(0) } else { AnnotationKind::Layer(t0) };
                    lw.annotate(id, kind, k, op.to_string());
                }
                GateOp::MeasZ(q) | GateOp::MeasX(q) => {
                    let id = lw.trace(q);
                    lw.close(id, t0, EndKind::Cap(String::new()));
                    lw.annotate(id, AnnotationKind::Cap(1), k, op.to_string());
                }
                GateOp::Identity(q) => {
                    let id = lw.trace(q);
                    lw.traces[id].extend_to(t0);
                    lw.annotate(id, AnnotationKind::Layer(t0), k, op.to_string());
                }
                GateOp::Cnot { control, target } if c.parity_of(control) == Some(Parity::Primal) => {
                    lw.expand_cnot(control, target, t0, k, op)?;
                    let id = lw.trace(control);
                    lanes.insert(control.as_str(), lw.traces[id].lane);
                }
                GateOp::Cnot { control, target } => {
                    let (ci, ti) = (lw.trace(control), lw.trace(target));
                    lw.braid(ci, &[ti], t0, k, op)?;
                }
                GateOp::MultiTargetCnot { control, targets } => {
                    let ci = lw.trace(control);
                    let ts: Vec<usize> = targets.iter().map(|t| lw.trace(t)).collect();
                    lw.braid(ci, &ts, t0, k, op)?;
                }
            }
        }
    }
    let open: Vec<usize> = lw.live.values().copied().collect();
    for id in open {
        lw.close(id, t_last, EndKind::Boundary(BoundaryKind::Output));
    }

    let mut g = BraidGeometry::default();
    let mut uid_of = BTreeMap::new();
    for (uid, tr) in lw.traces.iter().enumerate() {
        let (ia, ib) = (format!("{}.a", tr.name), format!("{}.b", tr.name));
        let start = |partner: &str| match tr.start {
            Start::Input => EndKind::Boundary(BoundaryKind::Input),
            Start::Cap => EndKind::Cap(partner.to_string()),
            Start::Injection => EndKind::Injection,
        };
        let end = |partner: &str| match tr.end.as_ref().expect("closed") {
            EndKind::Cap(_) => EndKind::Cap(partner.to_string()),
            k => k.clone(),
        };
        g.strands.push(Strand { id: ia.clone(), parity: tr.parity, path: tr.a.clone(), ends: [start(&ib), end(&ib)] });
        g.strands.push(Strand { id: ib.clone(), parity: tr.parity, path: tr.b.clone(), ends: [start(&ia), end(&ia)] });
        g.qubit_map.insert(tr.name.clone(), (ia, ib));
        uid_of.insert(tr.name.clone(), uid);
    }
    g.strands.sort_by(|a, b| a.id.cmp(&b.id));
    for (uid, kind, step, op) in &lw.annotations {
        let strand = format!("{}.a", lw.traces[*uid].name);
        let site = match *kind {
            AnnotationKind::Cap(end) => AnnotationSite::Cap { strand, end },
            AnnotationKind::Layer(t) => AnnotationSite::Layer { strand, t },
        };
        g.op_annotations.push(OpAnnotation { site, step: *step, op: op.clone() });
    }
    g.op_annotations.sort();

    if let Some(d) = validate_geometry(&g).first() {
        return Err(CompileError::LayoutCollision(d.to_string()));
    }
    lw.check_piercings(&g, &uid_of)?;
    Ok(g)
}

/// Lower with the default layout (declaration order, pitch 1).
pub fn compile(c: &Circuit) -> Result<BraidGeometry, CompileError> {
    lower_circuit(c, &Layout::round_robin(c, 1))
}

pub fn compile_source(text: &str) -> Result<BraidGeometry, CompileError> {
    compile(&parse_circuit(text)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TemplateKind {
    InitZ,
    InitX,
    MeasZ,
    MeasX,
    Identity,
    BraidedCnot,
    ExpandedCnot,
    MultiTargetCnot,
    InjectY,
    Distillation15to1,
}

impl TemplateKind {
    pub const ALL: [TemplateKind; 10] = [
        TemplateKind::InitZ,
        TemplateKind::InitX,
        TemplateKind::MeasZ,
        TemplateKind::MeasX,
        TemplateKind::Identity,
        TemplateKind::BraidedCnot,
        TemplateKind::ExpandedCnot,
        TemplateKind::MultiTargetCnot,
        TemplateKind::InjectY,
        TemplateKind::Distillation15to1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TemplateKind::InitZ => "init_z",
            TemplateKind::InitX => "init_x",
            TemplateKind::MeasZ => "meas_z",
            TemplateKind::MeasX => "meas_x",
            TemplateKind::Identity => "identity",
            TemplateKind::BraidedCnot => "braided_cnot",
            TemplateKind::ExpandedCnot => "expanded_cnot",
            TemplateKind::MultiTargetCnot => "multi_target_cnot",
            TemplateKind::InjectY => "inject_y",
            TemplateKind::Distillation15to1 => "distillation_15to1",
        }
    }

    /// Bounding box `[x, y, t]` of the template with `n` operands.
    pub fn footprint(self, n: usize) -> [u64; 3] {
        match self {
            TemplateKind::InitZ
            | TemplateKind::InitX
            | TemplateKind::MeasZ
            | TemplateKind::MeasX
            | TemplateKind::Identity
            | TemplateKind::InjectY => [2, 1, 1],
            TemplateKind::BraidedCnot => [3, 2, 3],
            TemplateKind::MultiTargetCnot => [3, n as u64, 3],
            TemplateKind::ExpandedCnot => [3, 7, 6],
            TemplateKind::Distillation15to1 => [3, 16, 8],
        }
    }

    fn arity(self) -> (usize, Option<usize>) {
        match self {
            TemplateKind::BraidedCnot | TemplateKind::ExpandedCnot => (2, Some(2)),
            TemplateKind::MultiTargetCnot => (2, None),
            TemplateKind::Distillation15to1 => (0, Some(0)),
            _ => (1, Some(1)),
        }
    }
}

impl fmt::Display for TemplateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TemplateKind {
    type Err = CompileError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| CompileError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplicePoint {
    pub strand: String,
    pub end: usize,
    pub at: CellCoord,
    pub kind: BoundaryKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub kind: TemplateKind,
    pub footprint: [u64; 3],
    pub fragments: BraidGeometry,
    pub splice_points: Vec<SplicePoint>,
}

fn template_source(kind: TemplateKind, ops: &[&str]) -> String {
    let decl = |q: &str, p: &str| format!("qubit {q} {p}\n");
    match kind {
        TemplateKind::InitZ | TemplateKind::InitX | TemplateKind::MeasZ | TemplateKind::MeasX
        | TemplateKind::Identity | TemplateKind::InjectY => {
            let kw = match kind {
                TemplateKind::InitZ => "initz",
                TemplateKind::InitX => "initx",
                TemplateKind::MeasZ => "measz",
                TemplateKind::MeasX => "measx",
                TemplateKind::Identity => "id",
                _ => "inject_y",
            };
            format!("{}\n{kw} {}\n", decl(ops[0], "primal"), ops[0])
        }
        TemplateKind::BraidedCnot | TemplateKind::MultiTargetCnot => {
            let (d, ts) = (ops[0], &ops[1..]);
            let mut s = decl(d, "dual");
            for t in ts {
                s += &decl(t, "primal");
            }
            let kw = if kind == TemplateKind::BraidedCnot { "cnot" } else { "mcnot" };
            s + &format!("\ninitx {d}\n\n{kw} {d} {}\n\nmeasx {d}\n", ts.join(" "))
        }
        TemplateKind::ExpandedCnot => {
            format!("{}{}\ncnot {} {}\n", decl(ops[0], "primal"), decl(ops[1], "primal"), ops[0], ops[1])
        }
        TemplateKind::Distillation15to1 => DISTILLATION_SOURCE.to_string(),
    }
}

/// Lower one template in isolation and move its bounding box corner to `anchor`.
pub fn instantiate_template(kind: TemplateKind, anchor: CellCoord, operands: &[&str]) -> Result<Template, CompileError> {
    let (min, max) = kind.arity();
    if operands.len() < min || max.is_some_and(|m| operands.len() != m) {
        let expected = match max {
            Some(m) => m.to_string(),
            None => format!("at least {min}"),
        };
        return Err(CompileError::BadOperands { kind, expected, got: operands.len() });
    }
    let g = compile_source(&template_source(kind, operands))?;
    let lo = crate::geometry::bounding_box(&g).map(|(lo, _)| lo).unwrap_or(anchor);
    let fragments = g.translate(anchor.sub(lo));
    let mut splice_points = Vec::new();
    for s in &fragments.strands {
        for end in 0..2 {
            if let EndKind::Boundary(kind) = s.ends[end] {
                splice_points.push(SplicePoint { strand: s.id.clone(), end, at: s.end_coord(end), kind });
            }
        }
    }
    Ok(Template { kind, footprint: extents(&fragments), fragments, splice_points })
}

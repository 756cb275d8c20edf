//! Loop closure and primal/dual linking numbers.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::Parity;
use crate::geometry::{bounding_box, AnnotationSite, BoundaryKind, BraidGeometry, CellCoord, EndKind, Strand};

/// How far outside the bounding box boundary traces are closed.
pub const CLOSURE_MARGIN: i64 = 2;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TopologyError {
    #[error("linking number needs loops of opposite parity (`{0}` and `{1}`)")]
    SameParity(String, String),
    #[error("projection along every axis is degenerate for `{0}` and `{1}`")]
    Degenerate(String, String),
    #[error("trace `{qubit}` cannot be closed: {reason}")]
    Unclosable { qubit: String, reason: String },
    #[error("strand `{0}` is not part of any logical trace")]
    OrphanStrand(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClosedLoop {
    pub label: String,
    pub parity: Parity,
    /// Corner points; consecutive points (and last to first) differ along one axis.
    pub points: Vec<CellCoord>,
    pub end_labels: Vec<String>,
}

/// Axis-aligned segment in doubled coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub from: [i64; 3],
    pub to: [i64; 3],
}

impl Segment {
    pub fn axis(&self) -> usize {
        (0..3).find(|&a| self.from[a] != self.to[a]).unwrap_or(0)
    }

    pub fn lo(&self, a: usize) -> i64 {
        self.from[a].min(self.to[a])
    }

    pub fn hi(&self, a: usize) -> i64 {
        self.from[a].max(self.to[a])
    }

    fn direction(&self) -> [i64; 3] {
        let mut d = [0; 3];
        let a = self.axis();
        d[a] = (self.to[a] - self.from[a]).signum();
        d
    }
}

impl ClosedLoop {
    pub fn segments(&self) -> Vec<Segment> {
        let n = self.points.len();
        (0..n)
            .map(|i| Segment {
                from: self.points[i].doubled(self.parity),
                to: self.points[(i + 1) % n].doubled(self.parity),
            })
            .filter(|s| s.from != s.to)
            .collect()
    }

    pub fn reversed(&self) -> ClosedLoop {
        let mut l = self.clone();
        l.points.reverse();
        l
    }
}

fn cap_op(g: &BraidGeometry, strands: [&str; 2], end: usize) -> Option<String> {
    g.op_annotations.iter().find_map(|a| match &a.site {
        AnnotationSite::Cap { strand, end: e } if *e == end && strands.contains(&strand.as_str()) => {
            a.op.split_whitespace().next().map(str::to_string)
        }
        _ => None,
    })
}

fn connector(a: &Strand, b: &Strand, end: usize, t_lo: i64, t_hi: i64) -> Result<Vec<CellCoord>, String> {
    match (&a.ends[end], &b.ends[end]) {
        (EndKind::Cap(pa), EndKind::Cap(pb)) if *pa == b.id && *pb == a.id => Ok(Vec::new()),
        (EndKind::Boundary(ka), EndKind::Boundary(kb)) if ka == kb => {
            let t = match ka {
                BoundaryKind::Input => t_lo - CLOSURE_MARGIN,
                BoundaryKind::Output => t_hi + CLOSURE_MARGIN,
            };
            let (p, q) = (a.end_coord(end), b.end_coord(end));
            Ok(vec![
                CellCoord::new(p.x, p.y, t),
                CellCoord::new(q.x, p.y, t),
                CellCoord::new(q.x, q.y, t),
            ])
        }
        (ka, kb) => Err(format!("end {end} kinds {} and {} cannot be joined", ka.label(), kb.label())),
    }
}

fn connector_label(g: &BraidGeometry, a: &Strand, b: &Strand, end: usize) -> String {
    match &a.ends[end] {
        EndKind::Cap(_) => cap_op(g, [&a.id, &b.id], end).unwrap_or_else(|| "cap".into()),
        k => k.label().to_string(),
    }
}

/// True when either strand of the trace has an Injection end.
pub fn has_injection(g: &BraidGeometry, qubit: &str) -> bool {
    let Some((a, b)) = g.qubit_map.get(qubit) else { return false };
    [a, b].iter().filter_map(|id| g.strand(id)).any(|s| s.ends.contains(&EndKind::Injection))
}

/// Close one trace; `Ok(None)` for traces with injection ends.
fn close_trace(
    g: &BraidGeometry,
    qubit: &str,
    t_lo: i64,
    t_hi: i64,
) -> Result<Option<ClosedLoop>, TopologyError> {
    let (ia, ib) = &g.qubit_map[qubit];
    let unclosable = |reason: String| TopologyError::Unclosable { qubit: qubit.to_string(), reason };
    let a = g.strand(ia).ok_or_else(|| unclosable(format!("missing strand `{ia}`")))?;
    let b = g.strand(ib).ok_or_else(|| unclosable(format!("missing strand `{ib}`")))?;
    if a.ends.contains(&EndKind::Injection) || b.ends.contains(&EndKind::Injection) {
        return Ok(None);
    }
    if a.path.is_empty() || b.path.is_empty() {
        return Err(unclosable("empty strand".into()));
    }
    if a.parity != b.parity {
        return Err(unclosable("strands differ in parity".into()));
    }
    let mut points = a.path.clone();
    points.extend(connector(a, b, 1, t_lo, t_hi).map_err(unclosable)?);
    points.extend(b.path.iter().rev());
    let back = connector(b, a, 0, t_lo, t_hi).map_err(unclosable)?;
    points.extend(back);
    let mut end_labels = vec![connector_label(g, a, b, 0), connector_label(g, a, b, 1)];
    end_labels.sort();
    Ok(Some(ClosedLoop { label: qubit.to_string(), parity: a.parity, points, end_labels }))
}

fn check_orphans(g: &BraidGeometry) -> Result<(), TopologyError> {
    let mut used = std::collections::HashSet::new();
    for (a, b) in g.qubit_map.values() {
        used.insert(a.as_str());
        used.insert(b.as_str());
    }
    match g.strands.iter().find(|s| !used.contains(s.id.as_str())) {
        Some(s) => Err(TopologyError::OrphanStrand(s.id.clone())),
        None => Ok(()),
    }
}

fn t_range(g: &BraidGeometry) -> (i64, i64) {
    bounding_box(g).map(|(lo, hi)| (lo.t, hi.t)).unwrap_or((0, 0))
}

/// The boundary closures of every trace as corner points, endpoints included.
pub fn closure_paths(g: &BraidGeometry) -> Vec<(String, Parity, Vec<CellCoord>)> {
    let (t_lo, t_hi) = t_range(g);
    let mut out = Vec::new();
    for (q, (ia, ib)) in &g.qubit_map {
        let (Some(a), Some(b)) = (g.strand(ia), g.strand(ib)) else { continue };
        if a.path.is_empty() || b.path.is_empty() {
            continue;
        }
        for end in 0..2 {
            if !matches!(a.ends[end], EndKind::Boundary(_)) {
                continue;
            }
            // same routing as the closed loop: a to b at the far end, b to a at the start
            let (from, to) = if end == 1 { (a, b) } else { (b, a) };
            if let Ok(mid) = connector(from, to, end, t_lo, t_hi) {
                let mut pts = vec![from.end_coord(end)];
                pts.extend(mid);
                pts.push(to.end_coord(end));
                out.push((q.clone(), a.parity, pts));
            }
        }
    }
    out
}

/// Every trace as a closed loop, in qubit-id order. Traces with injection
/// ends have no closure and are an error here; see `close_loops_partial`.
pub fn close_loops(g: &BraidGeometry) -> Result<Vec<ClosedLoop>, TopologyError> {
    let (loops, excluded) = close_loops_partial(g)?;
    if let Some(q) = excluded.first() {
        return Err(TopologyError::Unclosable { qubit: q.clone(), reason: "injection end".into() });
    }
    Ok(loops)
}

/// Closed loops plus the ids of traces skipped because of injection ends.
pub fn close_loops_partial(g: &BraidGeometry) -> Result<(Vec<ClosedLoop>, Vec<String>), TopologyError> {
    check_orphans(g)?;
    let (t_lo, t_hi) = t_range(g);
    let mut loops = Vec::new();
    let mut excluded = Vec::new();
    for q in g.qubit_map.keys() {
        match close_trace(g, q, t_lo, t_hi)? {
            Some(l) => loops.push(l),
            None => excluded.push(q.clone()),
        }
    }
    Ok((loops, excluded))
}

fn cross(a: [i64; 3], b: [i64; 3]) -> [i64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Twice the linking number, from the projection along `axis`, or `None`
/// if the projection is not generic.
pub fn crossing_sum(a: &[Segment], b: &[Segment], axis: usize) -> Option<i64> {
    let mut total = 0;
    for s in a {
        let i = s.axis();
        if i == axis {
            continue;
        }
        for u in b {
            let j = u.axis();
            if j == axis || j == i {
                continue;
            }
            let (ui, sj) = (u.from[i], s.from[j]);
            let touches = ui == s.lo(i) || ui == s.hi(i) || sj == u.lo(j) || sj == u.hi(j);
            let inside = s.lo(i) <= ui && ui <= s.hi(i) && u.lo(j) <= sj && sj <= u.hi(j);
            if !inside {
                continue;
            }
            if touches || s.from[axis] == u.from[axis] {
                return None;
            }
            let (over, under) = if s.from[axis] > u.from[axis] { (s, u) } else { (u, s) };
            total += cross(over.direction(), under.direction())[axis];
        }
    }
    Some(total)
}

pub fn linking_number_along(a: &ClosedLoop, b: &ClosedLoop, axis: usize) -> Result<i64, TopologyError> {
    if a.parity == b.parity {
        return Err(TopologyError::SameParity(a.label.clone(), b.label.clone()));
    }
    let degenerate = || TopologyError::Degenerate(a.label.clone(), b.label.clone());
    let sum = crossing_sum(&a.segments(), &b.segments(), axis).ok_or_else(degenerate)?;
    if sum % 2 != 0 {
        return Err(degenerate());
    }
    Ok(sum / 2)
}

/// Linking number from the first generic projection, trying t, then x, then y.
pub fn linking_number(a: &ClosedLoop, b: &ClosedLoop) -> Result<i64, TopologyError> {
    let mut last = None;
    for axis in [2, 0, 1] {
        match linking_number_along(a, b, axis) {
            Ok(v) => return Ok(v),
            Err(e @ TopologyError::SameParity(..)) => return Err(e),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("three attempts"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologySignature {
    pub primal: Vec<String>,
    pub dual: Vec<String>,
    /// `linking[i][j]` links primal loop `i` with dual loop `j`.
    pub linking: Vec<Vec<i64>>,
    pub labels: BTreeMap<String, Vec<String>>,
    /// Traces left out of the matrix because they carry injection ends.
    pub excluded: Vec<String>,
}

impl TopologySignature {
    pub fn get(&self, primal: &str, dual: &str) -> Option<i64> {
        let i = self.primal.iter().position(|p| p == primal)?;
        let j = self.dual.iter().position(|d| d == dual)?;
        Some(self.linking[i][j])
    }

    /// Dual-major TSV: header row of primal labels, one row per dual loop.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("dual\\primal");
        for p in &self.primal {
            out.push('\t');
            out.push_str(p);
        }
        out.push('\n');
        for (j, d) in self.dual.iter().enumerate() {
            out.push_str(d);
            for row in &self.linking {
                out.push('\t');
                out.push_str(&row[j].to_string());
            }
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for TopologySignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_tsv())?;
        for (k, v) in &self.labels {
            writeln!(f, "# {k}: {}", v.join(","))?;
        }
        if !self.excluded.is_empty() {
            writeln!(f, "# excluded: {}", self.excluded.join(","))?;
        }
        Ok(())
    }
}

pub fn compute_signature(g: &BraidGeometry) -> Result<TopologySignature, TopologyError> {
    let (loops, excluded) = close_loops_partial(g)?;
    let (primal, dual): (Vec<&ClosedLoop>, Vec<&ClosedLoop>) =
        loops.iter().partition(|l| l.parity == Parity::Primal);
    let dual_segments: Vec<Vec<Segment>> = dual.iter().map(|d| d.segments()).collect();
    let mut linking = Vec::with_capacity(primal.len());
    for p in &primal {
        let ps = p.segments();
        let mut row = Vec::with_capacity(dual.len());
        for (d, ds) in dual.iter().zip(&dual_segments) {
            let v = match crossing_sum(&ps, ds, 2) {
                Some(s) if s % 2 == 0 => s / 2,
                _ => linking_number(p, d)?,
            };
            row.push(v);
        }
        linking.push(row);
    }
    Ok(TopologySignature {
        primal: primal.iter().map(|l| l.label.clone()).collect(),
        dual: dual.iter().map(|l| l.label.clone()).collect(),
        linking,
        labels: loops.iter().map(|l| (l.label.clone(), l.end_labels.clone())).collect(),
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(label: &str, parity: Parity, pts: &[[i64; 3]]) -> ClosedLoop {
        ClosedLoop {
            label: label.into(),
            parity,
            points: pts.iter().map(|&p| p.into()).collect(),
            end_labels: vec![],
        }
    }

    fn hopf() -> (ClosedLoop, ClosedLoop) {
        // primal unit square in the xy plane, counterclockwise seen from +t
        let a = square("a", Parity::Primal, &[[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]]);
        // dual square in the xt plane through the centre of `a`, rising there
        let b = square("b", Parity::Dual, &[[0, 0, -1], [0, 0, 0], [1, 0, 0], [1, 0, -1]]);
        (a, b)
    }

    #[test]
    fn hopf_link_is_plus_one_on_every_axis() {
        let (a, b) = hopf();
        for axis in 0..3 {
            assert_eq!(linking_number_along(&a, &b, axis), Ok(1), "axis {axis}");
            assert_eq!(linking_number_along(&b, &a, axis), Ok(1), "axis {axis}");
            assert_eq!(linking_number_along(&a.reversed(), &b, axis), Ok(-1));
        }
    }

    #[test]
    fn split_link_is_zero() {
        let a = square("a", Parity::Primal, &[[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]]);
        let b = square("b", Parity::Dual, &[[0, 0, 3], [1, 0, 3], [1, 1, 3], [0, 1, 3]]);
        assert_eq!(linking_number(&a, &b), Ok(0));
        let c = square("c", Parity::Dual, &[[5, 0, -1], [5, 0, 0], [6, 0, 0], [6, 0, -1]]);
        assert_eq!(linking_number(&a, &c), Ok(0));
    }

    #[test]
    fn same_parity_is_rejected() {
        let (a, _) = hopf();
        assert!(matches!(linking_number(&a, &a), Err(TopologyError::SameParity(..))));
    }

    #[test]
    fn empty_geometry_has_empty_signature() {
        let s = compute_signature(&BraidGeometry::default()).unwrap();
        assert!(s.primal.is_empty() && s.dual.is_empty() && s.linking.is_empty());
    }
}

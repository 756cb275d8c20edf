//! Defect strands on the logical-cell grid.
//!
//! Both parities share one integer grid. A dual coordinate `c` sits at
//! `c + 1/2` on every axis in physical space, so exact intersection tests use
//! doubled coordinates (`2c` primal, `2c + 1` dual). Two axis-aligned segments
//! of opposite parity can never meet: at least one axis is fixed on both and
//! the fixed values differ in parity.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::circuit::Parity;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[i64; 3]", into = "[i64; 3]")]
pub struct CellCoord {
    pub x: i64,
    pub y: i64,
    pub t: i64,
}

impl From<[i64; 3]> for CellCoord {
    fn from([x, y, t]: [i64; 3]) -> Self {
        CellCoord { x, y, t }
    }
}

impl From<CellCoord> for [i64; 3] {
    fn from(c: CellCoord) -> Self {
        [c.x, c.y, c.t]
    }
}

impl CellCoord {
    pub const fn new(x: i64, y: i64, t: i64) -> Self {
        CellCoord { x, y, t }
    }

    pub fn axis(self, a: usize) -> i64 {
        match a {
            0 => self.x,
            1 => self.y,
            2 => self.t,
            _ => panic!("axis {a}"),
        }
    }

    pub fn with_axis(mut self, a: usize, v: i64) -> Self {
        match a {
            0 => self.x = v,
            1 => self.y = v,
            2 => self.t = v,
            _ => panic!("axis {a}"),
        }
        self
    }

    pub fn offset(self, a: usize, d: i64) -> Self {
        self.with_axis(a, self.axis(a) + d)
    }

    pub fn add(self, o: CellCoord) -> Self {
        CellCoord::new(self.x + o.x, self.y + o.y, self.t + o.t)
    }

    pub fn sub(self, o: CellCoord) -> Self {
        CellCoord::new(self.x - o.x, self.y - o.y, self.t - o.t)
    }

    /// Physical position in half-cell units.
    pub fn doubled(self, parity: Parity) -> [i64; 3] {
        let o = match parity {
            Parity::Primal => 0,
            Parity::Dual => 1,
        };
        [2 * self.x + o, 2 * self.y + o, 2 * self.t + o]
    }

    /// Axis along which `self` and `o` differ by exactly one, if that is the
    /// only difference.
    pub fn unit_axis(self, o: CellCoord) -> Option<usize> {
        let d = self.sub(o);
        match (d.x.abs(), d.y.abs(), d.t.abs()) {
            (1, 0, 0) => Some(0),
            (0, 1, 0) => Some(1),
            (0, 0, 1) => Some(2),
            _ => None,
        }
    }
}

impl fmt::Display for CellCoord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryKind {
    Input,
    Output,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EndKind {
    Boundary(BoundaryKind),
    /// Joined by a unit edge to the same end of the partner strand.
    Cap(String),
    Injection,
}

impl EndKind {
    pub fn label(&self) -> &'static str {
        match self {
            EndKind::Boundary(BoundaryKind::Input) => "input",
            EndKind::Boundary(BoundaryKind::Output) => "output",
            EndKind::Cap(_) => "cap",
            EndKind::Injection => "injection",
        }
    }
}

/// `ends[0]` belongs to `path[0]`, `ends[1]` to the last coordinate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Strand {
    pub id: String,
    pub parity: Parity,
    pub path: Vec<CellCoord>,
    pub ends: [EndKind; 2],
}

impl Strand {
    pub fn end_coord(&self, end: usize) -> CellCoord {
        if end == 0 {
            self.path[0]
        } else {
            *self.path.last().expect("non-empty strand")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationSite {
    Cap { strand: String, end: usize },
    Layer { strand: String, t: i64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OpAnnotation {
    pub site: AnnotationSite,
    pub step: usize,
    pub op: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BraidGeometry {
    pub strands: Vec<Strand>,
    /// Logical trace name to its `(a, b)` strand ids.
    pub qubit_map: BTreeMap<String, (String, String)>,
    pub op_annotations: Vec<OpAnnotation>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GeometryDiagnostic {
    DuplicateStrand(String),
    EmptyPath(String),
    NonUnitStep { strand: String, index: usize },
    SelfIntersection { strand: String, cell: CellCoord },
    Collision { parity: Parity, cell: CellCoord, first: String, second: String },
    UnknownStrand { qubit: String, strand: String },
    PairMismatch { qubit: String, message: String },
    BadCap { strand: String, end: usize, message: String },
}

impl fmt::Display for GeometryDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use GeometryDiagnostic::*;
        match self {
            DuplicateStrand(s) => write!(f, "duplicate strand id `{s}`"),
            EmptyPath(s) => write!(f, "strand `{s}` has an empty path"),
            NonUnitStep { strand, index } => {
                write!(f, "strand `{strand}`: step {index} is not a unit axis move")
            }
            SelfIntersection { strand, cell } => write!(f, "strand `{strand}` revisits {cell}"),
            Collision { parity, cell, first, second } => {
                write!(f, "collision: {parity} strands `{first}` and `{second}` both occupy {cell}")
            }
            UnknownStrand { qubit, strand } => write!(f, "qubit `{qubit}` refers to unknown strand `{strand}`"),
            PairMismatch { qubit, message } => write!(f, "qubit `{qubit}`: {message}"),
            BadCap { strand, end, message } => write!(f, "strand `{strand}` end {end}: {message}"),
        }
    }
}

impl BraidGeometry {
    pub fn strand(&self, id: &str) -> Option<&Strand> {
        self.strands.iter().find(|s| s.id == id)
    }

    pub fn strand_index(&self) -> HashMap<&str, usize> {
        self.strands.iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.strands.iter().all(|s| s.path.is_empty())
    }

    pub fn translate(&self, d: CellCoord) -> BraidGeometry {
        self.map_coords(|c, _| c.add(d))
    }

    /// Quarter turn about the origin taking axis `from` to axis `to` (and
    /// `to` to `-from`). Dual cells sit half a cell off, so their negated
    /// coordinate shifts by one.
    pub fn rotate90(&self, from: usize, to: usize) -> BraidGeometry {
        assert!(from != to && from < 3 && to < 3);
        self.map_coords(|c, p| {
            let flip = if p == Parity::Dual { -c.axis(to) - 1 } else { -c.axis(to) };
            c.with_axis(to, c.axis(from)).with_axis(from, flip)
        })
    }

    fn map_coords(&self, f: impl Fn(CellCoord, Parity) -> CellCoord) -> BraidGeometry {
        let mut g = self.clone();
        for s in &mut g.strands {
            for c in &mut s.path {
                *c = f(*c, s.parity);
            }
        }
        g
    }

    pub fn total_path_length(&self) -> usize {
        self.strands.iter().map(|s| s.path.len()).sum()
    }
}

pub fn validate_geometry(g: &BraidGeometry) -> Vec<GeometryDiagnostic> {
    use GeometryDiagnostic::*;
    let mut out = Vec::new();
    let mut seen_ids = HashSet::new();
    for s in &g.strands {
        if !seen_ids.insert(s.id.as_str()) {
            out.push(DuplicateStrand(s.id.clone()));
        }
    }
    let mut owner: HashMap<(Parity, CellCoord), &str> = HashMap::new();
    for s in &g.strands {
        if s.path.is_empty() {
            out.push(EmptyPath(s.id.clone()));
            continue;
        }
        for (i, w) in s.path.windows(2).enumerate() {
            if w[0].unit_axis(w[1]).is_none() {
                out.push(NonUnitStep { strand: s.id.clone(), index: i });
            }
        }
        let mut own = HashSet::new();
        for &c in &s.path {
            if !own.insert(c) {
                out.push(SelfIntersection { strand: s.id.clone(), cell: c });
                continue;
            }
            if let Some(prev) = owner.insert((s.parity, c), &s.id) {
                out.push(Collision { parity: s.parity, cell: c, first: prev.to_string(), second: s.id.clone() });
            }
        }
    }
    let index = g.strand_index();
    for s in &g.strands {
        if s.path.is_empty() {
            continue;
        }
        for end in 0..2 {
            let EndKind::Cap(partner) = &s.ends[end] else { continue };
            let bad = |message: &str| BadCap { strand: s.id.clone(), end, message: message.to_string() };
            let Some(&pi) = index.get(partner.as_str()) else {
                out.push(bad("cap partner does not exist"));
                continue;
            };
            let p = &g.strands[pi];
            if p.path.is_empty() {
                continue;
            }
            if p.ends[end] != EndKind::Cap(s.id.clone()) {
                out.push(bad("partner end is not capped back"));
            } else if p.parity != s.parity {
                out.push(bad("cap joins strands of different parity"));
            } else {
                let (a, b) = (s.end_coord(end), p.end_coord(end));
                if a.t != b.t || !matches!(a.unit_axis(b), Some(0 | 1)) {
                    out.push(bad("cap ends must be transverse neighbours at equal t"));
                }
            }
        }
    }
    for (q, (a, b)) in &g.qubit_map {
        let sa = index.get(a.as_str()).map(|&i| &g.strands[i]);
        let sb = index.get(b.as_str()).map(|&i| &g.strands[i]);
        for (id, s) in [(a, sa), (b, sb)] {
            if s.is_none() {
                out.push(UnknownStrand { qubit: q.clone(), strand: id.clone() });
            }
        }
        let (Some(sa), Some(sb)) = (sa, sb) else { continue };
        if a == b {
            out.push(PairMismatch { qubit: q.clone(), message: "pair uses one strand twice".into() });
        } else if sa.parity != sb.parity {
            out.push(PairMismatch { qubit: q.clone(), message: "pair strands differ in parity".into() });
        }
        for end in 0..2 {
            match (&sa.ends[end], &sb.ends[end]) {
                (EndKind::Cap(pa), EndKind::Cap(pb)) if pa == b && pb == a => {}
                (EndKind::Cap(_), _) | (_, EndKind::Cap(_)) => out.push(PairMismatch {
                    qubit: q.clone(),
                    message: format!("end {end} caps do not join the pair"),
                }),
                (ka, kb) if ka != kb => out.push(PairMismatch {
                    qubit: q.clone(),
                    message: format!("end {end} kinds differ ({} vs {})", ka.label(), kb.label()),
                }),
                _ => {}
            }
        }
    }
    out
}

/// Inclusive bounding box over every strand coordinate of both parities.
pub fn bounding_box(g: &BraidGeometry) -> Option<(CellCoord, CellCoord)> {
    let mut it = g.strands.iter().flat_map(|s| s.path.iter().copied());
    let first = it.next()?;
    Some(it.fold((first, first), |(lo, hi), c| {
        (
            CellCoord::new(lo.x.min(c.x), lo.y.min(c.y), lo.t.min(c.t)),
            CellCoord::new(hi.x.max(c.x), hi.y.max(c.y), hi.t.max(c.t)),
        )
    }))
}

pub fn extents(g: &BraidGeometry) -> [u64; 3] {
    match bounding_box(g) {
        None => [0; 3],
        Some((lo, hi)) => [(hi.x - lo.x + 1) as u64, (hi.y - lo.y + 1) as u64, (hi.t - lo.t + 1) as u64],
    }
}

pub fn volume(g: &BraidGeometry) -> u64 {
    extents(g).iter().product()
}

pub fn temporal_extent(g: &BraidGeometry) -> u64 {
    extents(g)[2]
}

pub fn occupied_cells(g: &BraidGeometry, parity: Parity) -> BTreeSet<CellCoord> {
    g.strands.iter().filter(|s| s.parity == parity).flat_map(|s| s.path.iter().copied()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn straight(id: &str, parity: Parity, from: CellCoord, axis: usize, len: i64) -> Strand {
        Strand {
            id: id.into(),
            parity,
            path: (0..len).map(|i| from.offset(axis, i)).collect(),
            ends: [EndKind::Boundary(BoundaryKind::Input), EndKind::Boundary(BoundaryKind::Output)],
        }
    }

    #[test]
    fn empty_geometry() {
        let g = BraidGeometry::default();
        assert!(validate_geometry(&g).is_empty());
        assert_eq!(volume(&g), 0);
        assert_eq!(temporal_extent(&g), 0);
        assert!(occupied_cells(&g, Parity::Primal).is_empty());
    }

    #[test]
    fn primal_collision_is_reported() {
        let g = BraidGeometry {
            strands: vec![
                straight("a", Parity::Primal, CellCoord::new(0, 0, 0), 2, 3),
                straight("b", Parity::Primal, CellCoord::new(-1, 0, 1), 0, 3),
            ],
            ..Default::default()
        };
        let d = validate_geometry(&g);
        assert_eq!(d.len(), 1);
        assert!(matches!(&d[0], GeometryDiagnostic::Collision { cell, .. } if *cell == CellCoord::new(0, 0, 1)));
    }

    #[test]
    fn opposite_parity_may_share_integer_cells() {
        let g = BraidGeometry {
            strands: vec![
                straight("a", Parity::Primal, CellCoord::new(0, 0, 0), 2, 3),
                straight("b", Parity::Dual, CellCoord::new(-1, 0, 1), 0, 3),
            ],
            ..Default::default()
        };
        assert!(validate_geometry(&g).is_empty());
        assert_eq!(volume(&g), 3 * 3);
    }

    #[test]
    fn straight_strand_cells_and_box() {
        let g = BraidGeometry {
            strands: vec![straight("a", Parity::Primal, CellCoord::new(4, -2, 7), 2, 4)],
            ..Default::default()
        };
        assert_eq!(occupied_cells(&g, Parity::Primal).len(), 4);
        assert_eq!(volume(&g), 4);
        assert_eq!(temporal_extent(&g), 4);
    }

    #[test]
    fn bad_paths_are_reported() {
        let mut s = straight("a", Parity::Primal, CellCoord::new(0, 0, 0), 2, 3);
        s.path.push(CellCoord::new(1, 1, 2));
        s.path.push(CellCoord::new(0, 0, 1));
        let g = BraidGeometry { strands: vec![s], ..Default::default() };
        let d = validate_geometry(&g);
        assert!(d.iter().any(|x| matches!(x, GeometryDiagnostic::NonUnitStep { index: 2, .. })));
        assert!(d.iter().any(|x| matches!(x, GeometryDiagnostic::SelfIntersection { .. })));
    }

    #[test]
    fn caps_must_pair_up() {
        let mut a = straight("a", Parity::Primal, CellCoord::new(0, 0, 0), 2, 2);
        let mut b = straight("b", Parity::Primal, CellCoord::new(1, 0, 0), 2, 2);
        a.ends[0] = EndKind::Cap("b".into());
        b.ends[0] = EndKind::Cap("a".into());
        let mut g = BraidGeometry { strands: vec![a, b], ..Default::default() };
        g.qubit_map.insert("q".into(), ("a".into(), "b".into()));
        assert!(validate_geometry(&g).is_empty());

        g.strands[1].path = vec![CellCoord::new(2, 0, 0), CellCoord::new(2, 0, 1)];
        assert!(matches!(validate_geometry(&g)[0], GeometryDiagnostic::BadCap { .. }));
    }

    #[test]
    fn translation_and_rotation_keep_volume() {
        let g = BraidGeometry {
            strands: vec![
                straight("a", Parity::Primal, CellCoord::new(0, 0, 0), 2, 3),
                straight("b", Parity::Dual, CellCoord::new(-1, 0, 1), 0, 5),
            ],
            ..Default::default()
        };
        assert_eq!(volume(&g.translate(CellCoord::new(9, -3, 2))), volume(&g));
        assert_eq!(volume(&g.rotate90(0, 2)), volume(&g));
        let r = g.rotate90(0, 1).rotate90(0, 1).rotate90(0, 1).rotate90(0, 1);
        assert_eq!(r, g);
    }
}

//! Wavefront OBJ export: one unit cube per occupied cell.

use std::fmt::Write;

use crate::circuit::Parity;
use crate::geometry::{occupied_cells, BraidGeometry};

const CORNERS: [[u8; 3]; 8] =
    [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0], [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]];

// outward winding, 1-based offsets into CORNERS
const FACES: [[usize; 4]; 6] =
    [[1, 4, 3, 2], [5, 6, 7, 8], [1, 2, 6, 5], [2, 3, 7, 6], [3, 4, 8, 7], [4, 1, 5, 8]];

pub fn export_obj(g: &BraidGeometry) -> String {
    let mut out = String::from("# tqc defect geometry\n# axes: x y t\n");
    let mut base = 0usize;
    for parity in [Parity::Primal, Parity::Dual] {
        let cells = occupied_cells(g, parity);
        if cells.is_empty() {
            continue;
        }
        let shift = if parity == Parity::Dual { 0.5 } else { 0.0 };
        writeln!(out, "g {parity}").unwrap();
        for c in &cells {
            for k in CORNERS {
                let p = [c.x, c.y, c.t];
                writeln!(
                    out,
                    "v {} {} {}",
                    p[0] as f64 + shift + f64::from(k[0]),
                    p[1] as f64 + shift + f64::from(k[1]),
                    p[2] as f64 + shift + f64::from(k[2])
                )
                .unwrap();
            }
            for f in FACES {
                writeln!(out, "f {} {} {} {}", base + f[0], base + f[1], base + f[2], base + f[3]).unwrap();
            }
            base += 8;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CellCoord, EndKind, Strand};

    fn count(text: &str, prefix: &str) -> usize {
        text.lines().filter(|l| l.starts_with(prefix)).count()
    }

    #[test]
    fn empty_is_header_only() {
        let text = export_obj(&BraidGeometry::default());
        assert!(text.lines().all(|l| l.starts_with('#')));
    }

    #[test]
    fn one_cell_is_one_cube() {
        let mut g = BraidGeometry::default();
        g.strands.push(Strand {
            id: "s".into(),
            parity: Parity::Dual,
            path: vec![CellCoord::new(2, 0, 1)],
            ends: [EndKind::Injection, EndKind::Injection],
        });
        let text = export_obj(&g);
        assert_eq!(count(&text, "v "), 8);
        assert_eq!(count(&text, "f "), 6);
        assert!(text.contains("g dual\nv 2.5 0.5 1.5\n"));
    }
}

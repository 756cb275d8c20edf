//! Physical resource estimates from logical volume.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{extents, BraidGeometry};

pub const DEFAULT_QUBITS_PER_UNIT_CELL: u64 = 18;
pub const DEFAULT_CYCLE_TIME: f64 = 1e-6;

/// Printed alongside every report.
pub const SHARING_NOTE: &str = "upper bound: qubits shared between neighbouring unit cells are counted once per cell";

#[derive(Debug, Error, PartialEq)]
pub enum ResourceError {
    #[error("code distance must be at least 1")]
    Distance,
    #[error("qubits per unit cell must be positive")]
    QubitsPerCell,
    #[error("cycle time must be positive and finite, got {0}")]
    CycleTime(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceParams {
    /// Unit cells along each edge of a logical cell.
    pub d: u64,
    pub qubits_per_unit_cell: u64,
    /// Seconds to consume one layer of unit cells.
    pub cycle_time: f64,
}

impl Default for ResourceParams {
    fn default() -> Self {
        ResourceParams { d: 1, qubits_per_unit_cell: DEFAULT_QUBITS_PER_UNIT_CELL, cycle_time: DEFAULT_CYCLE_TIME }
    }
}

impl ResourceParams {
    pub fn validate(&self) -> Result<(), ResourceError> {
        if self.d == 0 {
            return Err(ResourceError::Distance);
        }
        if self.qubits_per_unit_cell == 0 {
            return Err(ResourceError::QubitsPerCell);
        }
        if !(self.cycle_time.is_finite() && self.cycle_time > 0.0) {
            return Err(ResourceError::CycleTime(self.cycle_time));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceEstimate {
    pub volume: u64,
    pub temporal_extent: u64,
    pub unit_cells: u64,
    /// Qubit-cells consumed: unit cells times qubits per cell.
    pub total_physical_qubits: u64,
    pub wall_clock_seconds: f64,
    /// Qubits in one time slice of the bounding box.
    pub footprint_qubits: u64,
}

pub fn estimate(g: &BraidGeometry, p: &ResourceParams) -> Result<ResourceEstimate, ResourceError> {
    p.validate()?;
    let [ex, ey, et] = extents(g);
    let volume = ex * ey * et;
    let d = p.d;
    let unit_cells = volume * d * d * d;
    Ok(ResourceEstimate {
        volume,
        temporal_extent: et,
        unit_cells,
        total_physical_qubits: unit_cells * p.qubits_per_unit_cell,
        wall_clock_seconds: et as f64 * d as f64 * p.cycle_time,
        footprint_qubits: ex * ey * d * d * p.qubits_per_unit_cell,
    })
}

impl ResourceEstimate {
    pub fn to_tsv(&self) -> String {
        format!(
            "volume\t{}\ntemporal_extent\t{}\nunit_cells\t{}\nphysical_qubits\t{}\nfootprint_qubits\t{}\nwall_clock_seconds\t{:e}\nnote\t{}\n",
            self.volume,
            self.temporal_extent,
            self.unit_cells,
            self.total_physical_qubits,
            self.footprint_qubits,
            self.wall_clock_seconds,
            SHARING_NOTE
        )
    }
}

impl fmt::Display for ResourceEstimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_tsv())
    }
}

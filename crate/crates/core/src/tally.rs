//! Instruction-level resource counting.

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::program::{walk, ElementProgram, GateMarker, Instruction};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detections {
    pub pnd: u64,
    pub pnnd: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceTally {
    pub xpm: u64,
    /// Expected number of bright beams consumed by detection. A beam that
    /// is only measured inside the non-zero arm of an earlier detection
    /// counts with weight 1/2 per enclosing arm.
    #[serde(with = "crate::formulas::ratio_str")]
    pub qubus_consumed: Ratio<i128>,
    /// Single-photon beam splitters, PBSs and coherent-state beam splitters.
    pub interference: u64,
    pub ancilla_photons: u64,
    pub detections: Detections,
    pub cpaths: u64,
    pub merges: u64,
}

impl Default for ResourceTally {
    fn default() -> Self {
        Self {
            xpm: 0,
            qubus_consumed: Ratio::from_integer(0),
            interference: 0,
            ancilla_photons: 0,
            detections: Detections::default(),
            cpaths: 0,
            merges: 0,
        }
    }
}

pub fn tally(program: &ElementProgram) -> ResourceTally {
    let mut t = ResourceTally::default();
    walk(&program.instructions, 0, &mut |ins, depth| match ins {
        Instruction::Xpm(_) => t.xpm += 1,
        Instruction::Bs50 { .. } | Instruction::Pbs { .. } | Instruction::CoherentBs { .. } => t.interference += 1,
        Instruction::DetectPnd { bright, .. } => {
            t.detections.pnd += 1;
            if *bright {
                t.qubus_consumed += Ratio::new(1, 1i128 << depth);
            }
        }
        Instruction::DetectPnnd { .. } => t.detections.pnnd += 1,
        Instruction::Marker { gate: GateMarker::CPath } => t.cpaths += 1,
        Instruction::Marker { gate: GateMarker::Merge } => t.merges += 1,
        _ => {}
    });
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::DetectorModel;
    use crate::gates::{cnot_from_pair, default_alpha};
    use crate::program::Variant;

    #[test]
    fn cnot_costs_three_xpm_and_half_a_beam() {
        let p = cnot_from_pair(default_alpha(0.1), 0.1, Variant::Simplified, DetectorModel::default());
        let t = tally(&p);
        assert_eq!(t.xpm, 3);
        assert_eq!(t.qubus_consumed, Ratio::new(1, 2));
        assert_eq!(t.interference, 4);
        assert_eq!((t.cpaths, t.merges), (1, 1));
        assert_eq!(t.detections, Detections { pnd: 2, pnnd: 1 });
        assert_eq!(t.ancilla_photons, 0);
    }

    #[test]
    fn original_cnot_costs_five_xpm() {
        let p = cnot_from_pair(default_alpha(0.1), 0.1, Variant::Original, DetectorModel::default());
        assert_eq!(tally(&p).xpm, 5);
    }
}

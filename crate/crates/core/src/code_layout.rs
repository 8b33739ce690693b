//! Unrotated square-lattice surface code and its syndrome-extraction circuit.
//!
//! The lattice is a `(2d-1) x (2d-1)` grid. Sites with `row + col` even hold
//! data qubits, sites on odd rows and even columns hold Z-check ancillas and
//! sites on even rows and odd columns hold X-check ancillas. Z checks see the
//! top and bottom boundaries; the logical Z string runs along row 0 and the
//! logical X string runs down column 0.
//!
//! Qubits are numbered data first, then Z ancillas, then X ancillas.

use serde::Serialize;

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Coord {
    pub row: usize,
    pub col: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum StabilizerKind {
    X,
    Z,
}

/// Neighbour direction of a check, in lattice terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Direction {
    North,
    West,
    East,
    South,
}

impl Direction {
    fn offset(self) -> (isize, isize) {
        match self {
            Direction::North => (-1, 0),
            Direction::West => (0, -1),
            Direction::East => (0, 1),
            Direction::South => (1, 0),
        }
    }
}

/// Interaction order used by both check types. Identical orders for X and Z
/// checks keep every timestep free of data-qubit collisions, and hook errors
/// from X ancillas spread onto an east/south pair, which is never parallel to
/// the logical X string.
pub const SCHEDULE: [Direction; 4] = [
    Direction::North,
    Direction::West,
    Direction::East,
    Direction::South,
];

#[derive(Clone, Debug, Serialize)]
pub struct Stabilizer {
    pub kind: StabilizerKind,
    pub ancilla: usize,
    pub coord: Coord,
    /// Data qubits in the support, in schedule order.
    pub support: Vec<usize>,
    /// Data qubit touched in each of the four CNOT steps, if any.
    pub steps: [Option<usize>; 4],
}

#[derive(Clone, Debug, Serialize)]
pub struct SurfaceCodeLayout {
    pub distance: usize,
    pub data_qubits: Vec<Coord>,
    pub z_stabilizers: Vec<Stabilizer>,
    pub x_stabilizers: Vec<Stabilizer>,
    pub logical_x: Vec<usize>,
    pub logical_z: Vec<usize>,
    /// `cnot_schedule[step]` lists `(ancilla, data)` pairs acting in that step.
    pub cnot_schedule: Vec<Vec<(usize, usize)>>,
}

impl SurfaceCodeLayout {
    pub fn num_data(&self) -> usize {
        self.data_qubits.len()
    }

    pub fn num_qubits(&self) -> usize {
        self.data_qubits.len() + self.z_stabilizers.len() + self.x_stabilizers.len()
    }

    pub fn stabilizers(&self, kind: StabilizerKind) -> &[Stabilizer] {
        match kind {
            StabilizerKind::X => &self.x_stabilizers,
            StabilizerKind::Z => &self.z_stabilizers,
        }
    }

    pub fn data_index(&self, coord: Coord) -> Option<usize> {
        self.data_qubits.iter().position(|c| *c == coord)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn build_layout(d: usize) -> Result<SurfaceCodeLayout> {
    if d < 3 || d % 2 == 0 {
        return Err(invalid(format!("distance must be odd and >= 3, got {d}")));
    }
    let size = 2 * d - 1;
    let mut data_index = vec![vec![usize::MAX; size]; size];
    let mut data_qubits = Vec::with_capacity(d * d + (d - 1) * (d - 1));
    for row in 0..size {
        for col in 0..size {
            if (row + col) % 2 == 0 {
                data_index[row][col] = data_qubits.len();
                data_qubits.push(Coord { row, col });
            }
        }
    }

    let mut z_sites = Vec::new();
    let mut x_sites = Vec::new();
    for row in 0..size {
        for col in 0..size {
            if (row + col) % 2 == 1 {
                if row % 2 == 1 {
                    z_sites.push(Coord { row, col });
                } else {
                    x_sites.push(Coord { row, col });
                }
            }
        }
    }

    let n_data = data_qubits.len();
    let make = |kind: StabilizerKind, sites: &[Coord], first_ancilla: usize| -> Vec<Stabilizer> {
        sites
            .iter()
            .enumerate()
            .map(|(i, &coord)| {
                let mut steps = [None; 4];
                let mut support = Vec::with_capacity(4);
                for (k, dir) in SCHEDULE.iter().enumerate() {
                    let (dr, dc) = dir.offset();
                    let r = coord.row as isize + dr;
                    let c = coord.col as isize + dc;
                    if r >= 0 && c >= 0 && (r as usize) < size && (c as usize) < size {
                        let q = data_index[r as usize][c as usize];
                        steps[k] = Some(q);
                        support.push(q);
                    }
                }
                Stabilizer {
                    kind,
                    ancilla: first_ancilla + i,
                    coord,
                    support,
                    steps,
                }
            })
            .collect()
    };
    let z_stabilizers = make(StabilizerKind::Z, &z_sites, n_data);
    let x_stabilizers = make(StabilizerKind::X, &x_sites, n_data + z_sites.len());

    let logical_z = (0..size).step_by(2).map(|col| data_index[0][col]).collect();
    let logical_x = (0..size).step_by(2).map(|row| data_index[row][0]).collect();

    let mut cnot_schedule = vec![Vec::new(); 4];
    for stab in z_stabilizers.iter().chain(&x_stabilizers) {
        for (k, q) in stab.steps.iter().enumerate() {
            if let Some(q) = q {
                cnot_schedule[k].push((stab.ancilla, *q));
            }
        }
    }

    Ok(SurfaceCodeLayout {
        distance: d,
        data_qubits,
        z_stabilizers,
        x_stabilizers,
        logical_x,
        logical_z,
        cnot_schedule,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Op {
    PrepZ(usize),
    PrepX(usize),
    Idle(usize),
    Cnot { control: usize, target: usize },
    MeasZ(usize),
    MeasX(usize),
}

#[derive(Clone, Debug, Serialize)]
pub struct Timestep {
    pub round: usize,
    pub noisy: bool,
    pub ops: Vec<Op>,
}

/// Which check a measurement record belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MeasurementTag {
    pub kind: StabilizerKind,
    pub stabilizer: usize,
    pub round: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Circuit {
    pub num_qubits: usize,
    /// Number of noisy rounds; one extra noiseless round follows.
    pub rounds: usize,
    pub timesteps: Vec<Timestep>,
    pub measurements: Vec<MeasurementTag>,
}

pub const STEPS_PER_ROUND: usize = 6;

impl Circuit {
    pub fn total_rounds(&self) -> usize {
        self.rounds + 1
    }

    pub fn cnot_count(&self) -> usize {
        self.timesteps
            .iter()
            .flat_map(|t| &t.ops)
            .filter(|op| matches!(op, Op::Cnot { .. }))
            .count()
    }
}

/// Build `rounds` noisy rounds of syndrome extraction followed by one
/// noiseless round. Round 0 also prepares every data qubit in `|0>`.
pub fn syndrome_circuit(layout: &SurfaceCodeLayout, rounds: usize) -> Result<Circuit> {
    if rounds < 1 {
        return Err(invalid("rounds must be >= 1"));
    }
    let nq = layout.num_qubits();
    let n_data = layout.num_data();
    let mut timesteps = Vec::with_capacity((rounds + 1) * STEPS_PER_ROUND);
    let mut measurements = Vec::new();

    for round in 0..=rounds {
        let noisy = round < rounds;
        let mut busy = vec![false; nq];

        let mut ops = Vec::with_capacity(nq);
        for s in &layout.z_stabilizers {
            ops.push(Op::PrepZ(s.ancilla));
        }
        for s in &layout.x_stabilizers {
            ops.push(Op::PrepX(s.ancilla));
        }
        for q in 0..n_data {
            ops.push(if round == 0 { Op::PrepZ(q) } else { Op::Idle(q) });
        }
        timesteps.push(Timestep { round, noisy, ops });

        for step in &layout.cnot_schedule {
            busy.iter_mut().for_each(|b| *b = false);
            let mut ops = Vec::with_capacity(nq);
            for &(anc, data) in step {
                busy[anc] = true;
                busy[data] = true;
                // Z checks collect parity on the ancilla; X checks broadcast from it.
                if anc < n_data + layout.z_stabilizers.len() {
                    ops.push(Op::Cnot { control: data, target: anc });
                } else {
                    ops.push(Op::Cnot { control: anc, target: data });
                }
            }
            for (q, &b) in busy.iter().enumerate() {
                if !b {
                    ops.push(Op::Idle(q));
                }
            }
            timesteps.push(Timestep { round, noisy, ops });
        }

        let mut ops = Vec::with_capacity(nq);
        for (i, s) in layout.z_stabilizers.iter().enumerate() {
            ops.push(Op::MeasZ(s.ancilla));
            measurements.push(MeasurementTag { kind: StabilizerKind::Z, stabilizer: i, round });
        }
        for (i, s) in layout.x_stabilizers.iter().enumerate() {
            ops.push(Op::MeasX(s.ancilla));
            measurements.push(MeasurementTag { kind: StabilizerKind::X, stabilizer: i, round });
        }
        for q in 0..n_data {
            ops.push(Op::Idle(q));
        }
        timesteps.push(Timestep { round, noisy, ops });
    }

    Ok(Circuit {
        num_qubits: nq,
        rounds,
        timesteps,
        measurements,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn overlap(a: &[usize], b: &[usize]) -> usize {
        a.iter().filter(|q| b.contains(q)).count()
    }

    #[test]
    fn counts_match_lattice() {
        for (d, data, stabs) in [(3, 13, 6), (5, 41, 20), (7, 85, 42)] {
            let l = build_layout(d).unwrap();
            assert_eq!(l.data_qubits.len(), data);
            assert_eq!(l.x_stabilizers.len(), stabs);
            assert_eq!(l.z_stabilizers.len(), stabs);
        }
    }

    #[test]
    fn rejects_bad_distance() {
        for d in [0, 1, 2, 4, 6] {
            assert!(build_layout(d).is_err());
        }
    }

    #[test]
    fn checks_commute_and_logicals_behave() {
        for d in [3, 5, 7] {
            let l = build_layout(d).unwrap();
            for x in &l.x_stabilizers {
                for z in &l.z_stabilizers {
                    assert_eq!(overlap(&x.support, &z.support) % 2, 0);
                }
                assert_eq!(overlap(&x.support, &l.logical_z) % 2, 0);
            }
            for z in &l.z_stabilizers {
                assert_eq!(overlap(&z.support, &l.logical_x) % 2, 0);
            }
            assert_eq!(overlap(&l.logical_x, &l.logical_z) % 2, 1);
            assert_eq!(l.logical_x.len(), d);
            assert_eq!(l.logical_z.len(), d);
        }
    }

    #[test]
    fn weights_are_three_or_four() {
        let l = build_layout(5).unwrap();
        let size = 9;
        for s in l.x_stabilizers.iter().chain(&l.z_stabilizers) {
            let edge = s.coord.row == 0 || s.coord.col == 0 || s.coord.row == size - 1 || s.coord.col == size - 1;
            assert_eq!(s.support.len(), if edge { 3 } else { 4 });
        }
    }

    #[test]
    fn schedule_has_no_collisions() {
        let l = build_layout(7).unwrap();
        for step in &l.cnot_schedule {
            let mut seen = HashSet::new();
            for &(a, q) in step {
                assert!(seen.insert(a));
                assert!(seen.insert(q));
            }
        }
    }

    #[test]
    fn circuit_shape() {
        let l = build_layout(3).unwrap();
        let c = syndrome_circuit(&l, 3).unwrap();
        assert_eq!(c.total_rounds(), 4);
        assert_eq!(c.timesteps.len(), 4 * STEPS_PER_ROUND);
        assert!(c.timesteps.iter().filter(|t| t.round == 3).all(|t| !t.noisy));
        assert!(c.timesteps.iter().filter(|t| t.round < 3).all(|t| t.noisy));
        assert!(syndrome_circuit(&l, 0).is_err());

        let weight_sum: usize = l.x_stabilizers.iter().chain(&l.z_stabilizers).map(|s| s.support.len()).sum();
        let per_round = c
            .timesteps
            .iter()
            .filter(|t| t.round == 1)
            .flat_map(|t| &t.ops)
            .filter(|op| matches!(op, Op::Cnot { .. }))
            .count();
        assert_eq!(per_round, weight_sum);
    }

    #[test]
    fn every_qubit_once_per_timestep() {
        let l = build_layout(5).unwrap();
        let c = syndrome_circuit(&l, 2).unwrap();
        for t in &c.timesteps {
            let mut count = vec![0; c.num_qubits];
            for op in &t.ops {
                match *op {
                    Op::Cnot { control, target } => {
                        count[control] += 1;
                        count[target] += 1;
                    }
                    Op::PrepZ(q) | Op::PrepX(q) | Op::Idle(q) | Op::MeasZ(q) | Op::MeasX(q) => count[q] += 1,
                }
            }
            assert!(count.iter().all(|&n| n == 1));
        }
    }

    #[test]
    fn json_dump_has_schedule() {
        let l = build_layout(3).unwrap();
        let v: serde_json::Value = serde_json::from_str(&l.to_json().unwrap()).unwrap();
        assert_eq!(v["cnot_schedule"].as_array().unwrap().len(), 4);
        assert_eq!(v["data_qubits"].as_array().unwrap().len(), 13);
    }
}

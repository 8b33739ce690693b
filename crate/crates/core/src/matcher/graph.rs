use std::collections::HashMap;

use serde::Serialize;

use crate::code_layout::SurfaceCodeLayout;
use crate::error::{Error, Result};
use crate::noise::{NoiseParams, Scheme};
use crate::pauli_sim::{Effect, Simulator};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultClass {
    Data,
    Measurement,
    Cnot,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Edge {
    pub a: u32,
    pub b: u32,
    /// Probability that an odd number of the contributing faults occur.
    pub q: f64,
    /// `ln((1-q)/q)`; infinite when no Pauli fault reaches this edge.
    #[serde(serialize_with = "serialize_weight")]
    pub weight: f64,
    pub fault_class: FaultClass,
    pub logical: bool,
    /// Erasure sites whose heralding activates this edge. CNOT sites for
    /// circuit graphs and data qubits for code-capacity graphs.
    pub cnot_locations: Vec<u32>,
}

fn serialize_weight<S: serde::Serializer>(w: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if w.is_finite() {
        s.serialize_f64(*w)
    } else {
        s.serialize_none()
    }
}

/// `q (+) q' = q(1-q') + q'(1-q)`.
pub fn xor_prob(q: f64, r: f64) -> f64 {
    q * (1.0 - r) + r * (1.0 - q)
}

pub fn weight_of(q: f64) -> (f64, bool) {
    if q <= 0.0 {
        (f64::INFINITY, false)
    } else if q >= 0.5 {
        (0.0, true)
    } else {
        (((1.0 - q) / q).ln(), false)
    }
}

/// Space-time matching graph for the Z checks. Node `n` is a Z detector;
/// the last node is the boundary.
#[derive(Clone, Debug, Serialize)]
pub struct DecodingGraph {
    pub num_nodes: usize,
    pub boundary: u32,
    pub edges: Vec<Edge>,
    /// Node labels `(check, round)`; the boundary has none.
    pub node_coords: Vec<(u32, u32)>,
    /// Set when some edge probability reached 1/2 and was clamped.
    pub clamped: bool,
    #[serde(skip)]
    pub adjacency: Vec<Vec<(u32, u32)>>,
    /// Edges activated by each erasure site.
    #[serde(skip)]
    pub site_edges: Vec<Vec<u32>>,
}

struct Builder {
    n_det: u32,
    index: HashMap<(u32, u32, bool), usize>,
    edges: Vec<Edge>,
}

impl Builder {
    fn endpoints(&self, dets: &[u32]) -> Option<(u32, u32)> {
        match *dets {
            [a] => Some((a, self.n_det)),
            [a, b] => Some((a.min(b), a.max(b))),
            _ => None,
        }
    }

    fn add(&mut self, a: u32, b: u32, logical: bool, q: f64, class: FaultClass, site: Option<u32>) -> usize {
        let k = *self.index.entry((a, b, logical)).or_insert_with(|| {
            self.edges.push(Edge {
                a,
                b,
                q: 0.0,
                weight: f64::INFINITY,
                fault_class: class,
                logical,
                cnot_locations: Vec::new(),
            });
            self.edges.len() - 1
        });
        let e = &mut self.edges[k];
        if e.q == 0.0 && q > 0.0 {
            e.fault_class = class;
        }
        e.q = xor_prob(e.q, q);
        if let Some(s) = site {
            if e.cnot_locations.last() != Some(&s) {
                e.cnot_locations.push(s);
            }
        }
        k
    }
}

impl DecodingGraph {
    fn finish(num_det: usize, node_coords: Vec<(u32, u32)>, mut edges: Vec<Edge>, n_sites: usize, keep_structural: bool) -> Self {
        edges.retain(|e| e.q > 0.0 || (keep_structural && !e.cnot_locations.is_empty()));
        let mut clamped = false;
        for e in &mut edges {
            let (w, c) = weight_of(e.q);
            e.weight = w;
            clamped |= c;
        }
        let num_nodes = num_det + 1;
        let mut adjacency = vec![Vec::new(); num_nodes];
        let mut site_edges = vec![Vec::new(); n_sites];
        for (k, e) in edges.iter().enumerate() {
            adjacency[e.a as usize].push((e.b, k as u32));
            adjacency[e.b as usize].push((e.a, k as u32));
            for &s in &e.cnot_locations {
                site_edges[s as usize].push(k as u32);
            }
        }
        DecodingGraph {
            num_nodes,
            boundary: num_det as u32,
            edges,
            node_coords,
            clamped,
            adjacency,
            site_edges,
        }
    }

    /// Graph for the Z checks of a circuit under the given noise. Every
    /// fault mechanism is projected onto its Z-detector footprint; CNOT
    /// mechanisms also record their site so heralded erasures can zero the
    /// edge. Edges reachable only through erasure are kept with infinite
    /// weight.
    pub fn from_circuit(sim: &Simulator, params: &NoiseParams) -> Result<Self> {
        let erasable = params.scheme == Scheme::Erasure;
        Self::from_rates(sim, params.p, params.cnot_pauli_rate(), params.p_m, erasable)
    }

    /// Same as [`DecodingGraph::from_circuit`] with explicit channel rates.
    pub fn from_rates(sim: &Simulator, p_single: f64, p_cnot: f64, p_m: f64, erasable: bool) -> Result<Self> {
        let nz = sim.detectors.num_z_detectors() as u32;
        let mut b = Builder {
            n_det: nz,
            index: HashMap::new(),
            edges: Vec::new(),
        };
        let project = |e: &Effect| -> (Vec<u32>, bool) {
            (e.detectors.iter().copied().filter(|&d| d < nz).collect(), e.logical)
        };
        let mut hyper: Vec<(Vec<u32>, bool, f64, FaultClass, Option<u32>)> = Vec::new();
        let mut visit = |b: &mut Builder, e: &Effect, q: f64, class: FaultClass, site: Option<u32>| -> Result<()> {
            let (dets, logical) = project(e);
            if dets.is_empty() {
                if logical {
                    return Err(Error::Graph("undetectable logical fault".into()));
                }
                return Ok(());
            }
            match b.endpoints(&dets) {
                Some((x, y)) => {
                    b.add(x, y, logical, q, class, site);
                }
                None => hyper.push((dets, logical, q, class, site)),
            }
            Ok(())
        };

        let p1 = p_single / 3.0;
        for site in 0..sim.sites.single.len() {
            for pauli in 1..4 {
                visit(&mut b, sim.effects.single(site, pauli), p1, FaultClass::Data, None)?;
            }
        }
        let p2 = p_cnot / 15.0;
        for site in 0..sim.sites.cnots.len() {
            for pauli in 1..16 {
                let loc = erasable.then_some(site as u32);
                visit(&mut b, sim.effects.cnot(site, pauli), p2, FaultClass::Cnot, loc)?;
            }
        }
        for i in 0..sim.sites.measurements.len() {
            visit(&mut b, sim.effects.measurement(i), p_m, FaultClass::Measurement, None)?;
        }

        // Split footprints with more than two detectors into two existing edges.
        for (dets, logical, q, class, site) in hyper {
            let mut done = false;
            'outer: for mask in 1u32..(1 << dets.len()) - 1 {
                let mut left = Vec::new();
                let mut right = Vec::new();
                for (i, &d) in dets.iter().enumerate() {
                    if mask >> i & 1 == 1 {
                        left.push(d);
                    } else {
                        right.push(d);
                    }
                }
                let (Some(l), Some(r)) = (b.endpoints(&left), b.endpoints(&right)) else {
                    continue;
                };
                for ll in [false, true] {
                    let lr = ll ^ logical;
                    if b.index.contains_key(&(l.0, l.1, ll)) && b.index.contains_key(&(r.0, r.1, lr)) {
                        b.add(l.0, l.1, ll, q, class, site);
                        b.add(r.0, r.1, lr, q, class, site);
                        done = true;
                        break 'outer;
                    }
                }
            }
            if !done {
                return Err(Error::Graph(format!("cannot decompose fault touching detectors {dets:?}")));
            }
        }

        let coords = (0..nz as usize)
            .map(|d| {
                let (c, r) = sim.detectors.z_coords(d);
                (c as u32, r as u32)
            })
            .collect();
        Ok(Self::finish(nz as usize, coords, b.edges, sim.sites.cnots.len(), erasable))
    }

    /// Graph for one round of perfect Z checks. Each data qubit is an edge;
    /// its erasure site is the qubit index.
    pub fn code_capacity(layout: &SurfaceCodeLayout, pauli_rate: f64) -> Self {
        let nz = layout.z_stabilizers.len() as u32;
        let mut b = Builder {
            n_det: nz,
            index: HashMap::new(),
            edges: Vec::new(),
        };
        let mut checks_of = vec![Vec::new(); layout.num_data()];
        for (i, s) in layout.z_stabilizers.iter().enumerate() {
            for &q in &s.support {
                checks_of[q].push(i as u32);
            }
        }
        // X or Y flips the checks.
        let qx = 2.0 * pauli_rate / 3.0;
        for (q, checks) in checks_of.iter().enumerate() {
            let (a, c) = b.endpoints(checks).expect("data qubit touches one or two Z checks");
            let logical = layout.logical_z.contains(&q);
            b.add(a, c, logical, qx, FaultClass::Data, Some(q as u32));
        }
        let coords = (0..nz).map(|i| (i, 0)).collect();
        Self::finish(nz as usize, coords, b.edges, layout.num_data(), true)
    }

    pub fn num_detectors(&self) -> usize {
        self.num_nodes - 1
    }

    /// Adjacency listing for external decoders.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&serde_json::json!({
            "num_nodes": self.num_nodes,
            "boundary": self.boundary,
            "clamped": self.clamped,
            "nodes": self.node_coords.iter().map(|&(c, r)| serde_json::json!({"check": c, "round": r})).collect::<Vec<_>>(),
            "edges": self.edges,
        }))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code_layout::build_layout;

    fn sim(d: usize) -> Simulator {
        Simulator::new(build_layout(d).unwrap(), d).unwrap()
    }

    #[test]
    fn zero_noise_has_no_finite_edges() {
        let g = DecodingGraph::from_circuit(&sim(3), &NoiseParams::new(0.0, 0.0, Scheme::Erasure)).unwrap();
        assert!(g.edges.iter().all(|e| e.weight.is_infinite()));
        let g = DecodingGraph::from_circuit(&sim(3), &NoiseParams::new(0.0, 0.0, Scheme::Standard)).unwrap();
        assert!(g.edges.is_empty());
    }

    #[test]
    fn measurement_only_gives_timelike_edges() {
        let g = DecodingGraph::from_circuit(&sim(3), &NoiseParams::new(0.0, 0.0, Scheme::Standard).with_p_m(0.01)).unwrap();
        assert!(!g.edges.is_empty());
        for e in &g.edges {
            assert_ne!(e.b, g.boundary);
            let (ca, ra) = g.node_coords[e.a as usize];
            let (cb, rb) = g.node_coords[e.b as usize];
            assert_eq!(ca, cb);
            assert_eq!(ra + 1, rb);
            assert_eq!(e.fault_class, FaultClass::Measurement);
        }
    }

    #[test]
    fn every_single_fault_lands_on_an_edge() {
        let s = sim(3);
        let g = DecodingGraph::from_circuit(&s, &NoiseParams::new(0.01, 0.0, Scheme::Erasure)).unwrap();
        let nz = s.detectors.num_z_detectors() as u32;
        let has = |dets: &[u32], logical: bool| {
            let (a, b) = match *dets {
                [a] => (a, nz),
                [a, b] => (a, b),
                _ => return false,
            };
            g.edges.iter().any(|e| e.a == a && e.b == b && e.logical == logical)
        };
        let check = |e: &Effect| {
            let dets: Vec<u32> = e.detectors.iter().copied().filter(|&d| d < nz).collect();
            dets.is_empty() || has(&dets, e.logical)
        };
        for site in 0..s.sites.single.len() {
            for p in 1..4 {
                assert!(check(s.effects.single(site, p)));
            }
        }
        for site in 0..s.sites.cnots.len() {
            for p in 1..16 {
                assert!(check(s.effects.cnot(site, p)), "cnot {site} pauli {p}");
            }
        }
    }

    #[test]
    fn weights_follow_probabilities() {
        let g = DecodingGraph::from_circuit(&sim(3), &NoiseParams::new(0.01, 0.01, Scheme::Erasure)).unwrap();
        for e in &g.edges {
            assert!(e.q > 0.0 && e.q <= 0.5);
            assert!((e.weight - ((1.0 - e.q) / e.q).ln()).abs() < 1e-12);
        }
        assert!(!g.clamped);
    }

    #[test]
    fn clamping_is_flagged() {
        let g = DecodingGraph::from_circuit(&sim(3), &NoiseParams::new(0.9, 0.0, Scheme::Standard)).unwrap();
        assert!(g.clamped);
        assert!(g.edges.iter().all(|e| e.weight >= 0.0));
    }

    #[test]
    fn json_export_lists_edges() {
        let g = DecodingGraph::from_circuit(&sim(3), &NoiseParams::new(0.001, 0.01, Scheme::Erasure)).unwrap();
        let v: serde_json::Value = serde_json::from_str(&g.to_json().unwrap()).unwrap();
        assert_eq!(v["edges"].as_array().unwrap().len(), g.edges.len());
        assert_eq!(v["boundary"].as_u64().unwrap() as u32, g.boundary);
    }

    #[test]
    fn standard_graph_is_erasure_graph_at_equivalent_rate() {
        let s = sim(3);
        let (p, e) = (0.002, 0.01);
        let std = DecodingGraph::from_circuit(&s, &NoiseParams::new(p, e, Scheme::Standard)).unwrap();
        let rate = crate::noise::standard_equivalent_rate(p, e).unwrap();
        let era = DecodingGraph::from_rates(&s, p, rate, 2.0 * p / 3.0, true).unwrap();
        assert_eq!(std.edges.len(), era.edges.len());
        for (a, b) in std.edges.iter().zip(&era.edges) {
            assert_eq!((a.a, a.b, a.logical), (b.a, b.b, b.logical));
            assert!((a.q - b.q).abs() < 1e-15);
        }
    }

    #[test]
    fn xor_prob_composes() {
        assert_eq!(xor_prob(0.0, 0.3), 0.3);
        assert!((xor_prob(0.5, 0.2) - 0.5).abs() < 1e-15);
        assert!((xor_prob(0.1, 0.1) - 0.18).abs() < 1e-15);
    }
}

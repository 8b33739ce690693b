use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::Serialize;

use super::blossom::min_weight_perfect_matching;
use super::graph::DecodingGraph;
use crate::error::{Error, Result};
use crate::pauli_sim::ShotRecord;

/// Fixed-point scale for weights handed to the blossom solver.
const WEIGHT_SCALE: f64 = 1e7;

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Correction {
    /// Matched defects; `None` marks a match to the boundary.
    pub pairs: Vec<(u32, Option<u32>)>,
    /// Parity of logical crossings along the chosen paths.
    pub logical: bool,
    pub weight: f64,
}

#[inline]
fn key(d: f64, node: u32) -> Reverse<(u64, u32)> {
    // Non-negative floats order like their bit patterns.
    Reverse((d.to_bits(), node))
}

/// Per-thread decoder state over a shared graph.
pub struct Matcher<'g> {
    graph: &'g DecodingGraph,
    /// Compressed adjacency: arcs of node `v` are `arcs[start[v]..start[v + 1]]`.
    start: Vec<u32>,
    arcs: Vec<(u32, u32)>,
    logical: Vec<bool>,
    weights: Vec<f64>,
    touched: Vec<u32>,
    zero_base: Vec<u32>,
    parent: Vec<u32>,
    parity: Vec<bool>,
    uf_dirty: Vec<u32>,
    dist: Vec<f64>,
    path_par: Vec<bool>,
    stamp: Vec<u32>,
    epoch: u32,
    boundary_dist: Vec<f64>,
    boundary_par: Vec<bool>,
    target: Vec<u32>,
    heap: BinaryHeap<Reverse<(u64, u32)>>,
    /// Erased sites behind the current overlay.
    erased: Vec<u32>,
    /// Shots decoded under the current overlay.
    uses: u32,
    boundary_valid: bool,
    /// Lazily filled rows of boundary-avoiding distances under the current
    /// overlay, reused while the overlay repeats.
    table_dist: Vec<f64>,
    table_par: Vec<bool>,
    row_stamp: Vec<u32>,
    table_epoch: u32,
}

impl<'g> Matcher<'g> {
    pub fn new(graph: &'g DecodingGraph) -> Self {
        let n = graph.num_nodes;
        let zero_base = graph
            .edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.weight == 0.0)
            .map(|(k, _)| k as u32)
            .collect();
        let mut start = Vec::with_capacity(n + 1);
        let mut arcs = Vec::new();
        start.push(0);
        for adj in &graph.adjacency {
            arcs.extend_from_slice(adj);
            start.push(arcs.len() as u32);
        }
        Matcher {
            graph,
            start,
            arcs,
            logical: graph.edges.iter().map(|e| e.logical).collect(),
            weights: graph.edges.iter().map(|e| e.weight).collect(),
            touched: Vec::new(),
            zero_base,
            parent: (0..n as u32).collect(),
            parity: vec![false; n],
            uf_dirty: Vec::new(),
            dist: vec![f64::INFINITY; n],
            path_par: vec![false; n],
            stamp: vec![0; n],
            epoch: 0,
            boundary_dist: vec![f64::INFINITY; n],
            boundary_par: vec![false; n],
            target: vec![u32::MAX; n],
            heap: BinaryHeap::new(),
            erased: Vec::new(),
            uses: 0,
            boundary_valid: false,
            table_dist: Vec::new(),
            table_par: Vec::new(),
            row_stamp: vec![0; n],
            table_epoch: 1,
        }
    }

    pub fn graph(&self) -> &DecodingGraph {
        self.graph
    }

    /// Zero the weight of every edge activated by the erased sites. Repeating
    /// the previous erasure set keeps the cached distances.
    pub fn apply_erasure_weights(&mut self, erased: &[u32]) -> Result<()> {
        if let Some(&bad) = erased.iter().find(|&&s| s as usize >= self.graph.site_edges.len()) {
            return Err(Error::UnknownLocation(bad as usize));
        }
        if erased == self.erased.as_slice() {
            return Ok(());
        }
        self.reset_overlay();
        for &s in erased {
            for &k in &self.graph.site_edges[s as usize] {
                if self.weights[k as usize] != 0.0 {
                    self.weights[k as usize] = 0.0;
                    self.touched.push(k);
                }
            }
        }
        self.erased.extend_from_slice(erased);
        Ok(())
    }

    fn reset_overlay(&mut self) {
        for k in self.touched.drain(..) {
            self.weights[k as usize] = self.graph.edges[k as usize].weight;
        }
        self.erased.clear();
        self.uses = 0;
        self.boundary_valid = false;
        self.table_epoch = self.table_epoch.wrapping_add(1);
        if self.table_epoch == 0 {
            self.row_stamp.iter_mut().for_each(|s| *s = 0);
            self.table_epoch = 1;
        }
    }

    /// Current per-edge weights including the erasure overlay.
    pub fn overlay(&self) -> &[f64] {
        &self.weights
    }

    fn find(&mut self, mut v: u32) -> (u32, bool) {
        let mut par = false;
        let mut path = Vec::new();
        while self.parent[v as usize] != v {
            path.push(v);
            par ^= self.parity[v as usize];
            v = self.parent[v as usize];
        }
        let root = v;
        // Compress: parity of each node on the path relative to the root.
        let mut acc = par;
        for &u in &path {
            let own = self.parity[u as usize];
            self.parent[u as usize] = root;
            self.parity[u as usize] = acc;
            acc ^= own;
        }
        (root, par)
    }

    fn union(&mut self, a: u32, b: u32, logical: bool) {
        let (ra, pa) = self.find(a);
        let (rb, pb) = self.find(b);
        if ra == rb {
            return;
        }
        // Keep the boundary as a root so its potential stays zero.
        let (child, root) = if ra == self.graph.boundary { (rb, ra) } else { (ra, rb) };
        self.parent[child as usize] = root;
        self.parity[child as usize] = pa ^ pb ^ logical;
        self.uf_dirty.push(child);
        self.uf_dirty.push(a);
        self.uf_dirty.push(b);
    }

    fn reset_uf(&mut self) {
        for v in self.uf_dirty.drain(..) {
            self.parent[v as usize] = v;
            self.parity[v as usize] = false;
        }
    }

    fn next_epoch(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
    }

    fn boundary_distances(&mut self) {
        if self.boundary_valid {
            return;
        }
        self.boundary_valid = true;
        let g = self.graph;
        self.boundary_dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        let b = g.boundary;
        self.boundary_dist[b as usize] = 0.0;
        self.boundary_par[b as usize] = false;
        self.heap.clear();
        self.heap.push(key(0.0, b));
        while let Some(Reverse((bits, v))) = self.heap.pop() {
            let d = f64::from_bits(bits);
            if d > self.boundary_dist[v as usize] {
                continue;
            }
            let (lo, hi) = (self.start[v as usize] as usize, self.start[v as usize + 1] as usize);
            for &(u, k) in &self.arcs[lo..hi] {
                let nd = d + self.weights[k as usize];
                if nd < self.boundary_dist[u as usize] {
                    self.boundary_dist[u as usize] = nd;
                    self.boundary_par[u as usize] = self.boundary_par[v as usize] ^ self.logical[k as usize];
                    self.heap.push(key(nd, u));
                }
            }
        }
    }

    /// Fill the table row of `s` with boundary-avoiding distances. Nodes
    /// with `dist >= rb_s + rb_v` are not expanded; their entries are upper
    /// bounds that already fail the candidate test, so every pair that
    /// passes it reads an exact distance.
    fn full_row(&mut self, s: u32) {
        let g = self.graph;
        let n = g.num_nodes;
        if self.table_dist.is_empty() {
            self.table_dist = vec![f64::INFINITY; n * n];
            self.table_par = vec![false; n * n];
        }
        self.row_stamp[s as usize] = self.table_epoch;
        let base = s as usize * n;
        let rb_s = self.boundary_dist[s as usize];
        let (dist, par) = (&mut self.table_dist[base..base + n], &mut self.table_par[base..base + n]);
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        dist[s as usize] = 0.0;
        par[s as usize] = false;
        self.heap.clear();
        self.heap.push(key(0.0, s));
        while let Some(Reverse((bits, v))) = self.heap.pop() {
            let d = f64::from_bits(bits);
            if d > dist[v as usize] || d >= rb_s + self.boundary_dist[v as usize] {
                continue;
            }
            let (lo, hi) = (self.start[v as usize] as usize, self.start[v as usize + 1] as usize);
            for &(u, k) in &self.arcs[lo..hi] {
                if u == g.boundary {
                    continue;
                }
                let nd = d + self.weights[k as usize];
                if nd < dist[u as usize] {
                    dist[u as usize] = nd;
                    par[u as usize] = par[v as usize] ^ self.logical[k as usize];
                    self.heap.push(key(nd, u));
                }
            }
        }
    }

    /// Candidate pairs from cached distance rows. A pair reads whichever
    /// endpoint's row is already present.
    fn table_search(&mut self, rem: &[u32], out: &mut Vec<(usize, usize, f64, bool)>) {
        let n = self.graph.num_nodes;
        for (i, &a) in rem.iter().enumerate() {
            let rb_a = self.boundary_dist[a as usize];
            for (j, &b) in rem.iter().enumerate().skip(i + 1) {
                let idx = if self.row_stamp[a as usize] == self.table_epoch {
                    a as usize * n + b as usize
                } else if self.row_stamp[b as usize] == self.table_epoch {
                    b as usize * n + a as usize
                } else {
                    self.full_row(a);
                    a as usize * n + b as usize
                };
                let d = self.table_dist[idx];
                if d < rb_a + self.boundary_dist[b as usize] {
                    out.push((i, j, d, self.table_par[idx]));
                }
            }
        }
    }

    /// Shortest paths from `rem[src]` to the other remaining defects that
    /// could beat sending both to the boundary.
    fn local_search(&mut self, rem: &[u32], src: usize, out: &mut Vec<(usize, usize, f64, bool)>) {
        let g = self.graph;
        self.next_epoch();
        let s = rem[src];
        let rb_s = self.boundary_dist[s as usize];
        self.stamp[s as usize] = self.epoch;
        self.dist[s as usize] = 0.0;
        self.path_par[s as usize] = false;
        self.heap.clear();
        self.heap.push(key(0.0, s));
        while let Some(Reverse((bits, v))) = self.heap.pop() {
            let d = f64::from_bits(bits);
            if d > self.dist[v as usize] {
                continue;
            }
            if d >= rb_s + self.boundary_dist[v as usize] {
                continue;
            }
            let t = self.target[v as usize];
            if t != u32::MAX && t as usize > src {
                out.push((src, t as usize, d, self.path_par[v as usize]));
            }
            let (lo, hi) = (self.start[v as usize] as usize, self.start[v as usize + 1] as usize);
            for &(u, k) in &self.arcs[lo..hi] {
                if u == g.boundary {
                    continue;
                }
                let w = self.weights[k as usize];
                if w.is_infinite() {
                    continue;
                }
                let nd = d + w;
                let ui = u as usize;
                if self.stamp[ui] != self.epoch || nd < self.dist[ui] {
                    self.stamp[ui] = self.epoch;
                    self.dist[ui] = nd;
                    self.path_par[ui] = self.path_par[v as usize] ^ self.logical[k as usize];
                    self.heap.push(key(nd, u));
                }
            }
        }
    }

    /// Minimum-weight matching of `defects` under the current overlay, with
    /// any number of boundary matches allowed.
    pub fn mwpm(&mut self, defects: &[u32]) -> Result<Correction> {
        let g = self.graph;
        let mut corr = Correction::default();
        if defects.is_empty() {
            return Ok(corr);
        }
        if let Some(&bad) = defects.iter().find(|&&d| d >= g.boundary) {
            return Err(Error::Graph(format!("defect {bad} is not a detector")));
        }

        // Zero-weight clusters: defects inside one pair up for free, and a
        // cluster touching the boundary absorbs all of its defects.
        let zero: Vec<u32> = self.touched.iter().chain(&self.zero_base).copied().collect();
        for k in zero {
            let e = &g.edges[k as usize];
            self.union(e.a, e.b, e.logical);
        }
        let (broot, bpar) = self.find(g.boundary);
        let mut tagged: Vec<(u32, u32, bool)> = defects
            .iter()
            .map(|&d| {
                let (r, p) = self.find(d);
                (r, d, p)
            })
            .collect();
        tagged.sort_unstable();
        let mut rem = Vec::new();
        let mut i = 0;
        while i < tagged.len() {
            let root = tagged[i].0;
            let mut j = i;
            while j < tagged.len() && tagged[j].0 == root {
                j += 1;
            }
            let group = &tagged[i..j];
            if root == broot {
                for &(_, d, p) in group {
                    corr.pairs.push((d, None));
                    corr.logical ^= p ^ bpar;
                }
            } else {
                for pair in group.chunks(2) {
                    match pair {
                        [a, b] => {
                            corr.pairs.push((a.1, Some(b.1)));
                            corr.logical ^= a.2 ^ b.2;
                        }
                        [a] => rem.push(a.1),
                        _ => unreachable!(),
                    }
                }
            }
            i = j;
        }
        self.reset_uf();
        if rem.is_empty() {
            return Ok(corr);
        }

        self.boundary_distances();
        let mut cands = Vec::new();
        if self.uses > 0 {
            self.table_search(&rem, &mut cands);
        } else {
            for (idx, &d) in rem.iter().enumerate() {
                self.target[d as usize] = idx as u32;
            }
            for src in 0..rem.len() {
                self.local_search(&rem, src, &mut cands);
            }
            for &d in &rem {
                self.target[d as usize] = u32::MAX;
            }
        }
        self.uses += 1;

        // Split into independent components.
        let n = rem.len();
        let mut comp: Vec<usize> = (0..n).collect();
        fn root(comp: &mut [usize], mut x: usize) -> usize {
            while comp[x] != x {
                comp[x] = comp[comp[x]];
                x = comp[x];
            }
            x
        }
        for &(a, b, _, _) in &cands {
            let (ra, rb) = (root(&mut comp, a), root(&mut comp, b));
            if ra != rb {
                comp[ra.max(rb)] = ra.min(rb);
            }
        }
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
        for x in 0..n {
            let r = root(&mut comp, x);
            members[r].push(x);
        }
        let mut comp_cands: Vec<Vec<(usize, usize, f64, bool)>> = vec![Vec::new(); n];
        for &c in &cands {
            let r = root(&mut comp, c.0);
            comp_cands[r].push(c);
        }

        for r in 0..n {
            let nodes = &members[r];
            match nodes.len() {
                0 => {}
                1 => {
                    let d = rem[nodes[0]];
                    corr.pairs.push((d, None));
                    corr.weight += self.boundary_dist[d as usize];
                    corr.logical ^= self.boundary_par[d as usize];
                }
                _ => self.solve_component(&rem, nodes, &comp_cands[r], &mut corr)?,
            }
        }
        Ok(corr)
    }

    fn solve_component(
        &self,
        rem: &[u32],
        nodes: &[usize],
        cands: &[(usize, usize, f64, bool)],
        corr: &mut Correction,
    ) -> Result<()> {
        let k = nodes.len();
        if k == 2 && cands.len() == 1 {
            let (a, b, w, p) = cands[0];
            corr.pairs.push((rem[a], Some(rem[b])));
            corr.weight += w;
            corr.logical ^= p;
            return Ok(());
        }
        let local = |x: usize| nodes.binary_search(&x).unwrap();
        let q = |w: f64| (w * WEIGHT_SCALE).round() as i64;
        let mut edges = Vec::with_capacity(2 * cands.len() + k);
        for &(a, b, w, _) in cands {
            edges.push((local(a), local(b), q(w)));
        }
        // Boundary twins: each defect may take its twin at the boundary
        // cost, and twins of a matched pair pair up along a mirrored edge.
        for &(a, b, _, _) in cands {
            edges.push((k + local(a), k + local(b), 0));
        }
        for (i, &x) in nodes.iter().enumerate() {
            let rb = self.boundary_dist[rem[x] as usize];
            if rb.is_finite() {
                edges.push((i, k + i, q(rb)));
            }
        }
        let mate = min_weight_perfect_matching(2 * k, &edges)
            .ok_or_else(|| Error::Graph("no perfect matching for defect component".into()))?;
        for (i, &x) in nodes.iter().enumerate() {
            let m = mate[i];
            if m == k + i {
                let d = rem[x];
                corr.pairs.push((d, None));
                corr.weight += self.boundary_dist[d as usize];
                corr.logical ^= self.boundary_par[d as usize];
            } else if m < k && m > i {
                let y = nodes[m];
                let &(_, _, w, p) = cands
                    .iter()
                    .find(|c| (c.0 == x && c.1 == y) || (c.0 == y && c.1 == x))
                    .expect("matched pair has a candidate path");
                corr.pairs.push((rem[x], Some(rem[y])));
                corr.weight += w;
                corr.logical ^= p;
            }
        }
        Ok(())
    }

    /// Decode a circuit shot; true when the correction restores the logical.
    pub fn decode_shot(&mut self, record: &ShotRecord) -> Result<bool> {
        let defects = record.detection_events.ones_below(self.graph.num_detectors());
        self.decode(&defects, &record.erased_cnots, record.logical_flip)
    }

    pub fn decode(&mut self, defects: &[u32], erased: &[u32], logical_flip: bool) -> Result<bool> {
        self.apply_erasure_weights(erased)?;
        let corr = self.mwpm(defects)?;
        Ok(corr.logical == logical_flip)
    }
}

/// Decode one record against a graph with a fresh matcher.
pub fn decode_shot(graph: &DecodingGraph, record: &ShotRecord) -> Result<bool> {
    Matcher::new(graph).decode_shot(record)
}

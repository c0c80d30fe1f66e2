//! Deterministic element-to-node scatter.
//!
//! Elements are split into contiguous chunks of [`CHUNK_ELEMENTS`]. Each chunk
//! accumulates into a private buffer indexed by the chunk's sorted node list;
//! node values are then summed over chunks in ascending chunk order. The
//! floating-point summation sequence is fixed by the mesh alone, so results
//! are bit-identical for every worker count.

use std::ops::Range;

use rayon::prelude::*;

use crate::element::ElementPrecomp;

pub const CHUNK_ELEMENTS: usize = 4096;

#[derive(Debug, Clone)]
pub(crate) struct ScatterPlan {
    pub(crate) chunks: Vec<Range<usize>>,
    /// Buffer slot of every (element, local node), flattened in element order.
    slots: Vec<u32>,
    /// Start of each element's entries in `slots`.
    slot_offsets: Vec<usize>,
    buffer_len: Vec<usize>,
    /// Per node: `(chunk, slot)` contributions in ascending chunk order.
    gather_ptr: Vec<usize>,
    gather: Vec<(u32, u32)>,
}

impl ScatterPlan {
    pub(crate) fn new(elements: &[ElementPrecomp], node_count: usize) -> Self {
        let n_chunks = elements.len().div_ceil(CHUNK_ELEMENTS);
        let chunks: Vec<Range<usize>> = (0..n_chunks)
            .map(|c| c * CHUNK_ELEMENTS..((c + 1) * CHUNK_ELEMENTS).min(elements.len()))
            .collect();

        let mut slot_offsets = Vec::with_capacity(elements.len() + 1);
        slot_offsets.push(0);
        for e in elements {
            slot_offsets.push(slot_offsets.last().unwrap() + e.n());
        }
        let mut slots = vec![0u32; *slot_offsets.last().unwrap()];
        let mut buffer_len = Vec::with_capacity(n_chunks);
        let mut per_node: Vec<Vec<(u32, u32)>> = vec![Vec::new(); node_count];

        for (c, range) in chunks.iter().enumerate() {
            let mut touched: Vec<usize> = range.clone().flat_map(|e| elements[e].node_ids.iter().copied()).collect();
            touched.sort_unstable();
            touched.dedup();
            for e in range.clone() {
                for (l, n) in elements[e].node_ids.iter().enumerate() {
                    let slot = touched.binary_search(n).expect("node is in its chunk");
                    slots[slot_offsets[e] + l] = slot as u32;
                }
            }
            for (slot, &n) in touched.iter().enumerate() {
                per_node[n].push((c as u32, slot as u32));
            }
            buffer_len.push(touched.len());
        }

        let mut gather_ptr = Vec::with_capacity(node_count + 1);
        gather_ptr.push(0);
        let mut gather = Vec::new();
        for list in per_node {
            gather.extend(list);
            gather_ptr.push(gather.len());
        }
        Self {
            chunks,
            slots,
            slot_offsets,
            buffer_len,
            gather_ptr,
            gather,
        }
    }

    pub(crate) fn buffers(&self) -> Vec<Vec<f64>> {
        self.buffer_len.iter().map(|&n| vec![0.0; n]).collect()
    }

    /// Computes the net conduction inflow `-Σ_e k̄_e A_e T_e` into `out`.
    pub(crate) fn scatter(
        &self,
        elements: &[ElementPrecomp],
        conductivity: &[f64],
        temperature: &[f64],
        buffers: &mut [Vec<f64>],
        out: &mut [f64],
    ) {
        buffers
            .par_iter_mut()
            .zip(self.chunks.par_iter())
            .for_each(|(buf, range)| {
                buf.fill(0.0);
                let mut diff = [0.0f64; 8];
                for e in range.clone() {
                    let el = &elements[e];
                    let n = el.n();
                    let ids = &el.node_ids;
                    // A annihilates constants, so work with T - T_0: exact zero on uniform fields
                    let t0 = temperature[ids[0]];
                    for (d, &id) in diff.iter_mut().zip(ids) {
                        *d = temperature[id] - t0;
                    }
                    let k = conductivity[e];
                    let slots = &self.slots[self.slot_offsets[e]..self.slot_offsets[e] + n];
                    for (i, row) in el.a.chunks_exact(n).enumerate() {
                        let at: f64 = row.iter().zip(&diff[..n]).map(|(a, d)| a * d).sum();
                        buf[slots[i] as usize] -= k * at;
                    }
                }
            });

        let buffers = &*buffers;
        out.par_iter_mut().with_min_len(2048).enumerate().for_each(|(node, f)| {
            let mut acc = 0.0;
            for &(c, s) in &self.gather[self.gather_ptr[node]..self.gather_ptr[node + 1]] {
                acc += buffers[c as usize][s as usize];
            }
            *f = acc;
        });
    }
}

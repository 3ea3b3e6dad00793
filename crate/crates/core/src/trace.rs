//! Per-iteration records and their CSV rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::geometry::Point;

/// One step `x_n -> x_{n+1}`. Distances to declared fixed points are kept
/// for every intermediate point so the chain `d(x_{n+1},p) <= d(y_n,p) <=
/// d(x_n,p)` can be audited.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub n: usize,
    /// `d(x_n, T x_n)`; for systems the maximum over the maps.
    pub d_x_tx: f64,
    /// `d(x_n, P*_K T x_n)`, the fixed-point gap of the projected map.
    pub d_x_ptx: f64,
    /// `d(x_n, x_{n+1})`.
    pub step_displacement: f64,
    pub d_to_p: Vec<f64>,
    pub d_y_p: Vec<f64>,
    pub d_z_p: Vec<f64>,
    pub d_next_p: Vec<f64>,
    /// VIP residual of `x_n` against the certification sample, when drawn.
    pub residual_sample: Option<f64>,
    /// Systems only: `d(x_n, T_i x_n)` per map.
    pub per_map_gap: Vec<f64>,
    /// Systems only: `d(u_{n,i}, u_{n,j})` for `i < j`, row-major.
    pub selection_gaps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub scheme: String,
    /// `x_0, ..., x_N`; one more entry than `records`.
    pub iterates: Vec<Point>,
    pub records: Vec<StepRecord>,
    /// Gaps of the last iterate, which has no step record.
    pub final_gap: f64,
    pub final_raw_gap: f64,
    pub schedule: serde_json::Value,
    pub seed: u64,
}

impl IterationTrace {
    pub fn len(&self) -> usize {
        self.iterates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterates.is_empty()
    }

    pub fn is_consistent(&self) -> bool {
        self.iterates.len() == self.records.len() + 1
            && self.records.iter().enumerate().all(|(i, r)| r.n == i)
    }

    /// `d(x_n, P*_K T x_n)` for every iterate, including the last.
    pub fn gaps(&self) -> Vec<f64> {
        self.records
            .iter()
            .map(|r| r.d_x_ptx)
            .chain(std::iter::once(self.final_gap))
            .collect()
    }

    pub fn raw_gaps(&self) -> Vec<f64> {
        self.records
            .iter()
            .map(|r| r.d_x_tx)
            .chain(std::iter::once(self.final_raw_gap))
            .collect()
    }

    /// CSV with header `n,d_x_Tx,d_x_PTx,d_to_p,residual_sample,step_displacement`
    /// followed by `d_to_p_<k>` for further fixed points, `d_x_T<i>x` per map
    /// and `gap_u<i>_u<j>` per selection pair (1-based) for systems.
    pub fn to_csv(&self) -> String {
        let first = self.records.first();
        let n_p = first.map_or(0, |r| r.d_to_p.len());
        let n_maps = first.map_or(0, |r| r.per_map_gap.len());
        let mut out = String::from("n,d_x_Tx,d_x_PTx,d_to_p,residual_sample,step_displacement");
        for k in 1..n_p {
            let _ = write!(out, ",d_to_p_{}", k + 1);
        }
        for i in 0..n_maps {
            let _ = write!(out, ",d_x_T{}x", i + 1);
        }
        for i in 0..n_maps {
            for j in i + 1..n_maps {
                let _ = write!(out, ",gap_u{}_u{}", i + 1, j + 1);
            }
        }
        out.push('\n');
        for r in &self.records {
            let _ = write!(out, "{},{:e},{:e},", r.n, r.d_x_tx, r.d_x_ptx);
            if let Some(d) = r.d_to_p.first() {
                let _ = write!(out, "{d:e}");
            }
            out.push(',');
            if let Some(res) = r.residual_sample {
                let _ = write!(out, "{res:e}");
            }
            let _ = write!(out, ",{:e}", r.step_displacement);
            for d in r.d_to_p.iter().skip(1) {
                let _ = write!(out, ",{d:e}");
            }
            for d in r.per_map_gap.iter().chain(&r.selection_gaps) {
                let _ = write!(out, ",{d:e}");
            }
            out.push('\n');
        }
        out
    }
}

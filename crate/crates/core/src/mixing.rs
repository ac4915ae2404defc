//! Doubly stochastic mixing matrices and consensus primitives.
//!
//! A mixing matrix W is nonnegative, symmetric, doubly stochastic, and
//! respects the graph: w_ir > 0 only for r = i or r adjacent to i. Two
//! constructions are provided:
//!
//! - Metropolis weights: w_ir = 1 / (1 + max(deg_i, deg_r)) on edges, with
//!   the diagonal absorbing the remainder.
//! - Lazy Laplacian weights: W = I - eps * L for 0 < eps < 1/deg_max, where
//!   L is the graph Laplacian.
//!
//! On a connected graph both give a primitive W, so repeated application
//! contracts any stack of states toward its average at a geometric rate set
//! by the second-largest eigenvalue modulus `lambda`.
//!
//! CSV format for import/export: one row per line, full-precision decimal
//! entries, comma-separated.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::stack::Stack;
use crate::topology::Topology;

/// Tolerance on row/column sums and symmetry for validated matrices.
pub const STOCHASTICITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct MixingMatrix {
    w: DMatrix<f64>,
    lambda: f64,
}

impl MixingMatrix {
    /// Metropolis weights on a connected topology.
    pub fn metropolis(topo: &Topology) -> Result<Self> {
        if !topo.is_connected() {
            return Err(Error::InvalidParameter(
                "mixing matrix requires a connected topology".into(),
            ));
        }
        let n = topo.n();
        let mut w = DMatrix::zeros(n, n);
        for &(i, r) in topo.edges() {
            let v = 1.0 / (1.0 + topo.degree(i).max(topo.degree(r)) as f64);
            w[(i, r)] = v;
            w[(r, i)] = v;
        }
        for i in 0..n {
            let off: f64 = topo.neighbors(i).iter().map(|&r| w[(i, r)]).sum();
            w[(i, i)] = 1.0 - off;
        }
        Self::from_matrix(w)
    }

    /// Lazy Laplacian weights W = I - eps * L. Requires 0 < eps < 1/deg_max
    /// strictly, which keeps every diagonal entry positive.
    pub fn lazy_laplacian(topo: &Topology, eps: f64) -> Result<Self> {
        if !topo.is_connected() {
            return Err(Error::InvalidParameter(
                "mixing matrix requires a connected topology".into(),
            ));
        }
        let n = topo.n();
        let deg_max = topo.max_degree();
        if deg_max > 0 {
            let limit = 1.0 / deg_max as f64;
            if !(eps > 0.0 && eps < limit) {
                return Err(Error::InvalidParameter(format!(
                    "eps must lie strictly inside (0, {limit}), got {eps}"
                )));
            }
        }
        let mut w = DMatrix::zeros(n, n);
        for &(i, r) in topo.edges() {
            w[(i, r)] = eps;
            w[(r, i)] = eps;
        }
        for i in 0..n {
            w[(i, i)] = 1.0 - eps * topo.degree(i) as f64;
        }
        Self::from_matrix(w)
    }

    /// Validate an explicit matrix and compute its contraction factor.
    pub fn from_matrix(w: DMatrix<f64>) -> Result<Self> {
        if w.nrows() != w.ncols() || w.nrows() == 0 {
            return Err(Error::InvalidMixingMatrix(format!(
                "matrix must be square and nonempty, got {}x{}",
                w.nrows(),
                w.ncols()
            )));
        }
        let n = w.nrows();
        for i in 0..n {
            for r in 0..n {
                if w[(i, r)] < 0.0 {
                    return Err(Error::InvalidMixingMatrix(format!(
                        "negative entry at ({i}, {r})"
                    )));
                }
                if (w[(i, r)] - w[(r, i)]).abs() > STOCHASTICITY_TOL {
                    return Err(Error::InvalidMixingMatrix(format!(
                        "asymmetric at ({i}, {r})"
                    )));
                }
            }
            let sum: f64 = w.row(i).iter().sum();
            if (sum - 1.0).abs() > STOCHASTICITY_TOL {
                return Err(Error::InvalidMixingMatrix(format!(
                    "row {i} sums to {sum}"
                )));
            }
        }
        let lambda = second_largest_modulus(&w);
        if lambda >= 1.0 {
            return Err(Error::InvalidMixingMatrix(format!(
                "matrix is not primitive: second eigenvalue modulus {lambda}"
            )));
        }
        Ok(MixingMatrix { w, lambda })
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// Second-largest eigenvalue modulus, the per-step consensus contraction
    /// factor. Zero when consensus is exact in one step.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `1 - lambda`.
    pub fn spectral_gap(&self) -> f64 {
        1.0 - self.lambda
    }

    /// One synchronous averaging round over stacked states: `W * states`.
    pub fn consensus_step(&self, states: &Stack) -> Result<Stack> {
        if states.nrows() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "stack has {} rows, mixing matrix is {}x{}",
                states.nrows(),
                self.n(),
                self.n()
            )));
        }
        Ok(&self.w * states)
    }

    /// Dynamic average consensus update:
    /// `d_next = W * d + r_new - r_old`.
    ///
    /// Initialized with d = r, this keeps mean(d) = mean(r_new) exactly in
    /// exact arithmetic, while each row chases the network-average signal.
    pub fn dac_step(&self, d: &Stack, r_new: &Stack, r_old: &Stack) -> Result<Stack> {
        if d.shape() != r_new.shape() || d.shape() != r_old.shape() {
            return Err(Error::DimensionMismatch(format!(
                "tracker {:?}, new signal {:?}, old signal {:?}",
                d.shape(),
                r_new.shape(),
                r_old.shape()
            )));
        }
        let mut next = self.consensus_step(d)?;
        next += r_new;
        next -= r_old;
        Ok(next)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let n = self.n();
        for i in 0..n {
            let line: Vec<String> = (0..n).map(|r| format!("{}", self.w[(i, r)])).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }

    /// Parse and re-validate a matrix written by `write_csv`.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            let row: Vec<f64> = t
                .split(',')
                .map(|v| {
                    v.trim().parse::<f64>().map_err(|_| Error::Parse {
                        line: idx + 1,
                        message: format!("bad entry {v:?}"),
                    })
                })
                .collect::<Result<_>>()?;
            if let Some(first) = rows.first() {
                if row.len() != first.len() {
                    return Err(Error::Parse {
                        line: idx + 1,
                        message: "ragged row".into(),
                    });
                }
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Parse { line: 1, message: "empty matrix".into() });
        }
        let n = rows.len();
        let w = DMatrix::from_fn(n, rows[0].len(), |i, r| rows[i][r]);
        Self::from_matrix(w)
    }
}

/// Largest eigenvalue modulus after removing the Perron eigenvalue 1.
fn second_largest_modulus(w: &DMatrix<f64>) -> f64 {
    let n = w.nrows();
    if n == 1 {
        return 0.0;
    }
    let mut eigs: Vec<f64> = w
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    // drop the eigenvalue closest to 1 (the consensus direction)
    let perron = eigs
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - 1.0).abs().total_cmp(&(b.1 - 1.0).abs()))
        .map(|(i, _)| i)
        .expect("nonempty spectrum");
    eigs.swap_remove(perron);
    eigs.iter().fold(0.0, |m, &e| m.max(e.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stack;
    use nalgebra::DVector;

    fn assert_mixing_invariants(m: &MixingMatrix) {
        let w = m.w();
        let n = m.n();
        for i in 0..n {
            let row: f64 = w.row(i).iter().sum();
            let col: f64 = w.column(i).iter().sum();
            assert!((row - 1.0).abs() <= STOCHASTICITY_TOL, "row sum {row}");
            assert!((col - 1.0).abs() <= STOCHASTICITY_TOL, "col sum {col}");
            for r in 0..n {
                assert!(w[(i, r)] >= 0.0);
                assert_eq!(w[(i, r)], w[(r, i)]);
            }
        }
        assert!(m.lambda() >= 0.0 && m.lambda() < 1.0);
    }

    #[test]
    fn metropolis_on_two_nodes_is_uniform_averaging() {
        let m = MixingMatrix::metropolis(&Topology::complete(2)).unwrap();
        for v in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            assert!((m.w()[v] - 0.5).abs() < 1e-15);
        }
        assert!(m.lambda().abs() < 1e-12);
    }

    #[test]
    fn metropolis_on_three_node_path_matches_hand_values() {
        // degrees 1, 2, 1: edge weights 1/3, diagonal 2/3, 1/3, 2/3,
        // eigenvalues 1, 2/3, 0
        let m = MixingMatrix::metropolis(&Topology::path(3)).unwrap();
        let third = 1.0 / 3.0;
        let expect = [
            [2.0 * third, third, 0.0],
            [third, third, third],
            [0.0, third, 2.0 * third],
        ];
        for i in 0..3 {
            for r in 0..3 {
                assert!((m.w()[(i, r)] - expect[i][r]).abs() < 1e-15);
            }
        }
        assert!((m.lambda() - 2.0 / 3.0).abs() < 1e-12);
        assert_mixing_invariants(&m);
    }

    #[test]
    fn lazy_laplacian_on_ring_four_matches_hand_values() {
        // all degrees 2, eps = 0.25: diagonal 0.5, neighbors 0.25,
        // circulant eigenvalues {1, 0.5, 0, 0.5}
        let m = MixingMatrix::lazy_laplacian(&Topology::ring(4), 0.25).unwrap();
        for i in 0..4 {
            assert!((m.w()[(i, i)] - 0.5).abs() < 1e-15);
            for &r in Topology::ring(4).neighbors(i) {
                assert!((m.w()[(i, r)] - 0.25).abs() < 1e-15);
            }
        }
        assert!((m.lambda() - 0.5).abs() < 1e-12);
        assert_mixing_invariants(&m);
    }

    #[test]
    fn lazy_laplacian_rejects_eps_outside_open_interval() {
        let topo = Topology::ring(4); // deg_max = 2, limit 0.5
        assert!(MixingMatrix::lazy_laplacian(&topo, 0.5).is_err());
        assert!(MixingMatrix::lazy_laplacian(&topo, 0.0).is_err());
        assert!(MixingMatrix::lazy_laplacian(&topo, -0.1).is_err());
        assert!(MixingMatrix::lazy_laplacian(&topo, 0.49).is_ok());
    }

    #[test]
    fn disconnected_topology_rejected() {
        let g = Topology::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        assert!(MixingMatrix::metropolis(&g).is_err());
    }

    #[test]
    fn metropolis_invariants_hold_on_random_geometric_graphs() {
        for seed in 0..5 {
            let g = Topology::random_geometric(25, 0.45, seed).unwrap();
            let m = MixingMatrix::metropolis(&g).unwrap();
            assert_mixing_invariants(&m);
            // sparsity pattern respects the graph
            for i in 0..25 {
                for r in 0..25 {
                    if i != r && !g.neighbors(i).contains(&r) {
                        assert_eq!(m.w()[(i, r)], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn consensus_preserves_the_mean_and_contracts_deviation() {
        let g = Topology::random_geometric(15, 0.5, 9).unwrap();
        let m = MixingMatrix::metropolis(&g).unwrap();
        let mut rng = crate::seeding::stream(3, crate::seeding::DOMAIN_INIT, 0, 0);
        let mut s = Stack::from_fn(15, 4, |_, _| rand::Rng::gen::<f64>(&mut rng) - 0.5);
        let mean0 = stack::mean_row(&s);
        let mut dev = stack::mean_sq_deviation(&s);
        for _ in 0..50 {
            s = m.consensus_step(&s).unwrap();
            let mean = stack::mean_row(&s);
            assert!((mean - &mean0).norm() < 1e-13);
            let next = stack::mean_sq_deviation(&s);
            assert!(next <= dev * m.lambda() * m.lambda() + 1e-15);
            dev = next;
        }
    }

    #[test]
    fn dac_tracks_a_switching_signal() {
        // brute-force check of the tracking recursion on a small graph:
        // the tracker mean must equal the signal mean after every step
        let g = Topology::ring(5);
        let m = MixingMatrix::metropolis(&g).unwrap();
        let signal = |k: u64| -> Stack {
            Stack::from_fn(5, 2, |i, j| ((i + j) as f64) * 0.5 + (k as f64).sin() * (i as f64))
        };
        let mut r_old = signal(0);
        let mut d = r_old.clone();
        for k in 1..100 {
            let r_new = signal(k);
            d = m.dac_step(&d, &r_new, &r_old).unwrap();
            let dm = stack::mean_row(&d);
            let rm = stack::mean_row(&r_new);
            assert!((dm - rm).norm() <= 1e-12);
            r_old = r_new;
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let m = MixingMatrix::metropolis(&Topology::ring(5)).unwrap();
        let s = Stack::zeros(4, 2);
        assert!(m.consensus_step(&s).is_err());
        let d = Stack::zeros(5, 2);
        let bad = Stack::zeros(5, 3);
        assert!(m.dac_step(&d, &bad, &d).is_err());
    }

    #[test]
    fn csv_round_trip_preserves_entries_and_lambda() {
        let m = MixingMatrix::metropolis(&Topology::random_geometric(10, 0.6, 1).unwrap())
            .unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let back = MixingMatrix::read_csv(buf.as_slice()).unwrap();
        assert_eq!(m.w(), back.w());
        assert_eq!(m.lambda(), back.lambda());
    }

    #[test]
    fn invalid_matrices_rejected_on_import() {
        // asymmetric
        assert!(MixingMatrix::read_csv("0.5,0.5\n0.4,0.6\n".as_bytes()).is_err());
        // rows do not sum to one
        assert!(MixingMatrix::read_csv("0.5,0.4\n0.4,0.5\n".as_bytes()).is_err());
        // negative entry
        assert!(MixingMatrix::read_csv("1.5,-0.5\n-0.5,1.5\n".as_bytes()).is_err());
        // not primitive: permutation has second modulus 1
        assert!(MixingMatrix::read_csv("0,1\n1,0\n".as_bytes()).is_err());
    }

    #[test]
    fn singleton_network_mixes_trivially() {
        let m = MixingMatrix::metropolis(&Topology::complete(1)).unwrap();
        assert_eq!(m.lambda(), 0.0);
        let s = stack::replicate(1, &DVector::from_vec(vec![2.0, -1.0]));
        assert_eq!(m.consensus_step(&s).unwrap(), s);
    }
}

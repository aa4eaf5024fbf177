//! Brownian lattices, bridge decompositions and the two noise couplings.

use std::collections::VecDeque;
use std::io::{self, Write};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{Purpose, SeedTree};

/// Values of a path at strictly increasing times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathLattice {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl PathLattice {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::Validation(format!(
                "lattice needs equal, nonzero lengths (got {} times, {} values)",
                times.len(),
                values.len()
            )));
        }
        check_times(&times)?;
        Ok(Self { times, values })
    }

    pub(crate) fn from_parts_unchecked(times: Vec<f64>, values: Vec<f64>) -> Self {
        debug_assert_eq!(times.len(), values.len());
        Self { times, values }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn last_value(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Index of an exact time, if present.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let i = self.times.partition_point(|&s| s < t);
        (i < self.times.len() && self.times[i] == t).then_some(i)
    }

    /// Sub-lattice on the given indices.
    pub fn select(&self, indices: &[usize]) -> PathLattice {
        PathLattice {
            times: indices.iter().map(|&i| self.times[i]).collect(),
            values: indices.iter().map(|&i| self.values[i]).collect(),
        }
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<f64>) {
        (self.times, self.values)
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::Validation("lattice times must be finite".into()));
    }
    if let Some(w) = times.windows(2).find(|w| w[0] >= w[1]) {
        return Err(Error::Validation(format!("lattice times must increase strictly ({} then {})", w[0], w[1])));
    }
    Ok(())
}

/// Brownian motion at `times`, starting from 0 at `times[0] = 0`.
pub fn sample_brownian_lattice<R: Rng + ?Sized>(rng: &mut R, times: &[f64]) -> Result<PathLattice> {
    if times.first() != Some(&0.0) {
        return Err(Error::Validation("Brownian lattices start at time 0".into()));
    }
    check_times(times)?;
    let mut values = Vec::with_capacity(times.len());
    values.push(0.0);
    for w in times.windows(2) {
        let z: f64 = rng.sample(StandardNormal);
        values.push(values.last().unwrap() + (w[1] - w[0]).sqrt() * z);
    }
    Ok(PathLattice::from_parts_unchecked(times.to_vec(), values))
}

/// Mean and variance of a Brownian bridge at `s` pinned to `va` at `a` and `vb` at `b`.
#[inline]
pub fn bridge_conditional(a: f64, va: f64, b: f64, vb: f64, s: f64) -> (f64, f64) {
    let span = b - a;
    let mean = va + (s - a) / span * (vb - va);
    let var = ((s - a) * (b - s) / span).max(0.0);
    (mean, var)
}

/// Inserts `new_times`, each drawn from the bridge law given its two
/// neighbouring knots. Existing knots are untouched.
pub fn refine_lattice<R: Rng + ?Sized>(rng: &mut R, lattice: &PathLattice, new_times: &[f64]) -> Result<PathLattice> {
    check_times(new_times)?;
    let (first, last) = (lattice.times[0], lattice.last_time());
    let mut times = Vec::with_capacity(lattice.len() + new_times.len());
    let mut values = Vec::with_capacity(times.capacity());
    let mut j = 0;
    for &s in new_times {
        if !(s > first && s < last) {
            return Err(Error::Range(s));
        }
        while lattice.times[j] < s {
            times.push(lattice.times[j]);
            values.push(lattice.values[j]);
            j += 1;
        }
        if lattice.times[j] == s {
            return Err(Error::Validation(format!("time {s} is already on the lattice")));
        }
        let (a, va) = (*times.last().unwrap(), *values.last().unwrap());
        let (mean, var) = bridge_conditional(a, va, lattice.times[j], lattice.values[j], s);
        let z: f64 = rng.sample(StandardNormal);
        times.push(s);
        values.push(mean + var.sqrt() * z);
    }
    times.extend_from_slice(&lattice.times[j..]);
    values.extend_from_slice(&lattice.values[j..]);
    Ok(PathLattice::from_parts_unchecked(times, values))
}

/// Fills `values[1..len-1]` with a bridge between the fixed endpoint values,
/// splitting index ranges at their midpoint breadth first.
///
/// For dyadic lengths the first `2^k - 1` draws land on the same times for
/// every finer dyadic length, so coarser fills are sublattices of finer ones
/// drawn from the same stream.
pub fn fill_bridge<R: Rng + ?Sized>(rng: &mut R, times: &[f64], values: &mut [f64]) {
    debug_assert_eq!(times.len(), values.len());
    let last = times.len().saturating_sub(1);
    if last < 2 {
        return;
    }
    let mut queue = VecDeque::with_capacity(last);
    queue.push_back((0usize, last));
    while let Some((lo, hi)) = queue.pop_front() {
        if hi - lo < 2 {
            continue;
        }
        let mid = lo + (hi - lo) / 2;
        let (mean, var) = bridge_conditional(times[lo], values[lo], times[hi], values[hi], times[mid]);
        let z: f64 = rng.sample(StandardNormal);
        values[mid] = mean + var.sqrt() * z;
        queue.push_back((lo, mid));
        queue.push_back((mid, hi));
    }
}

/// `W = Wbar + B` over a coarse index set of a fine lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct BridgeDecomposition {
    fine: PathLattice,
    coarse: Vec<usize>,
    wbar: Vec<f64>,
    bridge: Vec<f64>,
}

impl BridgeDecomposition {
    pub fn fine(&self) -> &PathLattice {
        &self.fine
    }

    pub fn coarse_indices(&self) -> &[usize] {
        &self.coarse
    }

    /// Piecewise-linear interpolation on the fine times.
    pub fn wbar(&self) -> &[f64] {
        &self.wbar
    }

    /// `B = W - Wbar`, zero at every coarse time.
    pub fn bridge(&self) -> &[f64] {
        &self.bridge
    }

    /// `Wbar + btilde` as a lattice on the fine times.
    pub fn recombine(&self, btilde: &[f64]) -> PathLattice {
        let values = self
            .wbar
            .iter()
            .zip(btilde)
            .zip(&self.fine.values)
            .enumerate()
            .map(|(j, ((wb, bt), w))| if self.is_coarse(j) { *w } else { wb + bt })
            .collect();
        PathLattice::from_parts_unchecked(self.fine.times.clone(), values)
    }

    fn is_coarse(&self, j: usize) -> bool {
        self.coarse.binary_search(&j).is_ok()
    }
}

/// Splits `lattice` into its interpolation through `coarse_indices` and the bridge remainder.
pub fn bridge_decompose(lattice: &PathLattice, coarse_indices: &[usize]) -> Result<BridgeDecomposition> {
    let n = lattice.len();
    if coarse_indices.first() != Some(&0) || coarse_indices.last() != Some(&(n - 1)) {
        return Err(Error::Validation("coarse indices must include the first and last fine index".into()));
    }
    if coarse_indices.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Validation("coarse indices must increase strictly".into()));
    }
    let (t, w) = (&lattice.times, &lattice.values);
    let mut wbar = vec![0.0; n];
    let mut bridge = vec![0.0; n];
    for pair in coarse_indices.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        wbar[a] = w[a];
        for j in a + 1..b {
            let (mean, _) = bridge_conditional(t[a], w[a], t[b], w[b], t[j]);
            wbar[j] = mean;
            bridge[j] = w[j] - mean;
        }
    }
    wbar[n - 1] = w[n - 1];
    Ok(BridgeDecomposition {
        fine: lattice.clone(),
        coarse: coarse_indices.to_vec(),
        wbar,
        bridge,
    })
}

/// How the replacement bridges of a coupling are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingKind {
    /// Fresh bridges independent of `B`.
    IndependentResample,
    /// `Btilde = -B`.
    Negation,
}

/// Replacement bridges `Btilde` for a decomposition.
pub fn coupled_bridge<R: Rng + ?Sized>(decomp: &BridgeDecomposition, rng: &mut R, kind: CouplingKind) -> Vec<f64> {
    match kind {
        CouplingKind::Negation => decomp.bridge.iter().map(|b| -b).collect(),
        CouplingKind::IndependentResample => {
            let mut out = vec![0.0; decomp.bridge.len()];
            for pair in decomp.coarse.windows(2) {
                let (a, b) = (pair[0], pair[1]);
                fill_bridge(rng, &decomp.fine.times[a..=b], &mut out[a..=b]);
            }
            out
        }
    }
}

/// `Wtilde = Wbar + Btilde`, equal to `W` at every coarse time.
pub fn couple<R: Rng + ?Sized>(decomp: &BridgeDecomposition, rng: &mut R, kind: CouplingKind) -> PathLattice {
    decomp.recombine(&coupled_bridge(decomp, rng, kind))
}

/// Writes `time,W,Wbar,B,Btilde,Wtilde` rows.
pub fn write_path_csv<W: Write>(out: &mut W, decomp: &BridgeDecomposition, btilde: &[f64]) -> io::Result<()> {
    let wtilde = decomp.recombine(btilde);
    writeln!(out, "time,W,Wbar,B,Btilde,Wtilde")?;
    for j in 0..decomp.fine.len() {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            decomp.fine.times[j], decomp.fine.values[j], decomp.wbar[j], decomp.bridge[j], btilde[j], wtilde.values[j]
        )?;
    }
    Ok(())
}

/// Uniform layout: `n` coarse intervals of `[0, horizon]`, each split into `m` substeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniformLayout {
    pub n: usize,
    pub m: usize,
}

impl UniformLayout {
    pub fn new(n: usize, m: usize) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::Validation(format!("layout needs n, m >= 1 (got n = {n}, m = {m})")));
        }
        Ok(Self { n, m })
    }

    pub fn fine_len(&self) -> usize {
        self.n * self.m + 1
    }

    pub fn fine_times(&self, horizon: f64) -> Vec<f64> {
        let total = (self.n * self.m) as f64;
        (0..self.fine_len()).map(|j| horizon * j as f64 / total).collect()
    }

    pub fn coarse_indices(&self) -> Vec<usize> {
        (0..=self.n).map(|i| i * self.m).collect()
    }
}

/// Brownian values at the coarse indices, from one skeleton stream per replication.
pub fn sample_skeleton(tree: &SeedTree, replication: u64, times: &[f64], coarse: &[usize], values: &mut [f64]) {
    let mut skeleton = tree.stream(Purpose::Skeleton, &[replication]);
    values[coarse[0]] = 0.0;
    for pair in coarse.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let z: f64 = skeleton.sample(StandardNormal);
        values[b] = values[a] + (times[b] - times[a]).sqrt() * z;
    }
}

/// Bridge-fills every coarse interval, interval `i` from stream `(purpose, key ++ [i])`.
pub fn fill_intervals(tree: &SeedTree, purpose: Purpose, key: &[u64], times: &[f64], coarse: &[usize], values: &mut [f64]) {
    let mut full = key.to_vec();
    full.push(0);
    for (i, pair) in coarse.windows(2).enumerate() {
        let (a, b) = (pair[0], pair[1]);
        *full.last_mut().unwrap() = i as u64;
        let mut rng = tree.stream(purpose, &full);
        fill_bridge(&mut rng, &times[a..=b], &mut values[a..=b]);
    }
}

/// Brownian driver on a fine lattice that contains the coarse times.
///
/// Coarse values come from one skeleton stream per replication; the inside
/// of each coarse interval is bridge-filled from its own stream.
pub fn sample_driver(tree: &SeedTree, replication: u64, times: &[f64], coarse: &[usize]) -> PathLattice {
    let mut values = vec![0.0; times.len()];
    sample_skeleton(tree, replication, times, coarse, &mut values);
    fill_intervals(tree, Purpose::Fill, &[replication], times, coarse, &mut values);
    PathLattice::from_parts_unchecked(times.to_vec(), values)
}

/// Independent pinned bridges on every coarse interval, one stream each.
pub fn sample_resampled_bridge(tree: &SeedTree, replication: u64, times: &[f64], coarse: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; times.len()];
    fill_intervals(tree, Purpose::Resample, &[replication], times, coarse, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn trivial_lattice() {
        let l = sample_brownian_lattice(&mut rng(1), &[0.0]).unwrap();
        assert_eq!(l.values(), &[0.0]);
        assert!(sample_brownian_lattice(&mut rng(1), &[0.0, 0.5, 0.5]).is_err());
        assert!(sample_brownian_lattice(&mut rng(1), &[0.1, 0.5]).is_err());
    }

    #[test]
    fn same_stream_same_path() {
        let times = [0.0, 0.1, 0.4, 1.0];
        let a = sample_brownian_lattice(&mut rng(9), &times).unwrap();
        let b = sample_brownian_lattice(&mut rng(9), &times).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bridge_formula() {
        assert_eq!(bridge_conditional(0.0, 0.0, 1.0, 2.0, 0.5), (1.0, 0.25));
        let (_, var) = bridge_conditional(0.0, 0.0, 1.0, 2.0, 1e-12);
        assert!(var < 1e-11);
    }

    #[test]
    fn refine_keeps_knots() {
        let base = PathLattice::new(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, -1.0]).unwrap();
        let fine = refine_lattice(&mut rng(3), &base, &[0.25, 0.5, 1.5]).unwrap();
        assert_eq!(fine.times(), &[0.0, 0.25, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(fine.values()[0], 0.0);
        assert_eq!(fine.values()[3], 2.0);
        assert_eq!(fine.values()[5], -1.0);
        assert!(matches!(refine_lattice(&mut rng(3), &base, &[2.5]), Err(Error::Range(_))));
        assert!(refine_lattice(&mut rng(3), &base, &[1.0]).is_err());
    }

    #[test]
    fn decomposition_examples() {
        let l = PathLattice::new(vec![0.0, 0.5, 1.0], vec![0.0, 1.0, 0.0]).unwrap();
        let d = bridge_decompose(&l, &[0, 2]).unwrap();
        assert_eq!(d.wbar()[1], 0.0);
        assert_eq!(d.bridge()[1], 1.0);
        let neg = couple(&d, &mut rng(0), CouplingKind::Negation);
        assert_eq!(neg.values()[1], -1.0);

        let all = bridge_decompose(&l, &[0, 1, 2]).unwrap();
        assert!(all.bridge().iter().all(|&b| b == 0.0));

        let l = PathLattice::new(vec![0.0, 0.25, 0.5, 1.0], vec![0.0, 1.0, 1.0, 2.0]).unwrap();
        let d = bridge_decompose(&l, &[0, 2, 3]).unwrap();
        assert_eq!(d.wbar()[1], 0.5);
        assert_eq!(d.bridge()[1], 0.5);
        assert!(bridge_decompose(&l, &[1, 3]).is_err());
    }

    #[test]
    fn coupling_pins_coarse_times() {
        let layout = UniformLayout::new(4, 8).unwrap();
        let times = layout.fine_times(1.0);
        let coarse = layout.coarse_indices();
        let w = sample_driver(&SeedTree::new(5), 0, &times, &coarse);
        let d = bridge_decompose(&w, &coarse).unwrap();
        for kind in [CouplingKind::IndependentResample, CouplingKind::Negation] {
            let wt = couple(&d, &mut rng(2), kind);
            for &c in &coarse {
                assert_eq!(wt.values()[c], w.values()[c]);
            }
        }
    }

    #[test]
    fn dyadic_fill_is_nested() {
        let tree = SeedTree::new(11);
        let coarse_layout = UniformLayout::new(3, 64).unwrap();
        let fine_layout = UniformLayout::new(3, 128).unwrap();
        let a = sample_driver(&tree, 2, &coarse_layout.fine_times(1.0), &coarse_layout.coarse_indices());
        let b = sample_driver(&tree, 2, &fine_layout.fine_times(1.0), &fine_layout.coarse_indices());
        for (j, v) in a.values().iter().enumerate() {
            assert_eq!(*v, b.values()[2 * j]);
        }
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let l = PathLattice::new(vec![0.0, 0.5, 1.0], vec![0.0, 1.0, 0.0]).unwrap();
        let d = bridge_decompose(&l, &[0, 2]).unwrap();
        let mut out = Vec::new();
        write_path_csv(&mut out, &d, &[0.0, -1.0, 0.0]).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().next().unwrap(), "time,W,Wbar,B,Btilde,Wtilde");
        assert_eq!(text.lines().nth(2).unwrap(), "0.5,1,0,1,-1,-1");
    }
}

//! Measure-space embedding of the codeword partition.
//!
//! Under the sectored gain model every statistic depends on beam supports
//! only through their measures, so the 2-D AoD/AoA square is flattened to the
//! interval `[0, pi^2)` and each codeword's cell `U_d` becomes a consecutive
//! half-open interval of length `omega_d`, laid out in canonical codebook
//! order. Zero-width codewords keep an (empty) interval at their canonical
//! position so codeword/cell indexing stays total.

use rand::Rng;

use crate::codebook::{Codebook, Codeword};
use crate::error::{Error, Result};
use crate::waterfill::BeamwidthAllocation;
use crate::Scalar;

/// A point of the flattened AoD/AoA space, in `[0, pi^2)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FlatAngle<F>(F);

impl<F: Scalar> FlatAngle<F> {
    pub fn new(value: F) -> Result<Self> {
        if !(value >= F::zero() && value < F::pi_squared()) {
            return Err(Error::invalid(format!(
                "flat angle {value} outside [0, pi^2)"
            )));
        }
        Ok(FlatAngle(value))
    }

    pub fn value(&self) -> F {
        self.0
    }

    /// Uniform sample; the cell hit probability is `omega_d / pi^2`.
    pub fn sample<R: Rng>(rng: &mut R) -> Self {
        // Sampling is done in f64 so that f32 and f64 partitions consume the
        // same random stream.
        let u: f64 = rng.gen::<f64>();
        FlatAngle(F::of(u) * F::pi_squared())
    }
}

/// The partition `{U_d}` of `[0, pi^2)` into consecutive codeword cells.
#[derive(Debug, Clone)]
pub struct Partition<F> {
    codebook: Codebook,
    starts: Vec<F>,
    ends: Vec<F>,
}

/// Tolerance on `sum omega = pi^2` for partition construction.
fn sum_tolerance<F: Scalar>() -> F {
    F::of(1e-9).max(F::epsilon() * F::of(64.0) * F::pi_squared())
}

impl<F: Scalar> Partition<F> {
    /// Lay the allocation out as consecutive intervals in canonical order.
    pub fn build(omega: &BeamwidthAllocation<F>, cb: &Codebook) -> Result<Self> {
        if omega.len() != cb.size() {
            return Err(Error::invalid(
                "allocation size does not match codebook size",
            ));
        }
        let total = omega.total();
        if (total - F::pi_squared()).abs() > sum_tolerance::<F>() {
            return Err(Error::invalid(format!(
                "beamwidths sum to {total}, expected pi^2"
            )));
        }
        let n = cb.size();
        let mut starts = Vec::with_capacity(n);
        let mut ends = Vec::with_capacity(n);
        let mut cursor = F::zero();
        for i in 0..n {
            let w = omega.get(i);
            if w < F::zero() {
                return Err(Error::invalid("negative beamwidth"));
            }
            // Clamp to pi^2 so rounding overshoot cannot produce boundaries
            // outside the space or negative cell measures.
            starts.push(cursor.min(F::pi_squared()));
            cursor += w;
            ends.push(cursor.min(F::pi_squared()));
        }
        // Absorb accumulated rounding so the last cell closes the space.
        if let Some(last) = ends.last_mut() {
            *last = F::pi_squared();
        }
        Ok(Partition {
            codebook: cb.clone(),
            starts,
            ends,
        })
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn cell(&self, index: usize) -> (Codeword, F, F) {
        (
            self.codebook.codeword(index),
            self.starts[index],
            self.ends[index],
        )
    }

    pub fn cell_measure(&self, index: usize) -> F {
        self.ends[index] - self.starts[index]
    }

    pub fn num_cells(&self) -> usize {
        self.starts.len()
    }

    /// Measure of the slot-`k` beam `B_k`, the union of cells of codewords
    /// with a 1 in slot `k`. Slots are indexed `1..=L`.
    pub fn beam_measure(&self, k: u32) -> Result<F> {
        if k < 1 || k > self.codebook.len_slots() {
            return Err(Error::invalid(format!(
                "slot {k} outside 1..={}",
                self.codebook.len_slots()
            )));
        }
        let mut sum = F::zero();
        for i in 0..self.num_cells() {
            if self.codebook.codeword(i).bit(k) {
                sum += self.cell_measure(i);
            }
        }
        Ok(sum)
    }

    /// All beam measures, slot 1 first.
    pub fn beam_measures(&self) -> Vec<F> {
        (1..=self.codebook.len_slots())
            .map(|k| self.beam_measure(k).expect("slot in range"))
            .collect()
    }

    /// Index of the cell containing `theta` (binary search over cumulative
    /// boundaries; zero-width cells cannot contain any point).
    pub fn cell_index(&self, theta: FlatAngle<F>) -> usize {
        let t = theta.value();
        let idx = self.ends.partition_point(|&e| e <= t);
        idx.min(self.num_cells() - 1)
    }

    /// The codeword whose cell contains `theta`; by construction this is the
    /// error-free detection sequence of the angle.
    pub fn cell_codeword(&self, theta: FlatAngle<F>) -> Codeword {
        self.codebook.codeword(self.cell_index(theta))
    }

    /// CSV export: `codeword,start_rad2,end_rad2,measure_rad2`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("codeword,start_rad2,end_rad2,measure_rad2\n");
        for i in 0..self.num_cells() {
            let (c, s, e) = self.cell(i);
            out.push_str(&format!("{c},{s},{e},{}\n", e - s));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::Codebook;
    use crate::waterfill::{allocate, BeamwidthAllocation, PowerParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const PI2: f64 = std::f64::consts::PI * std::f64::consts::PI;

    fn hamming_partition() -> Partition<f64> {
        let cb = Codebook::hamming74().unwrap();
        let params = PowerParams::from_kappa(16.0, 1.0).unwrap();
        let alloc = allocate(&params, &cb).unwrap();
        Partition::build(&alloc, &cb).unwrap()
    }

    #[test]
    fn uniform_split_has_equal_cells() {
        let cb = Codebook::exhaustive(16).unwrap();
        let alloc = BeamwidthAllocation::<f64>::uniform(&cb);
        let p = Partition::build(&alloc, &cb).unwrap();
        for i in 0..16 {
            assert!((p.cell_measure(i) - PI2 / 16.0).abs() < 1e-12);
        }
        for k in 1..=16 {
            // Exactly one codeword has a 1 in each slot.
            assert!((p.beam_measure(k).unwrap() - PI2 / 16.0).abs() < 1e-12);
        }
    }

    #[test]
    fn hamming_first_cell_is_all_zeros() {
        let p = hamming_partition();
        let (c, s, e) = p.cell(0);
        assert_eq!(c.word(), 0);
        assert_eq!(s, 0.0);
        assert!((e - PI2 / 16.0 * 13.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_single_cell_partition() {
        let cb = Codebook::from_words(vec![0], 7).unwrap();
        let alloc = BeamwidthAllocation::from_omegas(vec![PI2], &cb).unwrap();
        let p = Partition::build(&alloc, &cb).unwrap();
        assert_eq!(p.num_cells(), 1);
        let theta = FlatAngle::new(PI2 * 0.999_999).unwrap();
        assert_eq!(p.cell_codeword(theta).word(), 0);
    }

    #[test]
    fn build_rejects_bad_allocations() {
        let cb = Codebook::exhaustive(4).unwrap();
        let short = BeamwidthAllocation::from_omegas(vec![PI2 / 2.0; 2], &cb);
        assert!(short.is_err());
        let wrong_sum = BeamwidthAllocation::from_omegas(vec![1.0; 4], &cb).unwrap();
        assert!(Partition::build(&wrong_sum, &cb).is_err());
    }

    #[test]
    fn boundary_cells_skip_zero_width() {
        let p = hamming_partition();
        // theta = 0 lands in the first positive cell.
        let first = p.cell_codeword(FlatAngle::new(0.0).unwrap());
        assert_eq!(first.word(), 0);
        // Just below pi^2: the all-ones codeword has zero width, so the hit
        // is the last positive-width cell.
        let last = p.cell_codeword(FlatAngle::new(PI2 * (1.0 - 1e-12)).unwrap());
        let idx = p.codebook().index_of(last.word()).unwrap();
        assert!(p.cell_measure(idx) > 0.0);
        assert_ne!(last.word(), (1 << 7) - 1);
    }

    #[test]
    fn round_trip_against_membership_oracle() {
        let p = hamming_partition();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..10_000 {
            let theta = FlatAngle::sample(&mut rng);
            let c = p.cell_codeword(theta);
            for k in 1..=7 {
                // Brute-force membership in B_k: theta in some cell of a
                // codeword with a 1 in slot k.
                let in_bk = (0..p.num_cells()).any(|i| {
                    p.codebook.codeword(i).bit(k)
                        && theta.value() >= p.starts[i]
                        && theta.value() < p.ends[i]
                });
                assert_eq!(c.bit(k), in_bk, "theta={} k={k}", theta.value());
            }
        }
    }

    #[test]
    fn beam_measure_identity() {
        // sum_k |B_k| = sum_d W(d) omega_d.
        let cb = Codebook::hamming74().unwrap();
        let params = PowerParams::from_kappa(16.0, 1.0).unwrap();
        let alloc = allocate(&params, &cb).unwrap();
        let p = Partition::build(&alloc, &cb).unwrap();
        let lhs: f64 = p.beam_measures().iter().sum();
        let rhs = alloc.weighted_total(&cb);
        assert!((lhs - rhs).abs() < 1e-9);
        // Weight-class value from the analytic allocation.
        assert!((rhs - 23.0295).abs() < 1e-3, "{rhs}");
    }

    #[test]
    fn sampling_is_uniform_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000usize;
        let mean: f64 = (0..n)
            .map(|_| FlatAngle::<f64>::sample(&mut rng).value())
            .sum::<f64>()
            / n as f64;
        // Uniform mean pi^2/2, std pi^2/sqrt(12 n).
        let se = PI2 / (12.0 * n as f64).sqrt();
        assert!((mean - PI2 / 2.0).abs() < 3.0 * se, "mean={mean}");

        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            assert_eq!(
                FlatAngle::<f64>::sample(&mut r1).value(),
                FlatAngle::<f64>::sample(&mut r2).value()
            );
        }
    }

    #[test]
    fn empirical_cell_frequencies_match_measures() {
        let p = hamming_partition();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 100_000usize;
        let mut counts = vec![0usize; p.num_cells()];
        for _ in 0..n {
            counts[p.cell_index(FlatAngle::sample(&mut rng))] += 1;
        }
        for (i, &count) in counts.iter().enumerate() {
            let q = p.cell_measure(i) / PI2;
            let se = (q * (1.0 - q) / n as f64).sqrt();
            let freq = count as f64 / n as f64;
            assert!(
                (freq - q).abs() <= 3.0 * se + 1e-12,
                "cell {i}: freq={freq} q={q}"
            );
        }
    }
}

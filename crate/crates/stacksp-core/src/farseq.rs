//! Ordering constraints into (δ,γ)-far sequences.
//!
//! A position is δ-far when no later position within the window ⌈δM⌉ shares
//! either query with it. Orders come in three flavors: the canonical
//! identity, seeded random shuffles retried until the far fraction clears
//! 1−γ, and a deterministic greedy driven by a pessimistic estimator.
//!
//! The estimator Ŷ upper-bounds the expected number of non-far positions by
//! summing, over ordered pairs of constraints sharing a query, the exact
//! probability that the second lands in the window after the first under a
//! uniform random completion of the current partial placement. Greedy steps
//! minimize Ŷ; because Ŷ averages correctly over the next choice, its trace
//! is non-increasing and the final value bounds the non-far count.

use crate::csp::ConstraintSystem;
use crate::rng::{random_permutation, SplitMix64};
use crate::scalar::{ceil_mul, Rat};
use num::bigint::BigInt;
use num::{One, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceOrder {
    /// `perm[k]` is the constraint id occupying position `k` (0-based).
    pub perm: Vec<usize>,
    pub delta: Rat,
    /// Window size ⌈δM⌉.
    pub window: usize,
}

#[derive(Debug, Error)]
pub enum FarSeqError {
    #[error("permutation is not a bijection on the constraint set")]
    NotAPermutation,
    #[error("delta must lie in (0, 1]")]
    BadDelta,
    #[error("no (δ,γ)-far order within {attempts} attempts; best fraction {best}")]
    RetriesExhausted { attempts: usize, best: String },
}

impl SequenceOrder {
    pub fn new(perm: Vec<usize>, delta: Rat, m: usize) -> Result<Self, FarSeqError> {
        if delta <= Rat::zero() || delta > Rat::one() {
            return Err(FarSeqError::BadDelta);
        }
        if perm.len() != m {
            return Err(FarSeqError::NotAPermutation);
        }
        let mut seen = vec![false; m];
        for &p in &perm {
            if p >= m || seen[p] {
                return Err(FarSeqError::NotAPermutation);
            }
            seen[p] = true;
        }
        let window = ceil_mul(&delta, m);
        Ok(SequenceOrder {
            perm,
            delta,
            window,
        })
    }

    pub fn identity(m: usize, delta: Rat) -> Result<Self, FarSeqError> {
        Self::new((0..m).collect(), delta, m)
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }
}

/// Far flag per position: true iff no position in the next ⌈δM⌉ slots shares
/// a query. Positions whose window is empty are vacuously far.
pub fn delta_far_flags(cs: &ConstraintSystem, order: &SequenceOrder) -> Vec<bool> {
    let m = order.len();
    let d = order.window;
    let mut flags = vec![true; m];
    for i in 0..m {
        let r = order.perm[i];
        for j in (i + 1)..m.min(i + d + 1) {
            let s = order.perm[j];
            if cs.q1_id[r] == cs.q1_id[s] || cs.q2_id[r] == cs.q2_id[s] {
                flags[i] = false;
                break;
            }
        }
    }
    flags
}

/// Fraction of far positions, exact.
pub fn far_fraction(cs: &ConstraintSystem, order: &SequenceOrder) -> Rat {
    let flags = delta_far_flags(cs, order);
    let far = flags.iter().filter(|&&f| f).count();
    Rat::new(BigInt::from(far), BigInt::from(order.len().max(1)))
}

#[derive(Debug, Clone)]
pub struct RandomOrderOutcome {
    pub order: SequenceOrder,
    pub attempts: usize,
    pub fraction: Rat,
}

/// Draws seeded uniform permutations until the far fraction reaches 1−γ.
pub fn random_far_order(
    cs: &ConstraintSystem,
    delta: &Rat,
    gamma: &Rat,
    seed: u64,
    max_retries: usize,
) -> Result<RandomOrderOutcome, FarSeqError> {
    let m = cs.constraint_count();
    let threshold = Rat::one() - gamma;
    let mut rng = SplitMix64::new(seed);
    let mut best: Option<Rat> = None;
    for attempt in 1..=max_retries {
        let perm = random_permutation(m, &mut rng);
        let order = SequenceOrder::new(perm, delta.clone(), m)?;
        let fraction = far_fraction(cs, &order);
        if fraction >= threshold {
            return Ok(RandomOrderOutcome {
                order,
                attempts: attempt,
                fraction,
            });
        }
        best = Some(match best {
            None => fraction,
            Some(b) => b.max(fraction),
        });
    }
    Err(FarSeqError::RetriesExhausted {
        attempts: max_retries,
        best: best
            .map(|b| crate::scalar::fmt_rat(&b))
            .unwrap_or_else(|| "none".into()),
    })
}

/// Ordered pairs within a window of a contiguous free region: the number of
/// position pairs (a, b) with 0 < b − a ≤ d among m free slots.
fn window_pair_count(m: usize, d: usize) -> i128 {
    if m < 2 {
        return 0;
    }
    let dd = d.min(m - 1) as i128;
    let mm = m as i128;
    dd * mm - dd * (dd + 1) / 2
}

#[derive(Debug, Clone)]
pub struct DerandomizedOutcome {
    pub order: SequenceOrder,
    /// Estimator values Ŷ_0 … Ŷ_M; Ŷ_k conditions on the first k placements.
    pub trace: Vec<Rat>,
    pub fraction: Rat,
}

/// Greedy conditional-expectation ordering. Deterministic: ties pick the
/// lowest constraint id.
pub fn derandomized_far_order(
    cs: &ConstraintSystem,
    delta: &Rat,
) -> Result<DerandomizedOutcome, FarSeqError> {
    let m = cs.constraint_count();
    if *delta <= Rat::zero() || *delta > Rat::one() {
        return Err(FarSeqError::BadDelta);
    }
    let d = ceil_mul(delta, m);
    let nbr = cs.shared_neighbors();

    let mut pos: Vec<Option<usize>> = vec![None; m];
    let mut placed: Vec<usize> = Vec::with_capacity(m);
    // Unplaced-neighbor counts and the ordered both-unplaced pair count.
    let mut fd: Vec<i128> = nbr.iter().map(|l| l.len() as i128).collect();
    let mut n_pairs: i128 = fd.iter().sum();
    let mut ind_count: i128 = 0;

    let rat_from = |num: i128, den: i128| Rat::new(BigInt::from(num), BigInt::from(den));
    let mut trace: Vec<Rat> = Vec::with_capacity(m + 1);
    trace.push(if m >= 2 {
        rat_from(
            n_pairs * window_pair_count(m, d),
            (m as i128) * (m as i128 - 1),
        )
    } else {
        Rat::zero()
    });

    for k in 0..m {
        let mp = (m - k - 1) as i128; // free slots after this placement
        let cnt_after = |q: usize| -> i128 {
            let hi = (q + d).min(m - 1) as i128;
            (hi - k as i128).max(0)
        };
        // Candidate-independent part of the placed-free sum.
        let mut base: i128 = 0;
        for (p, &a) in placed.iter().enumerate() {
            base += cnt_after(p) * fd[a];
        }
        let nn_weight = window_pair_count(mp as usize, d);

        let mut best_c: Option<(i128, usize)> = None;
        for c in 0..m {
            if pos[c].is_some() {
                continue;
            }
            let mut ind_new = ind_count;
            let mut placed_nbr_cnt: i128 = 0;
            for &b in &nbr[c] {
                if let Some(q) = pos[b] {
                    if k - q <= d {
                        ind_new += 1;
                    }
                    placed_nbr_cnt += cnt_after(q);
                }
            }
            let pf = base - placed_nbr_cnt + cnt_after(k) * fd[c];
            let nn = n_pairs - 2 * fd[c];
            let scaled = if mp >= 2 {
                ind_new * mp * (mp - 1) + pf * (mp - 1) + nn * nn_weight
            } else {
                ind_new + pf
            };
            let better = match best_c {
                None => true,
                Some((bs, bc)) => scaled < bs || (scaled == bs && c < bc),
            };
            if better {
                best_c = Some((scaled, c));
            }
        }
        let (scaled, chosen) = best_c.expect("an unplaced constraint exists");
        // Commit. `fd[r]` must keep counting unplaced neighbors for every
        // constraint, placed or not: placed-free terms read it later.
        for &b in &nbr[chosen] {
            if let Some(q) = pos[b] {
                if k - q <= d {
                    ind_count += 1;
                }
            }
        }
        n_pairs -= 2 * fd[chosen];
        for &b in &nbr[chosen] {
            fd[b] -= 1;
        }
        pos[chosen] = Some(k);
        placed.push(chosen);
        trace.push(if mp >= 2 {
            rat_from(scaled, mp * (mp - 1))
        } else {
            rat_from(scaled, 1)
        });
    }

    let mut perm = vec![0usize; m];
    for (c, p) in pos.iter().enumerate() {
        perm[p.expect("all constraints placed")] = c;
    }
    let order = SequenceOrder::new(perm, delta.clone(), m)?;
    let fraction = far_fraction(cs, &order);
    Ok(DerandomizedOutcome {
        order,
        trace,
        fraction,
    })
}

/// Number of non-far positions; the derandomized guarantee bounds this by
/// the final estimator value.
pub fn non_far_count(cs: &ConstraintSystem, order: &SequenceOrder) -> usize {
    delta_far_flags(cs, order).iter().filter(|&&f| !f).count()
}

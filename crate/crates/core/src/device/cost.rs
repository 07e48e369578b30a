//! Memory cost rules for one half-warp request.

/// Serialization degree of one half-warp shared-memory request, given the
/// word address of each participating thread.
///
/// Each step picks a broadcast word (the one named by the lowest remaining
/// thread) and serves every thread reading it, plus one thread for each other
/// bank still requested. Only one word can be broadcast per step, so two
/// distinct words each read by several threads cost two steps even when they
/// sit in different banks.
pub fn shared_conflict_cost(addresses: &[usize], banks: usize) -> usize {
    if addresses.is_empty() {
        return 0;
    }
    let mut pending: Vec<usize> = addresses.to_vec();
    let mut steps = 0;
    while !pending.is_empty() {
        steps += 1;
        let word = pending[0];
        let mut used_banks = vec![false; banks];
        used_banks[word % banks] = true;
        pending.retain(|&a| {
            if a == word {
                return false;
            }
            let b = a % banks;
            if used_banks[b] {
                true
            } else {
                used_banks[b] = true;
                false
            }
        });
    }
    steps
}

/// Memory transactions for one half-warp request of `(buffer, word index)`
/// pairs: one per distinct aligned window of `window` words.
pub fn global_transaction_count(accesses: &[(usize, usize)], window: usize) -> usize {
    let mut w: Vec<(usize, usize)> = accesses.iter().map(|&(b, i)| (b, i / window)).collect();
    w.sort_unstable();
    w.dedup();
    w.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn shared_examples() {
        assert_eq!(shared_conflict_cost(&[7; 16], 16), 1);
        let odd: Vec<usize> = (0..16).map(|i| i * 21).collect();
        assert_eq!(shared_conflict_cost(&odd, 16), 1);
        let stride2: Vec<usize> = (0..16).map(|i| 2 * i).collect();
        assert_eq!(shared_conflict_cost(&stride2, 16), 2);
        let same_bank: Vec<usize> = (0..16).map(|i| 16 * i).collect();
        assert_eq!(shared_conflict_cost(&same_bank, 16), 16);
        // Two broadcast groups in different banks.
        let mut two = vec![3; 8];
        two.extend([40; 8]);
        assert_eq!(shared_conflict_cost(&two, 16), 2);
        assert_eq!(shared_conflict_cost(&[], 16), 0);
    }

    #[test]
    fn global_examples() {
        let aligned: Vec<(usize, usize)> = (0..16).map(|i| (0, 32 + i)).collect();
        assert_eq!(global_transaction_count(&aligned, 16), 1);
        let permuted: Vec<(usize, usize)> = (0..16).map(|i| (0, 16 + (i * 5) % 16)).collect();
        assert_eq!(global_transaction_count(&permuted, 16), 1);
        let offset: Vec<(usize, usize)> = (0..16).map(|i| (0, 1 + i)).collect();
        assert_eq!(global_transaction_count(&offset, 16), 2);
        let scattered: Vec<(usize, usize)> = (0..16).map(|i| (0, 16 * i + 3)).collect();
        assert_eq!(global_transaction_count(&scattered, 16), 16);
        assert_eq!(global_transaction_count(&[(0, 0), (1, 0)], 16), 2);
    }

    proptest! {
        #[test]
        fn cost_bounds(addrs in proptest::collection::vec(0usize..512, 1..=16)) {
            let c = shared_conflict_cost(&addrs, 16);
            let mut distinct = addrs.clone();
            distinct.sort_unstable();
            distinct.dedup();
            let mut per_bank = [0usize; 16];
            for a in &distinct {
                per_bank[a % 16] += 1;
            }
            let bank_max = *per_bank.iter().max().unwrap();
            prop_assert!(c >= bank_max);
            prop_assert!(c <= distinct.len());
            prop_assert!(c >= 1);
        }
    }
}

//! Size-bounded subset enumeration.
//!
//! Edge tables are built from `k`-subsets of small pools, never from a power set.

/// Calls `f` with every `k`-subset of `pool`, in lexicographic order of positions.
///
/// `k = 0` yields the empty subset once; `k > pool.len()` yields nothing.
pub fn for_each_subset<T: Copy>(pool: &[T], k: usize, mut f: impl FnMut(&[T])) {
    let n = pool.len();
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    let mut buf: Vec<T> = idx.iter().map(|&i| pool[i]).collect();
    loop {
        f(&buf);
        // Rightmost position that can still advance.
        let Some(p) = (0..k).rev().find(|&p| idx[p] < n - k + p) else {
            return;
        };
        idx[p] += 1;
        buf[p] = pool[idx[p]];
        for q in p + 1..k {
            idx[q] = idx[q - 1] + 1;
            buf[q] = pool[idx[q]];
        }
    }
}

/// All `k`-subsets of `pool` as owned vectors.
pub fn subsets<T: Copy>(pool: &[T], k: usize) -> Vec<Vec<T>> {
    let mut out = Vec::new();
    for_each_subset(pool, k, |s| out.push(s.to_vec()));
    out
}

/// `C(n, k)`, or `None` on overflow.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for j in 0..k {
        // acc * (n - j) is divisible by (j + 1) after the multiplication.
        acc = acc.checked_mul((n - j) as u128)? / (j as u128 + 1);
    }
    Some(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerates_lexicographically() {
        assert_eq!(subsets(&[1, 2, 3, 4], 2), vec![
            vec![1, 2],
            vec![1, 3],
            vec![1, 4],
            vec![2, 3],
            vec![2, 4],
            vec![3, 4]
        ]);
        assert_eq!(subsets(&[7, 8], 0), vec![Vec::<i32>::new()]);
        assert!(subsets(&[7, 8], 3).is_empty());
    }

    #[test]
    fn counts_match_binomials() {
        let pool: Vec<u32> = (0..9).collect();
        for k in 0..=9 {
            assert_eq!(subsets(&pool, k).len() as u128, binomial(9, k as u64).unwrap());
        }
        assert_eq!(binomial(10, 3), Some(120));
        assert_eq!(binomial(3, 5), Some(0));
        assert_eq!(binomial(60, 30), Some(118264581564861424));
    }
}

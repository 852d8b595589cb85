//! Subsets of users as 64-bit masks, with colexicographic ranking.
//!
//! Enumerating masks of fixed popcount in increasing integer order visits the
//! subsets in colex order, so the rank of a subset equals its position in the
//! enumeration. All segment and group orders in the crate derive from this.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::binomial::choose;

/// Largest supported number of users.
pub const MAX_USERS: usize = 64;

/// A set of user indices in `0..64`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(into = "Vec<usize>", try_from = "Vec<usize>")]
pub struct UserSet(u64);

impl UserSet {
    pub const EMPTY: UserSet = UserSet(0);

    pub fn from_bits(bits: u64) -> Self {
        UserSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    /// `{0, 1, ..., n-1}`.
    pub fn full(n: usize) -> Self {
        assert!(n <= MAX_USERS);
        if n == MAX_USERS {
            UserSet(u64::MAX)
        } else {
            UserSet((1u64 << n) - 1)
        }
    }

    pub fn singleton(k: usize) -> Self {
        assert!(k < MAX_USERS);
        UserSet(1u64 << k)
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, k: usize) -> bool {
        k < MAX_USERS && self.0 & (1u64 << k) != 0
    }

    pub fn with(self, k: usize) -> Self {
        UserSet(self.0 | (1u64 << k))
    }

    pub fn without(self, k: usize) -> Self {
        UserSet(self.0 & !(1u64 << k))
    }

    pub fn intersection(self, other: UserSet) -> Self {
        UserSet(self.0 & other.0)
    }

    pub fn union(self, other: UserSet) -> Self {
        UserSet(self.0 | other.0)
    }

    pub fn is_subset(self, other: UserSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Members in increasing order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let k = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(k)
            }
        })
    }

    /// Colexicographic rank among subsets of the same size:
    /// `sum_i C(c_i, i + 1)` over the sorted members `c_0 < c_1 < ...`.
    pub fn colex_rank(self) -> usize {
        self.iter()
            .enumerate()
            .map(|(i, c)| choose(c as u64, i as u64 + 1) as usize)
            .sum()
    }

    /// Inverse of [`UserSet::colex_rank`] for `size`-subsets.
    pub fn from_colex_rank(mut rank: usize, size: usize) -> Self {
        let mut set = UserSet::EMPTY;
        for i in (1..=size).rev() {
            // largest c with C(c, i) <= rank
            let mut c = i - 1;
            while choose(c as u64 + 1, i as u64) as usize <= rank {
                c += 1;
            }
            rank -= choose(c as u64, i as u64) as usize;
            set = set.with(c);
        }
        set
    }
}

impl fmt::Debug for UserSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

impl fmt::Display for UserSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, k) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}")?;
        }
        write!(f, "}}")
    }
}

impl From<UserSet> for Vec<usize> {
    fn from(s: UserSet) -> Self {
        s.iter().collect()
    }
}

impl TryFrom<Vec<usize>> for UserSet {
    type Error = String;

    fn try_from(v: Vec<usize>) -> Result<Self, Self::Error> {
        let mut set = UserSet::EMPTY;
        for k in v {
            if k >= MAX_USERS {
                return Err(format!("user index {k} exceeds {}", MAX_USERS - 1));
            }
            if set.contains(k) {
                return Err(format!("duplicate user index {k}"));
            }
            set = set.with(k);
        }
        Ok(set)
    }
}

impl FromIterator<usize> for UserSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        iter.into_iter().fold(UserSet::EMPTY, UserSet::with)
    }
}

/// All `size`-subsets of `{0..n}` in colex order.
pub fn subsets_of_size(n: usize, size: usize) -> impl Iterator<Item = UserSet> {
    assert!(n <= MAX_USERS, "at most {MAX_USERS} users are supported");
    let limit: u128 = 1u128 << n;
    let mut next: Option<u64> = if size > n {
        None
    } else if size == 0 {
        Some(0)
    } else {
        Some(UserSet::full(size).bits())
    };
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == 0 {
            None
        } else {
            // Gosper's hack
            let c = cur & cur.wrapping_neg();
            let r = cur as u128 + c as u128;
            if r >= limit {
                None
            } else {
                let r = r as u64;
                Some((((r ^ cur) >> 2) / c) | r)
            }
        };
        Some(UserSet(cur))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_counts_and_ranks() {
        for n in 0..=8 {
            for size in 0..=n + 1 {
                let all: Vec<_> = subsets_of_size(n, size).collect();
                assert_eq!(
                    all.len() as u128,
                    choose(n as u64, size as u64),
                    "n={n} size={size}"
                );
                for (i, s) in all.iter().enumerate() {
                    assert_eq!(s.len(), size);
                    assert_eq!(s.colex_rank(), i);
                    assert_eq!(UserSet::from_colex_rank(i, size), *s);
                }
            }
        }
    }

    #[test]
    fn colex_order_for_pairs_of_four() {
        let pairs: Vec<Vec<usize>> = subsets_of_size(4, 2).map(Vec::from).collect();
        assert_eq!(
            pairs,
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![1, 2],
                vec![0, 3],
                vec![1, 3],
                vec![2, 3]
            ]
        );
    }

    #[test]
    fn full_width_sets() {
        assert_eq!(subsets_of_size(64, 64).count(), 1);
        assert_eq!(subsets_of_size(64, 1).count(), 64);
        assert_eq!(UserSet::full(64).len(), 64);
    }

    #[test]
    fn serde_as_sorted_list() {
        let s: UserSet = [3, 0, 5].into_iter().collect();
        assert_eq!(serde_json::to_string(&s).unwrap(), "[0,3,5]");
        let back: UserSet = serde_json::from_str("[5,0,3]").unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<UserSet>("[1,1]").is_err());
    }
}

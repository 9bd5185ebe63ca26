use std::cmp::Ordering;
use std::fmt;

/// A canonical (sorted, duplicate-free) set of variable ordinals.
///
/// Ordered by size first, then lexicographically, which is the row order of
/// every moment matrix and the line order of moment files.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct IndexSet(Vec<u32>);

impl IndexSet {
    pub fn empty() -> Self {
        IndexSet(Vec::new())
    }

    pub fn singleton(i: usize) -> Self {
        IndexSet(vec![i as u32])
    }

    pub fn new(items: impl IntoIterator<Item = usize>) -> Self {
        let mut v: Vec<u32> = items.into_iter().map(|i| i as u32).collect();
        v.sort_unstable();
        v.dedup();
        IndexSet(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().map(|&i| i as usize)
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&(i as u32)).is_ok()
    }

    pub fn max_element(&self) -> Option<usize> {
        self.0.last().map(|&i| i as usize)
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        IndexSet(out)
    }

    pub fn with(&self, i: usize) -> IndexSet {
        let mut v = self.0.clone();
        if let Err(pos) = v.binary_search(&(i as u32)) {
            v.insert(pos, i as u32);
        }
        IndexSet(v)
    }

    pub fn minus(&self, other: &IndexSet) -> IndexSet {
        IndexSet(
            self.0
                .iter()
                .copied()
                .filter(|&i| !other.contains(i as usize))
                .collect(),
        )
    }

    pub fn intersects(&self, other: &IndexSet) -> bool {
        self.0.iter().any(|&i| other.contains(i as usize))
    }

    pub fn is_subset(&self, other: &IndexSet) -> bool {
        self.0.iter().all(|&i| other.contains(i as usize))
    }

    /// All `2^|self|` subsets, by bitmask over the members.
    pub fn subsets(&self) -> impl Iterator<Item = IndexSet> + '_ {
        let k = self.0.len();
        assert!(k < 64, "subset enumeration of a {k}-element set");
        (0u64..(1u64 << k)).map(move |mask| {
            IndexSet(
                (0..k)
                    .filter(|&b| mask >> b & 1 == 1)
                    .map(|b| self.0[b])
                    .collect(),
            )
        })
    }

    /// Subsets of exactly `size` elements, lexicographic.
    pub fn subsets_of_size(&self, size: usize) -> Vec<IndexSet> {
        let members: Vec<usize> = self.iter().collect();
        combinations(&members, size)
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    /// Bitmask with bit `i` set for every member `i < 64`.
    pub fn to_mask(&self) -> u64 {
        self.0.iter().fold(0u64, |m, &i| m | (1u64 << i))
    }

    pub fn from_mask(mask: u64) -> IndexSet {
        IndexSet((0..64).filter(|&b| mask >> b & 1 == 1).collect())
    }
}

impl Ord for IndexSet {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for IndexSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Debug for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromIterator<usize> for IndexSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        IndexSet::new(iter)
    }
}

fn combinations(items: &[usize], size: usize) -> Vec<IndexSet> {
    let mut out = Vec::new();
    if size > items.len() {
        return out;
    }
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        out.push(IndexSet::new(idx.iter().map(|&i| items[i])));
        // Advance the rightmost index that can still move.
        let mut k = size;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            if idx[k] != k + items.len() - size {
                break;
            }
            if k == 0 {
                return out;
            }
        }
        idx[k] += 1;
        for j in k + 1..size {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Every subset of `{0, ..., n-1}` with at most `d` elements, in
/// [`IndexSet`] order.
pub fn sets_up_to(n: usize, d: usize) -> Vec<IndexSet> {
    let items: Vec<usize> = (0..n).collect();
    (0..=d.min(n))
        .flat_map(|k| combinations(&items, k))
        .collect()
}

/// `Σ_{k <= d} C(n, k)`, saturating.
pub fn count_sets_up_to(n: usize, d: usize) -> u128 {
    let mut total: u128 = 0;
    let mut binom: u128 = 1;
    for k in 0..=d.min(n) {
        total = total.saturating_add(binom);
        binom = binom.saturating_mul((n - k) as u128) / (k as u128 + 1);
    }
    total
}

//! Finite multisets over interned names.

use std::collections::{BTreeMap, HashMap};

use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// Interned names. The intern index is the canonical iteration order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Symbols {
    names: Vec<String>,
    lookup: HashMap<String, u32>,
}

impl Symbols {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut s = Self::new();
        for n in names {
            s.intern(n);
        }
        s
    }

    pub fn intern(&mut self, name: impl Into<String>) -> u32 {
        let name = name.into();
        if let Some(&i) = self.lookup.get(&name) {
            return i;
        }
        let i = self.names.len() as u32;
        self.lookup.insert(name.clone(), i);
        self.names.push(name);
        i
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.lookup.get(name).copied()
    }

    pub fn name(&self, sym: u32) -> &str {
        &self.names[sym as usize]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// Counts over interned names; absent names count zero.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Multiset {
    counts: BTreeMap<u32, u64>,
}

impl Multiset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I: IntoIterator<Item = (u32, u64)>>(pairs: I) -> Self {
        let mut m = Self::new();
        for (k, c) in pairs {
            m.add(k, c);
        }
        m
    }

    /// Builds a multiset from a dense count vector indexed by symbol.
    pub fn from_dense<T: Copy + Into<u64>>(counts: &[T]) -> Self {
        Self::from_pairs(counts.iter().enumerate().map(|(i, &c)| (i as u32, c.into())))
    }

    pub fn to_dense(&self, len: usize) -> Vec<u64> {
        let mut v = vec![0; len];
        for (&k, &c) in &self.counts {
            v[k as usize] = c;
        }
        v
    }

    pub fn get(&self, sym: u32) -> u64 {
        self.counts.get(&sym).copied().unwrap_or(0)
    }

    pub fn set(&mut self, sym: u32, count: u64) {
        if count == 0 {
            self.counts.remove(&sym);
        } else {
            self.counts.insert(sym, count);
        }
    }

    pub fn add(&mut self, sym: u32, count: u64) {
        if count > 0 {
            *self.counts.entry(sym).or_insert(0) += count;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Support in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.counts.iter().map(|(&k, &c)| (k, c))
    }

    /// Componentwise `self ≤ other`.
    pub fn le(&self, other: &Multiset) -> bool {
        self.iter().all(|(k, c)| other.get(k) >= c)
    }

    pub fn plus(&self, other: &Multiset) -> Multiset {
        let mut m = self.clone();
        for (k, c) in other.iter() {
            m.add(k, c);
        }
        m
    }

    /// Componentwise difference; fails when `other` is not contained in `self`.
    pub fn minus(&self, other: &Multiset) -> Result<Multiset> {
        let mut m = self.clone();
        for (k, c) in other.iter() {
            let have = m.get(k);
            if have < c {
                return Err(Error::Underflow { name: format!("#{k}"), have, need: c });
            }
            m.set(k, have - c);
        }
        Ok(m)
    }

    pub fn to_json(&self, symbols: &Symbols) -> Value {
        let mut map = Map::new();
        for (k, c) in self.iter() {
            map.insert(symbols.name(k).to_string(), Value::from(c));
        }
        Value::Object(map)
    }

    pub fn from_json(value: &Value, symbols: &Symbols) -> Result<Multiset> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Parse("multiset must be a JSON object".into()))?;
        let mut m = Multiset::new();
        for (name, count) in obj {
            let sym = symbols.get(name).ok_or_else(|| Error::UnknownName(name.clone()))?;
            let c = count
                .as_u64()
                .ok_or_else(|| Error::Parse(format!("count for `{name}` must be a natural number")))?;
            m.add(sym, c);
        }
        Ok(m)
    }
}

/// `base − removals + additions`, failing if `removals ≰ base`.
pub fn ms_apply(base: &Multiset, removals: &Multiset, additions: &Multiset) -> Result<Multiset> {
    Ok(base.minus(removals)?.plus(additions))
}

/// Calls `f` on every vector of `parts` naturals summing to `total`, in
/// lexicographically decreasing order of the first coordinate.
pub fn for_each_composition(total: u64, parts: usize, mut f: impl FnMut(&[u64])) {
    if parts == 0 {
        if total == 0 {
            f(&[]);
        }
        return;
    }
    let mut v = vec![0u64; parts];
    v[0] = total;
    loop {
        f(&v);
        // Move one unit from the rightmost nonzero non-final slot to its right
        // neighbour, collecting everything after it there.
        let last = parts - 1;
        let tail = v[last];
        v[last] = 0;
        let Some(j) = (0..last).rev().find(|&j| v[j] > 0) else {
            return;
        };
        v[j] -= 1;
        v[j + 1] = tail + 1;
    }
}

/// Number of compositions of `total` into `parts` naturals.
pub fn composition_count(total: u64, parts: usize) -> u128 {
    if parts == 0 {
        return u128::from(total == 0);
    }
    // C(total + parts - 1, parts - 1)
    let k = (parts - 1) as u128;
    let n = total as u128 + k;
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn syms() -> Symbols {
        Symbols::from_names(["x", "y"])
    }

    #[test]
    fn apply_moves_a_unit() {
        let s = syms();
        let (x, y) = (s.get("x").unwrap(), s.get("y").unwrap());
        let base = Multiset::from_pairs([(x, 2)]);
        let r = ms_apply(&base, &Multiset::from_pairs([(x, 1)]), &Multiset::from_pairs([(y, 1)])).unwrap();
        assert_eq!(r, Multiset::from_pairs([(x, 1), (y, 1)]));
    }

    #[test]
    fn apply_identity() {
        let base = Multiset::from_pairs([(0, 3), (1, 1)]);
        assert_eq!(ms_apply(&base, &Multiset::new(), &Multiset::new()).unwrap(), base);
    }

    #[test]
    fn apply_underflow() {
        let base = Multiset::from_pairs([(0, 1)]);
        let r = ms_apply(&base, &Multiset::from_pairs([(0, 1), (1, 1)]), &Multiset::new());
        assert!(matches!(r, Err(Error::Underflow { .. })));
    }

    #[test]
    fn zero_entries_are_absent() {
        let mut m = Multiset::from_pairs([(0, 0), (1, 2)]);
        m.set(1, 0);
        assert!(m.is_empty());
        assert_eq!(m.to_json(&syms()), serde_json::json!({}));
    }

    #[test]
    fn json_round_trip() {
        let s = syms();
        let m = Multiset::from_pairs([(1, 4)]);
        let j = m.to_json(&s);
        assert_eq!(j, serde_json::json!({"y": 4}));
        assert_eq!(Multiset::from_json(&j, &s).unwrap(), m);
    }

    #[test]
    fn compositions_enumerated() {
        let mut seen = Vec::new();
        for_each_composition(2, 2, |c| seen.push(c.to_vec()));
        assert_eq!(seen, vec![vec![2, 0], vec![1, 1], vec![0, 2]]);
        let mut n = 0;
        for_each_composition(6, 5, |c| {
            assert_eq!(c.iter().sum::<u64>(), 6);
            n += 1;
        });
        assert_eq!(n as u128, composition_count(6, 5));
        assert_eq!(composition_count(12, 9), 125_970);
    }
}

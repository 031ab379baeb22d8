use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};
use crate::logic::{Sym, Symbols};

type Index = HashMap<Vec<Sym>, Vec<u32>>;

#[derive(Debug, Clone, PartialEq)]
pub struct Stats {
    pub cardinality: usize,
    pub distinct: Vec<usize>,
}

/// A set of tuples with hash indexes built on first probe for each
/// combination of bound columns.
#[derive(Debug)]
pub struct Relation {
    name: String,
    arity: usize,
    tuples: Vec<Vec<Sym>>,
    stats: Stats,
    indexes: RwLock<HashMap<Vec<usize>, Arc<Index>>>,
}

impl Clone for Relation {
    fn clone(&self) -> Self {
        Relation {
            name: self.name.clone(),
            arity: self.arity,
            tuples: self.tuples.clone(),
            stats: self.stats.clone(),
            indexes: RwLock::new(HashMap::new()),
        }
    }
}

impl PartialEq for Relation {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.arity == other.arity && self.tuples == other.tuples
    }
}

impl Relation {
    pub fn new(name: impl Into<String>, arity: usize) -> Self {
        Relation {
            name: name.into(),
            arity,
            tuples: Vec::new(),
            stats: Stats { cardinality: 0, distinct: vec![0; arity] },
            indexes: RwLock::new(HashMap::new()),
        }
    }

    pub fn from_tuples(name: impl Into<String>, arity: usize, tuples: impl IntoIterator<Item = Vec<Sym>>) -> Self {
        let mut r = Relation::new(name, arity);
        r.load(tuples);
        r
    }

    /// Bulk insert. Refreshes statistics and drops indexes.
    pub fn load(&mut self, tuples: impl IntoIterator<Item = Vec<Sym>>) {
        for t in tuples {
            assert_eq!(t.len(), self.arity, "tuple arity mismatch in `{}`", self.name);
            self.tuples.push(t);
        }
        self.tuples.sort_unstable();
        self.tuples.dedup();
        let distinct = (0..self.arity).map(|c| self.tuples.iter().map(|t| t[c]).collect::<HashSet<_>>().len()).collect();
        self.stats = Stats { cardinality: self.tuples.len(), distinct };
        self.indexes.get_mut().expect("index lock poisoned").clear();
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// Tuples in sorted order.
    pub fn tuples(&self) -> &[Vec<Sym>] {
        &self.tuples
    }

    pub fn stats(&self) -> &Stats {
        &self.stats
    }

    pub fn contains(&self, t: &[Sym]) -> bool {
        self.tuples.binary_search_by(|x| x.as_slice().cmp(t)).is_ok()
    }

    fn index(&self, cols: &[usize]) -> Arc<Index> {
        if let Some(ix) = self.indexes.read().expect("index lock poisoned").get(cols) {
            return ix.clone();
        }
        let mut w = self.indexes.write().expect("index lock poisoned");
        w.entry(cols.to_vec())
            .or_insert_with(|| {
                let mut ix: Index = HashMap::new();
                for (i, t) in self.tuples.iter().enumerate() {
                    ix.entry(cols.iter().map(|&c| t[c]).collect()).or_default().push(i as u32);
                }
                Arc::new(ix)
            })
            .clone()
    }

    /// Calls `f` on every tuple whose columns `cols` equal `vals`.
    pub fn probe(&self, cols: &[usize], vals: &[Sym], mut f: impl FnMut(&[Sym])) {
        if cols.is_empty() {
            self.tuples.iter().for_each(|t| f(t));
            return;
        }
        if cols.len() == self.arity && cols.iter().enumerate().all(|(i, &c)| i == c) {
            if self.contains(vals) {
                f(vals);
            }
            return;
        }
        let ix = self.index(cols);
        if let Some(rows) = ix.get(vals) {
            for &r in rows {
                f(&self.tuples[r as usize]);
            }
        }
    }

    /// Tuples matching `vals` on `cols`.
    pub fn select(&self, cols: &[usize], vals: &[Sym]) -> Vec<Vec<Sym>> {
        let mut out = Vec::new();
        self.probe(cols, vals, |t| out.push(t.to_vec()));
        out
    }
}

/// Named relations over a shared constant table.
#[derive(Debug, Clone, Default)]
pub struct Database {
    pub symbols: Symbols,
    relations: BTreeMap<String, Relation>,
}

impl Database {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, rel: Relation) {
        self.relations.insert(rel.name().to_string(), rel);
    }

    pub fn get(&self, name: &str) -> Result<&Relation> {
        self.relations.get(name).ok_or_else(|| Error::UnknownRelation(name.to_string()))
    }

    pub fn relations(&self) -> impl Iterator<Item = &Relation> {
        self.relations.values()
    }

    /// Interns string tuples and loads them into relation `name`.
    pub fn load_strings<'a>(&mut self, name: &str, arity: usize, rows: impl IntoIterator<Item = Vec<&'a str>>) {
        let tuples: Vec<Vec<Sym>> = rows.into_iter().map(|r| r.iter().map(|s| self.symbols.intern(s)).collect()).collect();
        match self.relations.get_mut(name) {
            Some(rel) => rel.load(tuples),
            None => self.insert(Relation::from_tuples(name, arity, tuples)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_and_probe() {
        let r = Relation::from_tuples("r", 2, vec![vec![1, 2], vec![1, 3], vec![2, 3], vec![1, 2]]);
        assert_eq!(r.stats().cardinality, 3);
        assert_eq!(r.stats().distinct, vec![2, 2]);
        assert_eq!(r.select(&[0], &[1]), vec![vec![1, 2], vec![1, 3]]);
        assert_eq!(r.select(&[1], &[3]).len(), 2);
        assert_eq!(r.select(&[0, 1], &[2, 3]), vec![vec![2, 3]]);
        assert!(r.select(&[0], &[9]).is_empty());
    }

    #[test]
    fn load_refreshes_indexes() {
        let mut r = Relation::from_tuples("r", 1, vec![vec![1]]);
        assert_eq!(r.select(&[0], &[2]).len(), 0);
        r.load(vec![vec![2]]);
        assert_eq!(r.select(&[0], &[2]).len(), 1);
        assert_eq!(r.stats().cardinality, 2);
    }
}

//! Per-row hash accumulators keyed by column index.
//!
//! Both containers are open-addressed tables with power-of-two capacity,
//! linear probing and a maximum load factor of one half. A slot is live only
//! when its stamp matches the current generation, so `clear` is a single
//! counter bump and never returns memory.

use std::mem::size_of;

use crate::scalar::Scalar;

const MIN_CAPACITY: usize = 16;

#[inline]
fn slot_of(key: usize, mask: usize) -> usize {
    // Fibonacci hashing; the high bits carry the mixing.
    let h = (key as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    (h >> 32) as usize & mask
}

#[derive(Debug, Clone)]
struct OpenTable<V> {
    keys: Vec<usize>,
    vals: Vec<V>,
    stamps: Vec<u32>,
    generation: u32,
    blank: V,
    /// Live slots in insertion order.
    order: Vec<usize>,
    grow_events: usize,
}

impl<V: Copy> OpenTable<V> {
    fn new(blank: V) -> Self {
        Self {
            keys: Vec::new(),
            vals: Vec::new(),
            stamps: Vec::new(),
            generation: 1,
            blank,
            order: Vec::new(),
            grow_events: 0,
        }
    }

    #[inline]
    fn len(&self) -> usize {
        self.order.len()
    }

    #[inline]
    fn capacity(&self) -> usize {
        self.keys.len()
    }

    /// Returns the slot of `key` and whether it was newly inserted.
    #[inline]
    fn slot_for(&mut self, key: usize) -> (usize, bool) {
        if (self.len() + 1) * 2 > self.capacity() {
            self.grow();
        }
        let mask = self.capacity() - 1;
        let mut s = slot_of(key, mask);
        loop {
            if self.stamps[s] != self.generation {
                self.stamps[s] = self.generation;
                self.keys[s] = key;
                self.vals[s] = self.blank;
                self.order.push(s);
                return (s, true);
            }
            if self.keys[s] == key {
                return (s, false);
            }
            s = (s + 1) & mask;
        }
    }

    fn find(&self, key: usize) -> Option<usize> {
        if self.capacity() == 0 {
            return None;
        }
        let mask = self.capacity() - 1;
        let mut s = slot_of(key, mask);
        loop {
            if self.stamps[s] != self.generation {
                return None;
            }
            if self.keys[s] == key {
                return Some(s);
            }
            s = (s + 1) & mask;
        }
    }

    fn grow(&mut self) {
        let new_cap = (self.capacity() * 2).max(MIN_CAPACITY);
        let old_keys = std::mem::replace(&mut self.keys, vec![0; new_cap]);
        let old_vals = std::mem::replace(&mut self.vals, vec![self.blank; new_cap]);
        self.stamps = vec![0; new_cap];
        self.generation = 1;
        let old_order = std::mem::take(&mut self.order);
        self.order.reserve(new_cap / 2);
        let mask = new_cap - 1;
        for &old in &old_order {
            let mut s = slot_of(old_keys[old], mask);
            while self.stamps[s] == self.generation {
                s = (s + 1) & mask;
            }
            self.stamps[s] = self.generation;
            self.keys[s] = old_keys[old];
            self.vals[s] = old_vals[old];
            self.order.push(s);
        }
        self.grow_events += 1;
    }

    fn clear(&mut self) {
        self.order.clear();
        if self.generation == u32::MAX {
            self.stamps.iter_mut().for_each(|s| *s = 0);
            self.generation = 1;
        } else {
            self.generation += 1;
        }
    }

    fn sort_by_key(&mut self) {
        let keys = &self.keys;
        self.order.sort_unstable_by_key(|&s| keys[s]);
    }

    fn heap_bytes(&self) -> usize {
        self.keys.capacity() * size_of::<usize>()
            + self.vals.capacity() * size_of::<V>()
            + self.stamps.capacity() * size_of::<u32>()
            + self.order.capacity() * size_of::<usize>()
    }
}

/// Hash set of column indices.
#[derive(Debug, Clone)]
pub struct RowSet {
    table: OpenTable<()>,
}

impl Default for RowSet {
    fn default() -> Self {
        Self::new()
    }
}

impl RowSet {
    pub fn new() -> Self {
        Self {
            table: OpenTable::new(()),
        }
    }

    /// Inserts `j`; returns true if it was not already present.
    #[inline]
    pub fn insert(&mut self, j: usize) -> bool {
        self.table.slot_for(j).1
    }

    pub fn contains(&self, j: usize) -> bool {
        self.table.find(j).is_some()
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.len() == 0
    }

    /// Empties the set, keeping its allocation.
    pub fn clear(&mut self) {
        self.table.clear();
    }

    pub fn capacity(&self) -> usize {
        self.table.capacity()
    }

    /// Number of times the table has reallocated.
    pub fn grow_events(&self) -> usize {
        self.table.grow_events
    }

    pub fn heap_bytes(&self) -> usize {
        self.table.heap_bytes()
    }

    /// Members in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.table.order.iter().map(|&s| self.table.keys[s])
    }

    /// Members in increasing order.
    pub fn sorted(&mut self) -> impl Iterator<Item = usize> + '_ {
        self.table.sort_by_key();
        self.iter()
    }
}

/// Hash map from column index to an accumulated value.
#[derive(Debug, Clone)]
pub struct RowAccumulator<T> {
    table: OpenTable<T>,
}

impl<T: Scalar> Default for RowAccumulator<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> RowAccumulator<T> {
    pub fn new() -> Self {
        Self {
            table: OpenTable::new(T::zero()),
        }
    }

    /// `acc[j] += v`, inserting `v` when `j` is new.
    #[inline]
    pub fn add(&mut self, j: usize, v: T) {
        let (s, fresh) = self.table.slot_for(j);
        if fresh {
            self.table.vals[s] = v;
        } else {
            self.table.vals[s] += v;
        }
    }

    pub fn get(&self, j: usize) -> Option<T> {
        self.table.find(j).map(|s| self.table.vals[s])
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.len() == 0
    }

    pub fn clear(&mut self) {
        self.table.clear();
    }

    pub fn capacity(&self) -> usize {
        self.table.capacity()
    }

    pub fn grow_events(&self) -> usize {
        self.table.grow_events
    }

    pub fn heap_bytes(&self) -> usize {
        self.table.heap_bytes()
    }

    /// Entries in increasing column order; the accumulator is cleared when
    /// the iterator is dropped.
    pub fn drain_sorted(&mut self) -> DrainSorted<'_, T> {
        self.table.sort_by_key();
        DrainSorted {
            table: &mut self.table,
            pos: 0,
        }
    }
}

pub struct DrainSorted<'a, T: Scalar> {
    table: &'a mut OpenTable<T>,
    pos: usize,
}

impl<T: Scalar> Iterator for DrainSorted<'_, T> {
    type Item = (usize, T);

    fn next(&mut self) -> Option<Self::Item> {
        let s = *self.table.order.get(self.pos)?;
        self.pos += 1;
        Some((self.table.keys[s], self.table.vals[s]))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.table.order.len() - self.pos;
        (n, Some(n))
    }
}

impl<T: Scalar> ExactSizeIterator for DrainSorted<'_, T> {}

impl<T: Scalar> Drop for DrainSorted<'_, T> {
    fn drop(&mut self) {
        self.table.clear();
    }
}
